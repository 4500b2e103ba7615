"""
通用 2-非阻塞构造
输入为顺序规格 apply(call, state)。状态记录整体通过 CAS 替换；
帮助机制与 DNB-2 队列相同：利他地帮助一次公告中的操作，
然后反复尝试自己的操作并在失败时覆盖公告。
"""

from typing import Any, Hashable, Optional

from app.core.dnb_queue.models import RESERVED, ResultCell
from app.core.runtime.probe import Probe
from app.core.runtime.process import ProcessHandle
from app.core.universal.models import AnnRecord, StateRecord
from app.shared.models import Outcome
from app.shared.specs import Call, SeqSpec
from app.shared.utils.atomics import AtomicRef


class Universal2NB:
    """
    由顺序规格构造的 2-非阻塞共享对象

    apply 必须是纯函数：状态在发布后会被其他帮助者并发读取。
    """

    def __init__(self, spec: SeqSpec, initial: Hashable = None, probe: Optional[Probe] = None):
        self.spec = spec
        # 初始单元非空，公告中的占位请求视为已满足
        self.init_cell = ResultCell(initial=RESERVED)
        state = spec.initial() if initial is None else initial
        self._record: AtomicRef[StateRecord] = AtomicRef(StateRecord(state, None, self.init_cell))
        self._announce: AtomicRef[AnnRecord] = AtomicRef(AnnRecord(None, self.init_cell))
        self.probe = probe

    @property
    def name(self) -> str:
        return f"universal-{self.spec.name}"

    @property
    def state(self) -> Hashable:
        return self._record.get().state

    @property
    def record(self) -> StateRecord:
        return self._record.get()

    @property
    def announcement(self) -> AnnRecord:
        return self._announce.get()

    def invoke(self, call: Call, proc: Optional[ProcessHandle] = None) -> Any:
        """
        执行一次操作

        Returns:
            该操作在对象状态上恰好生效一次时的响应
        """
        proc = proc or ProcessHandle.detached()
        proc.current_op = call.op

        proc.access("announce.read")
        announced = self._announce.get()
        # 占位公告的单元非空，try_to_do 只做交付后即返回
        self.try_to_do(announced.call, announced.addr, proc)

        cell = ResultCell(owner=proc.pid)
        while True:
            result = self.try_to_do(call, cell, proc)
            if result is not Outcome.FAILED:
                return result
            proc.access("announce.write")
            self._announce.set(AnnRecord(call, cell))

    def try_to_do(self, call: Call, cell: ResultCell, proc: Optional[ProcessHandle] = None) -> Any:
        """
        代表 cell 的预留者尝试执行 call 一次

        Returns:
            响应，或 Outcome.FAILED（另一个操作的 CAS 获胜，本次对状态无影响）
        """
        proc = proc or ProcessHandle.detached()
        proc.access("record.read")
        record = self._record.get()

        # 交付上一个操作的响应；初始记录没有响应，跳过以保持初始单元非空
        if record.response is not None:
            proc.access("cell.write")
            if self.probe is not None:
                self.probe.on_cell_write(proc, record.addr, record.response)
            record.addr.write(record.response)

        proc.access("cell.read")
        helped = cell.read()
        if helped is not None:
            return helped

        state, response = self.spec.apply(call, record.state)
        proc.access("record.cas")
        installed = self._record.compare_and_set(record, StateRecord(state, response, cell))
        if self.probe is not None:
            self.probe.on_cas(proc, "record", installed)
            if installed:
                self.probe.on_install(cell, response, kind=None)
        return response if installed else Outcome.FAILED


def u2nb_new(spec: SeqSpec, initial: Hashable = None, probe: Optional[Probe] = None) -> Universal2NB:
    """以初始状态创建通用对象；initial 为 None 时取规格的初始状态"""
    return Universal2NB(spec, initial, probe)
