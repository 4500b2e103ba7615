"""
DNB-2 共享队列
基于 CAS 的链表队列，入队者和出队者各有一个公告寄存器实现轻量帮助：
每个操作先利他地尝试一次帮助公告中的请求，然后反复尝试自己的操作，
每次失败都把自己的请求覆盖写入公告寄存器。
入队者从不帮助出队者，反之亦然。
"""

from typing import Any, List, Optional

from app.core.dnb_queue.models import RESERVED, HeadDescriptor, QueueNode, ResultCell
from app.core.runtime.probe import Probe
from app.core.runtime.process import ProcessHandle
from app.shared.models import BOTTOM, Outcome
from app.shared.utils.atomics import AtomicRef


class DnbQueue:
    """
    DNB-2 队列

    整体无锁；对每种操作类型满足 2-非阻塞：某个操作无法完成，
    仅当至少两个其他进程无限次完成同类操作。
    运行期间不回收节点、结果单元和描述符。
    """

    name = "dnb2"

    def __init__(self, probe: Optional[Probe] = None):
        self.init_node = QueueNode(RESERVED, threaded=True)
        self.init_cell = ResultCell(initial=RESERVED)
        self._tail: AtomicRef[QueueNode] = AtomicRef(self.init_node)
        self._head: AtomicRef[HeadDescriptor] = AtomicRef(
            HeadDescriptor(self.init_node, RESERVED, self.init_cell)
        )
        # 公告寄存器只读写，不做 CAS，后写者覆盖前者
        self._enq_announce: AtomicRef[QueueNode] = AtomicRef(self.init_node)
        self._deq_announce: AtomicRef[ResultCell] = AtomicRef(self.init_cell)
        self.probe = probe

    # ---------- 只读视图 ----------

    @property
    def tail(self) -> QueueNode:
        return self._tail.get()

    @property
    def head(self) -> HeadDescriptor:
        return self._head.get()

    @property
    def enq_announce(self) -> QueueNode:
        return self._enq_announce.get()

    @property
    def deq_announce(self) -> ResultCell:
        return self._deq_announce.get()

    def is_empty_state(self) -> bool:
        """head.ptr 与 tail 指向同一节点时队列为空"""
        return self._head.get().ptr is self._tail.get()

    def snapshot(self) -> List[Any]:
        """队列状态：head.ptr 之后直到 tail（含）的节点值，仅在静止时有意义"""
        values = []
        node = self._head.get().ptr
        tail = self._tail.get()
        seen = {id(node)}
        while node is not tail:
            node = node.next.get()
            if node is None or id(node) in seen:
                break
            seen.add(id(node))
            values.append(node.value)
        return values

    # ---------- 入队 ----------

    def enqueue(self, value: Any, proc: Optional[ProcessHandle] = None) -> Outcome:
        """
        入队

        Args:
            value: 载荷
            proc: 调用进程的句柄

        Returns:
            Outcome.DONE
        """
        proc = proc or ProcessHandle.detached()
        proc.current_op = "enqueue"

        # 利他阶段：尝试一次帮助公告中的节点
        proc.access("announce_e.read")
        announced = self._enq_announce.get()
        self.try_to_enqueue(announced, proc)

        # 自私阶段
        node = QueueNode(value)
        while self.try_to_enqueue(node, proc) is Outcome.FAILED:
            proc.access("announce_e.write")
            self._enq_announce.set(node)
        return Outcome.DONE

    def try_to_enqueue(self, node: QueueNode, proc: Optional[ProcessHandle] = None) -> Outcome:
        """
        尝试把 node 追加到链表

        Returns:
            DONE：node 已在链表中且 flag=1；FAILED：另一个并发追加获胜，
            返回前已把获胜节点完整并入（置 flag、推进尾指针）
        """
        proc = proc or ProcessHandle.detached()
        proc.access("tail.read")
        tail = self._tail.get()
        proc.access("next.read")
        successor = tail.next.get()

        if self._is_threaded(node, proc):
            # 节点已挂入：刷新尾部，把落后的尾指针向前推一步
            proc.access("tail.read")
            tail = self._tail.get()
            proc.access("next.read")
            successor = tail.next.get()
            if successor is not None:
                self._mark_threaded(successor, proc)
                self._swing_tail(tail, successor, proc)
            return Outcome.DONE

        if successor is not None:
            self._mark_threaded(successor, proc)
            self._swing_tail(tail, successor, proc)
        else:
            proc.access("next.cas")
            appended = tail.next.compare_and_set(None, node)
            if self.probe is not None:
                self.probe.on_cas(proc, "next", appended)
                if appended:
                    self.probe.on_append(tail, node)
            if appended:
                self._mark_threaded(node, proc)
                self._swing_tail(tail, node, proc)
                return Outcome.DONE
        return Outcome.FAILED

    def _is_threaded(self, node: QueueNode, proc: ProcessHandle) -> bool:
        proc.access("flag.read")
        return node.threaded

    def _mark_threaded(self, node: QueueNode, proc: ProcessHandle) -> None:
        proc.access("flag.write")
        node.threaded = True
        if self.probe is not None:
            self.probe.on_threaded(node)

    def _swing_tail(self, expect: QueueNode, node: QueueNode, proc: ProcessHandle) -> None:
        proc.access("tail.cas")
        swung = self._tail.compare_and_set(expect, node)
        if self.probe is not None:
            self.probe.on_cas(proc, "tail", swung)
            if swung:
                self.probe.on_tail_set(node)

    # ---------- 出队 ----------

    def dequeue(self, proc: Optional[ProcessHandle] = None) -> Any:
        """
        出队

        Returns:
            队首值；队列为空时返回 ⊥
        """
        proc = proc or ProcessHandle.detached()
        proc.current_op = "dequeue"

        # 利他阶段：公告的单元尚未得到结果时帮助一次
        proc.access("announce_d.read")
        announced = self._deq_announce.get()
        proc.access("cell.read")
        if announced.read() is None:
            self.try_to_dequeue(announced, proc)

        # 自私阶段
        cell = ResultCell(owner=proc.pid)
        while True:
            result = self.try_to_dequeue(cell, proc)
            if result is not Outcome.FAILED:
                return result
            proc.access("announce_d.write")
            self._deq_announce.set(cell)

    def try_to_dequeue(self, cell: ResultCell, proc: Optional[ProcessHandle] = None) -> Any:
        """
        代表 cell 的预留者尝试出队一次

        先把当前描述符中的值交付给上一个出队者的结果单元；
        cell 已被帮助时直接返回其内容，否则通过头部 CAS 出队。

        Returns:
            出队的值、⊥，或 Outcome.FAILED（另一个出队者的 CAS 获胜）
        """
        proc = proc or ProcessHandle.detached()
        proc.access("head.read")
        head = self._head.get()
        proc.access("tail.read")
        tail = self._tail.get()

        proc.access("cell.write")
        if self.probe is not None:
            self.probe.on_cell_write(proc, head.addr, head.value)
        head.addr.write(head.value)

        proc.access("cell.read")
        helped = cell.read()
        if helped is not None:
            return helped

        if head.ptr is tail:
            return self._install(head, HeadDescriptor(head.ptr, BOTTOM, cell), proc)

        proc.access("next.read")
        successor = head.ptr.next.get()
        proc.access("value.read")
        value = successor.value
        return self._install(head, HeadDescriptor(successor, value, cell), proc)

    def _install(self, expect: HeadDescriptor, update: HeadDescriptor, proc: ProcessHandle) -> Any:
        proc.access("head.cas")
        installed = self._head.compare_and_set(expect, update)
        if self.probe is not None:
            self.probe.on_cas(proc, "head", installed)
            if installed:
                self.probe.on_install(update.addr, update.value)
        return update.value if installed else Outcome.FAILED


def new_queue(probe: Optional[Probe] = None) -> DnbQueue:
    """创建空的 DNB-2 队列"""
    return DnbQueue(probe=probe)
