"""
顺序规格
以纯函数 apply(call, state) -> (state', response) 描述对象类型，
供通用构造和线性一致性检查共用。状态必须不可变且可哈希。
"""

from abc import ABC, abstractmethod
from typing import Any, Hashable, NamedTuple, Tuple

from app.config import settings
from app.shared.models import BOTTOM, Outcome


class Call(NamedTuple):
    """操作描述"""
    op: str
    arg: Any = None


class SeqSpec(ABC):
    """顺序规格基类"""

    name: str = "abstract"

    @abstractmethod
    def initial(self) -> Hashable:
        """初始状态"""

    @abstractmethod
    def apply(self, call: Call, state: Hashable) -> Tuple[Hashable, Any]:
        """
        在 state 上执行 call

        Returns:
            (新状态, 响应)；响应不能为 None
        """

    def _unknown(self, call: Call):
        raise ValueError(f"{self.name} 规格不支持操作: {call.op}")


class QueueSpec(SeqSpec):
    """先进先出队列，状态为元组"""

    name = "queue"

    def initial(self) -> Tuple:
        return ()

    def apply(self, call: Call, state: Tuple) -> Tuple[Tuple, Any]:
        if call.op == "enqueue":
            return state + (call.arg,), Outcome.DONE
        if call.op == "dequeue":
            if not state:
                return state, BOTTOM
            return state[1:], state[0]
        self._unknown(call)


class CounterSpec(SeqSpec):
    """计数器：inc 返回自增后的值，add(n) 同理，get 读取"""

    name = "counter"

    def initial(self) -> int:
        return 0

    def apply(self, call: Call, state: int) -> Tuple[int, Any]:
        if call.op == "inc":
            return state + 1, state + 1
        if call.op == "add":
            return state + call.arg, state + call.arg
        if call.op == "get":
            return state, state
        self._unknown(call)


class RegisterSpec(SeqSpec):
    """取值范围有限的读写寄存器"""

    name = "register"

    def __init__(self, domain: int = None):
        self.domain = domain or settings.register_domain

    def initial(self) -> int:
        return 0

    def apply(self, call: Call, state: int) -> Tuple[int, Any]:
        if call.op == "write":
            if not 0 <= call.arg < self.domain:
                raise ValueError(f"写入值 {call.arg} 超出范围 [0, {self.domain})")
            return call.arg, Outcome.DONE
        if call.op == "read":
            return state, state
        self._unknown(call)


SPECS = {
    "queue": QueueSpec,
    "counter": CounterSpec,
    "register": RegisterSpec,
}


def spec_by_name(name: str) -> SeqSpec:
    """按名称构造规格"""
    try:
        return SPECS[name]()
    except KeyError:
        raise ValueError(f"未知规格: {name}，可选: {', '.join(SPECS)}")
