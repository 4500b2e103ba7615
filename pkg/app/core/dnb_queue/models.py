"""
DNB-2 队列的共享记录
"""

from typing import Any, NamedTuple, Optional

from app.shared.utils.atomics import AtomicRef


class _Reserved:
    """初始节点和初始结果单元中的占位值，非 None 且不等于任何载荷"""

    def __repr__(self) -> str:
        return "<reserved>"


RESERVED = _Reserved()


class QueueNode:
    """
    链表节点

    next 只会从 None 变为非 None 一次；threaded（flag）只会从 False 变为 True 一次。
    """

    __slots__ = ("value", "next", "threaded")

    def __init__(self, value: Any, threaded: bool = False):
        self.value = value
        self.next: AtomicRef["QueueNode"] = AtomicRef(None)
        self.threaded = threaded

    def __repr__(self) -> str:
        return f"QueueNode({self.value!r}, threaded={self.threaded})"


class ResultCell:
    """
    结果单元：帮助者通过它把出队结果交给请求者

    None 表示尚未被帮助，⊥ 表示帮助时队列为空。
    """

    __slots__ = ("_slot", "owner")

    def __init__(self, owner: Optional[int] = None, initial: Any = None):
        self._slot = initial
        self.owner = owner

    def read(self) -> Any:
        return self._slot

    def write(self, value: Any) -> None:
        self._slot = value

    def __repr__(self) -> str:
        return f"ResultCell(owner={self.owner}, slot={self._slot!r})"


class HeadDescriptor(NamedTuple):
    """
    头部描述符 (ptr, value, addr)，发布后不可变

    共享头部整体通过 CAS 替换，比较的是描述符对象的身份。
    """
    ptr: QueueNode  # 最近一次出队的节点
    value: Any  # 最近一次出队的值，或 ⊥
    addr: ResultCell  # 最近一次出队者预留的结果单元
