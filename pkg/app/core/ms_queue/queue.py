"""
Michael–Scott 非阻塞队列
按原始描述实现、不做优化，作为实验基线。
运行期间不回收节点，CAS 按身份比较，因此省略了原描述中的计数指针。
"""

from typing import Any, List, Optional

from app.core.runtime.probe import Probe
from app.core.runtime.process import ProcessHandle
from app.shared.models import BOTTOM, Outcome
from app.shared.utils.atomics import AtomicRef


class MsNode:
    """链表节点，next 只会从 None 变为非 None 一次"""

    __slots__ = ("value", "next")

    def __init__(self, value: Any = None):
        self.value = value
        self.next: AtomicRef["MsNode"] = AtomicRef(None)

    def __repr__(self) -> str:
        return f"MsNode({self.value!r})"


class MsQueue:
    """带哑节点的 MS 队列，head 可经 next 链到达 tail，tail 最多落后一个节点"""

    name = "ms"

    def __init__(self, probe: Optional[Probe] = None):
        dummy = MsNode()
        self._head: AtomicRef[MsNode] = AtomicRef(dummy)
        self._tail: AtomicRef[MsNode] = AtomicRef(dummy)
        self.probe = probe

    @property
    def head(self) -> MsNode:
        return self._head.get()

    @property
    def tail(self) -> MsNode:
        return self._tail.get()

    def snapshot(self) -> List[Any]:
        """静止时的队列内容"""
        values = []
        node = self._head.get().next.get()
        while node is not None:
            values.append(node.value)
            node = node.next.get()
        return values

    def enqueue(self, value: Any, proc: Optional[ProcessHandle] = None) -> Outcome:
        proc = proc or ProcessHandle.detached()
        proc.current_op = "enqueue"
        node = MsNode(value)
        while True:
            proc.access("tail.read")
            tail = self._tail.get()
            proc.access("next.read")
            successor = tail.next.get()
            proc.access("tail.read")
            if tail is not self._tail.get():
                continue
            if successor is None:
                proc.access("next.cas")
                linked = tail.next.compare_and_set(None, node)
                self._count(proc, "next", linked)
                if linked:
                    break
            else:
                # 尾指针落后，替前一个入队者推进
                self._cas_tail(tail, successor, proc)
        self._cas_tail(tail, node, proc)
        return Outcome.DONE

    def dequeue(self, proc: Optional[ProcessHandle] = None) -> Any:
        proc = proc or ProcessHandle.detached()
        proc.current_op = "dequeue"
        while True:
            proc.access("head.read")
            head = self._head.get()
            proc.access("tail.read")
            tail = self._tail.get()
            proc.access("next.read")
            successor = head.next.get()
            proc.access("head.read")
            if head is not self._head.get():
                continue
            if head is tail:
                if successor is None:
                    return BOTTOM
                self._cas_tail(tail, successor, proc)
            else:
                # 先读值再 CAS，否则值可能被其他出队者的后续操作覆盖
                proc.access("value.read")
                value = successor.value
                proc.access("head.cas")
                moved = self._head.compare_and_set(head, successor)
                self._count(proc, "head", moved)
                if moved:
                    return value

    def _cas_tail(self, expect: MsNode, node: MsNode, proc: ProcessHandle) -> None:
        proc.access("tail.cas")
        self._count(proc, "tail", self._tail.compare_and_set(expect, node))

    def _count(self, proc: ProcessHandle, target: str, ok: bool) -> None:
        if self.probe is not None:
            self.probe.on_cas(proc, target, ok)


def ms_new(probe: Optional[Probe] = None) -> MsQueue:
    """创建只含哑节点的空 MS 队列"""
    return MsQueue(probe=probe)
