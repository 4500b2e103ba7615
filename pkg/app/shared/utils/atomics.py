"""
原子引用
比较并交换按对象身份比较，配合“运行期间不回收”的策略避免 ABA
"""

import threading
from typing import Generic, Optional, TypeVar

T = TypeVar("T")


class AtomicRef(Generic[T]):
    """可比较并交换的引用单元"""

    __slots__ = ("_value", "_lock")

    def __init__(self, value: Optional[T] = None):
        self._value = value
        self._lock = threading.Lock()

    def get(self) -> Optional[T]:
        # 单个引用的读写本身是原子的
        return self._value

    def set(self, value: Optional[T]) -> None:
        self._value = value

    def compare_and_set(self, expect: Optional[T], update: Optional[T]) -> bool:
        """当前值与 expect 是同一对象时写入 update"""
        with self._lock:
            if self._value is expect:
                self._value = update
                return True
            return False

    def __repr__(self) -> str:
        return f"AtomicRef({self._value!r})"
