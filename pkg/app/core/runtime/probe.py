"""
检测探针
记录 CAS 结果、节点追加、尾指针设置、结果单元写入和线性化点，
在运行中检查单次追加、单次安装、值相等等不变量。基准测试不挂探针。
"""

import itertools
import threading
from collections import Counter
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Tuple

from app.core.runtime.process import ProcessHandle
from app.shared.exceptions import InvariantViolation
from app.shared.models import BOTTOM


class LinPoint(NamedTuple):
    """线性化点事件"""
    seq: int
    kind: str  # enqueue / dequeue
    value: Any


class Probe:
    """运行期检测"""

    def __init__(self, clock: Optional[Callable[[], int]] = None):
        self._lock = threading.Lock()
        self._clock = clock or itertools.count().__next__
        self.cas_counts: Counter = Counter()
        self.append_counts: Dict[int, int] = {}
        self.tail_sets: Dict[int, int] = {}
        self.cell_installs: Dict[int, int] = {}
        self.cell_values: Dict[int, Any] = {}
        self.deliveries = 0
        self.lin_points: List[LinPoint] = []
        self.violations: List[str] = []
        # 运行期间不回收，保留引用以便事后检查单调性，也避免 id 被复用
        self._threaded: Dict[int, Any] = {}
        self._links: List[Tuple[Any, Any]] = []
        self._cells: List[Any] = []

    # ---------- 通用 ----------

    def on_cas(self, proc: ProcessHandle, target: str, ok: bool) -> None:
        with self._lock:
            self.cas_counts[(proc.current_op, target, ok)] += 1

    def cas_total(self, op: Optional[str] = None, target: Optional[str] = None,
                  ok: Optional[bool] = None) -> int:
        """按操作、目标和结果过滤后的 CAS 次数"""
        return sum(
            n for (o, t, s), n in self.cas_counts.items()
            if (op is None or o == op) and (target is None or t == target) and (ok is None or s == ok)
        )

    def _violate(self, message: str) -> None:
        self.violations.append(message)

    # ---------- 入队侧 ----------

    def on_append(self, pred: Any, node: Any) -> None:
        """node 通过 pred.next 的 CAS 成功挂入链表"""
        with self._lock:
            count = self.append_counts.get(id(node), 0) + 1
            self.append_counts[id(node)] = count
            self._links.append((pred, node))
            if count > 1:
                self._violate(f"节点 {node!r} 被追加了 {count} 次")

    def on_threaded(self, node: Any) -> None:
        with self._lock:
            self._threaded[id(node)] = node

    def on_tail_set(self, node: Any) -> None:
        """尾指针 CAS 成功指向 node"""
        with self._lock:
            if not node.threaded:
                self._violate(f"尾指针指向了 flag=0 的节点 {node!r}")
            count = self.tail_sets.get(id(node), 0) + 1
            self.tail_sets[id(node)] = count
            if count > 1:
                self._violate(f"尾指针 {count} 次指向节点 {node!r}")
            else:
                self.lin_points.append(LinPoint(self._clock(), "enqueue", node.value))

    # ---------- 出队 / 通用构造侧 ----------

    def on_install(self, cell: Any, value: Any, kind: Optional[str] = "dequeue") -> None:
        """结果单元随一次成功的 CAS 被安装到共享记录中"""
        with self._lock:
            count = self.cell_installs.get(id(cell), 0) + 1
            if count == 1 and id(cell) not in self.cell_values:
                self._cells.append(cell)
            self.cell_installs[id(cell)] = count
            if count > 1:
                self._violate(f"结果单元 {cell!r} 被安装了 {count} 次")
            if kind is not None and value is not BOTTOM:
                self.lin_points.append(LinPoint(self._clock(), kind, value))

    def on_cell_write(self, proc: ProcessHandle, cell: Any, value: Any) -> None:
        """写入结果单元前调用"""
        if value is None:
            return
        with self._lock:
            key = id(cell)
            if key in self.cell_values:
                if self.cell_values[key] != value:
                    self._violate(
                        f"结果单元 {cell!r} 收到不同的值: {self.cell_values[key]!r} 与 {value!r}"
                    )
            else:
                self.cell_values[key] = value
                if key not in self.cell_installs:
                    self._cells.append(cell)
                if cell.owner is not None and cell.owner != proc.pid:
                    self.deliveries += 1

    # ---------- 事后检查 ----------

    def monotonicity_violations(self) -> List[str]:
        """已置位的 flag 不能回退，已建立的 next 链接不能改变"""
        problems = []
        for node in self._threaded.values():
            if not node.threaded:
                problems.append(f"节点 {node!r} 的 flag 从 1 回退为 0")
        for pred, node in self._links:
            if pred.next.get() is not node:
                problems.append(f"节点 {pred!r} 的 next 链接被改写")
        return problems

    def assert_clean(self) -> None:
        problems = self.violations + self.monotonicity_violations()
        if problems:
            raise InvariantViolation(problems[0], violations=problems)
