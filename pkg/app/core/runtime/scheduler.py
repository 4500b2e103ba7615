"""
确定性步进调度器
每个进程运行在独立线程中，在每次共享访问前挂起；
调度器每次只放行一个进程执行一次访问，因此交错完全由调度决策决定。
"""

import threading
import time
from typing import Any, Callable, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
from loguru import logger

from app.config import settings
from app.core.runtime.process import ProcessHandle
from app.shared.exceptions import SchedulerAbort, SchedulerError, StepBudgetExceeded
from app.shared.models import Role


class ScheduledProcess:
    """调度器管理的一个进程"""

    def __init__(self, pid: int, handle: ProcessHandle):
        self.pid = pid
        self.handle = handle
        self.thread: Optional[threading.Thread] = None
        self.result: Any = None
        self.error: Optional[BaseException] = None
        self.aborted = False
        self.done = False
        self._error_reported = False


class StepScheduler:
    """
    步进调度器，同时实现 Pacer 协议

    用法:
        with StepScheduler() as sched:
            p = sched.spawn(0, lambda h: queue.enqueue(1, h))
            sched.run_until(0, "next.cas")
            ...
    """

    def __init__(self, settle_timeout: float = 10.0, record_trace: bool = False):
        self._cond = threading.Condition()
        self._procs: Dict[int, ScheduledProcess] = {}
        self._parked: Dict[int, str] = {}
        self._running: Set[int] = set()
        self._grant: Optional[int] = None
        self._aborted = False
        self._settle_timeout = settle_timeout
        self._record_trace = record_trace
        self.trace: List[Tuple[int, str]] = []
        self.steps = 0

    # ---------- Pacer 协议 ----------

    def before_access(self, handle: ProcessHandle, label: str) -> None:
        pid = handle.pid
        with self._cond:
            if self._aborted:
                raise SchedulerAbort()
            self._parked[pid] = label
            self._running.discard(pid)
            self._cond.notify_all()
            while self._grant != pid:
                if self._aborted:
                    raise SchedulerAbort()
                self._cond.wait()
            self._grant = None

    # ---------- 进程管理 ----------

    def spawn(self, pid: int, body: Callable[[ProcessHandle], Any],
              role: Role = Role.GENERIC) -> ScheduledProcess:
        """启动进程并等待它停在第一次共享访问前（或直接结束）"""
        if pid in self._procs:
            raise SchedulerError(f"进程 {pid} 已存在")
        handle = ProcessHandle(pid=pid, role=role, pacer=self)
        proc = ScheduledProcess(pid, handle)

        def target():
            try:
                proc.result = body(handle)
            except SchedulerAbort:
                proc.aborted = True
            except BaseException as e:
                proc.error = e
                logger.debug(f"调度进程 {pid} 异常退出: {e!r}")
            finally:
                with self._cond:
                    proc.done = True
                    self._running.discard(pid)
                    self._parked.pop(pid, None)
                    self._cond.notify_all()

        thread = threading.Thread(
            target=target, name=f"{settings.worker_name_prefix}-sched-{pid}", daemon=True
        )
        proc.thread = thread
        with self._cond:
            self._procs[pid] = proc
            self._running.add(pid)
        thread.start()
        self._settle()
        return proc

    def process(self, pid: int) -> ScheduledProcess:
        return self._procs[pid]

    def label_of(self, pid: int) -> Optional[str]:
        """进程即将执行的访问标签；未挂起时为 None"""
        with self._cond:
            return self._parked.get(pid)

    def is_done(self, pid: int) -> bool:
        return self._procs[pid].done

    @property
    def parked(self) -> List[int]:
        with self._cond:
            return sorted(self._parked)

    # ---------- 放行 ----------

    def step(self, pid: int) -> str:
        """放行 pid 执行一次共享访问，返回该访问的标签"""
        with self._cond:
            if pid not in self._parked:
                raise SchedulerError(f"进程 {pid} 没有挂起在访问点")
            label = self._parked.pop(pid)
            self._running.add(pid)
            self._grant = pid
            self.steps += 1
            if self._record_trace:
                self.trace.append((pid, label))
            self._cond.notify_all()
        self._settle()
        return label

    def run_until(self, pid: int, label: str, max_steps: int = 10_000) -> int:
        """单独推进 pid，直到它停在 label 访问之前"""
        taken = 0
        while self.label_of(pid) != label:
            if self.is_done(pid):
                raise SchedulerError(f"进程 {pid} 已结束，未到达 {label}")
            if taken >= max_steps:
                raise StepBudgetExceeded(max_steps, f"进程 {pid} 未到达 {label}")
            self.step(pid)
            taken += 1
        return taken

    def run_past(self, pid: int, label: str, max_steps: int = 10_000) -> int:
        """推进 pid 直到它完成 label 访问"""
        taken = self.run_until(pid, label, max_steps)
        self.step(pid)
        return taken + 1

    def finish(self, pid: int, max_steps: int = 100_000) -> Any:
        """单独推进 pid 直到其主体结束，返回结果"""
        taken = 0
        while not self.is_done(pid):
            if taken >= max_steps:
                raise StepBudgetExceeded(max_steps, f"进程 {pid} 未结束")
            self.step(pid)
            taken += 1
        return self._procs[pid].result

    def run_random(self, rng: np.random.Generator, pids: Optional[Iterable[int]] = None,
                   until: Optional[Callable[[], bool]] = None,
                   max_steps: int = 100_000) -> int:
        """
        随机调度

        Args:
            rng: 随机数生成器，决定每一步放行哪个进程
            pids: 参与调度的进程；不在其中的进程保持挂起（暂停）
            until: 目标条件；为 None 时运行到参与进程全部结束
            max_steps: 步数预算

        Returns:
            实际执行的步数
        """
        allowed = None if pids is None else set(pids)
        taken = 0
        while True:
            if until is not None and until():
                return taken
            candidates = [p for p in self.parked if allowed is None or p in allowed]
            if not candidates:
                if until is None:
                    return taken
                raise SchedulerError("没有可调度的进程，但目标条件未满足")
            if taken >= max_steps:
                raise StepBudgetExceeded(max_steps)
            self.step(candidates[int(rng.integers(len(candidates)))])
            taken += 1

    # ---------- 结束 ----------

    def abort(self) -> None:
        """终止调度，挂起的进程以 SchedulerAbort 退出"""
        with self._cond:
            self._aborted = True
            self._cond.notify_all()
        for proc in self._procs.values():
            if proc.thread is not None:
                proc.thread.join(self._settle_timeout)
                if proc.thread.is_alive():
                    logger.warning(f"调度进程 {proc.pid} 未能在终止后退出")

    def __enter__(self) -> "StepScheduler":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.abort()

    def _settle(self) -> None:
        """等待所有进程挂起或结束"""
        deadline = time.monotonic() + self._settle_timeout
        with self._cond:
            while self._running:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise SchedulerError(
                        f"进程 {sorted(self._running)} 未在 {self._settle_timeout}s 内到达访问点"
                    )
                self._cond.wait(remaining)
        for proc in self._procs.values():
            if proc.error is not None and not proc._error_reported:
                proc._error_reported = True
                raise SchedulerError(f"调度进程 {proc.pid} 执行失败: {proc.error!r}") from proc.error
