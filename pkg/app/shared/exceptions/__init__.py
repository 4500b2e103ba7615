"""
异常处理
"""

from typing import Any, Dict, List, Optional


class FairQueueError(Exception):
    """所有领域异常的基类"""


class InvariantViolation(FairQueueError):
    """结构不变量被破坏"""

    def __init__(self, message: str, violations: Optional[List[str]] = None,
                 context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.violations = violations or [message]
        self.context = context or {}


class HistoryError(FairQueueError):
    """执行历史相关错误"""


class MalformedHistory(HistoryError):
    """历史格式错误：同一进程的调用/响应未交替出现，或文件行无法解析"""


class HistoryTooLarge(HistoryError):
    """历史超过检查器的规模上限，明确拒绝而不是猜测"""

    def __init__(self, operations: int, limit: int):
        super().__init__(f"历史包含 {operations} 个操作，超过上限 {limit}")
        self.operations = operations
        self.limit = limit


class HistoryOverflow(HistoryError):
    """记录器容量耗尽，事件不会被静默丢弃"""


class SchedulerError(FairQueueError):
    """步进调度器错误"""


class SchedulerAbort(SchedulerError):
    """调度器终止，用于展开被挂起的工作线程"""


class StepBudgetExceeded(SchedulerError):
    """在步数预算内没有达到目标"""

    def __init__(self, budget: int, detail: str = ""):
        super().__init__(f"超出步数预算 {budget}" + (f": {detail}" if detail else ""))
        self.budget = budget


class HarnessError(FairQueueError):
    """基准测试运行失败（线程启动失败、运行不完整等）"""


class ReportError(FairQueueError):
    """报告写出或读取失败"""
