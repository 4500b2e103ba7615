"""
并发运行时支持：进程句柄、步进调度器、检测探针
"""

from app.core.runtime.process import Pacer, ProcessHandle
from app.core.runtime.probe import LinPoint, Probe
from app.core.runtime.scheduler import ScheduledProcess, StepScheduler

__all__ = ["Pacer", "ProcessHandle", "LinPoint", "Probe", "ScheduledProcess", "StepScheduler"]
