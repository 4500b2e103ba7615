"""
测试公共配置与夹具
"""

from typing import List, Optional, Tuple

import numpy as np
import pytest

from app.core.dnb_queue import DnbQueue
from app.core.lin_checker import History
from app.core.runtime import Probe, StepScheduler
from app.shared.models import EventKind, HistoryEvent


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行验收规模的慢测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def probe() -> Probe:
    return Probe()


@pytest.fixture
def dnb(probe) -> DnbQueue:
    """挂了探针的空 DNB-2 队列"""
    return DnbQueue(probe=probe)


@pytest.fixture
def sched():
    """步进调度器，测试结束时终止所有挂起的进程"""
    with StepScheduler(record_trace=True) as s:
        yield s


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)


def make_history(*events: Tuple) -> History:
    """
    按顺序构造历史，序号自动递增

    事件写作 ("inv", process, op, arg) 或 ("res", process, op, ret)。
    """
    built: List[HistoryEvent] = []
    for seq, (kind, process, op, value) in enumerate(events):
        if kind == "inv":
            built.append(HistoryEvent(seq=seq, kind=EventKind.INVOKE, process=process, op=op, arg=value))
        else:
            built.append(HistoryEvent(seq=seq, kind=EventKind.RESPOND, process=process, op=op, ret=value))
    return History(built)


def advance_to(s: StepScheduler, pid: int, label: str, max_steps: int = 10_000) -> bool:
    """推进 pid 直到停在 label 前；进程先结束时返回 False"""
    for _ in range(max_steps):
        if s.is_done(pid):
            return False
        if s.label_of(pid) == label:
            return True
        s.step(pid)
    raise AssertionError(f"进程 {pid} 未到达 {label}")


def finish_one_op(s: StepScheduler, pid: int, first_label: str) -> Optional[str]:
    """让停在操作起点的 pid 完成一个操作并停在下一个操作的起点"""
    s.step(pid)
    advance_to(s, pid, first_label)
    return s.label_of(pid)
