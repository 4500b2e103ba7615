"""
随机历史测试
用步进调度器按随机种子交错执行若干进程的操作，记录历史并逐一检查线性一致性。
每个种子完全决定操作序列和交错方式，失败可以原样重放。
"""

import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from app.config import settings
from app.core.dnb_queue import DnbQueue, probe_invariants
from app.core.lin_checker.checker import check, cross_check_lin_points
from app.core.lin_checker.history import History, HistoryRecorder, format_history
from app.core.ms_queue import MsQueue
from app.core.runtime import Probe, ProcessHandle, StepScheduler
from app.core.universal import Universal2NB
from app.shared.exceptions import SchedulerError, StepBudgetExceeded
from app.shared.models import CampaignFailure, CampaignReport
from app.shared.specs import Call, CounterSpec, QueueSpec, RegisterSpec, SeqSpec
from app.shared.utils.file_manager import FileManager


class CampaignTarget(ABC):
    """被测对象：生成随机操作、执行操作，并在运行结束后做额外检查"""

    name: str = "abstract"
    spec: SeqSpec

    def __init__(self, probe: Probe):
        self.probe = probe

    @abstractmethod
    def random_call(self, rng: np.random.Generator, pid: int, index: int) -> Call:
        """为进程 pid 的第 index 个操作生成调用"""

    @abstractmethod
    def perform(self, call: Call, proc: ProcessHandle) -> Any:
        """执行调用并返回响应"""

    def verify(self, history: History) -> List[str]:
        """运行结束后的检查，返回问题列表"""
        return self.probe.violations + self.probe.monotonicity_violations()


class _QueueTarget(CampaignTarget):
    spec = QueueSpec()

    def random_call(self, rng: np.random.Generator, pid: int, index: int) -> Call:
        if rng.random() < 0.5:
            # 值在一次运行内唯一，线性化点才能与操作对应
            return Call("enqueue", pid * 1000 + index + 1)
        return Call("dequeue")


class DnbTarget(_QueueTarget):
    name = "dnb2"
    queue_class = DnbQueue

    def __init__(self, probe: Probe):
        super().__init__(probe)
        self.queue = self.queue_class(probe=probe)

    def perform(self, call: Call, proc: ProcessHandle) -> Any:
        if call.op == "enqueue":
            return self.queue.enqueue(call.arg, proc)
        return self.queue.dequeue(proc)

    def verify(self, history: History) -> List[str]:
        report = probe_invariants(self.queue, self.probe)
        return report.violations + cross_check_lin_points(history, self.probe.lin_points)


class MsTarget(_QueueTarget):
    name = "ms"

    def __init__(self, probe: Probe):
        super().__init__(probe)
        self.queue = MsQueue(probe=probe)

    def perform(self, call: Call, proc: ProcessHandle) -> Any:
        if call.op == "enqueue":
            return self.queue.enqueue(call.arg, proc)
        return self.queue.dequeue(proc)


class UniversalTarget(CampaignTarget):
    """通用构造包装的对象，操作分布随规格而定"""

    def __init__(self, probe: Probe, spec: SeqSpec):
        super().__init__(probe)
        self.spec = spec
        self.obj = Universal2NB(spec, probe=probe)
        self.name = self.obj.name

    def random_call(self, rng: np.random.Generator, pid: int, index: int) -> Call:
        roll = rng.random()
        if isinstance(self.spec, CounterSpec):
            return Call("inc") if roll < 0.6 else Call("get")
        if isinstance(self.spec, RegisterSpec):
            if roll < 0.5:
                return Call("write", int(rng.integers(self.spec.domain)))
            return Call("read")
        return _QueueTarget.random_call(self, rng, pid, index)

    def perform(self, call: Call, proc: ProcessHandle) -> Any:
        return self.obj.invoke(call, proc)


TargetFactory = Callable[[Probe], CampaignTarget]

TARGETS: Dict[str, TargetFactory] = {
    "dnb2": DnbTarget,
    "ms": MsTarget,
    "universal-counter": lambda probe: UniversalTarget(probe, CounterSpec()),
    "universal-register": lambda probe: UniversalTarget(probe, RegisterSpec()),
    "universal-queue": lambda probe: UniversalTarget(probe, QueueSpec()),
}


def register_target(name: str, factory: TargetFactory) -> None:
    """注册额外的被测对象（例如变异版本）"""
    TARGETS[name] = factory
    logger.info(f"已注册测试对象: {name}")


def _resolve(impl: Union[str, TargetFactory]) -> Tuple[str, TargetFactory]:
    if callable(impl):
        return getattr(impl, "name", getattr(impl, "__name__", "custom")), impl
    try:
        return impl, TARGETS[impl]
    except KeyError:
        raise ValueError(f"未知实现: {impl}，可选: {', '.join(TARGETS)}")


def _split(ops: int, processes: int) -> List[int]:
    return [ops // processes + (1 if i < ops % processes else 0) for i in range(processes)]


class RunOutcome:
    """单个种子的运行结果"""

    def __init__(self, seed: int, history: History, target: CampaignTarget,
                 steps: int, reason: Optional[str] = None, detail: str = ""):
        self.seed = seed
        self.history = history
        self.target = target
        self.steps = steps
        self.reason = reason
        self.detail = detail

    @property
    def ok(self) -> bool:
        return self.reason is None


def run_seed(impl: Union[str, TargetFactory], processes: int, ops: int, seed: int,
             max_steps: Optional[int] = None, max_check_ops: Optional[int] = None) -> RunOutcome:
    """
    运行并检查一个种子

    同一种子下操作序列和调度决策都由同一个随机流决定，因此结果可重放。
    """
    _, factory = _resolve(impl)
    budget = max_steps or settings.campaign_step_budget
    rng = np.random.default_rng(seed)
    recorder = HistoryRecorder()
    probe = Probe(clock=recorder.next_seq)
    target = factory(probe)

    plans = [
        [target.random_call(rng, pid, i) for i in range(count)]
        for pid, count in enumerate(_split(ops, processes))
    ]

    def body_for(pid: int, calls: List[Call]):
        def body(handle: ProcessHandle) -> None:
            for call in calls:
                recorder.invoke(pid, call.op, call.arg)
                response = target.perform(call, handle)
                recorder.respond(pid, call.op, response)
        return body

    steps = 0
    with StepScheduler() as sched:
        try:
            for pid, calls in enumerate(plans):
                sched.spawn(pid, body_for(pid, calls))
            steps = sched.run_random(rng, max_steps=budget)
        except StepBudgetExceeded as e:
            history = recorder.snapshot()
            return RunOutcome(seed, history, target, budget, "timeout", str(e))
        except SchedulerError as e:
            history = recorder.snapshot()
            return RunOutcome(seed, history, target, sched.steps, "error", str(e))

    history = recorder.snapshot()
    verdict = check(history, target.spec, max_ops=max_check_ops)
    if not verdict.linearizable:
        return RunOutcome(seed, history, target, steps, "non-linearizable",
                          f"搜索了 {verdict.explored} 个状态，找不到合法的线性化顺序")
    problems = target.verify(history)
    if problems:
        return RunOutcome(seed, history, target, steps, "invariant", "; ".join(problems))
    return RunOutcome(seed, history, target, steps)


def random_history_campaign(impl: Union[str, TargetFactory], processes: int, ops: int,
                            seeds: Optional[int] = None, seed_start: int = 0,
                            max_steps: Optional[int] = None,
                            dump_dir: Optional[Union[str, Path]] = None,
                            stop_after: Optional[int] = None) -> CampaignReport:
    """
    随机历史测试

    Args:
        impl: 实现名（见 TARGETS）或返回 CampaignTarget 的工厂
        processes: 进程数
        ops: 每次运行的操作总数
        seeds: 种子数，默认取配置
        seed_start: 第一个种子
        max_steps: 每次运行的步数预算；超出记为 timeout 失败
        dump_dir: 失败历史的重放文件目录
        stop_after: 收集到这么多失败后提前结束

    Returns:
        CampaignReport
    """
    name, _ = _resolve(impl)
    seeds = seeds if seeds is not None else settings.campaign_seeds
    if processes < 1 or ops < 0:
        raise ValueError(f"进程数必须 ≥ 1 且操作数非负，实际为 {processes}, {ops}")

    logger.info(f"🔍 开始随机历史测试: {name}, {processes} 个进程, {ops} 个操作, {seeds} 个种子")
    report = CampaignReport(impl=name, processes=processes, ops=ops)
    files = FileManager(dump_dir) if dump_dir else None
    started = time.perf_counter()

    for seed in range(seed_start, seed_start + seeds):
        outcome = run_seed(impl, processes, ops, seed, max_steps=max_steps)
        report.runs += 1
        if outcome.ok:
            continue

        trace = format_history(outcome.history)
        logger.error(f"❌ {name} 种子 {seed} 失败 ({outcome.reason}): {outcome.detail}\n{trace}")
        replay_path = None
        if files is not None:
            replay_path = str(files.save_replay(
                name, seed, trace,
                header=f"impl={name} processes={processes} ops={ops} seed={seed} reason={outcome.reason}",
            ))
        report.failures.append(CampaignFailure(
            seed=seed, reason=outcome.reason, detail=f"{outcome.detail}\n{trace}",
            replay_path=replay_path,
        ))
        if stop_after is not None and len(report.failures) >= stop_after:
            break

    report.elapsed_secs = time.perf_counter() - started
    if report.passed:
        logger.info(f"✅ {name}: {report.runs} 次运行全部通过，用时 {report.elapsed_secs:.1f}s")
    else:
        logger.warning(f"⚠️ {name}: {report.runs} 次运行中 {len(report.failures)} 次失败")
    return report
