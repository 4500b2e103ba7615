"""
公平性基准测试
按配置启动入队/出队工作线程，每个线程循环执行自己的操作并在每次共享访问前注入延迟，
到截止时间后停止计数；截止后完成的在途操作不计入结果。
"""

import threading
import time
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.config import settings
from app.core.dnb_queue import DnbQueue, ensure_invariants
from app.core.fairness.delays import DelaySleeper, ExpDelayPacer
from app.core.fairness.metrics import attainment, compute_fair_share, median, pair_slowdowns, speeds_of
from app.core.ms_queue import MsQueue
from app.core.runtime import Probe, ProcessHandle
from app.shared.exceptions import HarnessError
from app.shared.models import (
    BOTTOM, AuditResult, ExperimentConfig, FairnessReport, GroupSummary,
    ProcessStats, QueueImpl, Role, SweepPoint,
)

PREFILL_PRODUCER = -1

Queue = Union[DnbQueue, MsQueue]


def make_queue(impl: QueueImpl, probe: Optional[Probe] = None) -> Queue:
    """按实现名创建空队列"""
    if impl == QueueImpl.DNB2:
        return DnbQueue(probe=probe)
    return MsQueue(probe=probe)


class _StartGate:
    """所有线程就绪后统一开始计时"""

    def __init__(self, parties: int):
        self.barrier = threading.Barrier(parties)
        self.deadline = 0.0


class QueueWorker(threading.Thread):
    """一个逻辑进程：循环入队 (pid, seq) 或循环出队"""

    def __init__(self, pid: int, role: Role, queue: Queue, pacer: ExpDelayPacer,
                 gate: _StartGate, stop: threading.Event):
        super().__init__(name=f"{settings.worker_name_prefix}-{role.value}-{pid}", daemon=True)
        self.pid = pid
        self.role = role
        self.queue = queue
        self.pacer = pacer
        self.handle = ProcessHandle(pid=pid, role=role, pacer=pacer)
        self.gate = gate
        self.stop = stop
        self.ops = 0
        self.enqueued = 0
        self.bottoms = 0
        self.dequeued: List[Any] = []
        self.error: Optional[BaseException] = None

    def run(self):
        try:
            self.gate.barrier.wait()
            deadline = self.gate.deadline
            while not self.stop.is_set():
                if self.role == Role.ENQUEUER:
                    self.queue.enqueue((self.pid, self.enqueued), self.handle)
                    self.enqueued += 1
                    finished = time.perf_counter()
                else:
                    value = self.queue.dequeue(self.handle)
                    finished = time.perf_counter()
                    # ⊥ 也算一次完成的出队
                    if value is BOTTOM:
                        if finished <= deadline:
                            self.bottoms += 1
                    else:
                        self.dequeued.append(value)
                if finished <= deadline:
                    self.ops += 1
        except threading.BrokenBarrierError:
            logger.warning(f"⚠️ 工作线程 {self.pid} 未能开始运行")
        except BaseException as e:
            self.error = e
            logger.error(f"工作线程 {self.pid} 执行失败: {str(e)}")
            self.stop.set()


def audit_values(workers: Sequence[QueueWorker], queue: Queue, prefill: int = 0) -> AuditResult:
    """
    运行结束后的出队审计

    每个出队值最多出现一次且确实入队过，每个出队者看到的同一生产者的序号递增；
    出队值与队列剩余元素合起来必须恰好是全部入队值，缺少的记为丢失。

    Args:
        workers: 已结束的工作线程
        queue: 运行后的队列，必须处于静止状态
        prefill: 运行前预先入队的元素个数
    """
    produced: Dict[int, int] = {w.pid: w.enqueued for w in workers if w.role == Role.ENQUEUER}
    produced[PREFILL_PRODUCER] = prefill
    seen = set()
    problems: List[str] = []
    dequeued = 0
    bottoms = 0

    def account(value: Any, where: str) -> Tuple[int, int]:
        producer, seq = value
        if value in seen:
            problems.append(f"值 {value} 重复出现（{where}）")
        seen.add(value)
        if not 0 <= seq < produced.get(producer, 0):
            problems.append(f"值 {value} 从未入队（{where}）")
        return producer, seq

    for w in workers:
        if w.role != Role.DEQUEUER:
            continue
        bottoms += w.bottoms
        last: Dict[int, int] = defaultdict(lambda: -1)
        for value in w.dequeued:
            dequeued += 1
            producer, seq = account(value, f"出队者 {w.pid}")
            if seq <= last[producer]:
                problems.append(f"出队者 {w.pid} 看到生产者 {producer} 的序号逆序: {last[producer]} → {seq}")
            last[producer] = seq

    remaining = queue.snapshot()
    for value in remaining:
        account(value, "队列剩余")

    lost = [
        (producer, seq)
        for producer, count in sorted(produced.items())
        for seq in range(count)
        if (producer, seq) not in seen
    ]
    if lost:
        problems.append(f"{len(lost)} 个入队值既未出队也不在队列中，例如 {lost[:5]}")

    return AuditResult(
        ok=not problems, dequeued=dequeued, bottoms=bottoms, remaining=len(remaining),
        lost=len(lost), problems=problems[:20],
    )


def verify_pacing(pid: int, handle: ProcessHandle, pacer: ExpDelayPacer, counted_ops: int) -> None:
    """
    核对延迟注入：stop 之前的每次共享访问都必须等完一段延迟

    Raises:
        HarnessError: 有访问没有经过节拍器，或截止前完成了操作却没有注入任何延迟
    """
    unpaced = handle.accesses - pacer.delays - pacer.skipped
    if unpaced != 0:
        raise HarnessError(
            f"进程 {pid} 的共享访问 {handle.accesses} 次，等待延迟 {pacer.delays} 次，"
            f"截止后跳过 {pacer.skipped} 次，有 {unpaced} 次访问未注入延迟"
        )
    if counted_ops > 0 and pacer.delays == 0:
        raise HarnessError(f"进程 {pid} 在截止前完成了 {counted_ops} 个操作，但没有注入任何延迟")


def _group_rows(cfg: ExperimentConfig, workers: List[QueueWorker], role: Role) -> List[ProcessStats]:
    members = [w for w in workers if w.role == role]
    if not members:
        return []
    slowdowns = [cfg.slowdown_of(w.pid) for w in members]
    speeds = speeds_of(slowdowns, cfg.base_delay_mu_us)
    shares = compute_fair_share(speeds)
    counts = [w.ops for w in members]
    attained = attainment(counts, shares)
    return [
        ProcessStats(
            process=w.pid, role=role, slowdown=k, ops=w.ops, speed=float(s),
            fair_share=float(f), attainment=float(a),
        )
        for w, k, s, f, a in zip(members, slowdowns, speeds, shares, attained)
    ]


def run_experiment(cfg: ExperimentConfig, sleeper: Optional[DelaySleeper] = None,
                   instrument: Optional[bool] = None) -> FairnessReport:
    """
    运行一次公平性实验

    Args:
        cfg: 实验配置；进程编号 0..enqueuers-1 为入队者，其后为出队者
        sleeper: 已校准的等待器，为空时新建并校准
        instrument: 是否挂检测探针，默认取配置

    Returns:
        FairnessReport

    Raises:
        HarnessError: 线程启动失败、工作线程异常或未在宽限期内结束
        InvariantViolation: 挂探针时发现结构问题
    """
    instrument = settings.instrument if instrument is None else instrument
    probe = Probe() if instrument else None
    queue = make_queue(cfg.impl, probe)
    for seq in range(cfg.prefill):
        queue.enqueue((PREFILL_PRODUCER, seq))

    if sleeper is None:
        sleeper = DelaySleeper()
        sleeper.calibrate()

    roles = []
    if cfg.runs_enqueuers:
        roles += [(pid, Role.ENQUEUER) for pid in range(cfg.enqueuers)]
    if cfg.runs_dequeuers:
        roles += [(cfg.enqueuers + i, Role.DEQUEUER) for i in range(cfg.dequeuers)]
    if not roles:
        raise HarnessError(f"模式 {cfg.mode.value} 下没有可运行的进程")

    stop = threading.Event()
    gate = _StartGate(len(roles) + 1)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.enqueuers + cfg.dequeuers)
    workers = [
        QueueWorker(
            pid, role, queue,
            ExpDelayPacer(cfg.base_delay_mu_us, cfg.slowdown_of(pid),
                          np.random.default_rng(streams[pid]), sleeper, stop),
            gate, stop,
        )
        for pid, role in roles
    ]

    logger.info(
        f"开始实验: {cfg.impl.value}, {cfg.enqueuers}+{cfg.dequeuers}, 模式 {cfg.mode.value}, "
        f"μ={cfg.base_delay_mu_us}µs, {cfg.duration_secs}s, 种子 {cfg.seed}"
    )
    try:
        for w in workers:
            w.start()
    except Exception as e:
        stop.set()
        gate.barrier.abort()
        logger.error(f"工作线程启动失败: {str(e)}")
        raise HarnessError(f"工作线程启动失败: {str(e)}") from e

    gate.deadline = time.perf_counter() + cfg.duration_secs
    started = time.perf_counter()
    gate.barrier.wait()
    stop.wait(cfg.duration_secs)
    stop.set()

    grace_end = time.perf_counter() + settings.grace_secs
    for w in workers:
        w.join(max(grace_end - time.perf_counter(), 0.0))
    elapsed = min(time.perf_counter() - started, cfg.duration_secs)

    stuck = [w.pid for w in workers if w.is_alive()]
    if stuck:
        raise HarnessError(f"工作线程 {stuck} 未在 {settings.grace_secs}s 宽限期内结束，运行不完整")
    failed = [w for w in workers if w.error is not None]
    if failed:
        raise HarnessError(f"工作线程 {failed[0].pid} 执行失败: {failed[0].error!r}") from failed[0].error

    for w in workers:
        verify_pacing(w.pid, w.handle, w.pacer, w.ops)

    if probe is not None and isinstance(queue, DnbQueue):
        ensure_invariants(queue, probe)
    elif probe is not None:
        probe.assert_clean()

    rows = _group_rows(cfg, workers, Role.ENQUEUER) + _group_rows(cfg, workers, Role.DEQUEUER)
    groups = [
        GroupSummary(role=role, processes=len(members), throughput=sum(r.ops for r in members))
        for role in (Role.ENQUEUER, Role.DEQUEUER)
        for members in [[r for r in rows if r.role == role]]
        if members
    ]
    report = FairnessReport(
        impl=cfg.impl, config=cfg, rows=rows, groups=groups,
        total_throughput=sum(g.throughput for g in groups),
        elapsed_secs=elapsed,
        audit=audit_values(workers, queue, cfg.prefill) if cfg.audit else None,
    )
    if report.audit is not None and not report.audit.ok:
        logger.error(f"❌ 出队审计失败: {report.audit.problems[0]}")
    logger.info(f"✅ 实验完成: 总吞吐量 {report.total_throughput}")
    return report


def sweep(impl: QueueImpl, ks: Sequence[float], seeds: int = 5,
          base: Optional[ExperimentConfig] = None,
          sleeper: Optional[DelaySleeper] = None) -> List[SweepPoint]:
    """
    2+2 系统的减速扫描：每个 k 运行 seeds 次，取中位数

    Args:
        impl: 队列实现
        ks: 减速因子序列
        seeds: 每个 k 的重复次数
        base: 其余配置（时长、μ 等），其进程数和减速向量会被覆盖
    """
    base = base or ExperimentConfig()
    if sleeper is None:
        sleeper = DelaySleeper()
        sleeper.calibrate()

    points = []
    for k in ks:
        slow_enq, slow_deq, enq_tp, deq_tp = [], [], [], []
        for i in range(seeds):
            cfg = base.model_copy(update={
                "impl": impl, "enqueuers": 2, "dequeuers": 2,
                "slowdown": pair_slowdowns(k), "seed": base.seed + i,
            })
            report = run_experiment(cfg, sleeper=sleeper)
            slow_enq.append(report.rows_of(Role.ENQUEUER)[1].attainment)
            slow_deq.append(report.rows_of(Role.DEQUEUER)[1].attainment)
            enq_tp.append(report.group(Role.ENQUEUER).throughput)
            deq_tp.append(report.group(Role.DEQUEUER).throughput)
        point = SweepPoint(
            impl=impl, k=k, seeds=seeds,
            slow_enqueuer_attainment=median(slow_enq),
            slow_dequeuer_attainment=median(slow_deq),
            enqueue_throughput=median(enq_tp),
            dequeue_throughput=median(deq_tp),
        )
        logger.info(
            f"k={k}: 慢入队者 {point.slow_enqueuer_attainment:.1%}, "
            f"慢出队者 {point.slow_dequeuer_attainment:.1%}"
        )
        points.append(point)
    return points
