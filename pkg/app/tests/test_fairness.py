"""
公平性实验测试
指标计算、延迟注入、报告输出，以及短时的基准测试运行
"""

import json
import threading
import time
from collections import defaultdict
from types import SimpleNamespace
from typing import Dict, List

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.fairness import (
    DelaySleeper, ExpDelayPacer, audit_values, compare_reports, compute_fair_share, emit_report,
    format_comparison, load_report, pair_slowdowns, preset_slowdowns, render_csv, render_json,
    run_experiment, sample_delay, sample_delays, speeds_of, summarize_csv, sweep,
    verify_pacing, write_report_schema,
)
from app.core.dnb_queue import DnbQueue
from app.core.fairness.metrics import attainment, median
from app.core.runtime import ProcessHandle
from app.shared.exceptions import HarnessError, ReportError
from app.shared.models import (
    ExperimentConfig, FairnessReport, GroupSummary, ProcessStats, QueueImpl, Role,
    RunMode, SpeedSetting,
)


class TestMetrics:

    def test_equal_speeds(self):
        assert compute_fair_share([1, 1]).tolist() == [0.5, 0.5]

    def test_slowdown_two(self):
        shares = compute_fair_share(speeds_of([1, 2], 1000))
        assert shares == pytest.approx([2 / 3, 1 / 3])

    def test_s1_slowest_share(self):
        shares = compute_fair_share(speeds_of(preset_slowdowns(SpeedSetting.S1, 8, 0), 1000))
        harmonic = sum(1 / j for j in range(1, 9))
        assert shares[-1] == pytest.approx((1 / 8) / harmonic)
        assert shares[-1] == pytest.approx(0.046, abs=1e-3)
        assert shares.sum() == pytest.approx(1.0)

    def test_invalid_speeds(self):
        with pytest.raises(ValueError):
            compute_fair_share([])
        with pytest.raises(ValueError):
            compute_fair_share([1, 0])

    def test_presets(self):
        assert preset_slowdowns(SpeedSetting.S0, 2, 2) == [1, 1, 1, 1]
        assert preset_slowdowns(SpeedSetting.S2, 4, 1) == [1, 2, 4, 8, 1]
        assert pair_slowdowns(11) == [1, 11, 1, 11]

    def test_attainment(self):
        assert attainment([30, 10], [0.5, 0.5]).tolist() == [1.5, 0.5]
        assert attainment([0, 0], [0.5, 0.5]).tolist() == [0, 0]
        assert median([3, 1, 2]) == 2


class TestDelays:

    def test_sample_mean(self):
        samples = sample_delays(np.random.default_rng(7), 1000.0, 1_000_000)
        assert samples.mean() == pytest.approx(1000.0, rel=0.01)

    def test_same_seed_same_stream(self):
        a = sample_delays(np.random.default_rng(3), 50.0, 100)
        b = sample_delays(np.random.default_rng(3), 50.0, 100)
        assert a.tolist() == b.tolist()

    def test_non_positive_mean_rejected(self):
        with pytest.raises(ValueError):
            sample_delay(np.random.default_rng(0), 0)

    def test_sleeper_waits_at_least_requested(self):
        sleeper = DelaySleeper(spin_threshold_us=200)
        sleeper.calibrate(rounds=5)
        start = time.perf_counter()
        sleeper.wait(2000)
        assert time.perf_counter() - start >= 0.002

    def test_pacer_delays_every_access(self):
        pacer = ExpDelayPacer(1.0, 2.0, np.random.default_rng(0), DelaySleeper(spin_threshold_us=0))
        handle = ProcessHandle(pid=0, pacer=pacer)
        for _ in range(10):
            handle.access("x")
        assert pacer.delays == handle.accesses == 10
        assert pacer.skipped == 0
        assert pacer.mean_us == 2.0
        verify_pacing(0, handle, pacer, counted_ops=3)


def _pacer(stop=None) -> ExpDelayPacer:
    return ExpDelayPacer(1.0, 1.0, np.random.default_rng(0), DelaySleeper(spin_threshold_us=0), stop)


class TestPacingCheck:

    def test_accesses_after_stop_are_skipped(self):
        stop = threading.Event()
        pacer = _pacer(stop)
        handle = ProcessHandle(pid=0, pacer=pacer)
        handle.access("x")
        stop.set()
        for _ in range(5):
            handle.access("x")
        assert (pacer.delays, pacer.skipped) == (1, 5)
        verify_pacing(0, handle, pacer, counted_ops=1)

    def test_unpaced_accesses_fail_the_run(self):
        pacer = _pacer()
        handle = ProcessHandle(pid=0)
        for _ in range(3):
            handle.access("x")
        handle.pacer = pacer
        handle.access("x")
        with pytest.raises(HarnessError):
            verify_pacing(0, handle, pacer, counted_ops=1)

    def test_counted_operations_without_any_delay_fail_the_run(self):
        stop = threading.Event()
        stop.set()
        pacer = _pacer(stop)
        handle = ProcessHandle(pid=0, pacer=pacer)
        for _ in range(5):
            handle.access("x")
        verify_pacing(0, handle, pacer, counted_ops=0)
        with pytest.raises(HarnessError):
            verify_pacing(0, handle, pacer, counted_ops=2)


def _enqueuer(pid: int, enqueued: int) -> SimpleNamespace:
    return SimpleNamespace(pid=pid, role=Role.ENQUEUER, enqueued=enqueued, dequeued=[], bottoms=0)


def _dequeuer(pid: int, dequeued: list, bottoms: int = 0) -> SimpleNamespace:
    return SimpleNamespace(pid=pid, role=Role.DEQUEUER, enqueued=0, dequeued=dequeued, bottoms=bottoms)


class TestAudit:

    def test_dequeued_plus_remaining_accounts_for_everything(self):
        q = DnbQueue()
        q.enqueue((0, 2))
        audit = audit_values([_enqueuer(0, 3), _dequeuer(1, [(0, 0), (0, 1)], bottoms=4)], q)
        assert audit.ok, audit.problems
        assert (audit.dequeued, audit.remaining, audit.lost, audit.bottoms) == (2, 1, 0, 4)

    def test_lost_values_are_reported(self):
        audit = audit_values([_enqueuer(0, 3), _dequeuer(1, [(0, 0)])], DnbQueue())
        assert not audit.ok
        assert audit.lost == 2
        assert "(0, 1)" in audit.problems[0]

    def test_unconsumed_prefill_must_remain_in_queue(self):
        q = DnbQueue()
        q.enqueue((-1, 1))
        audit = audit_values([_dequeuer(0, [(-1, 0)])], q, prefill=3)
        assert audit.lost == 1
        assert not audit.ok

    def test_duplicate_and_unknown_values(self):
        q = DnbQueue()
        q.enqueue((0, 0))
        audit = audit_values([_enqueuer(0, 1), _dequeuer(1, [(0, 0), (0, 5)])], q)
        assert not audit.ok
        assert any("重复" in p for p in audit.problems)
        assert any("从未入队" in p for p in audit.problems)

    def test_per_producer_order(self):
        audit = audit_values([_enqueuer(0, 2), _dequeuer(1, [(0, 1), (0, 0)])], DnbQueue())
        assert not audit.ok
        assert "逆序" in audit.problems[0]


def _report(impl=QueueImpl.DNB2, enq=(100, 50), deq=(80, 20)) -> FairnessReport:
    cfg = ExperimentConfig(impl=impl, enqueuers=2, dequeuers=2, slowdown=[1, 2, 1, 2],
                           duration_secs=1, seed=9)
    shares = [2 / 3, 1 / 3]
    rows = []
    for role, counts, offset in ((Role.ENQUEUER, enq, 0), (Role.DEQUEUER, deq, 2)):
        att = attainment(counts, shares)
        for i, c in enumerate(counts):
            rows.append(ProcessStats(process=offset + i, role=role, slowdown=1 + i, ops=c,
                                     speed=1000 / (1 + i), fair_share=shares[i], attainment=float(att[i])))
    groups = [GroupSummary(role=Role.ENQUEUER, processes=2, throughput=sum(enq)),
              GroupSummary(role=Role.DEQUEUER, processes=2, throughput=sum(deq))]
    return FairnessReport(impl=impl, config=cfg, rows=rows, groups=groups,
                          total_throughput=sum(enq) + sum(deq), elapsed_secs=1.0)


class TestReport:

    def test_csv_layout(self, tmp_path):
        path = emit_report(_report(), tmp_path / "r.csv", "csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# config=")
        header = [line for line in lines if not line.startswith("#")][0]
        assert header == "impl,process,role,slowdown,ops,fair_share,attainment"

    def test_csv_is_reproducible(self):
        assert render_csv(_report()) == render_csv(_report())

    def test_summarizer_recomputes_groups(self, tmp_path):
        path = emit_report(_report(), tmp_path / "r.csv", "csv")
        summary = summarize_csv(path)
        assert summary["enqueuer"] == 150
        assert summary["dequeuer"] == 100
        assert summary["total"] == 250
        assert summary["dequeuer_min_attainment"] == pytest.approx(0.6, abs=1e-4)

    def test_json_validates_against_schema(self, tmp_path):
        schema_path = write_report_schema(tmp_path / "schema.json")
        schema = json.loads(schema_path.read_text(encoding="utf-8"))
        assert schema == FairnessReport.model_json_schema()

        report_path = emit_report(_report(), tmp_path / "r.json", "json")
        text = report_path.read_text(encoding="utf-8")
        assert FairnessReport.model_validate_json(text) == _report()
        assert load_report(report_path) == _report()
        emitted = json.loads(text)
        assert set(schema["required"]) <= set(emitted)
        assert set(emitted) <= set(schema["properties"])

    def test_invalid_json_report_is_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        data = json.loads(render_json(_report()))
        data["rows"][0]["role"] = "producer"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(ReportError):
            load_report(path)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(_report(), tmp_path / "r.txt", "txt")

    def test_comparison_row(self):
        ms = _report(QueueImpl.MS, enq=(120, 80), deq=(100, 100))
        dnb = _report(QueueImpl.DNB2, enq=(100, 50), deq=(80, 20))
        row = compare_reports(ms, dnb, "S0")
        assert row.ms_total == 400 and row.dnb_total == 250
        assert row.ratio == pytest.approx(0.625)
        assert row.enqueue_ratio == pytest.approx(0.75)
        assert row.reference_ratio == pytest.approx(0.9261)
        assert "92.61%" in format_comparison([row])
        with pytest.raises(ValueError):
            compare_reports(dnb, ms, "S0")


class TestConfig:

    def test_slowdown_must_be_at_least_one(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(slowdown=[1, 0.5, 1, 1])

    def test_slowdown_length_must_match(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(enqueuers=2, dequeuers=2, slowdown=[1, 2])

    def test_duration_must_be_positive(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(duration_secs=0)


def _quick(impl=QueueImpl.DNB2, **overrides) -> ExperimentConfig:
    values = dict(impl=impl, enqueuers=2, dequeuers=2, base_delay_mu_us=50.0, duration_secs=0.3, seed=1)
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.fixture(scope="module")
def sleeper() -> DelaySleeper:
    s = DelaySleeper()
    s.calibrate(rounds=5)
    return s


class TestHarness:

    @pytest.mark.parametrize("impl", list(QueueImpl))
    def test_short_run_conserves_counts(self, impl, sleeper):
        report = run_experiment(_quick(impl), sleeper=sleeper)
        assert len(report.rows) == 4
        for role in (Role.ENQUEUER, Role.DEQUEUER):
            assert report.group(role).throughput == sum(r.ops for r in report.rows_of(role))
            assert sum(r.fair_share for r in report.rows_of(role)) == pytest.approx(1.0)
        assert report.total_throughput > 0
        assert report.audit.ok, report.audit.problems

    def test_instrumented_run(self, sleeper):
        report = run_experiment(_quick(prefill=20), sleeper=sleeper, instrument=True)
        assert report.audit.ok

    def test_enqueuers_only_mode(self, sleeper):
        report = run_experiment(_quick(mode=RunMode.ENQ_ONLY), sleeper=sleeper)
        assert [r.role for r in report.rows] == [Role.ENQUEUER, Role.ENQUEUER]
        assert report.group(Role.DEQUEUER) is None

    def test_dequeuers_only_mode_counts_bottoms(self, sleeper):
        report = run_experiment(_quick(mode=RunMode.DEQ_ONLY, prefill=5), sleeper=sleeper)
        assert report.group(Role.DEQUEUER).throughput > 0
        assert report.audit.dequeued <= 5
        assert report.audit.bottoms > 0

    def test_sweep_returns_one_point_per_k(self, sleeper):
        points = sweep(QueueImpl.DNB2, [2], seeds=1, base=_quick(), sleeper=sleeper)
        assert len(points) == 1
        assert points[0].k == 2
        assert points[0].slow_enqueuer_attainment >= 0


def _median_report_runs(cfg: ExperimentConfig, sleeper: DelaySleeper, seeds: int = 5):
    return [run_experiment(cfg.model_copy(update={"seed": s}), sleeper=sleeper) for s in range(seeds)]


def _per_process_median_ops(reports, role: Role) -> Dict[int, float]:
    """每个进程在各个种子下完成操作数的中位数"""
    per_pid: Dict[int, List[int]] = defaultdict(list)
    for report in reports:
        for row in report.rows_of(role):
            per_pid[row.process].append(row.ops)
    return {pid: median(ops) for pid, ops in per_pid.items()}


@pytest.mark.slow
class TestFairnessAcceptance:
    """验收规模的公平性测试：每次运行 ≥30 秒，取 5 个种子的中位数"""

    @pytest.mark.parametrize("k", [2, 5, 8, 11])
    def test_dnb2_slow_pair_keeps_half_its_share(self, k, sleeper):
        points = sweep(QueueImpl.DNB2, [k], seeds=5, sleeper=sleeper)
        assert points[0].slow_enqueuer_attainment >= 0.5
        assert points[0].slow_dequeuer_attainment >= 0.5

    def test_ms_slow_dequeuer_starves_at_eleven(self, sleeper):
        points = sweep(QueueImpl.MS, [11], seeds=5, sleeper=sleeper)
        assert points[0].slow_dequeuer_attainment <= 0.05

    @pytest.mark.parametrize("setting", [SpeedSetting.S1, SpeedSetting.S2])
    def test_dnb2_slowest_process_in_eight_plus_eight(self, setting, sleeper):
        cfg = ExperimentConfig(impl=QueueImpl.DNB2, enqueuers=8, dequeuers=8,
                               slowdown=preset_slowdowns(setting))
        reports = _median_report_runs(cfg, sleeper)
        for role in (Role.ENQUEUER, Role.DEQUEUER):
            assert median([r.rows_of(role)[-1].attainment for r in reports]) >= 0.5

    def test_ms_slowdown_eight_enqueuer_in_s1(self, sleeper):
        cfg = ExperimentConfig(impl=QueueImpl.MS, enqueuers=8, dequeuers=8,
                               slowdown=preset_slowdowns(SpeedSetting.S1))
        reports = _median_report_runs(cfg, sleeper)
        assert median([r.rows_of(Role.ENQUEUER)[-1].attainment for r in reports]) <= 0.15

    @pytest.mark.parametrize("setting", list(SpeedSetting))
    def test_throughput_ratio_band(self, setting, sleeper):
        slowdown = preset_slowdowns(setting)
        ms = run_experiment(ExperimentConfig(impl=QueueImpl.MS, enqueuers=8, dequeuers=8,
                                             slowdown=slowdown), sleeper=sleeper)
        dnb = run_experiment(ExperimentConfig(impl=QueueImpl.DNB2, enqueuers=8, dequeuers=8,
                                              slowdown=slowdown), sleeper=sleeper)
        row = compare_reports(ms, dnb, setting.value)
        assert 0.6 <= row.ratio <= 1.1, format_comparison([row])

    @pytest.mark.parametrize("role,mode", [(Role.ENQUEUER, RunMode.ENQ_ONLY), (Role.DEQUEUER, RunMode.DEQ_ONLY)])
    def test_dnb2_processes_are_independent_of_the_other_group(self, role, mode, sleeper):
        """另一组在场与否，同组每个进程的吞吐量都保持在 ±15% 以内"""
        prefill = 0 if role == Role.ENQUEUER else 200_000
        both = ExperimentConfig(impl=QueueImpl.DNB2, enqueuers=8, dequeuers=8, prefill=prefill, audit=False)
        alone = both.model_copy(update={"mode": mode})
        together = _per_process_median_ops(_median_report_runs(both, sleeper), role)
        isolated = _per_process_median_ops(_median_report_runs(alone, sleeper), role)
        assert together.keys() == isolated.keys()
        for pid, ops in isolated.items():
            assert together[pid] == pytest.approx(ops, rel=0.15), f"进程 {pid}: {together[pid]} vs {ops}"
