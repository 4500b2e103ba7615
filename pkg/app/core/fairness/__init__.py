"""
公平性实验模块
"""

from app.core.fairness.delays import DelaySleeper, ExpDelayPacer, sample_delay, sample_delays
from app.core.fairness.harness import (
    QueueWorker, audit_values, make_queue, run_experiment, sweep, verify_pacing,
)
from app.core.fairness.metrics import (
    attainment, compute_fair_share, median, pair_slowdowns, preset_slowdowns, speeds_of,
)
from app.core.fairness.report import (
    PAIR_REFERENCE_RATIOS, REFERENCE_RATIOS, compare_reports, emit_report, emit_sweep,
    format_comparison, load_report, pair_reference_note, render_csv, render_json,
    summarize_csv, write_report_schema,
)

__all__ = [
    "sample_delay", "sample_delays", "DelaySleeper", "ExpDelayPacer",
    "speeds_of", "compute_fair_share", "attainment", "preset_slowdowns", "pair_slowdowns", "median",
    "make_queue", "QueueWorker", "audit_values", "verify_pacing", "run_experiment", "sweep",
    "emit_report", "render_csv", "render_json", "load_report", "summarize_csv",
    "write_report_schema", "compare_reports", "format_comparison", "emit_sweep",
    "pair_reference_note", "REFERENCE_RATIOS", "PAIR_REFERENCE_RATIOS",
]
