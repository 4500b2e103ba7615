"""
报告输出
CSV 以 # 注释行回显配置，之后为每个进程一行；JSON 即 FairnessReport 模型本身。
字段顺序固定，浮点数按固定精度格式化，相同的计数得到逐字节相同的输出。
"""

import csv
import io
import json
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

from loguru import logger

from app.core.fairness.metrics import attainment
from app.shared.exceptions import ReportError
from app.shared.models import (
    FairnessReport, QueueImpl, Role, SweepPoint, ThroughputComparison,
)
from app.shared.utils.file_manager import FileManager

CSV_COLUMNS = ["impl", "process", "role", "slowdown", "ops", "fair_share", "attainment"]
SWEEP_COLUMNS = [
    "impl", "k", "seeds", "slow_enqueuer_attainment", "slow_dequeuer_attainment",
    "enqueue_throughput", "dequeue_throughput",
]

# 参考测量中 DNB2 与 MS 的总吞吐量之比（8+8 系统）
REFERENCE_RATIOS: Dict[str, float] = {"S0": 0.9261, "S1": 0.8961, "S2": 0.8357}

# 参考测量中 2+2 系统各组吞吐量之比的范围
PAIR_REFERENCE_RATIOS: Dict[str, Tuple[float, float]] = {
    "enqueue": (0.62, 0.67),
    "dequeue": (0.76, 0.88),
}


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def render_csv(report: FairnessReport) -> str:
    """把报告渲染为 CSV 文本"""
    buffer = io.StringIO()
    buffer.write(f"# config={report.config.model_dump_json()}\n")
    buffer.write(f"# seed={report.config.seed} elapsed_secs={_fmt(report.elapsed_secs)}\n")
    for g in report.groups:
        buffer.write(f"# group={g.role.value} processes={g.processes} throughput={g.throughput}\n")
    buffer.write(f"# total_throughput={report.total_throughput}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(report.rows, key=lambda r: r.process):
        writer.writerow([
            report.impl.value, r.process, r.role.value, _fmt(r.slowdown),
            r.ops, _fmt(r.fair_share), _fmt(r.attainment),
        ])
    return buffer.getvalue()


def render_json(report: FairnessReport) -> str:
    return report.model_dump_json(indent=2) + "\n"


def emit_report(report: FairnessReport, path: Union[str, Path], fmt: str = "csv") -> Path:
    """
    写出报告

    Args:
        report: 实验报告
        path: 输出路径
        fmt: csv 或 json

    Raises:
        ValueError: 未知格式
        ReportError: 写出失败
    """
    if fmt == "csv":
        content = render_csv(report)
    elif fmt == "json":
        content = render_json(report)
    else:
        raise ValueError(f"未知报告格式: {fmt}，可选 csv / json")
    return FileManager(Path(path).parent).save_text(path, content)


def load_report(path: Union[str, Path]) -> FairnessReport:
    """读取 JSON 报告并按模型校验"""
    try:
        return FairnessReport.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except Exception as e:
        logger.error(f"报告读取失败: {str(e)}")
        raise ReportError(f"报告读取失败: {str(e)}") from e


def summarize_csv(path: Union[str, Path]) -> Dict[str, float]:
    """
    读回 CSV 报告并重新计算各组吞吐量

    Returns:
        dict: enqueuer / dequeuer 吞吐量、total，以及各组达成率的最小值
    """
    try:
        lines = [
            line for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line and not line.startswith("#")
        ]
        rows = list(csv.DictReader(lines))
    except Exception as e:
        logger.error(f"CSV 读取失败: {str(e)}")
        raise ReportError(f"CSV 读取失败: {str(e)}") from e

    if rows and list(rows[0].keys()) != CSV_COLUMNS:
        raise ReportError(f"CSV 列不匹配: {list(rows[0].keys())}")

    summary: Dict[str, float] = {}
    for role in (Role.ENQUEUER, Role.DEQUEUER):
        members = [r for r in rows if r["role"] == role.value]
        if not members:
            continue
        counts = [int(r["ops"]) for r in members]
        shares = [float(r["fair_share"]) for r in members]
        summary[role.value] = sum(counts)
        summary[f"{role.value}_min_attainment"] = float(min(attainment(counts, shares)))
    summary["total"] = summary.get(Role.ENQUEUER.value, 0) + summary.get(Role.DEQUEUER.value, 0)
    return summary


def write_report_schema(path: Union[str, Path]) -> Path:
    """写出 FairnessReport 的 JSON Schema"""
    schema = json.dumps(FairnessReport.model_json_schema(), indent=2, ensure_ascii=False)
    return FileManager(Path(path).parent).save_text(path, schema + "\n")


def _throughput(report: FairnessReport, role: Role) -> int:
    group = report.group(role)
    return group.throughput if group is not None else 0


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def compare_reports(ms: FairnessReport, dnb: FairnessReport, setting: str) -> ThroughputComparison:
    """
    对比同一配置下两种实现的吞吐量

    Raises:
        ValueError: 传入的报告实现不对
    """
    if ms.impl != QueueImpl.MS or dnb.impl != QueueImpl.DNB2:
        raise ValueError(f"需要 (ms, dnb2) 两份报告，实际为 ({ms.impl.value}, {dnb.impl.value})")
    ms_enq, ms_deq = _throughput(ms, Role.ENQUEUER), _throughput(ms, Role.DEQUEUER)
    dnb_enq, dnb_deq = _throughput(dnb, Role.ENQUEUER), _throughput(dnb, Role.DEQUEUER)
    return ThroughputComparison(
        setting=setting,
        ms_enqueue=ms_enq, ms_dequeue=ms_deq, ms_total=ms.total_throughput,
        dnb_enqueue=dnb_enq, dnb_dequeue=dnb_deq, dnb_total=dnb.total_throughput,
        ratio=_ratio(dnb.total_throughput, ms.total_throughput),
        enqueue_ratio=_ratio(dnb_enq, ms_enq),
        dequeue_ratio=_ratio(dnb_deq, ms_deq),
        reference_ratio=REFERENCE_RATIOS.get(setting),
    )


def format_comparison(rows: Sequence[ThroughputComparison]) -> str:
    """按吞吐量对比表的版式输出文本"""
    header = (
        f"{'设置':<6}{'MS NQ':>10}{'MS DQ':>10}{'MS Total':>11}"
        f"{'DNB2 NQ':>10}{'DNB2 DQ':>10}{'DNB2 Total':>12}{'DNB2/MS':>10}{'参考':>10}"
    )
    lines = [header]
    for r in rows:
        reference = f"{r.reference_ratio:.2%}" if r.reference_ratio is not None else "-"
        lines.append(
            f"{r.setting:<6}{r.ms_enqueue:>10}{r.ms_dequeue:>10}{r.ms_total:>11}"
            f"{r.dnb_enqueue:>10}{r.dnb_dequeue:>10}{r.dnb_total:>12}{r.ratio:>10.2%}{reference:>10}"
        )
    return "\n".join(lines)


def emit_sweep(points: Sequence[SweepPoint], path: Union[str, Path]) -> Path:
    """把扫描结果写成 CSV，供外部绘图"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for p in points:
        writer.writerow([
            p.impl.value, _fmt(p.k), p.seeds, _fmt(p.slow_enqueuer_attainment),
            _fmt(p.slow_dequeuer_attainment), _fmt(p.enqueue_throughput), _fmt(p.dequeue_throughput),
        ])
    return FileManager(Path(path).parent).save_text(path, buffer.getvalue())


def pair_reference_note(comparison: ThroughputComparison) -> str:
    """2+2 系统的参考范围说明"""
    lo_e, hi_e = PAIR_REFERENCE_RATIOS["enqueue"]
    lo_d, hi_d = PAIR_REFERENCE_RATIOS["dequeue"]
    return (
        f"入队 {comparison.enqueue_ratio:.1%}（参考 {lo_e:.0%}–{hi_e:.0%}），"
        f"出队 {comparison.dequeue_ratio:.1%}（参考 {lo_d:.0%}–{hi_d:.0%}）"
    )
