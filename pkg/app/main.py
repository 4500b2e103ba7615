"""
FairQueue 命令行
bench / sweep / compare 运行公平性实验，campaign / check 做线性一致性测试。
每个命令返回退出码：发现不变量违反、审计失败或不可线性化的历史时返回 1。
"""

import argparse
from pathlib import Path
from typing import List, Optional

from loguru import logger

from app.config import settings
from app.core.fairness import (
    DelaySleeper, compare_reports, emit_report, emit_sweep, format_comparison,
    pair_reference_note, pair_slowdowns, preset_slowdowns, run_experiment, sweep,
    write_report_schema,
)
from app.core.lin_checker import TARGETS, check, load_history, random_history_campaign
from app.shared.exceptions import FairQueueError, HistoryTooLarge, InvariantViolation
from app.shared.models import ExperimentConfig, QueueImpl, RunMode, SpeedSetting
from app.shared.specs import SPECS, spec_by_name
from app.shared.utils.file_manager import FileManager


def parse_floats(text: str) -> List[float]:
    """解析逗号分隔的数值列表"""
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析的数值列表: {text}")


def _config_from_args(args, impl: QueueImpl, slowdown: Optional[List[float]] = None) -> ExperimentConfig:
    if slowdown is None:
        if args.setting:
            slowdown = preset_slowdowns(SpeedSetting(args.setting), args.enq, args.deq)
        else:
            slowdown = args.slowdown or []
    return ExperimentConfig(
        impl=impl, enqueuers=args.enq, dequeuers=args.deq, slowdown=slowdown,
        base_delay_mu_us=args.mu_us, duration_secs=args.secs, seed=args.seed,
        mode=RunMode(args.mode), prefill=args.prefill,
    )


def cmd_bench(args) -> int:
    """运行一次基准测试并写出报告"""
    cfg = _config_from_args(args, QueueImpl(args.impl))
    try:
        report = run_experiment(cfg, instrument=args.instrument or None)
    except InvariantViolation as e:
        logger.error(f"❌ 不变量违反: {e}")
        return 1

    for row in report.rows:
        logger.info(
            f"进程 {row.process:>2} {row.role.value:<8} k={row.slowdown:<5g} "
            f"ops={row.ops:<8} 份额={row.fair_share:.2%} 达成率={row.attainment:.1%}"
        )
    out = args.out or FileManager().report_path(f"bench_{cfg.impl.value}", args.format)
    emit_report(report, out, args.format)
    if args.schema_out:
        write_report_schema(args.schema_out)
    if report.audit is not None and not report.audit.ok:
        return 1
    return 0


def cmd_sweep(args) -> int:
    """2+2 系统的减速扫描"""
    base = ExperimentConfig(base_delay_mu_us=args.mu_us, duration_secs=args.secs, seed=args.seed)
    points = sweep(QueueImpl(args.impl), args.ks, seeds=args.seeds, base=base)
    out = args.out or FileManager().report_path(f"sweep_{args.impl}", "csv")
    emit_sweep(points, out)
    return 0


def cmd_compare(args) -> int:
    """同一配置下对比 MS 与 DNB2 的吞吐量"""
    if args.pair_k is not None:
        args.enq, args.deq = 2, 2
        slowdown = pair_slowdowns(args.pair_k)
        setting = f"k={args.pair_k:g}"
    else:
        slowdown = preset_slowdowns(SpeedSetting(args.setting or "S0"), args.enq, args.deq)
        setting = args.setting or "S0"

    sleeper = DelaySleeper()
    sleeper.calibrate()
    reports = {}
    for impl in (QueueImpl.MS, QueueImpl.DNB2):
        reports[impl] = run_experiment(_config_from_args(args, impl, slowdown), sleeper=sleeper)
        if args.out_dir:
            emit_report(reports[impl], Path(args.out_dir) / f"compare_{setting}_{impl.value}.json", "json")

    row = compare_reports(reports[QueueImpl.MS], reports[QueueImpl.DNB2], setting)
    print(format_comparison([row]))
    if args.pair_k is not None:
        print(pair_reference_note(row))
    failed = [r for r in reports.values() if r.audit is not None and not r.audit.ok]
    return 1 if failed else 0


def cmd_campaign(args) -> int:
    """随机历史测试"""
    report = random_history_campaign(
        args.impl, args.procs, args.ops, seeds=args.seeds, seed_start=args.seed_start,
        max_steps=args.max_steps, dump_dir=args.dump_dir,
    )
    for failure in report.failures[:10]:
        logger.error(f"种子 {failure.seed}: {failure.reason} {failure.replay_path or ''}")
    return 0 if report.passed else 1


def cmd_check(args) -> int:
    """检查历史文件"""
    history = load_history(args.history_file)
    try:
        verdict = check(history, spec_by_name(args.spec))
    except HistoryTooLarge as e:
        logger.error(f"❌ {e}")
        return 1
    if verdict.linearizable:
        logger.info(f"✅ 可线性化，见证顺序: {verdict.witness}")
        return 0
    logger.error(f"❌ 不可线性化（访问了 {verdict.explored} 个状态）")
    return 1


def cmd_schema(args) -> int:
    """写出报告的 JSON Schema"""
    write_report_schema(args.path)
    return 0


def _add_experiment_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--enq", type=int, default=2, help="入队进程数")
    parser.add_argument("--deq", type=int, default=2, help="出队进程数")
    parser.add_argument("--slowdown", type=parse_floats, default=None, help="减速向量，如 1,11,1,11")
    parser.add_argument("--setting", choices=[s.value for s in SpeedSetting], help="预设速度")
    parser.add_argument("--mu-us", type=float, default=settings.default_mu_us, help="最快进程的平均延迟（微秒）")
    parser.add_argument("--secs", type=float, default=settings.default_duration_secs, help="运行时长（秒）")
    parser.add_argument("--seed", type=int, default=0, help="随机种子")
    parser.add_argument("--mode", choices=[m.value for m in RunMode], default=RunMode.BOTH.value, help="参与组")
    parser.add_argument("--prefill", type=int, default=0, help="预先入队的元素个数")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=f"{settings.app_name} - 公平非阻塞队列实验平台")
    parser.add_argument("--debug", action="store_true", help="启用调试日志")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="运行一次公平性实验")
    bench.add_argument("--impl", choices=[i.value for i in QueueImpl], default=QueueImpl.DNB2.value)
    _add_experiment_args(bench)
    bench.add_argument("--out", help="报告路径")
    bench.add_argument("--format", choices=["csv", "json"], default="csv")
    bench.add_argument("--instrument", action="store_true", help="挂检测探针")
    bench.add_argument("--schema-out", help="同时写出 JSON Schema")
    bench.set_defaults(func=cmd_bench)

    sw = sub.add_parser("sweep", help="2+2 系统的减速扫描")
    sw.add_argument("--impl", choices=[i.value for i in QueueImpl], default=QueueImpl.DNB2.value)
    sw.add_argument("--ks", type=parse_floats, default=[2, 5, 8, 11], help="减速因子列表")
    sw.add_argument("--seeds", type=int, default=5, help="每个 k 的重复次数")
    sw.add_argument("--mu-us", type=float, default=settings.default_mu_us)
    sw.add_argument("--secs", type=float, default=settings.default_duration_secs)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--out", help="CSV 路径")
    sw.set_defaults(func=cmd_sweep)

    cmp_ = sub.add_parser("compare", help="对比 MS 与 DNB2 的吞吐量")
    _add_experiment_args(cmp_)
    cmp_.add_argument("--pair-k", type=float, default=None, help="2+2 系统中慢进程的减速因子")
    cmp_.add_argument("--out-dir", help="报告目录")
    cmp_.set_defaults(func=cmd_compare)

    camp = sub.add_parser("campaign", help="随机历史线性一致性测试")
    camp.add_argument("--impl", choices=sorted(TARGETS), default="dnb2")
    camp.add_argument("--procs", type=int, default=3)
    camp.add_argument("--ops", type=int, default=9)
    camp.add_argument("--seeds", type=int, default=settings.campaign_seeds)
    camp.add_argument("--seed-start", type=int, default=0)
    camp.add_argument("--max-steps", type=int, default=settings.campaign_step_budget)
    camp.add_argument("--dump-dir", default=str(Path(settings.report_dir)), help="失败历史的输出目录")
    camp.set_defaults(func=cmd_campaign)

    chk = sub.add_parser("check", help="检查历史文件的线性一致性")
    chk.add_argument("history_file")
    chk.add_argument("--spec", choices=sorted(SPECS), default="queue")
    chk.set_defaults(func=cmd_check)

    schema = sub.add_parser("schema", help="写出报告的 JSON Schema")
    schema.add_argument("path")
    schema.set_defaults(func=cmd_schema)
    return parser


def dispatch(args) -> int:
    """执行子命令；领域错误记录日志并返回 1"""
    try:
        return args.func(args)
    except (FairQueueError, ValueError) as e:
        logger.error(f"❌ {args.command} 执行失败: {str(e)}")
        return 1
