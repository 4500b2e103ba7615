"""
线性一致性检查模块
"""

from app.core.lin_checker.campaign import (
    TARGETS, CampaignTarget, DnbTarget, MsTarget, UniversalTarget,
    random_history_campaign, register_target, run_seed,
)
from app.core.lin_checker.checker import brute_force_check, check, cross_check_lin_points
from app.core.lin_checker.history import (
    History, HistoryRecorder, OperationRecord,
    dump_history, format_history, load_history, parse_history,
)

__all__ = [
    "History", "HistoryRecorder", "OperationRecord",
    "dump_history", "load_history", "format_history", "parse_history",
    "check", "brute_force_check", "cross_check_lin_points",
    "CampaignTarget", "DnbTarget", "MsTarget", "UniversalTarget", "TARGETS",
    "register_target", "run_seed", "random_history_campaign",
]
