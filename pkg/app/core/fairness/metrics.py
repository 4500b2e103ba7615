"""
公平性指标
速度 s_i = 1/(k_i·μ)，公平份额 f_i = s_i/Σs_j（在同一操作组内计算），
达成率 = (count_i/Σcount_j)/f_i。
"""

from typing import List, Sequence

import numpy as np

from app.shared.models import SpeedSetting


def speeds_of(slowdowns: Sequence[float], mu_us: float) -> np.ndarray:
    """每秒可执行的共享访问次数"""
    k = np.asarray(slowdowns, dtype=float)
    if mu_us <= 0:
        raise ValueError(f"平均延迟必须为正，实际为 {mu_us}")
    return 1e6 / (k * mu_us)


def compute_fair_share(speeds: Sequence[float]) -> np.ndarray:
    """
    计算公平份额

    Args:
        speeds: 组内各进程的速度，均须为正

    Returns:
        np.ndarray: 与输入等长、和为 1 的份额
    """
    s = np.asarray(speeds, dtype=float)
    if s.size == 0:
        raise ValueError("速度向量不能为空")
    if np.any(s <= 0):
        raise ValueError(f"速度必须为正: {s.tolist()}")
    return s / s.sum()


def attainment(counts: Sequence[int], shares: Sequence[float]) -> np.ndarray:
    """公平份额达成率；组内没有完成任何操作时全部为 0"""
    c = np.asarray(counts, dtype=float)
    f = np.asarray(shares, dtype=float)
    total = c.sum()
    if total == 0:
        return np.zeros_like(c)
    return (c / total) / f


def preset_slowdowns(setting: SpeedSetting, enqueuers: int = 8, dequeuers: int = 8) -> List[float]:
    """
    预设速度的减速向量（先入队进程后出队进程）

    S0 全部同速；S1 组内第 i 个进程慢 i 倍；S2 慢 2^(i-1) 倍。
    """
    def group(n: int) -> List[float]:
        i = np.arange(1, n + 1, dtype=float)
        if setting == SpeedSetting.S0:
            return [1.0] * n
        if setting == SpeedSetting.S1:
            return i.tolist()
        return np.power(2.0, i - 1).tolist()

    return group(enqueuers) + group(dequeuers)


def pair_slowdowns(k: float) -> List[float]:
    """2+2 系统：每组第二个进程慢 k 倍"""
    if k < 1:
        raise ValueError(f"减速因子必须 ≥ 1，实际为 {k}")
    return [1.0, float(k), 1.0, float(k)]


def median(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("没有可取中位数的值")
    return float(np.median(np.asarray(values, dtype=float)))
