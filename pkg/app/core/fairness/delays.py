"""
速度控制
每次共享访问都注入一段服从指数分布的延迟，减速因子为 k 的进程均值为 k·μ。
长延迟的大部分交给 time.sleep，低于阈值的剩余部分忙等，
阈值与 sleep 的额外开销在启动时校准。
"""

import threading
import time
from typing import Optional

import numpy as np
from loguru import logger

from app.config import settings
from app.core.runtime.process import ProcessHandle


def sample_delay(rng: np.random.Generator, mu_us: float) -> float:
    """
    抽取一次延迟

    Args:
        rng: 进程私有的随机数生成器
        mu_us: 平均延迟（微秒），必须为正

    Returns:
        float: 延迟时长（微秒）
    """
    if mu_us <= 0:
        raise ValueError(f"平均延迟必须为正，实际为 {mu_us}")
    return float(rng.exponential(mu_us))


def sample_delays(rng: np.random.Generator, mu_us: float, size: int) -> np.ndarray:
    """批量抽取延迟（微秒）"""
    if mu_us <= 0:
        raise ValueError(f"平均延迟必须为正，实际为 {mu_us}")
    return rng.exponential(mu_us, size=size)


class DelaySleeper:
    """睡眠 + 忙等的混合等待器"""

    def __init__(self, spin_threshold_us: Optional[float] = None):
        self.spin_threshold_us = (
            settings.spin_threshold_us if spin_threshold_us is None else spin_threshold_us
        )
        self.overhead_us = 0.0

    def calibrate(self, rounds: Optional[int] = None) -> float:
        """测量 time.sleep 的平均超时量（微秒）"""
        rounds = rounds or settings.sleep_calibration_rounds
        request = max(self.spin_threshold_us, 1.0) / 1e6
        overshoot = []
        for _ in range(rounds):
            start = time.perf_counter()
            time.sleep(request)
            overshoot.append((time.perf_counter() - start - request) * 1e6)
        self.overhead_us = max(float(np.median(overshoot)), 0.0)
        logger.debug(f"sleep 校准完成: 超时量中位数 {self.overhead_us:.1f}µs")
        return self.overhead_us

    def wait(self, delay_us: float) -> None:
        if delay_us <= 0:
            return
        deadline = time.perf_counter() + delay_us / 1e6
        bulk_us = delay_us - self.spin_threshold_us - self.overhead_us
        if bulk_us > 0:
            time.sleep(bulk_us / 1e6)
        while time.perf_counter() < deadline:
            pass


class ExpDelayPacer:
    """
    指数延迟节拍器

    每次共享访问前等待 Exp(μ·k)，延迟序列只由 rng 决定。
    第 k 次访问前的等待就是第 k-1 次访问之后的延迟，相邻两次访问之间
    恰好隔着一段延迟，与“访问后立即延迟”得到相同的访问速率。
    stop 置位后不再等待，让截止后的在途操作尽快结束，这些访问计入 skipped。
    """

    _BATCH = 4096

    def __init__(self, mu_us: float, slowdown: float, rng: np.random.Generator,
                 sleeper: DelaySleeper, stop: Optional[threading.Event] = None):
        if slowdown < 1:
            raise ValueError(f"减速因子必须 ≥ 1，实际为 {slowdown}")
        self.mean_us = mu_us * slowdown
        self.rng = rng
        self.sleeper = sleeper
        self.stop = stop
        self.delays = 0
        self.skipped = 0
        self.total_delay_us = 0.0
        self._buffer = sample_delays(rng, self.mean_us, self._BATCH)
        self._next = 0

    def _draw(self) -> float:
        if self._next == len(self._buffer):
            self._buffer = sample_delays(self.rng, self.mean_us, self._BATCH)
            self._next = 0
        value = float(self._buffer[self._next])
        self._next += 1
        return value

    def before_access(self, handle: ProcessHandle, label: str) -> None:
        if self.stop is not None and self.stop.is_set():
            self.skipped += 1
            return
        delay = self._draw()
        self.sleeper.wait(delay)
        # 只统计已经等完的延迟
        self.delays += 1
        self.total_delay_us += delay
