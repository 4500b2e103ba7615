"""
多线程压力测试
频繁切换线程，挂探针运行 4 个入队者和 4 个出队者，事后检查结构不变量和出队值
"""

import sys
import threading
from collections import defaultdict
from typing import List

import pytest

from app.core.dnb_queue import DnbQueue, ensure_invariants
from app.core.ms_queue import MsQueue
from app.core.runtime import Probe, ProcessHandle
from app.shared.models import BOTTOM, Role


@pytest.fixture
def fast_switching():
    previous = sys.getswitchinterval()
    sys.setswitchinterval(1e-5)
    yield
    sys.setswitchinterval(previous)


def _stress(queue, enqueuers: int, dequeuers: int, per_enqueuer: int) -> List[List[tuple]]:
    """入队者各自入队 (pid, seq)，出队者在所有入队者结束且队列为空后退出"""
    done = threading.Event()
    received: List[List[tuple]] = [[] for _ in range(dequeuers)]
    errors: List[BaseException] = []

    def enqueue_body(pid: int):
        handle = ProcessHandle(pid=pid, role=Role.ENQUEUER)
        try:
            for seq in range(per_enqueuer):
                queue.enqueue((pid, seq), handle)
        except BaseException as e:
            errors.append(e)

    def dequeue_body(index: int):
        handle = ProcessHandle(pid=enqueuers + index, role=Role.DEQUEUER)
        try:
            while True:
                finished = done.is_set()
                value = queue.dequeue(handle)
                if value is BOTTOM:
                    if finished:
                        return
                    continue
                received[index].append(value)
        except BaseException as e:
            errors.append(e)

    producers = [threading.Thread(target=enqueue_body, args=(pid,)) for pid in range(enqueuers)]
    consumers = [threading.Thread(target=dequeue_body, args=(i,)) for i in range(dequeuers)]
    for t in producers + consumers:
        t.start()
    for t in producers:
        t.join()
    done.set()
    for t in consumers:
        t.join()

    assert not errors, errors[0]
    return received


def _check_values(received: List[List[tuple]], enqueuers: int, per_enqueuer: int) -> None:
    flat = [v for values in received for v in values]
    assert len(flat) == enqueuers * per_enqueuer
    assert set(flat) == {(pid, seq) for pid in range(enqueuers) for seq in range(per_enqueuer)}
    for values in received:
        last = defaultdict(lambda: -1)
        for pid, seq in values:
            assert seq > last[pid]
            last[pid] = seq


@pytest.mark.usefixtures("fast_switching")
class TestStress:

    def test_dnb2_under_contention(self):
        probe = Probe()
        queue = DnbQueue(probe=probe)
        received = _stress(queue, 4, 4, 2_000)
        _check_values(received, 4, 2_000)
        report = ensure_invariants(queue, probe)
        assert report.queue_size == 0
        assert probe.cas_total(op="enqueue", target="head") == 0

    def test_ms_under_contention(self):
        probe = Probe()
        queue = MsQueue(probe=probe)
        received = _stress(queue, 4, 4, 2_000)
        _check_values(received, 4, 2_000)
        probe.assert_clean()
        assert probe.deliveries == 0

    @pytest.mark.slow
    def test_dnb2_million_operations(self):
        probe = Probe()
        queue = DnbQueue(probe=probe)
        received = _stress(queue, 4, 4, 125_000)
        _check_values(received, 4, 125_000)
        ensure_invariants(queue, probe)
