"""
MS 队列测试
"""

import numpy as np
import pytest

from app.core.ms_queue import MsQueue, ms_new
from app.shared.models import BOTTOM, Outcome
from app.shared.specs import Call, QueueSpec
from app.tests.conftest import advance_to


def test_new_queue_is_empty():
    q = ms_new()
    assert q.head is q.tail
    assert q.dequeue() is BOTTOM


def test_fifo():
    q = ms_new()
    assert q.enqueue(1) is Outcome.DONE
    q.enqueue(2)
    assert q.snapshot() == [1, 2]
    assert [q.dequeue(), q.dequeue(), q.dequeue()] == [1, 2, BOTTOM]


def _random_programs(rng: np.random.Generator, programs: int, max_ops: int) -> None:
    spec = QueueSpec()
    for _ in range(programs):
        q, state = MsQueue(), spec.initial()
        for i in range(int(rng.integers(1, max_ops + 1))):
            call = Call("enqueue", i) if rng.random() < 0.5 else Call("dequeue")
            state, expected = spec.apply(call, state)
            actual = q.enqueue(i) if call.op == "enqueue" else q.dequeue()
            assert actual == expected
        assert q.snapshot() == list(state)


def test_random_programs_match_sequential_queue(rng):
    _random_programs(rng, 50, 200)


@pytest.mark.slow
def test_random_programs_match_sequential_queue_full():
    _random_programs(np.random.default_rng(1), 1000, 1000)


def test_second_enqueuer_swings_lagging_tail(probe, sched):
    q = MsQueue(probe=probe)
    sched.spawn(0, lambda h: q.enqueue("a", h))
    sched.run_past(0, "next.cas")
    assert q.tail is q.head

    sched.spawn(1, lambda h: q.enqueue("b", h))
    sched.finish(1)
    assert q.snapshot() == ["a", "b"]
    sched.finish(0)
    assert probe.cas_total(op="enqueue", target="tail", ok=True) == 2
    assert probe.cas_total(op="enqueue", target="tail", ok=False) == 1


def test_value_is_read_before_head_cas(sched):
    q = MsQueue()
    q.enqueue("v")
    sched.spawn(0, lambda h: q.dequeue(h))
    advance_to(sched, 0, "head.cas")
    # 值在 CAS 之前已读出，之后节点内容的变化不影响结果
    q.head.next.get().value = "changed"
    assert sched.finish(0) == "v"


def test_no_cross_process_delivery(probe, rng):
    q = MsQueue(probe=probe)
    for i in range(100):
        if rng.random() < 0.5:
            q.enqueue(i)
        else:
            q.dequeue()
    assert probe.deliveries == 0
    assert probe.cas_total(op="enqueue", target="head") == 0


def test_adversarial_schedule_starves_dequeuer(sched):
    """每次 CAS 前都让另一个出队者先完成一次，被针对的出队者永远无法完成"""
    q = MsQueue()
    for i in range(30):
        q.enqueue(i)
    sched.spawn(0, lambda h: q.dequeue(h))
    done = []

    def greedy(h):
        for _ in range(25):
            done.append(q.dequeue(h))
    sched.spawn(1, greedy)

    for _ in range(20):
        assert advance_to(sched, 0, "head.cas")
        before = len(done)
        while len(done) == before:
            sched.step(1)
        sched.step(0)
    assert not sched.is_done(0)
