"""
线性一致性检查
对小规模历史做穷举搜索：每一步从尚未线性化、且调用早于最早未线性化响应的操作中
选一个，在顺序规格上执行并核对响应。未完成的操作可以被线性化（其响应不受约束，
任何可行响应都算完成）或被丢弃。以 (已线性化集合, 规格状态) 记忆失败的搜索分支。
"""

import itertools
from typing import Any, Dict, List, Optional, Set, Tuple

from loguru import logger

from app.config import settings
from app.core.lin_checker.history import History, OperationRecord
from app.core.runtime.probe import LinPoint
from app.shared.exceptions import HistoryTooLarge
from app.shared.models import Verdict
from app.shared.specs import SeqSpec

BRUTE_FORCE_LIMIT = 9


def _same(expected: Any, actual: Any) -> bool:
    return expected is actual or expected == actual


def check(history: History, spec: SeqSpec, max_ops: Optional[int] = None) -> Verdict:
    """
    判定历史是否可线性化

    Args:
        history: 执行历史
        spec: 顺序规格
        max_ops: 操作数上限，默认取配置

    Returns:
        Verdict: 可线性化时 witness 为操作编号的顺序（被丢弃的未完成操作不出现）

    Raises:
        HistoryTooLarge: 超过上限时明确拒绝
        MalformedHistory: 历史格式错误
    """
    limit = max_ops or settings.max_check_ops
    ops = history.operations()
    if len(ops) > limit:
        raise HistoryTooLarge(len(ops), limit)

    completed = [o for o in ops if not o.pending]
    required = 0
    for o in completed:
        required |= 1 << o.index

    failed: Set[Tuple[int, Any]] = set()
    explored = 0

    def search(mask: int, state: Any) -> Optional[List[int]]:
        nonlocal explored
        if mask & required == required:
            return []
        key = (mask, state)
        if key in failed:
            return None
        explored += 1

        # 最早的未线性化响应之前调用的操作才能排在下一个
        horizon = min(o.responded for o in completed if not mask >> o.index & 1)
        for o in ops:
            if mask >> o.index & 1 or o.invoked > horizon:
                continue
            new_state, response = spec.apply(o.call, state)
            if not o.pending and not _same(response, o.ret):
                continue
            rest = search(mask | 1 << o.index, new_state)
            if rest is not None:
                return [o.index] + rest

        failed.add(key)
        return None

    witness = search(0, spec.initial())
    verdict = Verdict(linearizable=witness is not None, witness=witness, explored=explored)
    logger.debug(f"🔍 线性一致性检查: {len(ops)} 个操作, 访问 {explored} 个状态, 结果 {verdict.linearizable}")
    return verdict


def _respects_real_time(order: Tuple[OperationRecord, ...]) -> bool:
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            if b.responded is not None and b.responded < a.invoked:
                return False
    return True


def _legal(order: Tuple[OperationRecord, ...], spec: SeqSpec) -> bool:
    state = spec.initial()
    for o in order:
        state, response = spec.apply(o.call, state)
        if not o.pending and not _same(response, o.ret):
            return False
    return True


def brute_force_check(history: History, spec: SeqSpec, max_ops: int = BRUTE_FORCE_LIMIT) -> Verdict:
    """
    不剪枝的对照实现：枚举未完成操作的每个子集和每个全排列

    只用于校验 check 的结果，规模上限很小。
    """
    ops = history.operations()
    if len(ops) > max_ops:
        raise HistoryTooLarge(len(ops), max_ops)

    completed = [o for o in ops if not o.pending]
    pending = [o for o in ops if o.pending]
    explored = 0
    for size in range(len(pending) + 1):
        for kept in itertools.combinations(pending, size):
            for order in itertools.permutations(completed + list(kept)):
                explored += 1
                if _respects_real_time(order) and _legal(order, spec):
                    return Verdict(linearizable=True, witness=[o.index for o in order], explored=explored)
    return Verdict(linearizable=False, explored=explored)


def cross_check_lin_points(history: History, lin_points: List[LinPoint]) -> List[str]:
    """
    用队列内部的线性化点事件交叉检查历史

    每个点必须落在对应操作的调用与响应之间，且出队点消费值的顺序
    必须是入队点顺序的前缀。要求入队值在历史内唯一。

    Returns:
        问题列表，为空表示一致
    """
    problems: List[str] = []
    ops = history.operations()
    enqueues: Dict[Any, OperationRecord] = {o.arg: o for o in ops if o.op == "enqueue"}
    dequeues: Dict[Any, OperationRecord] = {
        o.ret: o for o in ops if o.op == "dequeue" and not o.pending
    }

    for point in lin_points:
        table = enqueues if point.kind == "enqueue" else dequeues
        op = table.get(point.value)
        if op is None:
            # 出队操作尚未响应时找不到对应记录
            continue
        if point.seq < op.invoked or (op.responded is not None and point.seq > op.responded):
            problems.append(
                f"{point.kind}({point.value!r}) 的线性化点 seq={point.seq} "
                f"不在操作区间 [{op.invoked}, {op.responded}] 内"
            )

    enq_order = [p.value for p in lin_points if p.kind == "enqueue"]
    deq_order = [p.value for p in lin_points if p.kind == "dequeue"]
    if deq_order != enq_order[:len(deq_order)]:
        problems.append(f"出队线性化点顺序 {deq_order} 不是入队顺序 {enq_order} 的前缀")
    return problems
