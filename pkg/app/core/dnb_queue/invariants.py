"""
DNB-2 队列结构不变量检查
只能在静止点或步进调度器暂停所有进程时调用。
"""

from typing import Any, Dict, List, Optional

from loguru import logger

from app.core.dnb_queue.queue import DnbQueue
from app.core.runtime.probe import Probe
from app.shared.exceptions import InvariantViolation
from app.shared.models import InvariantReport


def probe_invariants(queue: DnbQueue, probe: Optional[Probe] = None) -> InvariantReport:
    """
    从初始节点遍历链表并检查结构不变量

    Args:
        queue: 被检查的队列
        probe: 运行期探针；提供时一并检查单次追加、单调性等记录

    Returns:
        InvariantReport: first_violation 为第一个违反项，context 为现场信息
    """
    violations: List[str] = []
    context: Dict[str, Any] = {}
    head = queue.head
    tail = queue.tail

    def violate(message: str, **ctx):
        if not violations:
            context.update(ctx)
        violations.append(message)

    # 遍历链表，记录每个节点的位置
    order: List[Any] = []
    index: Dict[int, int] = {}
    node = queue.init_node
    while node is not None:
        if id(node) in index:
            violate("链表出现环", node=repr(node), position=len(order))
            break
        index[id(node)] = len(order)
        order.append(node)
        node = node.next.get()

    tail_pos = index.get(id(tail))
    head_pos = index.get(id(head.ptr))

    if tail_pos is None:
        violate("尾指针不在链表中", tail=repr(tail))
    if head_pos is None:
        violate("head.ptr 不在链表中", head_ptr=repr(head.ptr))
    if not tail.threaded:
        violate("尾指针指向的节点 flag 不为 1", tail=repr(tail))

    queue_size = 0
    if tail_pos is not None and head_pos is not None:
        if head_pos > tail_pos:
            violate("尾指针位于 head.ptr 之前", head_pos=head_pos, tail_pos=tail_pos)
        else:
            queue_size = tail_pos - head_pos
        for position, n in enumerate(order[:tail_pos + 1]):
            if not n.threaded:
                violate("尾指针之前的节点 flag 不为 1", node=repr(n), position=position)
                break
        if len(order) - tail_pos > 2:
            violate("尾指针落后超过一个节点", tail_pos=tail_pos, list_length=len(order))

    if queue.enq_announce is None or queue.deq_announce is None:
        violate("公告寄存器为空")

    if probe is not None:
        for message in probe.violations + probe.monotonicity_violations():
            violate(message)

    report = InvariantReport(
        ok=not violations,
        violations=violations,
        first_violation=violations[0] if violations else None,
        context=context,
        list_length=len(order),
        queue_size=queue_size,
    )
    if not report.ok:
        logger.warning(f"⚠️ 不变量检查失败: {report.first_violation} {context}")
    return report


def ensure_invariants(queue: DnbQueue, probe: Optional[Probe] = None) -> InvariantReport:
    """检查不变量，失败时抛出 InvariantViolation"""
    report = probe_invariants(queue, probe)
    if not report.ok:
        raise InvariantViolation(report.first_violation, violations=report.violations,
                                 context=report.context)
    return report
