"""
DNB-2 队列模块
"""

from app.core.dnb_queue.invariants import ensure_invariants, probe_invariants
from app.core.dnb_queue.models import HeadDescriptor, QueueNode, ResultCell
from app.core.dnb_queue.queue import DnbQueue, new_queue

__all__ = [
    "DnbQueue", "new_queue", "QueueNode", "ResultCell", "HeadDescriptor",
    "probe_invariants", "ensure_invariants",
]
