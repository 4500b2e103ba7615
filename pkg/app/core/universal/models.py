"""
通用构造的共享记录
"""

from typing import Any, Hashable, NamedTuple, Optional

from app.core.dnb_queue.models import ResultCell
from app.shared.specs import Call


class AnnRecord(NamedTuple):
    """公告记录 (call, addr)，作为一个整体写入公告寄存器"""
    call: Optional[Call]
    addr: ResultCell


class StateRecord(NamedTuple):
    """
    状态记录 (state, response, addr)，发布后不可变

    response 为 None 只出现在初始记录中。
    """
    state: Hashable
    response: Any
    addr: ResultCell
