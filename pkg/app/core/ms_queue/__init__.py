"""
Michael–Scott 队列模块
"""

from app.core.ms_queue.queue import MsNode, MsQueue, ms_new

__all__ = ["MsNode", "MsQueue", "ms_new"]
