"""
通用 2-非阻塞构造模块
"""

from app.core.universal.models import AnnRecord, StateRecord
from app.core.universal.universal import Universal2NB, u2nb_new

__all__ = ["AnnRecord", "StateRecord", "Universal2NB", "u2nb_new"]
