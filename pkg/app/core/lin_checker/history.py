"""
执行历史
并发调用方通过 HistoryRecorder 记录调用/响应事件，序号取自全局单调计数器，
因此事件的全序与进入/退出的真实时间顺序一致。
History 是不可变快照，operations() 把事件配对成操作记录供检查器使用。
"""

import json
import threading
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

from loguru import logger

from app.config import settings
from app.shared.exceptions import HistoryOverflow, MalformedHistory
from app.shared.models import BOTTOM, EventKind, HistoryEvent, Outcome
from app.shared.specs import Call


class OperationRecord(NamedTuple):
    """配对后的一次操作；responded 为 None 表示操作在历史结束时仍未完成"""
    index: int
    process: int
    op: str
    arg: Any
    ret: Any
    invoked: int
    responded: Optional[int]

    @property
    def pending(self) -> bool:
        return self.responded is None

    @property
    def call(self) -> Call:
        return Call(self.op, self.arg)


class History:
    """按序号排列的事件列表"""

    def __init__(self, events: List[HistoryEvent]):
        self.events: List[HistoryEvent] = sorted(events, key=lambda e: e.seq)
        self._operations: Optional[List[OperationRecord]] = None

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def operations(self) -> List[OperationRecord]:
        """
        把每个进程的调用和响应配对

        Raises:
            MalformedHistory: 同一进程的事件未交替出现、响应与调用不匹配或序号重复
        """
        if self._operations is not None:
            return self._operations

        open_ops: Dict[int, HistoryEvent] = {}
        operations: List[OperationRecord] = []
        seen_seq = set()
        for event in self.events:
            if event.seq in seen_seq:
                raise MalformedHistory(f"序号 {event.seq} 重复")
            seen_seq.add(event.seq)

            if event.kind == EventKind.INVOKE:
                if event.process in open_ops:
                    raise MalformedHistory(
                        f"进程 {event.process} 在 seq={event.seq} 再次调用，上一个操作尚未响应"
                    )
                open_ops[event.process] = event
                continue

            invoke = open_ops.pop(event.process, None)
            if invoke is None:
                raise MalformedHistory(f"进程 {event.process} 在 seq={event.seq} 的响应没有对应的调用")
            if invoke.op != event.op:
                raise MalformedHistory(
                    f"进程 {event.process} 的响应 {event.op} 与调用 {invoke.op} 不匹配"
                )
            operations.append(OperationRecord(
                index=0, process=event.process, op=invoke.op, arg=invoke.arg,
                ret=event.ret, invoked=invoke.seq, responded=event.seq,
            ))

        for invoke in open_ops.values():
            operations.append(OperationRecord(
                index=0, process=invoke.process, op=invoke.op, arg=invoke.arg,
                ret=None, invoked=invoke.seq, responded=None,
            ))

        operations.sort(key=lambda o: o.invoked)
        self._operations = [o._replace(index=i) for i, o in enumerate(operations)]
        return self._operations

    def __repr__(self) -> str:
        return f"History({len(self.events)} events)"


class HistoryRecorder:
    """
    线程安全的事件记录器

    取号与追加在同一把锁内完成：事件捕获被串行化，操作本身不会被串行化。
    """

    def __init__(self, capacity: Optional[int] = None):
        self.capacity = capacity or settings.history_capacity
        self._lock = threading.Lock()
        self._seq = 0
        self._events: List[HistoryEvent] = []

    def next_seq(self) -> int:
        """取一个全局序号（线性化点事件与历史事件共用同一计数器）"""
        with self._lock:
            seq = self._seq
            self._seq += 1
            return seq

    def record(self, kind: EventKind, process: int, op: str,
               arg: Any = None, ret: Any = None) -> HistoryEvent:
        """
        追加一个事件

        Raises:
            HistoryOverflow: 容量耗尽
        """
        with self._lock:
            if len(self._events) >= self.capacity:
                raise HistoryOverflow(f"历史记录容量 {self.capacity} 已耗尽")
            event = HistoryEvent(seq=self._seq, kind=kind, process=process, op=op, arg=arg, ret=ret)
            self._seq += 1
            self._events.append(event)
            return event

    def invoke(self, process: int, op: str, arg: Any = None) -> HistoryEvent:
        return self.record(EventKind.INVOKE, process, op, arg=arg)

    def respond(self, process: int, op: str, ret: Any = None) -> HistoryEvent:
        return self.record(EventKind.RESPOND, process, op, ret=ret)

    def snapshot(self) -> History:
        with self._lock:
            return History(list(self._events))

    def __len__(self) -> int:
        return len(self._events)


# ==================== 行格式 ====================
# 每行一个事件: seq kind process op arg ret
# "-" 表示空，bottom 表示 ⊥，done 表示完成，其余值为紧凑 JSON

_NONE = "-"
_BOTTOM = "bottom"
_DONE = "done"


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def _tupled(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def encode_value(value: Any) -> str:
    if value is None:
        return _NONE
    if value is BOTTOM:
        return _BOTTOM
    if isinstance(value, Outcome):
        return value.value
    token = json.dumps(_jsonable(value), ensure_ascii=True, separators=(",", ":"))
    if any(ch.isspace() for ch in token):
        raise MalformedHistory(f"值 {value!r} 含有空白字符，无法写成单个字段")
    return token


def decode_value(token: str) -> Any:
    if token == _NONE:
        return None
    if token == _BOTTOM:
        return BOTTOM
    if token == _DONE:
        return Outcome.DONE
    try:
        return _tupled(json.loads(token))
    except json.JSONDecodeError as e:
        raise MalformedHistory(f"无法解析的值: {token}") from e


def format_history(history: History) -> str:
    """把历史写成行格式文本"""
    lines = []
    for e in history.events:
        lines.append(" ".join([
            str(e.seq), e.kind.value, str(e.process), e.op,
            encode_value(e.arg), encode_value(e.ret),
        ]))
    return "\n".join(lines) + "\n"


def parse_history(text: str) -> History:
    """
    解析行格式文本；空行和以 # 开头的注释行被忽略

    Raises:
        MalformedHistory: 字段数不对或字段无法解析
    """
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 6:
            raise MalformedHistory(f"第 {lineno} 行应有 6 个字段，实际为 {len(fields)}")
        seq, kind, process, op, arg, ret = fields
        try:
            events.append(HistoryEvent(
                seq=int(seq), kind=EventKind(kind), process=int(process), op=op,
                arg=decode_value(arg), ret=decode_value(ret),
            ))
        except ValueError as e:
            raise MalformedHistory(f"第 {lineno} 行无法解析: {e}") from e
    return History(events)


def dump_history(history: History, path: Union[str, Path], header: Optional[str] = None) -> Path:
    """写出重放文件，header 写成注释行"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        text = format_history(history)
        if header:
            text = "".join(f"# {line}\n" for line in header.splitlines()) + text
        path.write_text(text, encoding="utf-8")
        logger.info(f"历史已写出: {path}")
        return path
    except MalformedHistory:
        raise
    except Exception as e:
        logger.error(f"历史写出失败: {str(e)}")
        raise


def load_history(path: Union[str, Path]) -> History:
    """读取重放文件"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except Exception as e:
        logger.error(f"历史读取失败: {str(e)}")
        raise
    return parse_history(text)
