"""
FairQueue 数据模型
定义跨模块传递的记录、配置和报告结构
"""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings


class Outcome(str, Enum):
    """尝试过程的结果"""
    DONE = "done"
    FAILED = "failed"


class Bottom(Enum):
    """空队列返回值 ⊥，与任何载荷以及“未帮助”的 None 都不相等"""
    BOTTOM = "⊥"

    def __repr__(self) -> str:
        return "⊥"

    def __str__(self) -> str:
        return "⊥"


BOTTOM = Bottom.BOTTOM


class Role(str, Enum):
    """进程角色"""
    ENQUEUER = "enqueuer"
    DEQUEUER = "dequeuer"
    GENERIC = "generic"


class QueueImpl(str, Enum):
    """可选的队列实现"""
    DNB2 = "dnb2"
    MS = "ms"


class RunMode(str, Enum):
    """基准测试的参与组"""
    BOTH = "both"
    ENQ_ONLY = "enq-only"
    DEQ_ONLY = "deq-only"


class SpeedSetting(str, Enum):
    """8+8 实验的速度设置"""
    S0 = "S0"  # 全部同速
    S1 = "S1"  # 进程 i 慢 i 倍
    S2 = "S2"  # 进程 i 慢 2^(i-1) 倍


class EventKind(str, Enum):
    """历史事件类型"""
    INVOKE = "invoke"
    RESPOND = "respond"


# ==================== 执行历史 ====================

class HistoryEvent(BaseModel):
    """调用/响应记录"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    seq: int = Field(description="全局单调序号")
    kind: EventKind = Field(description="调用或响应")
    process: int = Field(description="进程编号")
    op: str = Field(description="操作类型，如 enqueue / dequeue / inc")
    arg: Any = Field(None, description="操作参数")
    ret: Any = Field(None, description="返回值（含 ⊥ 与 done）")


class Verdict(BaseModel):
    """线性一致性判定结果"""
    linearizable: bool = Field(description="是否可线性化")
    witness: Optional[List[int]] = Field(None, description="见证顺序（操作编号）")
    explored: int = Field(0, description="搜索访问的状态数")


class CampaignFailure(BaseModel):
    """随机历史测试中的单次失败"""
    seed: int = Field(description="可重放的随机种子")
    reason: str = Field(description="non-linearizable / timeout / invariant / error")
    detail: str = Field("", description="失败细节与完整历史")
    replay_path: Optional[str] = Field(None, description="重放文件路径")


class CampaignReport(BaseModel):
    """随机历史测试汇总"""
    impl: str = Field(description="被测实现")
    processes: int = Field(description="进程数")
    ops: int = Field(description="每次运行的操作总数")
    runs: int = Field(0, description="完成的运行次数")
    failures: List[CampaignFailure] = Field(default_factory=list, description="失败列表")
    elapsed_secs: float = Field(0.0, description="耗时")

    @property
    def passed(self) -> bool:
        return not self.failures


class InvariantReport(BaseModel):
    """结构不变量检查结果"""
    ok: bool = Field(description="全部不变量成立")
    violations: List[str] = Field(default_factory=list, description="违反的不变量")
    first_violation: Optional[str] = Field(None, description="第一个违反项")
    context: Dict[str, Any] = Field(default_factory=dict, description="违反时的现场信息")
    list_length: int = Field(0, description="链表节点数（含初始节点）")
    queue_size: int = Field(0, description="队列状态中的元素个数")


# ==================== 公平性实验 ====================

class ExperimentConfig(BaseModel):
    """基准测试配置"""
    impl: QueueImpl = Field(QueueImpl.DNB2, description="队列实现")
    enqueuers: int = Field(2, ge=0, description="入队进程数")
    dequeuers: int = Field(2, ge=0, description="出队进程数")
    slowdown: List[float] = Field(
        default_factory=list,
        description="每个进程的减速因子 k_i ≥ 1，先入队进程后出队进程；为空表示全部为 1"
    )
    base_delay_mu_us: float = Field(
        default_factory=lambda: settings.default_mu_us, gt=0,
        description="最快进程每次共享访问后的平均延迟（微秒）"
    )
    duration_secs: float = Field(
        default_factory=lambda: settings.default_duration_secs, gt=0, description="运行时长（秒）"
    )
    seed: int = Field(0, description="随机种子")
    mode: RunMode = Field(RunMode.BOTH, description="参与组")
    prefill: int = Field(0, ge=0, description="运行前预先入队的元素个数")
    audit: bool = Field(True, description="运行后检查重复/丢失")

    @field_validator("slowdown")
    @classmethod
    def validate_slowdown(cls, v):
        for k in v:
            if k < 1:
                raise ValueError(f"减速因子必须 ≥ 1，实际为 {k}")
        return v

    @model_validator(mode="after")
    def validate_shape(self):
        total = self.enqueuers + self.dequeuers
        if self.slowdown and len(self.slowdown) != total:
            raise ValueError(f"减速向量长度 {len(self.slowdown)} 与进程数 {total} 不一致")
        if total == 0:
            raise ValueError("至少需要一个进程")
        return self

    def slowdown_of(self, index: int) -> float:
        """第 index 个进程（先入队后出队）的减速因子"""
        return self.slowdown[index] if self.slowdown else 1.0

    @property
    def runs_enqueuers(self) -> bool:
        return self.mode != RunMode.DEQ_ONLY and self.enqueuers > 0

    @property
    def runs_dequeuers(self) -> bool:
        return self.mode != RunMode.ENQ_ONLY and self.dequeuers > 0


class ProcessStats(BaseModel):
    """单个进程的统计"""
    process: int = Field(description="进程编号")
    role: Role = Field(description="角色")
    slowdown: float = Field(description="减速因子")
    ops: int = Field(description="截止前完成的操作数")
    speed: float = Field(description="速度 s_i = 1/(k_i·μ)")
    fair_share: float = Field(description="组内公平份额 s_i/Σs_j")
    attainment: float = Field(description="公平份额达成率")


class GroupSummary(BaseModel):
    """操作组汇总"""
    role: Role = Field(description="角色")
    processes: int = Field(description="进程数")
    throughput: int = Field(description="组内完成的操作总数")


class AuditResult(BaseModel):
    """出队值审计结果"""
    ok: bool = Field(description="无重复、无凭空出现、无丢失、同一生产者有序")
    dequeued: int = Field(0, description="出队的非空值数量")
    bottoms: int = Field(0, description="返回 ⊥ 的次数")
    remaining: int = Field(0, description="运行结束时仍在队列中的元素个数")
    lost: int = Field(0, description="既未出队也不在队列中的入队值个数")
    problems: List[str] = Field(default_factory=list, description="问题列表")


class FairnessReport(BaseModel):
    """公平性实验报告"""
    impl: QueueImpl = Field(description="队列实现")
    config: ExperimentConfig = Field(description="配置回显")
    rows: List[ProcessStats] = Field(default_factory=list, description="每个进程一行")
    groups: List[GroupSummary] = Field(default_factory=list, description="按组汇总")
    total_throughput: int = Field(0, description="总吞吐量")
    elapsed_secs: float = Field(0.0, description="实际运行时长")
    audit: Optional[AuditResult] = Field(None, description="审计结果")

    def group(self, role: Role) -> Optional[GroupSummary]:
        for g in self.groups:
            if g.role == role:
                return g
        return None

    def rows_of(self, role: Role) -> List[ProcessStats]:
        return [r for r in self.rows if r.role == role]


class ThroughputComparison(BaseModel):
    """两种算法的吞吐量对比行"""
    setting: str = Field(description="速度设置名")
    ms_enqueue: int = Field(description="MS 入队吞吐量")
    ms_dequeue: int = Field(description="MS 出队吞吐量")
    ms_total: int = Field(description="MS 总吞吐量")
    dnb_enqueue: int = Field(description="DNB2 入队吞吐量")
    dnb_dequeue: int = Field(description="DNB2 出队吞吐量")
    dnb_total: int = Field(description="DNB2 总吞吐量")
    ratio: float = Field(description="DNB2/MS 总吞吐量之比")
    enqueue_ratio: float = Field(description="入队吞吐量之比")
    dequeue_ratio: float = Field(description="出队吞吐量之比")
    reference_ratio: Optional[float] = Field(None, description="参考测量中的总吞吐量之比")


class SweepPoint(BaseModel):
    """2+2 减速扫描中的一个点（多个种子的中位数）"""
    impl: QueueImpl = Field(description="队列实现")
    k: float = Field(description="慢进程的减速因子")
    seeds: int = Field(description="重复的种子数")
    slow_enqueuer_attainment: float = Field(description="慢入队者达成率中位数")
    slow_dequeuer_attainment: float = Field(description="慢出队者达成率中位数")
    enqueue_throughput: float = Field(description="入队组吞吐量中位数")
    dequeue_throughput: float = Field(description="出队组吞吐量中位数")
