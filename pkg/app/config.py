"""
FairQueue 配置文件
"""

from typing import Optional
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """应用配置"""

    # 应用基础配置
    app_name: str = "FairQueue Lab"
    app_version: str = "1.0.0"
    debug: bool = False

    # 输出目录
    log_dir: str = "logs"
    report_dir: str = "reports"

    # 速度控制配置（微秒）
    default_mu_us: float = 1000.0  # 最快进程的平均延迟
    spin_threshold_us: float = 200.0  # 低于此值的剩余延迟用忙等
    sleep_calibration_rounds: int = 50

    # 基准测试配置
    default_duration_secs: float = 30.0
    grace_secs: float = 5.0  # 截止后等待在途操作结束的时间

    # 线性一致性检查配置
    max_check_ops: int = 14  # 搜索是指数级的，超过即拒绝
    history_capacity: int = 100_000

    # 随机历史测试配置
    campaign_seeds: int = 10_000
    campaign_step_budget: int = 20_000

    # 有界进展测试配置
    liveness_min_ops: int = 100
    liveness_step_budget: int = 1_000_000

    # 检测探针（基准测试时关闭）
    instrument: bool = False

    # 寄存器规格的取值范围
    register_domain: int = 4

    # 子进程工作线程名称前缀
    worker_name_prefix: Optional[str] = "fq"

    model_config = {
        "env_file": ".env",
        "case_sensitive": False,
        "extra": "ignore"
    }


# 全局配置实例
settings = Settings()
