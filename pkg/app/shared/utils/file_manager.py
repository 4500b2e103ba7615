"""
文件管理工具类
负责报告和重放文件的路径生成、目录创建与写出
"""

from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from loguru import logger

from app.config import settings
from app.shared.exceptions import ReportError


class FileManager:
    """文件管理器"""

    def __init__(self, base_dir: Optional[Union[str, Path]] = None):
        self.base_dir = Path(base_dir or settings.report_dir)
        self._ensure_directories()

    def _ensure_directories(self):
        """确保输出目录存在"""
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def report_path(self, prefix: str, extension: str, subdir: Optional[str] = None) -> Path:
        """
        生成带时间戳的报告路径

        Args:
            prefix: 文件名前缀，如 bench_dnb2
            extension: 扩展名（不含点）
            subdir: 子目录（可选）

        Returns:
            Path: 报告文件路径
        """
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        directory = self.base_dir / subdir if subdir else self.base_dir
        directory.mkdir(parents=True, exist_ok=True)
        return directory / f"{prefix}_{timestamp}.{extension}"

    def save_text(self, path: Union[str, Path], content: str) -> Path:
        """
        写出文本文件，父目录按需创建

        Raises:
            ReportError: 写出失败
        """
        try:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(content)
            logger.info(f"文件已保存: {path}")
            return path
        except Exception as e:
            logger.error(f"文件保存失败: {str(e)}")
            raise ReportError(f"文件保存失败: {str(e)}") from e

    def save_replay(self, impl: str, seed: int, trace: str, header: Optional[str] = None) -> Path:
        """按实现名和种子保存重放文件"""
        path = self.base_dir / "replays" / f"{impl}-seed{seed}.history"
        if header:
            trace = "".join(f"# {line}\n" for line in header.splitlines()) + trace
        return self.save_text(path, trace)
