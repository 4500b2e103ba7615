"""
进程句柄
每个逻辑进程持有一个句柄：编号、角色、当前操作和共享访问计数。
算法在每次共享内存访问（读、写、CAS）之前调用 access()，
由句柄上的 pacer 决定是否延迟或挂起。
"""

from typing import Optional, Protocol

from app.shared.models import Role


class Pacer(Protocol):
    """共享访问节拍器"""

    def before_access(self, handle: "ProcessHandle", label: str) -> None:
        ...


class ProcessHandle:
    """逻辑进程句柄，不可在并发调用者之间共享"""

    __slots__ = ("pid", "role", "pacer", "current_op", "accesses")

    def __init__(self, pid: int = 0, role: Role = Role.GENERIC, pacer: Optional[Pacer] = None):
        self.pid = pid
        self.role = role
        self.pacer = pacer
        self.current_op: Optional[str] = None
        self.accesses = 0

    def access(self, label: str) -> None:
        """即将进行一次共享访问"""
        self.accesses += 1
        if self.pacer is not None:
            self.pacer.before_access(self, label)

    @classmethod
    def detached(cls) -> "ProcessHandle":
        """不带节拍器的临时句柄，供单线程调用使用"""
        return cls(pid=-1)

    def __repr__(self) -> str:
        return f"ProcessHandle(pid={self.pid}, role={self.role.value}, op={self.current_op})"
