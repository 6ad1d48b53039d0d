"""
统一异常定义

所有模块异常的基类，携带可读消息与机器可读的错误码
"""

from typing import Optional


class SkiTrackError(Exception):
    """流水线异常基类"""
    def __init__(self, message: str, error_code: str = "SKITRACK_ERROR"):
        self.message = message
        self.error_code = error_code
        super().__init__(self.message)

    def to_dict(self) -> dict:
        return {"error_code": self.error_code, "message": self.message}


class ConfigError(SkiTrackError):
    """配置错误（在任何处理开始前抛出）"""
    def __init__(self, message: str):
        super().__init__(message, "CONFIG_ERROR")


class StageError(SkiTrackError):
    """带阶段归属的流水线错误"""
    def __init__(self, stage: str, sequence_id: Optional[str], cause: SkiTrackError):
        self.stage = stage
        self.sequence_id = sequence_id
        self.cause = cause
        where = f"{sequence_id}: " if sequence_id else ""
        super().__init__(f"[{stage}] {where}{cause.message}", cause.error_code)
