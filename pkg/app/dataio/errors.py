"""
文件解析异常

每个异常都带文件、行号与字段坐标，格式为 "path:line: [field] message"。
"""

from typing import Optional

from app.core.errors import SkiTrackError


class DataParseError(SkiTrackError):
    """文件解析异常基类"""
    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        field: Optional[str] = None,
        error_code: str = "PARSE_ERROR",
    ):
        self.path = str(path) if path is not None else None
        self.line = line
        self.field = field
        self.detail = message
        location = self.path or "<input>"
        if line is not None:
            location += f":{line}"
        prefix = f"[{field}] " if field else ""
        super().__init__(f"{location}: {prefix}{message}", error_code)

    def to_dict(self) -> dict:
        data = super().to_dict()
        data.update({"path": self.path, "line": self.line, "field": self.field})
        return data


class OverlappingClipsError(DataParseError):
    def __init__(self, message: str, path=None, line=None, field=None):
        super().__init__(message, path, line, field, "OVERLAPPING_CLIPS")


class ClipGapError(DataParseError):
    def __init__(self, message: str, path=None, line=None, field=None):
        super().__init__(message, path, line, field, "CLIP_GAP")


class UnknownDisciplineError(DataParseError):
    def __init__(self, message: str, path=None, line=None, field=None):
        super().__init__(message, path, line, field, "UNKNOWN_DISCIPLINE")


class CountMismatchError(DataParseError):
    def __init__(self, message: str, path=None, line=None, field=None):
        super().__init__(message, path, line, field, "COUNT_MISMATCH")


class RangeError(DataParseError):
    """数值超出取值范围（置信度、得分、零面积框等）"""
    def __init__(self, message: str, path=None, line=None, field=None, error_code: str = "RANGE_ERROR"):
        super().__init__(message, path, line, field, error_code)


class DuplicateKeyError(DataParseError):
    def __init__(self, message: str, path=None, line=None, field=None):
        super().__init__(message, path, line, field, "DUPLICATE_KEY")


class RecordDimensionError(DataParseError):
    """特征记录维度与期望维度不一致"""
    def __init__(self, message: str, path=None, line=None, field=None):
        super().__init__(message, path, line, field, "DIMENSION_MISMATCH")
