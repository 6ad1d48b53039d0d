"""
边界框几何工具

坐标约定：左上角 + 宽高，连续像素坐标，面积 = w * h（不做 +1 像素修正）
"""

import math
import numbers
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from app.core.errors import SkiTrackError


class GeometryError(SkiTrackError):
    """几何异常基类"""
    def __init__(self, message: str, error_code: str = "GEOMETRY_ERROR"):
        super().__init__(message, error_code)


class InvalidGeometryError(GeometryError):
    """非法边界框（非有限值或面积为零）"""
    def __init__(self, message: str = "非法边界框"):
        super().__init__(message, "INVALID_GEOMETRY")


class OutOfFrameError(GeometryError):
    """边界框完全位于图像之外"""
    def __init__(self, message: str = "边界框位于图像之外"):
        super().__init__(message, "OUT_OF_FRAME")


@dataclass(frozen=True)
class BoundingBox:
    """轴对齐边界框（像素）"""
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not isinstance(value, numbers.Real) or not math.isfinite(value):
                raise InvalidGeometryError(f"边界框字段 {name} 不是有限实数: {value!r}")
            object.__setattr__(self, name, float(value))

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BoundingBox":
        if len(values) != 4:
            raise InvalidGeometryError(f"边界框需要4个数值，实际为 {len(values)} 个")
        return cls(*values)

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> Tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def is_valid(self) -> bool:
        return self.w > 0 and self.h > 0

    def require_valid(self) -> "BoundingBox":
        if not self.is_valid():
            raise InvalidGeometryError(f"边界框宽高必须为正: w={self.w}, h={self.h}")
        return self

    def to_list(self) -> List[float]:
        return [self.x, self.y, self.w, self.h]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """
    计算两个边界框的交并比

    Args:
        a, b: 宽高为正的边界框

    Returns:
        float: IoU，范围 [0, 1]；不相交时为 0

    Raises:
        InvalidGeometryError: 任一边界框面积为零或为负
    """
    a.require_valid()
    b.require_valid()

    inter_w = min(a.x2, b.x2) - max(a.x, b.x)
    inter_h = min(a.y2, b.y2) - max(a.y, b.y)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0

    intersection = inter_w * inter_h
    union = a.area + b.area - intersection
    return min(1.0, intersection / union)


def clamp_box(b: BoundingBox, width: int, height: int) -> BoundingBox:
    """将边界框裁剪到图像矩形内，交集为空时抛出 OutOfFrameError"""
    if width <= 0 or height <= 0:
        raise InvalidGeometryError(f"图像尺寸必须为正: {width}x{height}")

    x1 = max(b.x, 0.0)
    y1 = max(b.y, 0.0)
    x2 = min(b.x2, float(width))
    y2 = min(b.y2, float(height))
    if x2 <= x1 or y2 <= y1:
        raise OutOfFrameError(f"边界框 {b.to_list()} 与 {width}x{height} 图像无交集")
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    """两个边界框中心点的欧氏距离（像素）"""
    a.require_valid()
    b.require_valid()
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)
