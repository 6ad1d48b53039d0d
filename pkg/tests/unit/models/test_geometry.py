"""
边界框几何单元测试

IoU 与像素栅格化计数的独立实现逐一比对。
"""

import math

import numpy as np
import pytest

from app.models.geometry import (
    BoundingBox,
    InvalidGeometryError,
    OutOfFrameError,
    center_distance,
    clamp_box,
    iou,
)

GRID = 40


def _raster(box: BoundingBox) -> np.ndarray:
    """整数坐标框覆盖的单位像素格"""
    mask = np.zeros((GRID, GRID), dtype=bool)
    mask[int(box.y):int(box.y + box.h), int(box.x):int(box.x + box.w)] = True
    return mask


def _raster_iou(a: BoundingBox, b: BoundingBox) -> float:
    ma, mb = _raster(a), _raster(b)
    union = np.logical_or(ma, mb).sum()
    return float(np.logical_and(ma, mb).sum()) / float(union)


def _random_box(rng: np.random.Generator) -> BoundingBox:
    w, h = rng.integers(1, 15, size=2)
    x = rng.integers(0, GRID - w + 1)
    y = rng.integers(0, GRID - h + 1)
    return BoundingBox(int(x), int(y), int(w), int(h))


class TestIoU:
    """IoU 计算测试"""

    def test_matches_raster_oracle(self):
        """测试 10000 对随机整数框与栅格化结果一致"""
        rng = np.random.default_rng(2024)
        for _ in range(10000):
            a, b = _random_box(rng), _random_box(rng)
            assert iou(a, b) == pytest.approx(_raster_iou(a, b), abs=1e-12)

    def test_symmetric_and_bounded(self):
        """测试对称性与取值范围"""
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a = BoundingBox(*rng.uniform(-50, 50, 2), *rng.uniform(0.5, 30, 2))
            b = BoundingBox(*rng.uniform(-50, 50, 2), *rng.uniform(0.5, 30, 2))
            value = iou(a, b)
            assert 0.0 <= value <= 1.0
            assert value == iou(b, a)

    def test_identity(self):
        box = BoundingBox(10.5, 20.25, 33.0, 7.5)
        assert iou(box, box) == 1.0

    def test_disjoint_and_touching(self):
        """测试不相交与仅边相接的框 IoU 为 0"""
        a = BoundingBox(0, 0, 10, 10)
        assert iou(a, BoundingBox(20, 20, 5, 5)) == 0.0
        assert iou(a, BoundingBox(10, 0, 10, 10)) == 0.0

    def test_half_overlap(self):
        a = BoundingBox(0, 0, 10, 10)
        b = BoundingBox(5, 0, 10, 10)
        assert iou(a, b) == pytest.approx(50.0 / 150.0)

    def test_zero_area_rejected(self):
        """测试零面积框抛出异常"""
        with pytest.raises(InvalidGeometryError):
            iou(BoundingBox(0, 0, 0, 10), BoundingBox(0, 0, 10, 10))
        with pytest.raises(InvalidGeometryError):
            iou(BoundingBox(0, 0, 10, 10), BoundingBox(0, 0, 10, -1))

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidGeometryError):
            BoundingBox(math.nan, 0, 1, 1)
        with pytest.raises(InvalidGeometryError):
            BoundingBox(0, math.inf, 1, 1)


class TestClampBox:
    """框裁剪测试"""

    def test_inside_unchanged(self):
        box = BoundingBox(10, 10, 20, 20)
        assert clamp_box(box, 100, 100) == box

    def test_partially_outside(self):
        clamped = clamp_box(BoundingBox(-10, 90, 30, 30), 100, 100)
        assert clamped.to_list() == [0.0, 90.0, 20.0, 10.0]

    def test_fully_outside(self):
        """测试与图像无交集时抛出 OutOfFrameError"""
        with pytest.raises(OutOfFrameError):
            clamp_box(BoundingBox(200, 200, 10, 10), 100, 100)

    def test_invalid_image(self):
        with pytest.raises(InvalidGeometryError):
            clamp_box(BoundingBox(0, 0, 10, 10), 0, 100)


class TestBoundingBox:
    """边界框辅助方法测试"""

    def test_from_center_roundtrip(self):
        box = BoundingBox.from_center(50, 40, 20, 10)
        assert box.to_list() == [40.0, 35.0, 20.0, 10.0]
        assert box.center == (50.0, 40.0)

    def test_from_list_length(self):
        with pytest.raises(InvalidGeometryError):
            BoundingBox.from_list([1, 2, 3])

    def test_center_distance(self):
        a = BoundingBox(0, 0, 10, 10)
        b = BoundingBox(3, 4, 10, 10)
        assert center_distance(a, b) == pytest.approx(5.0)
