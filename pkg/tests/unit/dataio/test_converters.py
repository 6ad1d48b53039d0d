"""
数据集格式转换测试
"""

import pytest

from app.dataio.converters import SparseMotConverter, available_converters, get_converter
from app.dataio.errors import DataParseError, DuplicateKeyError
from app.models.geometry import BoundingBox
from tests.conftest import make_manifest


class TestSparseMotConverter:
    """稀疏 MOT 风格标注转换测试"""

    def setup_method(self):
        self.manifest = make_manifest(clip_lengths=(3, 2))

    def test_absent_frames_filled(self, tmp_path):
        """测试未出现的帧补为缺席，多余列被忽略"""
        path = tmp_path / "gt.txt"
        path.write_text("1,10,20,30,40,1,-1,-1\n4.0,11,21,30,40\n", encoding="utf-8")
        gt = SparseMotConverter(frame_offset=1).convert(path, self.manifest)
        assert gt.frames == [0, 1, 2, 3, 4]
        assert gt.box(0) == BoundingBox(10, 20, 30, 40)
        assert gt.box(3) == BoundingBox(11, 21, 30, 40)
        assert gt.present_frames() == [0, 3]

    def test_frame_outside_manifest(self, tmp_path):
        path = tmp_path / "gt.txt"
        path.write_text("9,10,20,30,40\n", encoding="utf-8")
        with pytest.raises(DataParseError) as exc_info:
            SparseMotConverter().convert(path, self.manifest)
        assert exc_info.value.error_code == "TRACK_DOMAIN"

    def test_duplicate_frame(self, tmp_path):
        path = tmp_path / "gt.txt"
        path.write_text("0,10,20,30,40\n0,10,20,30,40\n", encoding="utf-8")
        with pytest.raises(DuplicateKeyError):
            SparseMotConverter().convert(path, self.manifest)

    def test_fractional_frame_rejected(self, tmp_path):
        """测试非整数帧号报格式错误而不是被截断"""
        path = tmp_path / "gt.txt"
        path.write_text("0,10,20,30,40\n2.5,10,20,30,40\n", encoding="utf-8")
        with pytest.raises(DataParseError) as exc_info:
            SparseMotConverter().convert(path, self.manifest)
        error = exc_info.value
        assert (error.error_code, error.line, error.field) == ("NON_NUMERIC", 2, "frame")


class TestRegistry:
    def test_lookup(self):
        assert "mot" in available_converters()
        assert get_converter("mot").name == "mot"

    def test_unknown_converter(self):
        with pytest.raises(DataParseError) as exc_info:
            get_converter("coco")
        assert exc_info.value.error_code == "UNKNOWN_CONVERTER"
