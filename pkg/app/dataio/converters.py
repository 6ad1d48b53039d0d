"""
数据集格式转换

把数据集原生标注转换为本项目的逐帧标注格式。转换器按名称注册，
原生布局只需实现 DatasetConverter 协议并注册即可接入。
"""

import logging
from typing import Callable, Dict, List, Optional, Protocol

from app.dataio.annotations import parse_box
from app.dataio.errors import DataParseError, DuplicateKeyError
from app.dataio.text import PathLike, iter_records, parse_float, parse_int
from app.models.geometry import BoundingBox
from app.models.sequence import GroundTruth, SequenceManifest

logger = logging.getLogger(__name__)


class DatasetConverter(Protocol):
    """原生标注 -> GroundTruth"""

    name: str

    def convert(self, path: PathLike, manifest: SequenceManifest) -> GroundTruth:
        ...


_REGISTRY: Dict[str, Callable[[], DatasetConverter]] = {}


def register_converter(name: str):
    """注册转换器工厂的装饰器"""
    def decorator(factory: Callable[[], DatasetConverter]):
        if name in _REGISTRY:
            raise ValueError(f"转换器 {name} 已注册")
        _REGISTRY[name] = factory
        return factory
    return decorator


def get_converter(name: str) -> DatasetConverter:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise DataParseError(
            f"未知的转换器 {name!r}，可用: {', '.join(sorted(_REGISTRY))}", error_code="UNKNOWN_CONVERTER"
        )


def available_converters() -> List[str]:
    return sorted(_REGISTRY)


@register_converter("mot")
class SparseMotConverter:
    """
    稀疏 MOT 风格标注：每行 frame,x,y,w,h[,...]，只列出目标可见的帧

    帧号可带偏移（frame_offset），列数多于 5 时忽略多余列；
    清单帧域内未出现的帧转换为显式的缺席记录。
    """

    name = "mot"

    def __init__(self, frame_offset: int = 0):
        self.frame_offset = frame_offset

    @staticmethod
    def _parse_frame(token: str, path: PathLike, line: int) -> int:
        # 部分工具把帧号写成 "12.0"，只接受整数值
        if "." not in token:
            return parse_int(token, path, line, "frame")
        value = parse_float(token, path, line, "frame")
        if not value.is_integer():
            raise DataParseError(f"不是整数: {token!r}", path, line, "frame", "NON_NUMERIC")
        return int(value)

    def convert(self, path: PathLike, manifest: SequenceManifest) -> GroundTruth:
        boxes: Dict[int, Optional[BoundingBox]] = {frame: None for frame in manifest.frames}
        seen = set()
        for line, tokens in iter_records(path):
            if len(tokens) < 5:
                raise DataParseError(
                    f"需要至少 frame,x,y,w,h 五列，实际 {len(tokens)} 列", path, line, None, "MALFORMED_RECORD"
                )
            frame = self._parse_frame(tokens[0], path, line) - self.frame_offset
            if frame not in boxes:
                raise DataParseError(f"帧号 {frame} 不在清单帧域内", path, line, "frame", "TRACK_DOMAIN")
            if frame in seen:
                raise DuplicateKeyError(f"帧 {frame} 重复标注", path, line, "frame")
            seen.add(frame)
            boxes[frame] = parse_box(tokens[1:5], path, line)

        logger.info(
            f"转换 {path}: 可见 {len(seen)} 帧，补全缺席 {manifest.frame_count - len(seen)} 帧"
        )
        return GroundTruth(manifest.sequence_id, boxes)
