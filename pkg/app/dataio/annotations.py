"""
真值标注读写

每帧一行，按帧序:
  frame,x,y,w,h
  frame,absent
"""

import logging
from typing import Dict, List, Optional

from app.dataio.errors import CountMismatchError, DataParseError, RangeError
from app.dataio.text import (
    ABSENT_MARKER,
    PathLike,
    format_float,
    iter_records,
    parse_float,
    parse_int,
    write_lines,
)
from app.models.geometry import BoundingBox
from app.models.sequence import GroundTruth, SequenceManifest

logger = logging.getLogger(__name__)

BOX_FIELDS = ("x", "y", "w", "h")


def parse_box(tokens: List[str], path: PathLike, line: int) -> BoundingBox:
    """解析 x,y,w,h 四个字段，宽高必须为正"""
    values = [parse_float(token, path, line, name) for token, name in zip(tokens, BOX_FIELDS)]
    for name, value in zip(("w", "h"), values[2:]):
        if value <= 0:
            raise RangeError(f"边界框面积为零（{name}={value}）", path, line, name, "ZERO_AREA")
    return BoundingBox(*values)


def format_box(box: BoundingBox) -> str:
    return ",".join(format_float(v) for v in box.to_list())


def check_frame_order(frame: int, expected: Optional[int], path: PathLike, line: int) -> None:
    if expected is not None and frame != expected:
        raise DataParseError(
            f"帧号应为 {expected}，实际为 {frame}（每帧一行且按帧序）", path, line, "frame", "FRAME_ORDER"
        )


def check_count(found: int, manifest: SequenceManifest, path: PathLike, last_line: int) -> None:
    if found != manifest.frame_count:
        raise CountMismatchError(
            f"记录数 {found} 与清单帧数 {manifest.frame_count} 不一致", path, last_line, "frame"
        )


def load_annotations(path: PathLike, manifest: SequenceManifest) -> GroundTruth:
    """
    读取真值标注

    Raises:
        CountMismatchError: 行数与清单帧数不一致
        DataParseError: 非数值字段或帧序错误
        RangeError: 零面积框
    """
    boxes: Dict[int, Optional[BoundingBox]] = {}
    expected = manifest.frames.start
    last_line = 0
    for line, tokens in iter_records(path):
        last_line = line
        frame = parse_int(tokens[0], path, line, "frame")
        check_frame_order(frame, expected, path, line)
        if len(tokens) == 2 and tokens[1] == ABSENT_MARKER:
            boxes[frame] = None
        elif len(tokens) == 5:
            boxes[frame] = parse_box(tokens[1:], path, line)
        else:
            raise DataParseError(
                f"需要 frame,x,y,w,h 或 frame,{ABSENT_MARKER}，实际有 {len(tokens)} 个字段",
                path, line, None, "MALFORMED_RECORD",
            )
        expected = frame + 1
        if frame > manifest.frames.stop - 1:
            raise CountMismatchError(
                f"记录数超过清单帧数 {manifest.frame_count}", path, line, "frame"
            )

    check_count(len(boxes), manifest, path, last_line)
    logger.debug(f"读取标注 {path}: {len(boxes)} 帧，其中可见 {sum(b is not None for b in boxes.values())} 帧")
    return GroundTruth(manifest.sequence_id, boxes)


def format_annotations(gt: GroundTruth) -> List[str]:
    return [
        f"{frame},{ABSENT_MARKER}" if box is None else f"{frame},{format_box(box)}"
        for frame, box in gt.boxes.items()
    ]


def save_annotations(gt: GroundTruth, path: PathLike) -> None:
    write_lines(path, format_annotations(gt))
