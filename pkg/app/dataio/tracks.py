"""
跟踪结果读写

每帧一行，按帧序，缺席帧显式写出:
  frame,x,y,w,h,confidence
  frame,absent
浮点数使用最短往返表示，保存后再读取逐字节一致。
"""

import logging
from pathlib import Path
from typing import List, Optional

from app.dataio.annotations import check_count, check_frame_order, format_box, parse_box
from app.dataio.errors import CountMismatchError, DataParseError
from app.dataio.text import (
    ABSENT_MARKER,
    PathLike,
    format_float,
    iter_records,
    parse_int,
    parse_unit_interval,
    write_lines,
)
from app.models.sequence import FrameRecord, SequenceManifest, Track

logger = logging.getLogger(__name__)


def load_track(
    path: PathLike, manifest: Optional[SequenceManifest] = None, sequence_id: Optional[str] = None
) -> Track:
    """
    读取跟踪结果

    Args:
        path: 轨迹文件
        manifest: 给定时要求帧域与清单一致
        sequence_id: 未给清单时的序列ID，缺省取文件名

    Raises:
        DataParseError: 格式错误或帧序错误
        RangeError: 置信度超出 [0,1] 或零面积框
        CountMismatchError: 记录数与清单帧数不一致
    """
    records: List[FrameRecord] = []
    expected = manifest.frames.start if manifest is not None else None
    last_line = 0
    for line, tokens in iter_records(path):
        last_line = line
        frame = parse_int(tokens[0], path, line, "frame")
        check_frame_order(frame, expected, path, line)
        if len(tokens) == 2 and tokens[1] == ABSENT_MARKER:
            records.append(FrameRecord.absent(frame))
        elif len(tokens) == 6:
            box = parse_box(tokens[1:5], path, line)
            confidence = parse_unit_interval(tokens[5], path, line, "confidence")
            records.append(FrameRecord.observed(frame, box, confidence))
        else:
            raise DataParseError(
                f"需要 frame,x,y,w,h,confidence 或 frame,{ABSENT_MARKER}，实际有 {len(tokens)} 个字段",
                path, line, None, "MALFORMED_RECORD",
            )
        if manifest is not None and frame >= manifest.frames.stop:
            raise CountMismatchError(f"记录数超过清单帧数 {manifest.frame_count}", path, line, "frame")
        expected = frame + 1

    if manifest is not None:
        check_count(len(records), manifest, path, last_line)
        sequence_id = manifest.sequence_id
    elif not records:
        raise DataParseError("轨迹文件为空", path, None, None, "EMPTY_TRACK")
    return Track.from_records(sequence_id or Path(path).stem, records)


def format_record(record: FrameRecord) -> str:
    if not record.present:
        return f"{record.frame},{ABSENT_MARKER}"
    return f"{record.frame},{format_box(record.box)},{format_float(record.confidence)}"


def format_track(track: Track) -> List[str]:
    return [format_record(record) for record in track]


def save_track(track: Track, path: PathLike) -> None:
    write_lines(path, format_track(track))
    logger.debug(f"写出轨迹 {path}: {len(track)} 帧")
