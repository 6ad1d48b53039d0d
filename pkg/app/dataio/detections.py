"""
检测结果读写

每个候选一行: frame,candidate_id,x,y,w,h,score
candidate_id 即该检测在特征文件中的候选ID。
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from app.dataio.annotations import format_box, parse_box
from app.dataio.errors import DataParseError, DuplicateKeyError
from app.dataio.text import PathLike, format_float, iter_records, parse_int, parse_unit_interval, write_lines
from app.models.sequence import Detection, SequenceManifest

logger = logging.getLogger(__name__)

DetectionMap = Dict[int, List[Detection]]


def load_detections(path: PathLike, manifest: Optional[SequenceManifest] = None) -> DetectionMap:
    """
    读取检测结果，返回 帧号 -> 检测列表（保持文件中的顺序）

    Raises:
        DataParseError: 格式错误或帧号超出清单帧域
        RangeError: 得分超出 [0,1] 或零面积框
        DuplicateKeyError: (帧号, 候选ID) 重复
    """
    detections: DetectionMap = {}
    seen: Set[Tuple[int, str]] = set()
    for line, tokens in iter_records(path):
        if len(tokens) != 7:
            raise DataParseError(
                f"需要 frame,candidate_id,x,y,w,h,score，实际有 {len(tokens)} 个字段",
                path, line, None, "MALFORMED_RECORD",
            )
        frame = parse_int(tokens[0], path, line, "frame")
        if manifest is not None and frame not in manifest.frames:
            raise DataParseError(f"帧号 {frame} 不在清单帧域内", path, line, "frame", "TRACK_DOMAIN")
        candidate_id = tokens[1]
        if not candidate_id:
            raise DataParseError("候选ID为空", path, line, "candidate_id", "MALFORMED_RECORD")
        if (frame, candidate_id) in seen:
            raise DuplicateKeyError(f"重复的检测 (帧 {frame}, 候选 {candidate_id})", path, line, "candidate_id")
        seen.add((frame, candidate_id))
        box = parse_box(tokens[2:6], path, line)
        score = parse_unit_interval(tokens[6], path, line, "score")
        detections.setdefault(frame, []).append(Detection(box, score, candidate_id))

    logger.debug(f"读取检测 {path}: {len(seen)} 个候选，覆盖 {len(detections)} 帧")
    return detections


def format_detections(detections: Mapping[int, Sequence[Detection]]) -> List[str]:
    lines = []
    for frame in sorted(detections):
        for index, detection in enumerate(detections[frame]):
            candidate_id = detection.embedding_ref or str(index)
            lines.append(f"{frame},{candidate_id},{format_box(detection.box)},{format_float(detection.score)}")
    return lines


def save_detections(detections: Mapping[int, Sequence[Detection]], path: PathLike) -> None:
    write_lines(path, format_detections(detections))
