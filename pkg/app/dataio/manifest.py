"""
序列清单读写

格式（JSON）:
{
  "sequence_id": "AL_000",
  "discipline": "AL",
  "image_width": 1280,
  "image_height": 720,
  "clips": [{"clip_id": "cam0", "start_frame": 0, "end_frame": 99}, ...]
}
"""

import logging
from typing import Any, Dict, List

from app.core.errors import SkiTrackError
from app.dataio.errors import ClipGapError, DataParseError, OverlappingClipsError, UnknownDisciplineError
from app.dataio.text import PathLike, line_of, read_json, read_text, write_json
from app.models.sequence import CameraClip, Discipline, SequenceManifest

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("sequence_id", "discipline", "image_width", "image_height", "clips")


def _require_int(data: Dict[str, Any], key: str, path, line, field: str) -> int:
    value = data.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise DataParseError(f"需要整数，实际为 {value!r}", path, line, field, "MALFORMED_RECORD")
    return value


def _clip_line(text: str, clip_id: Any):
    return line_of(text, f'"{clip_id}"')


def parse_manifest(data: Any, path: PathLike = None, text: str = "") -> SequenceManifest:
    """从已解析的 JSON 对象构造清单"""
    if not isinstance(data, dict):
        raise DataParseError("清单必须是 JSON 对象", path, 1, error_code="MALFORMED_RECORD")
    for key in REQUIRED_FIELDS:
        if key not in data:
            raise DataParseError("缺少必填字段", path, 1, key, "MALFORMED_RECORD")

    discipline_line = line_of(text, '"discipline"')
    try:
        discipline = Discipline.parse(data["discipline"])
    except SkiTrackError as e:
        raise UnknownDisciplineError(e.message, path, discipline_line, "discipline")

    raw_clips = data["clips"]
    if not isinstance(raw_clips, list) or not raw_clips:
        raise DataParseError("clips 必须是非空列表", path, line_of(text, '"clips"'), "clips", "EMPTY_MANIFEST")

    clips: List[CameraClip] = []
    for index, raw in enumerate(raw_clips):
        field = f"clips[{index}]"
        if not isinstance(raw, dict) or "clip_id" not in raw:
            raise DataParseError("片段记录缺少 clip_id", path, None, field, "MALFORMED_RECORD")
        line = _clip_line(text, raw["clip_id"])
        start = _require_int(raw, "start_frame", path, line, f"{field}.start_frame")
        end = _require_int(raw, "end_frame", path, line, f"{field}.end_frame")
        if start < 0 or start > end:
            raise DataParseError(
                f"片段范围非法 [{start}..{end}]", path, line, f"{field}.start_frame", "INVALID_CLIP"
            )
        clip = CameraClip(str(raw["clip_id"]), start, end)
        if clips:
            prev = clips[-1]
            if start <= prev.end_frame:
                raise OverlappingClipsError(
                    f"片段 {clip.clip_id} [{start}..{end}] 与片段 {prev.clip_id} "
                    f"[{prev.start_frame}..{prev.end_frame}] 重叠",
                    path, line, f"{field}.start_frame",
                )
            if start != prev.end_frame + 1:
                raise ClipGapError(
                    f"片段 {prev.clip_id} 与 {clip.clip_id} 之间缺少帧 {prev.end_frame + 1}..{start - 1}",
                    path, line, f"{field}.start_frame",
                )
        clips.append(clip)

    width = _require_int(data, "image_width", path, line_of(text, '"image_width"'), "image_width")
    height = _require_int(data, "image_height", path, line_of(text, '"image_height"'), "image_height")
    try:
        return SequenceManifest(str(data["sequence_id"]), discipline, tuple(clips), width, height)
    except SkiTrackError as e:
        raise DataParseError(e.message, path, None, None, e.error_code)


def load_manifest(path: PathLike) -> SequenceManifest:
    """
    读取并校验序列清单

    Raises:
        DataParseError: 格式错误，带文件/行号/字段坐标
        OverlappingClipsError: 片段重叠
        ClipGapError: 片段之间有空缺帧
        UnknownDisciplineError: 未知项目类型
    """
    text = read_text(path)
    manifest = parse_manifest(read_json(path), path, text)
    logger.debug(
        f"读取清单 {path}: 序列={manifest.sequence_id}, 项目={manifest.discipline.value}, "
        f"片段数={len(manifest.clips)}, 帧数={manifest.frame_count}"
    )
    return manifest


def manifest_to_dict(manifest: SequenceManifest) -> Dict[str, Any]:
    return {
        "sequence_id": manifest.sequence_id,
        "discipline": manifest.discipline.value,
        "image_width": manifest.image_width,
        "image_height": manifest.image_height,
        "clips": [
            {"clip_id": clip.clip_id, "start_frame": clip.start_frame, "end_frame": clip.end_frame}
            for clip in manifest.clips
        ],
    }


def save_manifest(manifest: SequenceManifest, path: PathLike) -> None:
    write_json(path, manifest_to_dict(manifest))
