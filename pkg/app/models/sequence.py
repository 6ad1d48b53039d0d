"""
序列领域模型

多机位序列清单、逐帧跟踪记录、真值标注与检测结果。
所有类型都是不可变值，可在并发任务之间安全共享。
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from app.core.errors import SkiTrackError
from app.models.geometry import BoundingBox


class SequenceValidationError(SkiTrackError):
    """序列数据校验异常"""
    def __init__(self, message: str, error_code: str = "INVALID_SEQUENCE"):
        super().__init__(message, error_code)


class Discipline(str, Enum):
    """滑雪项目"""
    AL = "AL"  # 高山滑雪
    JP = "JP"  # 跳台滑雪
    FS = "FS"  # 自由式滑雪

    @classmethod
    def parse(cls, value: str) -> "Discipline":
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            valid = ", ".join(d.value for d in cls)
            raise SequenceValidationError(
                f"未知的项目类型 {value!r}，有效值: {valid}", "UNKNOWN_DISCIPLINE"
            )

    @property
    def default_mode(self) -> str:
        """AL/JP 为单人场景，FS 为多人场景"""
        return "multi_skier" if self is Discipline.FS else "single_skier"


@dataclass(frozen=True)
class CameraClip:
    """单机位片段，帧号为序列全局编号，闭区间"""
    clip_id: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise SequenceValidationError(
                f"片段 {self.clip_id} 起始帧 {self.start_frame} 大于结束帧 {self.end_frame}",
                "INVALID_CLIP",
            )

    @property
    def frames(self) -> range:
        return range(self.start_frame, self.end_frame + 1)

    @property
    def middle_frame(self) -> int:
        return (self.start_frame + self.end_frame) // 2

    def __len__(self) -> int:
        return self.end_frame - self.start_frame + 1

    def __contains__(self, frame: int) -> bool:
        return self.start_frame <= frame <= self.end_frame


@dataclass(frozen=True)
class SequenceManifest:
    """多机位序列清单"""
    sequence_id: str
    discipline: Discipline
    clips: Tuple[CameraClip, ...]
    image_width: int
    image_height: int

    def __post_init__(self):
        object.__setattr__(self, "clips", tuple(self.clips))
        if not self.clips:
            raise SequenceValidationError(f"序列 {self.sequence_id} 没有任何片段", "EMPTY_MANIFEST")
        if self.image_width <= 0 or self.image_height <= 0:
            raise SequenceValidationError(
                f"图像尺寸必须为正: {self.image_width}x{self.image_height}", "INVALID_IMAGE_SIZE"
            )
        for index, (prev, cur) in enumerate(zip(self.clips, self.clips[1:]), start=1):
            if cur.start_frame <= prev.end_frame:
                raise SequenceValidationError(
                    f"片段 {cur.clip_id} [{cur.start_frame}..{cur.end_frame}] 与片段 "
                    f"{prev.clip_id} [{prev.start_frame}..{prev.end_frame}] 重叠",
                    "OVERLAPPING_CLIPS",
                )
            if cur.start_frame != prev.end_frame + 1:
                raise SequenceValidationError(
                    f"片段 {prev.clip_id} 与 {cur.clip_id} 之间缺少帧 "
                    f"{prev.end_frame + 1}..{cur.start_frame - 1}",
                    "CLIP_GAP",
                )

    @property
    def frames(self) -> range:
        return range(self.clips[0].start_frame, self.clips[-1].end_frame + 1)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def clip_for_frame(self, frame: int) -> Optional[CameraClip]:
        for clip in self.clips:
            if frame in clip:
                return clip
        return None

    def clip_by_id(self, clip_id: str) -> CameraClip:
        for clip in self.clips:
            if clip.clip_id == clip_id:
                return clip
        raise SequenceValidationError(f"序列 {self.sequence_id} 中不存在片段 {clip_id}", "UNKNOWN_CLIP")


@dataclass(frozen=True)
class FrameRecord:
    """单帧跟踪输出；缺席帧的置信度恒为 0，边界框为空"""
    frame: int
    present: bool
    box: Optional[BoundingBox] = None
    confidence: float = 0.0

    def __post_init__(self):
        if not self.present:
            object.__setattr__(self, "box", None)
            object.__setattr__(self, "confidence", 0.0)
            return
        if self.box is None or not self.box.is_valid():
            raise SequenceValidationError(f"帧 {self.frame} 的边界框无效: {self.box}", "INVALID_RECORD")
        if not math.isfinite(self.confidence) or not 0.0 <= self.confidence <= 1.0:
            raise SequenceValidationError(
                f"帧 {self.frame} 的置信度 {self.confidence} 超出 [0,1]", "CONFIDENCE_RANGE"
            )

    @classmethod
    def absent(cls, frame: int) -> "FrameRecord":
        return cls(frame=frame, present=False)

    @classmethod
    def observed(cls, frame: int, box: BoundingBox, confidence: float = 1.0) -> "FrameRecord":
        return cls(frame=frame, present=True, box=box, confidence=confidence)


@dataclass(frozen=True)
class Track:
    """单目标在一个多机位序列上的逐帧记录"""
    sequence_id: str
    records: Mapping[int, FrameRecord] = field(default_factory=dict)

    def __post_init__(self):
        ordered: Dict[int, FrameRecord] = {}
        for frame in sorted(self.records):
            record = self.records[frame]
            if record.frame != frame:
                raise SequenceValidationError(
                    f"记录键 {frame} 与记录帧号 {record.frame} 不一致", "INVALID_RECORD"
                )
            ordered[frame] = record
        object.__setattr__(self, "records", MappingProxyType(ordered))

    @classmethod
    def from_records(cls, sequence_id: str, records: Iterable[FrameRecord]) -> "Track":
        mapping: Dict[int, FrameRecord] = {}
        for record in records:
            if record.frame in mapping:
                raise SequenceValidationError(f"帧 {record.frame} 存在重复记录", "DUPLICATE_RECORD")
            mapping[record.frame] = record
        return cls(sequence_id, mapping)

    def __getitem__(self, frame: int) -> FrameRecord:
        return self.records[frame]

    def __iter__(self) -> Iterator[FrameRecord]:
        return iter(self.records.values())

    def __len__(self) -> int:
        return len(self.records)

    @property
    def frames(self) -> List[int]:
        return list(self.records)

    def present_frames(self) -> List[int]:
        return [frame for frame, record in self.records.items() if record.present]

    def replace_records(self, updates: Iterable[FrameRecord]) -> "Track":
        """返回替换了部分帧记录的新轨迹，其余帧保持不变"""
        merged = dict(self.records)
        for record in updates:
            if record.frame not in merged:
                raise SequenceValidationError(
                    f"帧 {record.frame} 不在序列 {self.sequence_id} 的帧域内", "TRACK_DOMAIN"
                )
            merged[record.frame] = record
        return Track(self.sequence_id, merged)

    def validate_against(self, manifest: SequenceManifest) -> "Track":
        """检查轨迹在清单帧域上稠密且没有域外记录"""
        expected = manifest.frames
        if len(self.records) != len(expected) or any(f not in self.records for f in expected):
            missing = [f for f in expected if f not in self.records]
            extra = [f for f in self.records if f not in expected]
            raise SequenceValidationError(
                f"轨迹 {self.sequence_id} 与清单帧域不一致: 缺少 {missing[:5]}, 多余 {extra[:5]}",
                "TRACK_DOMAIN",
            )
        return self


@dataclass(frozen=True)
class GroundTruth:
    """逐帧真值标注，None 表示目标不可见"""
    sequence_id: str
    boxes: Mapping[int, Optional[BoundingBox]] = field(default_factory=dict)

    def __post_init__(self):
        ordered = {frame: self.boxes[frame] for frame in sorted(self.boxes)}
        for frame, box in ordered.items():
            if box is not None and not box.is_valid():
                raise SequenceValidationError(f"真值帧 {frame} 的边界框面积为零", "INVALID_RECORD")
        object.__setattr__(self, "boxes", MappingProxyType(ordered))

    @property
    def frames(self) -> List[int]:
        return list(self.boxes)

    def box(self, frame: int) -> Optional[BoundingBox]:
        return self.boxes.get(frame)

    def present_frames(self) -> List[int]:
        return [frame for frame, box in self.boxes.items() if box is not None]

    def as_track(self, confidence: float = 1.0) -> Track:
        return Track.from_records(
            self.sequence_id,
            (
                FrameRecord.observed(frame, box, confidence) if box is not None else FrameRecord.absent(frame)
                for frame, box in self.boxes.items()
            ),
        )

    def validate_against(self, manifest: SequenceManifest) -> "GroundTruth":
        if list(self.boxes) != list(manifest.frames):
            raise SequenceValidationError(
                f"真值 {self.sequence_id} 的帧域与清单不一致", "TRACK_DOMAIN"
            )
        return self


@dataclass(frozen=True)
class Detection:
    """检测器输出的候选框"""
    box: BoundingBox
    score: float
    embedding_ref: Optional[str] = None

    def __post_init__(self):
        self.box.require_valid()
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise SequenceValidationError(f"检测得分 {self.score} 超出 [0,1]", "SCORE_RANGE")
