"""
真值预言跟踪器

按真值跟踪目标并叠加高斯框噪声；按计划在指定帧切换到干扰者的真值，
模拟跟踪过程中的身份切换。片段内的重新提示若落在真实目标上（IoU > 0.5），
则清空切换计划，模拟校正成功。
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Mapping, Optional, Sequence

import numpy as np

from app.clients.base import TrackerClient, TrackingRequest
from app.core.errors import SkiTrackError
from app.models.geometry import BoundingBox, iou
from app.models.sequence import FrameRecord, GroundTruth

logger = logging.getLogger(__name__)

# 重新提示被视为落在真实目标上的 IoU 下限（严格大于）
CORRECTION_IOU = 0.5
# 非提示帧的置信度
ORACLE_CONFIDENCE = 0.9
MIN_BOX_SIDE = 1.0


@dataclass(frozen=True)
class ScheduledSwitch:
    """从全局帧 frame 起跟随干扰者 distractor_id"""
    frame: int
    distractor_id: str


class OracleTrackerClient(TrackerClient):
    """基于真值的确定性跟踪器"""

    def __init__(
        self,
        ground_truth: GroundTruth,
        distractors: Optional[Mapping[str, GroundTruth]] = None,
        noise_sigma: float = 0.0,
        switches: Sequence[ScheduledSwitch] = (),
        seed: int = 42,
        name: Optional[str] = None,
    ):
        if noise_sigma < 0:
            raise SkiTrackError(f"噪声标准差不能为负: {noise_sigma}", "INVALID_NOISE")
        self.ground_truth = ground_truth
        self.distractors = dict(distractors or {})
        for switch in switches:
            if switch.distractor_id not in self.distractors:
                raise SkiTrackError(
                    f"切换计划引用了未知的干扰者 {switch.distractor_id}", "UNKNOWN_DISTRACTOR"
                )
        self.noise_sigma = noise_sigma
        self.switches = sorted(switches, key=lambda s: s.frame)
        self.seed = seed
        self.name = name or f"oracle:{ground_truth.sequence_id}"
        self._pending: Iterator[FrameRecord] = iter(())

    def _followed(self, frame: int, active: List[ScheduledSwitch]) -> GroundTruth:
        source = self.ground_truth
        for switch in active:
            if switch.frame <= frame:
                source = self.distractors[switch.distractor_id]
        return source

    def _noisy(self, box: BoundingBox, frame: int) -> BoundingBox:
        if self.noise_sigma == 0:
            return box
        rng = np.random.default_rng([self.seed, frame])
        dx, dy, dw, dh = rng.normal(0.0, self.noise_sigma, size=4)
        return BoundingBox(
            box.x + dx, box.y + dy, max(box.w + dw, MIN_BOX_SIDE), max(box.h + dh, MIN_BOX_SIDE)
        )

    def _active_switches(self, request: TrackingRequest) -> List[ScheduledSwitch]:
        in_clip = [s for s in self.switches if request.start_frame <= s.frame <= request.end_frame]
        if not in_clip or request.prompt_frame == request.start_frame:
            return in_clip
        target = self.ground_truth.box(request.prompt_frame)
        if target is not None and iou(request.prompt_box, target) > CORRECTION_IOU:
            logger.debug(f"{self.name}: 提示帧 {request.prompt_frame} 落在目标上，清空片段内的切换计划")
            return []
        return in_clip

    def start(self, request: TrackingRequest) -> None:
        active = self._active_switches(request)
        records = []
        for frame in request.expected_frames():
            if frame == request.prompt_frame:
                records.append(FrameRecord.observed(frame, request.prompt_box, 1.0))
                continue
            box = self._followed(frame, active).box(frame)
            if box is None:
                records.append(FrameRecord.absent(frame))
            else:
                records.append(FrameRecord.observed(frame, self._noisy(box, frame), ORACLE_CONFIDENCE))
        self._pending = iter(records)

    def step(self) -> Optional[FrameRecord]:
        return next(self._pending, None)
