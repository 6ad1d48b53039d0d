"""
回放跟踪器：按请求方向回放预先计算好的轨迹
"""

import logging
from typing import Iterator, List, Optional

from app.clients.base import (
    CoverageError,
    TrackerClient,
    TrackingRequest,
    prompt_record_matches,
)
from app.models.sequence import FrameRecord, Track

logger = logging.getLogger(__name__)


class ReplayTrackerClient(TrackerClient):
    """
    回放已存储的轨迹记录

    提示帧的存储框与提示框 IoU 低于 0.99 时只告警，回放照常进行。
    """

    def __init__(self, track: Track, name: Optional[str] = None):
        self.stored = track
        self.name = name or f"replay:{track.sequence_id}"
        self._pending: Iterator[FrameRecord] = iter(())
        self.prompt_warnings: List[int] = []

    def start(self, request: TrackingRequest) -> None:
        frames = request.expected_frames()
        missing = [frame for frame in frames if frame not in self.stored.records]
        if missing:
            raise CoverageError(
                f"{self.name}: 存储的轨迹不覆盖请求的帧 {missing[0]}"
                f"（请求范围 {min(frames)}..{max(frames)}）"
            )
        self._pending = iter([self.stored[frame] for frame in frames])

        prompt_record = self.stored[request.prompt_frame]
        if not prompt_record_matches(request, prompt_record):
            self.on_prompt_mismatch(request, prompt_record)

    def step(self) -> Optional[FrameRecord]:
        return next(self._pending, None)

    def on_prompt_mismatch(self, request: TrackingRequest, record: Optional[FrameRecord]) -> None:
        if request.prompt_frame in self.prompt_warnings:
            return
        self.prompt_warnings.append(request.prompt_frame)
        logger.warning(
            f"{self.name}: 提示帧 {request.prompt_frame} 的存储记录与提示框不一致，继续回放 "
            f"(存储={record.box.to_list() if record and record.present else 'absent'}, "
            f"提示={request.prompt_box.to_list()})"
        )
