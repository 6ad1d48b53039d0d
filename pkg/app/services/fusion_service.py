"""
多人场景的框融合服务

逐帧比较主轨迹（ReID 校正后的结果）与辅助跟踪器的框：两者都存在且
IoU 严格大于阈值 τ 时采用辅助框，否则保留主轨迹记录。存在标记与置信度始终取主轨迹。
"""

import logging
from typing import List

from app.core.errors import SkiTrackError
from app.models.geometry import iou
from app.models.sequence import FrameRecord, Track
from app.schemas.run_config import FusionConfig

logger = logging.getLogger(__name__)


class FrameDomainMismatchError(SkiTrackError):
    """两条轨迹（或轨迹与真值）的帧域不一致"""
    def __init__(self, message: str):
        super().__init__(message, "FRAME_DOMAIN_MISMATCH")


def require_same_domain(a_frames: List[int], b_frames: List[int], what: str) -> None:
    if a_frames != b_frames:
        only_a = sorted(set(a_frames) - set(b_frames))
        only_b = sorted(set(b_frames) - set(a_frames))
        raise FrameDomainMismatchError(
            f"{what}的帧域不一致: 仅前者有 {only_a[:5]}, 仅后者有 {only_b[:5]}"
        )


def fuse_record(primary: FrameRecord, secondary: FrameRecord, iou_threshold: float) -> FrameRecord:
    if primary.present and secondary.present and iou(primary.box, secondary.box) > iou_threshold:
        return FrameRecord.observed(primary.frame, secondary.box, primary.confidence)
    return primary


def fuse_tracks(primary: Track, secondary: Track, cfg: FusionConfig) -> Track:
    """
    IoU 门控的框替换

    Args:
        primary: 主轨迹
        secondary: 辅助跟踪器轨迹，与主轨迹帧域相同
        cfg: 融合配置

    Returns:
        Track: 存在帧集合与主轨迹完全一致的融合轨迹

    Raises:
        FrameDomainMismatchError: 帧域不一致
    """
    require_same_domain(primary.frames, secondary.frames, "主轨迹与辅助轨迹")
    fused = [fuse_record(primary[frame], secondary[frame], cfg.iou_threshold) for frame in primary.frames]
    adopted = sum(1 for a, b in zip(primary, fused) if a.present and a.box != b.box)
    logger.info(
        f"框融合完成: 序列={primary.sequence_id}, 采用辅助框 {adopted}/{len(primary.present_frames())} 帧, "
        f"τ={cfg.iou_threshold}"
    )
    return Track.from_records(primary.sequence_id, fused)


def fusion_conflicts(primary: Track, secondary: Track) -> List[int]:
    """主轨迹缺席而辅助轨迹存在的帧；融合结果保持缺席，只在报告中标记"""
    require_same_domain(primary.frames, secondary.frames, "主轨迹与辅助轨迹")
    conflicts = [
        frame for frame in primary.frames if not primary[frame].present and secondary[frame].present
    ]
    if conflicts:
        logger.warning(
            f"序列 {primary.sequence_id}: {len(conflicts)} 帧主轨迹缺席而辅助轨迹存在，保持缺席"
        )
    return conflicts
