"""
ReID 身份校正服务

流程：
1. 以首帧给定目标框的锚点特征 f_anchor 为参照；
2. 逐机位片段聚合跟踪结果与锚点的余弦相似度，低于阈值视为发生身份切换；
3. 在片段中间帧运行检测器，选出与锚点最相似的候选框 b_mid；
4. 以 b_mid 为提示在片段内向前、向后跟踪，替换该片段的记录。
"""

import logging
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics.pairwise import cosine_similarity as pairwise_cosine

from app.clients.base import DetectorClient, TrackDirection, TrackerClient, TrackingRequest
from app.core.errors import SkiTrackError
from app.models.embedding import DimensionMismatchError, Embedding
from app.models.geometry import BoundingBox
from app.models.sequence import CameraClip, Detection, SequenceManifest, Track
from app.schemas.report import ClipCorrection, ReidReport
from app.schemas.run_config import ClipAggregation, ReidConfig

logger = logging.getLogger(__name__)

# 相似度差异在该范围内视为并列
SIMILARITY_TIE_TOLERANCE = 1e-12
# 片段内没有任何存在帧时的相似度
EMPTY_CLIP_SIMILARITY = -1.0


class ReidServiceError(SkiTrackError):
    """ReID 服务异常基类"""
    def __init__(self, message: str, error_code: str = "REID_ERROR"):
        super().__init__(message, error_code)


class MissingEmbeddingError(ReidServiceError):
    """存在帧缺少特征"""
    def __init__(self, message: str):
        super().__init__(message, "MISSING_EMBEDDING")


class NoCandidateError(ReidServiceError):
    """中间帧没有任何检测候选"""
    def __init__(self, message: str):
        super().__init__(message, "NO_CANDIDATE")


class CorrectionAbortedError(ReidServiceError):
    """跟踪器失败，片段校正被中止"""
    def __init__(self, message: str, cause: Optional[SkiTrackError] = None):
        self.cause = cause
        super().__init__(message, "CORRECTION_ABORTED")


def _check_dims(a: Embedding, b: Embedding) -> None:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"特征维度不一致: {a.dim} != {b.dim}")


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """余弦相似度，截断到 [-1, 1]"""
    _check_dims(a, b)
    value = float(np.dot(a.values, b.values) / (a.norm * b.norm))
    return float(np.clip(value, -1.0, 1.0))


def _similarities_to_anchor(embeddings: Sequence[Embedding], anchor: Embedding) -> np.ndarray:
    for embedding in embeddings:
        _check_dims(embedding, anchor)
    matrix = np.vstack([embedding.values for embedding in embeddings])
    sims = pairwise_cosine(matrix, anchor.values.reshape(1, -1))[:, 0]
    return np.clip(sims, -1.0, 1.0)


def clip_similarity(
    track: Track,
    clip: CameraClip,
    embeddings: Mapping[int, Embedding],
    anchor: Embedding,
    cfg: ReidConfig,
) -> float:
    """
    片段级相似度：片段内各存在帧特征与锚点余弦相似度的聚合

    Returns:
        float: 聚合相似度；片段内没有存在帧时为 -1

    Raises:
        MissingEmbeddingError: 某个存在帧没有特征
    """
    present = [frame for frame in clip.frames if track[frame].present]
    if not present:
        return EMPTY_CLIP_SIMILARITY

    missing = [frame for frame in present if frame not in embeddings]
    if missing:
        raise MissingEmbeddingError(
            f"序列 {track.sequence_id} 片段 {clip.clip_id} 的存在帧缺少特征: {missing[:5]}"
        )

    sims = _similarities_to_anchor([embeddings[frame] for frame in present], anchor)
    if cfg.clip_aggregation is ClipAggregation.MEDIAN:
        value = float(np.median(sims))
    else:
        value = float(np.mean(sims))
    return float(np.clip(value, -1.0, 1.0))


def select_b_mid(candidates: Sequence[Tuple[Detection, Embedding]], anchor: Embedding) -> BoundingBox:
    """
    选出与锚点特征最相似的候选框

    并列时取检测得分更高者，再并列取列表中靠前者。

    Raises:
        NoCandidateError: 候选列表为空
    """
    if not candidates:
        raise NoCandidateError("中间帧没有检测候选")

    sims = _similarities_to_anchor([embedding for _, embedding in candidates], anchor)
    best_index = 0
    for index in range(1, len(candidates)):
        diff = sims[index] - sims[best_index]
        if diff > SIMILARITY_TIE_TOLERANCE:
            best_index = index
        elif abs(diff) <= SIMILARITY_TIE_TOLERANCE and candidates[index][0].score > candidates[best_index][0].score:
            best_index = index
    return candidates[best_index][0].box


def correct_clip(
    track: Track, clip: CameraClip, b_mid: BoundingBox, tracker: TrackerClient
) -> Track:
    """
    以 b_mid 为中间帧提示，在片段内向前、向后跟踪并替换该片段的记录

    Raises:
        CorrectionAbortedError: 跟踪器失败，原记录保持不变
    """
    b_mid.require_valid()
    middle = clip.middle_frame
    try:
        backward = tracker.track(
            TrackingRequest(track.sequence_id, clip.start_frame, clip.end_frame, middle, b_mid, TrackDirection.BACKWARD)
        )
        forward = tracker.track(
            TrackingRequest(track.sequence_id, clip.start_frame, clip.end_frame, middle, b_mid, TrackDirection.FORWARD)
        )
    except SkiTrackError as e:
        raise CorrectionAbortedError(
            f"序列 {track.sequence_id} 片段 {clip.clip_id} 校正中止: {e.message}", cause=e
        )

    # 向后结果倒序后接向前结果；提示帧取向前会话的输出
    merged = list(reversed(backward)) + forward
    return track.replace_records(merged)


class ReidService:
    """身份校验与校正"""

    def __init__(self, cfg: ReidConfig):
        self.cfg = cfg
        self.logger = logging.getLogger(__name__)

    def reid_pass(
        self,
        track: Track,
        manifest: SequenceManifest,
        anchor: Embedding,
        embeddings: Mapping[int, Embedding],
        detector: DetectorClient,
        tracker: TrackerClient,
    ) -> Tuple[Track, ReidReport]:
        """
        逐片段校验并校正身份切换

        Returns:
            (校正后的轨迹, 逐片段校正报告)
        """
        report = ReidReport(sequence_id=track.sequence_id, threshold=self.cfg.similarity_threshold)
        corrected = track

        for clip in manifest.clips:
            similarity = clip_similarity(track, clip, embeddings, anchor, self.cfg)
            if similarity >= self.cfg.similarity_threshold:
                report.clips.append(
                    ClipCorrection(clip_id=clip.clip_id, similarity=similarity, verified=True, action="kept")
                )
                continue

            middle = clip.middle_frame
            self.logger.info(
                f"片段相似度低于阈值: 序列={track.sequence_id}, 片段={clip.clip_id}, "
                f"相似度={similarity:.4f}, 阈值={self.cfg.similarity_threshold}"
            )
            try:
                b_mid = select_b_mid(detector.detect(middle), anchor)
            except NoCandidateError as e:
                self.logger.warning(f"片段 {clip.clip_id} 中间帧 {middle} 没有候选，保持原样")
                report.clips.append(
                    ClipCorrection(
                        clip_id=clip.clip_id, similarity=similarity, verified=False,
                        action="no_candidates", middle_frame=middle, message=e.message,
                    )
                )
                continue

            try:
                corrected = correct_clip(corrected, clip, b_mid, tracker)
            except CorrectionAbortedError as e:
                self.logger.error(e.message)
                report.clips.append(
                    ClipCorrection(
                        clip_id=clip.clip_id, similarity=similarity, verified=False,
                        action="correction_failed", middle_frame=middle, b_mid=b_mid.to_list(),
                        message=e.message,
                    )
                )
                continue

            report.clips.append(
                ClipCorrection(
                    clip_id=clip.clip_id, similarity=similarity, verified=False,
                    action="corrected", middle_frame=middle, b_mid=b_mid.to_list(),
                )
            )

        self.logger.info(
            f"身份校正完成: 序列={track.sequence_id}, 校正片段数={report.corrections}, "
            f"标记片段={report.flagged}"
        )
        return corrected, report


def reid_pass(
    track: Track,
    manifest: SequenceManifest,
    anchor: Embedding,
    embeddings: Mapping[int, Embedding],
    detector: DetectorClient,
    tracker: TrackerClient,
    cfg: ReidConfig,
) -> Tuple[Track, ReidReport]:
    """身份校正的便捷函数"""
    return ReidService(cfg).reid_pass(track, manifest, anchor, embeddings, detector, tracker)
