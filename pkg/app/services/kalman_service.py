"""
卡尔曼滤波服务

单人场景（AL/JP）的框精修：匀速模型，状态 [cx, cy, w, h, vcx, vcy, vw, vh]，
dt = 1 帧，观测为 [cx, cy, w, h]。滤波状态在每个机位片段边界重置。
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from filterpy.kalman import predict as filter_predict
from filterpy.kalman import update as filter_update

from app.core.errors import SkiTrackError
from app.models.geometry import BoundingBox, iou
from app.models.sequence import Detection, FrameRecord, SequenceManifest, Track
from app.schemas.run_config import KalmanParams

logger = logging.getLogger(__name__)

STATE_DIM = 8
MEASUREMENT_DIM = 4
# 新息协方差条件数上限，超过即视为奇异
MAX_INNOVATION_CONDITION = 1e12


class KalmanNumericalError(SkiTrackError):
    """滤波数值异常（非有限状态或奇异新息协方差）"""
    def __init__(self, message: str):
        super().__init__(message, "KALMAN_NUMERICAL_ERROR")


@dataclass(frozen=True, eq=False)
class KalmanState:
    """滤波状态：均值与协方差（只读副本）"""
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(STATE_DIM)
        covariance = np.array(self.covariance, dtype=np.float64).reshape(STATE_DIM, STATE_DIM)
        mean.setflags(write=False)
        covariance.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    @property
    def box(self) -> BoundingBox:
        cx, cy, w, h = (float(v) for v in self.mean[:MEASUREMENT_DIM])
        return BoundingBox.from_center(cx, cy, w, h)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.covariance)))


def transition_matrix() -> np.ndarray:
    """匀速转移矩阵 F：位置 += 速度"""
    F = np.eye(STATE_DIM)
    F[:MEASUREMENT_DIM, MEASUREMENT_DIM:] = np.eye(MEASUREMENT_DIM)
    return F


def measurement_matrix() -> np.ndarray:
    """观测矩阵 H：取状态前四维"""
    H = np.zeros((MEASUREMENT_DIM, STATE_DIM))
    H[:, :MEASUREMENT_DIM] = np.eye(MEASUREMENT_DIM)
    return H


def process_noise(params: KalmanParams) -> np.ndarray:
    return np.diag([params.process_noise_pos] * 4 + [params.process_noise_vel] * 4)


def measurement_noise(params: KalmanParams) -> np.ndarray:
    return np.eye(MEASUREMENT_DIM) * params.measurement_noise


def initial_covariance(params: KalmanParams) -> np.ndarray:
    """初始协方差：位置分量取观测噪声，速度分量取初始速度方差"""
    return np.diag([params.measurement_noise] * 4 + [params.initial_velocity_variance] * 4)


def encode_box(box: BoundingBox) -> np.ndarray:
    cx, cy = box.center
    return np.array([cx, cy, box.w, box.h], dtype=np.float64)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def kf_init(box: BoundingBox, params: KalmanParams) -> KalmanState:
    """由边界框初始化状态，速度为 0"""
    box.require_valid()
    mean = np.concatenate([encode_box(box), np.zeros(MEASUREMENT_DIM)])
    return KalmanState(mean, initial_covariance(params))


def kf_predict(s: KalmanState, params: KalmanParams) -> KalmanState:
    """预测一步：mean ← F·mean，P ← F·P·Fᵀ + Q"""
    if not s.is_finite():
        raise KalmanNumericalError("预测前状态包含非有限值")
    mean, covariance = filter_predict(s.mean, s.covariance, F=transition_matrix(), Q=process_noise(params))
    return KalmanState(mean, _symmetrize(covariance))


def kf_update(s: KalmanState, z: BoundingBox, params: KalmanParams) -> KalmanState:
    """
    用观测框更新状态

    Raises:
        KalmanNumericalError: 状态非有限，或新息协方差奇异
    """
    z.require_valid()
    if not s.is_finite():
        raise KalmanNumericalError("更新前状态包含非有限值")

    H = measurement_matrix()
    R = measurement_noise(params)
    S = H @ s.covariance @ H.T + R
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > MAX_INNOVATION_CONDITION:
        raise KalmanNumericalError(f"新息协方差奇异，条件数={np.linalg.cond(S):.3e}")

    try:
        mean, covariance = filter_update(s.mean, s.covariance, encode_box(z), R, H=H)
    except np.linalg.LinAlgError as e:
        raise KalmanNumericalError(f"卡尔曼更新失败: {e}")

    updated = KalmanState(mean, _symmetrize(covariance))
    if not updated.is_finite():
        raise KalmanNumericalError("更新后状态包含非有限值")
    return updated


def _best_gated_detection(
    predicted: BoundingBox, candidates: Sequence[Detection], gate_iou: float
) -> Optional[Detection]:
    """选出与预测框 IoU 不低于门限且最大的检测，IoU 相同时取列表中靠前者"""
    if not predicted.is_valid():
        return None
    best, best_iou = None, -1.0
    for detection in candidates:
        overlap = iou(predicted, detection.box)
        if overlap >= gate_iou and overlap > best_iou:
            best, best_iou = detection, overlap
    return best


def refine_single_skier(
    track: Track,
    detections: Mapping[int, Sequence[Detection]],
    params: KalmanParams,
    manifest: Optional[SequenceManifest] = None,
) -> Track:
    """
    用检测结果对单人轨迹做卡尔曼精修

    每帧依次：预测；在通过IoU门限的检测中选IoU最大者更新；若没有检测通过门限
    且输入轨迹在该帧存在，则用输入框更新。输出框取状态前四维，存在标记照抄输入。

    Args:
        track: 在清单帧域上稠密的输入轨迹
        detections: 帧号 -> 检测列表，任意帧可为空
        params: 滤波参数
        manifest: 提供片段边界；为空时整条轨迹视为一个片段

    Returns:
        Track: 与输入存在帧集合完全一致的精修轨迹
    """
    if manifest is not None:
        segments = [clip.frames for clip in manifest.clips]
    else:
        segments = [track.frames]

    output = []
    gated_frames = 0
    fallback_frames = 0
    for segment in segments:
        state: Optional[KalmanState] = None
        for frame in segment:
            record = track[frame]
            if state is None:
                if record.present:
                    state = kf_init(record.box, params)
                    output.append(FrameRecord.observed(frame, record.box, record.confidence))
                else:
                    output.append(FrameRecord.absent(frame))
                continue

            state = kf_predict(state, params)
            matched = _best_gated_detection(state.box, detections.get(frame, ()), params.gate_iou)
            if matched is not None:
                state = kf_update(state, matched.box, params)
                gated_frames += 1
            elif record.present:
                state = kf_update(state, record.box, params)
                fallback_frames += 1

            if not record.present:
                output.append(FrameRecord.absent(frame))
                continue
            refined = state.box
            if not refined.is_valid():
                # 宽高被速度拖到非正值时从输入框重新起步
                state = kf_init(record.box, params)
                refined = record.box
            output.append(FrameRecord.observed(frame, refined, record.confidence))

    logger.info(
        f"卡尔曼精修完成: 序列={track.sequence_id}, 关联检测帧={gated_frames}, 回退帧={fallback_frames}"
    )
    return Track.from_records(track.sequence_id, output)
