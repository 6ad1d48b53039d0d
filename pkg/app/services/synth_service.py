"""
合成多机位序列生成服务

生成内容：
- 清单：n_clips 个等长机位片段
- 真值：每个身份一条无噪声轨迹，身份 0 为目标，其余为干扰者，各占一条互不重叠的车道
- 基础轨迹：跟随目标真值并叠加框噪声σ_b；在每个切换事件的帧起直到片段结束改为跟随干扰者
- 特征：各身份固定的单位隐向量（两两余弦相似度 < 0.3，拒绝采样），
  逐帧特征 = 被跟随身份的隐向量 + 高斯噪声σ_e，再归一化
- 检测：每帧每个身份一个框，中间帧的候选带特征
- 锚点：目标隐向量 + 噪声σ_e，归一化

相同规格生成的文件逐字节一致。
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.clients.oracle import ScheduledSwitch
from app.core.errors import SkiTrackError
from app.dataio.annotations import save_annotations
from app.dataio.detections import DetectionMap, save_detections
from app.dataio.embeddings import TRACK_CANDIDATE, EmbeddingStore, save_embeddings
from app.dataio.manifest import save_manifest
from app.dataio.text import PathLike, write_json
from app.dataio.tracks import save_track
from app.models.embedding import Embedding
from app.models.geometry import BoundingBox, clamp_box
from app.models.sequence import (
    CameraClip,
    Detection,
    Discipline,
    FrameRecord,
    GroundTruth,
    SequenceManifest,
    Track,
)
from app.schemas.run_config import SequenceInputs, SwitchPoint
from app.schemas.synth import SwitchEvent, SynthSpec, SynthSuiteSpec, TrajectoryKind

logger = logging.getLogger(__name__)

# 身份隐向量两两余弦相似度上限（严格小于）
LATENT_MAX_COSINE = 0.3
LATENT_MAX_TRIES = 1000
DETECTION_SCORE = 0.9
BASE_TRACK_CONFIDENCE = 0.9
SECONDARY_TRACK_CONFIDENCE = 0.8
MIN_BOX_SIDE = 1.0
TARGET_ID = 0

# 独立随机流，保证改动某一类输出不影响其他输出
_STREAM_LATENTS = 0
_STREAM_BASE = 1
_STREAM_EMBEDDINGS = 2
_STREAM_ANCHOR = 3
_STREAM_SECONDARY = 4


class SynthSpecError(SkiTrackError):
    """合成规格无法满足"""
    def __init__(self, message: str):
        super().__init__(message, "SYNTH_SPEC_ERROR")


@dataclass
class SynthSequence:
    """一条合成序列的全部产物"""
    spec: SynthSpec
    manifest: SequenceManifest
    ground_truth: GroundTruth
    distractors: Dict[str, GroundTruth]
    base_track: Track
    secondary_track: Track
    detections: DetectionMap
    embeddings: EmbeddingStore
    latents: np.ndarray
    switches: List[ScheduledSwitch] = field(default_factory=list)

    @property
    def switched_clips(self) -> List[str]:
        return sorted({self.manifest.clips[e.clip_index].clip_id for e in self.spec.switch_events})


def _rng(spec: SynthSpec, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, stream])


def sample_latents(spec: SynthSpec) -> np.ndarray:
    """
    拒绝采样身份隐向量

    Raises:
        SynthSpecError: 1000 次尝试内无法满足两两余弦相似度 < 0.3（维度相对身份数过小）
    """
    rng = _rng(spec, _STREAM_LATENTS)
    accepted: List[np.ndarray] = []
    for identity in range(spec.n_identities):
        for _ in range(LATENT_MAX_TRIES):
            candidate = rng.normal(size=spec.embedding_dim)
            norm = np.linalg.norm(candidate)
            if norm == 0:
                continue
            candidate = candidate / norm
            if all(float(np.dot(candidate, other)) < LATENT_MAX_COSINE for other in accepted):
                accepted.append(candidate)
                break
        else:
            raise SynthSpecError(
                f"{LATENT_MAX_TRIES} 次尝试后仍无法为身份 {identity} 采样到分离的隐向量"
                f"（D={spec.embedding_dim}, 身份数={spec.n_identities}）"
            )
    return np.vstack(accepted)


def build_manifest(spec: SynthSpec) -> SequenceManifest:
    clips = [
        CameraClip(f"cam{index}", index * spec.frames_per_clip, (index + 1) * spec.frames_per_clip - 1)
        for index in range(spec.n_clips)
    ]
    return SequenceManifest(spec.sequence_id, spec.discipline, tuple(clips), spec.image_width, spec.image_height)


def _box_size(spec: SynthSpec, identity: int) -> Tuple[float, float]:
    return spec.image_width * 0.04 * (1.0 + 0.1 * identity), spec.image_height * 0.12 * (1.0 + 0.1 * identity)


def trajectory_box(spec: SynthSpec, identity: int, t: float, clip_index: int) -> BoundingBox:
    """
    身份在片段内归一化时刻 t ∈ [0,1] 的真值框

    linear_descent: 沿各自竖直车道自上而下滑行，带轻微横向漂移
    parabolic_jump: 沿各自水平车道从左到右，竖直方向为抛物线腾空
    """
    width, height = spec.image_width, spec.image_height
    w, h = _box_size(spec, identity)
    lane = (identity + 1) / (spec.n_identities + 1)
    drift = 0.02 * (1 if clip_index % 2 == 0 else -1)
    if spec.trajectory is TrajectoryKind.LINEAR_DESCENT:
        cx = width * (lane + drift * t)
        cy = height * (0.15 + 0.6 * t)
    else:
        cx = width * (0.1 + 0.8 * t)
        cy = height * lane - height * 0.15 * 4.0 * t * (1.0 - t)
    return clamp_box(BoundingBox.from_center(cx, cy, w, h), width, height)


def build_ground_truth(spec: SynthSpec, manifest: SequenceManifest) -> List[GroundTruth]:
    """每个身份一条稠密真值"""
    identities: List[Dict[int, Optional[BoundingBox]]] = [{} for _ in range(spec.n_identities)]
    for clip_index, clip in enumerate(manifest.clips):
        span = max(len(clip) - 1, 1)
        for frame in clip.frames:
            t = (frame - clip.start_frame) / span
            for identity in range(spec.n_identities):
                identities[identity][frame] = trajectory_box(spec, identity, t, clip_index)
    return [GroundTruth(spec.sequence_id, boxes) for boxes in identities]


def _jitter(box: BoundingBox, rng: np.random.Generator, sigma: float) -> BoundingBox:
    if sigma == 0:
        return box
    dx, dy, dw, dh = rng.normal(0.0, sigma, size=4)
    return BoundingBox(box.x + dx, box.y + dy, max(box.w + dw, MIN_BOX_SIDE), max(box.h + dh, MIN_BOX_SIDE))


def followed_identities(spec: SynthSpec, manifest: SequenceManifest) -> Dict[int, int]:
    """帧号 -> 基础轨迹跟随的身份"""
    followed = {frame: TARGET_ID for frame in manifest.frames}
    for event in sorted(spec.switch_events, key=lambda e: (e.clip_index, e.frame_offset)):
        clip = manifest.clips[event.clip_index]
        for frame in range(clip.start_frame + event.frame_offset, clip.end_frame + 1):
            followed[frame] = event.distractor_id
    return followed


def global_switches(spec: SynthSpec, manifest: SequenceManifest) -> List[ScheduledSwitch]:
    return [
        ScheduledSwitch(manifest.clips[e.clip_index].start_frame + e.frame_offset, str(e.distractor_id))
        for e in spec.switch_events
    ]


def _noisy_unit(latent: np.ndarray, rng: np.random.Generator, sigma: float) -> Embedding:
    vector = latent + rng.normal(0.0, sigma, size=latent.shape[0]) if sigma > 0 else latent.copy()
    norm = np.linalg.norm(vector)
    if norm == 0:
        vector, norm = latent.copy(), 1.0
    return Embedding(vector / norm)


def generate(spec: SynthSpec) -> SynthSequence:
    """
    按规格生成一条合成序列

    Raises:
        SynthSpecError: 隐向量无法分离
    """
    latents = sample_latents(spec)
    manifest = build_manifest(spec)
    truths = build_ground_truth(spec, manifest)
    target = truths[TARGET_ID]
    followed = followed_identities(spec, manifest)

    base_rng = _rng(spec, _STREAM_BASE)
    emb_rng = _rng(spec, _STREAM_EMBEDDINGS)
    secondary_rng = _rng(spec, _STREAM_SECONDARY)
    store = EmbeddingStore(spec.embedding_dim)
    store.set_anchor(_noisy_unit(latents[TARGET_ID], _rng(spec, _STREAM_ANCHOR), spec.embedding_noise))

    base_records, secondary_records = [], []
    detections: DetectionMap = {}
    middle_frames = {clip.middle_frame for clip in manifest.clips}
    for frame in manifest.frames:
        identity = followed[frame]
        base_records.append(
            FrameRecord.observed(
                frame, _jitter(truths[identity].box(frame), base_rng, spec.box_noise), BASE_TRACK_CONFIDENCE
            )
        )
        store.add(frame, TRACK_CANDIDATE, _noisy_unit(latents[identity], emb_rng, spec.embedding_noise))
        secondary_records.append(
            FrameRecord.observed(
                frame, _jitter(target.box(frame), secondary_rng, spec.box_noise / 2.0), SECONDARY_TRACK_CONFIDENCE
            )
        )
        detections[frame] = [
            Detection(truths[k].box(frame), DETECTION_SCORE, f"id{k}") for k in range(spec.n_identities)
        ]
        if frame in middle_frames:
            for k in range(spec.n_identities):
                store.add(frame, f"id{k}", _noisy_unit(latents[k], emb_rng, spec.embedding_noise))

    sequence = SynthSequence(
        spec=spec,
        manifest=manifest,
        ground_truth=target,
        distractors={str(k): truths[k] for k in range(1, spec.n_identities)},
        base_track=Track.from_records(spec.sequence_id, base_records),
        secondary_track=Track.from_records(spec.sequence_id, secondary_records),
        detections=detections,
        embeddings=store,
        latents=latents,
        switches=global_switches(spec, manifest),
    )
    logger.info(
        f"生成合成序列: {spec.sequence_id} ({spec.discipline.value}), {manifest.frame_count} 帧, "
        f"切换事件 {len(spec.switch_events)} 个"
    )
    return sequence


def write_sequence(sequence: SynthSequence, directory: PathLike) -> SequenceInputs:
    """
    按 dataio 格式写出一条合成序列

    Returns:
        SequenceInputs: 相对于 directory 上一级目录的输入路径
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    prefix = directory.name
    save_manifest(sequence.manifest, directory / "manifest.json")
    save_annotations(sequence.ground_truth, directory / "gt.csv")
    for key, truth in sequence.distractors.items():
        save_annotations(truth, directory / f"distractor_{key}.csv")
    save_track(sequence.base_track, directory / "base_track.csv")
    save_track(sequence.secondary_track, directory / "secondary_track.csv")
    save_detections(sequence.detections, directory / "detections.csv")
    save_embeddings(sequence.embeddings, directory / "embeddings.txt")

    first = sequence.manifest.frames.start
    return SequenceInputs(
        manifest=f"{prefix}/manifest.json",
        annotations=f"{prefix}/gt.csv",
        base_track=f"{prefix}/base_track.csv",
        secondary_track=f"{prefix}/secondary_track.csv",
        embeddings=f"{prefix}/embeddings.txt",
        detections=f"{prefix}/detections.csv",
        distractors={key: f"{prefix}/distractor_{key}.csv" for key in sequence.distractors},
        switches=[SwitchPoint(frame=s.frame, distractor_id=s.distractor_id) for s in sequence.switches],
        initial_box=sequence.ground_truth.box(first).to_list(),
    )


def default_suite_spec(seed: int = 42, embedding_noise: float = 0.05) -> SynthSuiteSpec:
    """默认评测集：每个项目一条序列，各注入一次身份切换"""
    kinds = {
        Discipline.AL: TrajectoryKind.LINEAR_DESCENT,
        Discipline.JP: TrajectoryKind.PARABOLIC_JUMP,
        Discipline.FS: TrajectoryKind.PARABOLIC_JUMP,
    }
    return SynthSuiteSpec(
        sequences=[
            SynthSpec(
                sequence_id=f"{discipline.value}_000",
                discipline=discipline,
                seed=seed + index,
                trajectory=kinds[discipline],
                embedding_noise=embedding_noise,
                switch_events=[SwitchEvent(clip_index=1, frame_offset=10, distractor_id=1)],
            )
            for index, discipline in enumerate(Discipline)
        ]
    )


def generate_suite(
    suite: SynthSuiteSpec, out_dir: PathLike, tracker_noise: float = 0.5, seed: Optional[int] = None
) -> Tuple[Path, List[SynthSequence]]:
    """
    生成评测集并写出 run_config.json（oracle 跟踪器，路径相对于 out_dir）

    Returns:
        (run_config.json 路径, 各序列产物)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = [spec.sequence_id for spec in suite.sequences]
    if len(set(ids)) != len(ids):
        raise SynthSpecError(f"评测集中存在重复的序列ID: {ids}")

    sequences, inputs = [], []
    for spec in suite.sequences:
        sequence = generate(spec)
        inputs.append(write_sequence(sequence, out_dir / spec.sequence_id))
        sequences.append(sequence)

    write_json(out_dir / "suite.json", suite.model_dump(mode="json"))
    config = {
        "seed": seed if seed is not None else suite.sequences[0].seed,
        "output_dir": "run",
        "tracker": {"kind": "oracle", "noise_sigma": tracker_noise},
        "sequences": [item.model_dump(mode="json", exclude_none=True) for item in inputs],
    }
    config_path = out_dir / "run_config.json"
    write_json(config_path, config)
    logger.info(f"合成评测集已写出: {out_dir} ({len(sequences)} 条序列)")
    return config_path, sequences


def latent_max_cosine(latents: np.ndarray) -> float:
    """隐向量两两余弦相似度的最大值；单个身份时为 -inf"""
    n = latents.shape[0]
    best = -math.inf
    for i in range(n):
        for j in range(i + 1, n):
            best = max(best, float(np.dot(latents[i], latents[j])))
    return best
