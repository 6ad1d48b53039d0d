"""
跟踪流水线服务

每条序列按固定顺序执行：
  读取输入 -> 基础轨迹（文件或跟踪器生成）-> ReID 身份校正 -> 按模式后处理
  （单人：卡尔曼精修；多人：与辅助跟踪器的框融合）-> 写出结果
任一阶段的模块异常都包装为带阶段与序列归属的 StageError，其他序列继续处理。
"""

import logging
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from app.clients.base import DetectorClient, TrackDirection, TrackerClient, TrackingRequest
from app.clients.detector import StoreDetectorClient
from app.clients.oracle import OracleTrackerClient, ScheduledSwitch
from app.clients.replay import ReplayTrackerClient
from app.clients.subprocess_tracker import BACKEND_ENV_VAR, SubprocessTrackerClient, resolve_command
from app.core.errors import ConfigError, SkiTrackError, StageError
from app.dataio.annotations import load_annotations
from app.dataio.detections import DetectionMap, load_detections
from app.dataio.embeddings import EmbeddingStore, load_embeddings
from app.dataio.errors import DataParseError
from app.dataio.manifest import load_manifest
from app.dataio.reports import save_reid_report, save_run_report
from app.dataio.run_config import load_run_config, save_effective_config
from app.dataio.text import PathLike
from app.dataio.tracks import load_track, save_track
from app.models.geometry import BoundingBox, clamp_box
from app.models.sequence import FrameRecord, GroundTruth, SequenceManifest, Track
from app.schemas.report import MetricReport, RunReport, SequenceRunResult
from app.schemas.run_config import PipelineMode, RunConfig, SequenceInputs
from app.services.eval_service import EvaluationService
from app.services.fusion_service import fuse_tracks, fusion_conflicts
from app.services.kalman_service import refine_single_skier
from app.services.reid_service import ReidService

logger = logging.getLogger(__name__)

FINAL_TRACK_FILE = "final_track.csv"
REID_REPORT_FILE = "reid_report.json"
RUN_REPORT_FILE = "run_report.json"
EFFECTIVE_CONFIG_FILE = "effective_config.json"


@dataclass
class SequenceBundle:
    """一条序列读入后的全部输入"""
    inputs: SequenceInputs
    manifest: SequenceManifest
    detections: DetectionMap
    embeddings: EmbeddingStore
    ground_truth: Optional[GroundTruth] = None
    base_track: Optional[Track] = None
    secondary_track: Optional[Track] = None
    replay_track: Optional[Track] = None
    distractors: Dict[str, GroundTruth] = field(default_factory=dict)

    @property
    def sequence_id(self) -> str:
        return self.manifest.sequence_id


def resolve_mode(config: RunConfig, manifest: SequenceManifest) -> PipelineMode:
    """配置未指定时由项目决定：AL/JP 单人，FS 多人"""
    if config.mode is not None:
        return config.mode
    return PipelineMode(manifest.discipline.default_mode)


def preflight(config: RunConfig) -> None:
    """
    在任何处理开始之前检查配置是否足以完成运行

    Raises:
        ConfigError: 缺少当前模式或客户端所需的输入
    """
    tracker = config.tracker
    if tracker.kind == "subprocess" and not resolve_command(tracker.command):
        raise ConfigError(f"subprocess 跟踪器未配置命令（tracker.command 或环境变量 {BACKEND_ENV_VAR}）")

    for index, inputs in enumerate(config.sequences):
        where = f"sequences[{index}]"
        try:
            manifest = load_manifest(inputs.manifest)
        except DataParseError as e:
            raise ConfigError(f"{where}.manifest 无法解析: {e.message}")
        mode = resolve_mode(config, manifest)
        if mode is PipelineMode.MULTI_SKIER and inputs.secondary_track is None:
            raise ConfigError(f"{where} ({manifest.sequence_id}) 为多人模式，需要 secondary_track")
        if tracker.kind == "oracle" and inputs.annotations is None:
            raise ConfigError(f"{where} ({manifest.sequence_id}) 使用 oracle 跟踪器，需要 annotations")
        if tracker.kind == "replay" and inputs.replay_track is None:
            raise ConfigError(f"{where} ({manifest.sequence_id}) 使用 replay 跟踪器，需要 replay_track")
        if inputs.base_track is None and inputs.initial_box is None:
            raise ConfigError(f"{where} ({manifest.sequence_id}) 没有 base_track 时需要 initial_box")
        unknown = {s.distractor_id for s in inputs.switches} - set(inputs.distractors)
        if unknown:
            raise ConfigError(f"{where}.switches 引用了未配置的干扰者 {sorted(unknown)}")


class PipelineService:
    """按运行配置处理全部序列"""

    def __init__(
        self,
        config: RunConfig,
        tracker_factory: Optional[Callable[[SequenceBundle], TrackerClient]] = None,
    ):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.tracker_factory = tracker_factory or self.default_tracker
        self.logger = logging.getLogger(__name__)

    # ---- 客户端 ----

    def default_tracker(self, bundle: SequenceBundle) -> TrackerClient:
        tracker = self.config.tracker
        if tracker.kind == "subprocess":
            return SubprocessTrackerClient(tracker.command, tracker.timeout, tracker.spawn_retries)
        if tracker.kind == "replay":
            return ReplayTrackerClient(bundle.replay_track)
        return OracleTrackerClient(
            bundle.ground_truth,
            bundle.distractors,
            noise_sigma=tracker.noise_sigma,
            switches=[ScheduledSwitch(s.frame, s.distractor_id) for s in bundle.inputs.switches],
            seed=self.config.seed,
        )

    def detector_for(self, bundle: SequenceBundle) -> DetectorClient:
        return StoreDetectorClient(bundle.detections, bundle.embeddings)

    # ---- 阶段 ----

    def load_inputs(self, inputs: SequenceInputs) -> SequenceBundle:
        manifest = load_manifest(inputs.manifest)
        bundle = SequenceBundle(
            inputs=inputs,
            manifest=manifest,
            detections=load_detections(inputs.detections, manifest),
            embeddings=load_embeddings(inputs.embeddings),
        )
        if inputs.annotations:
            bundle.ground_truth = load_annotations(inputs.annotations, manifest)
        if inputs.base_track:
            bundle.base_track = load_track(inputs.base_track, manifest)
        if inputs.secondary_track:
            bundle.secondary_track = load_track(inputs.secondary_track, manifest)
        if inputs.replay_track:
            bundle.replay_track = load_track(inputs.replay_track, manifest)
        bundle.distractors = {
            key: load_annotations(path, manifest) for key, path in sorted(inputs.distractors.items())
        }
        return bundle

    def generate_base_track(self, bundle: SequenceBundle, tracker: TrackerClient) -> Track:
        """每个片段从首帧向前跟踪一次；后续片段以上一片段最后一个存在框为提示"""
        manifest = bundle.manifest
        prompt = BoundingBox.from_list(bundle.inputs.initial_box)
        records: List[FrameRecord] = []
        for clip in manifest.clips:
            prompt = clamp_box(prompt, manifest.image_width, manifest.image_height)
            session = tracker.track(
                TrackingRequest(
                    manifest.sequence_id, clip.start_frame, clip.end_frame, clip.start_frame, prompt,
                    TrackDirection.FORWARD,
                )
            )
            records.extend(session)
            present = [record for record in session if record.present]
            if present:
                prompt = present[-1].box
        return Track.from_records(manifest.sequence_id, records)

    def run_sequence(self, inputs: SequenceInputs) -> SequenceRunResult:
        """处理一条序列；模块异常包装为 StageError 并记录在结果中"""
        sequence_id = Path(inputs.manifest).parent.name
        stage = "load"
        tracker: Optional[TrackerClient] = None
        result: Optional[SequenceRunResult] = None
        try:
            bundle = self.load_inputs(inputs)
            sequence_id = bundle.sequence_id
            mode = resolve_mode(self.config, bundle.manifest)
            result = SequenceRunResult(
                sequence_id=sequence_id, discipline=bundle.manifest.discipline, mode=mode.value
            )
            tracker = self.tracker_factory(bundle)

            stage = "base_track"
            track = bundle.base_track
            if track is None:
                track = self.generate_base_track(bundle, tracker)

            if self.config.reid.enabled:
                stage = "reid"
                track, reid_report = ReidService(self.config.reid).reid_pass(
                    track,
                    bundle.manifest,
                    bundle.embeddings.anchor,
                    bundle.embeddings.track_embeddings(),
                    self.detector_for(bundle),
                    tracker,
                )
                result.reid = reid_report
                for clip in reid_report.clips:
                    if clip.action in ("no_candidates", "correction_failed"):
                        result.warnings.append(f"片段 {clip.clip_id}: {clip.action}")

            if mode is PipelineMode.SINGLE_SKIER:
                stage = "kalman"
                track = refine_single_skier(track, bundle.detections, self.config.kalman, bundle.manifest)
            else:
                stage = "fusion"
                result.fusion_conflicts = fusion_conflicts(track, bundle.secondary_track)
                if result.fusion_conflicts:
                    result.warnings.append(
                        f"{len(result.fusion_conflicts)} 帧主轨迹缺席而辅助轨迹存在，保持缺席"
                    )
                track = fuse_tracks(track, bundle.secondary_track, self.config.fusion)

            if isinstance(tracker, ReplayTrackerClient):
                for frame in tracker.prompt_warnings:
                    result.warnings.append(f"回放提示帧 {frame} 的存储框与提示框不一致")

            stage = "write"
            track.validate_against(bundle.manifest)
            out = self.output_dir / sequence_id
            save_track(track, out / FINAL_TRACK_FILE)
            if result.reid is not None:
                save_reid_report(result.reid, out / REID_REPORT_FILE)
            self.logger.info(f"序列 {sequence_id} 处理完成 (模式={mode.value})")
            return result
        except SkiTrackError as e:
            error = e if isinstance(e, StageError) else StageError(stage, sequence_id, e)
            self.logger.error(error.message)
            if result is None:
                result = self._failed_without_manifest(sequence_id, inputs)
            result.status = "error"
            result.error = f"{error.message} ({error.error_code})"
            result.error_stage = error.stage
            return result
        finally:
            if tracker is not None:
                tracker.close()

    def _failed_without_manifest(self, sequence_id: str, inputs: SequenceInputs) -> SequenceRunResult:
        discipline = None
        try:
            manifest = load_manifest(inputs.manifest)
            discipline = manifest.discipline
            sequence_id = manifest.sequence_id
        except SkiTrackError:
            pass
        return SequenceRunResult(sequence_id=sequence_id, discipline=discipline, mode="unknown")

    def effective_config(self) -> RunConfig:
        """实际生效的配置：subprocess 后端命令以环境变量覆盖后的结果为准"""
        tracker = self.config.tracker
        if tracker.kind != "subprocess":
            return self.config
        resolved = tracker.model_copy(update={"command": resolve_command(tracker.command)})
        return self.config.model_copy(update={"tracker": resolved})

    def run(self) -> RunReport:
        """处理全部序列，写出生效配置与运行报告"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        save_effective_config(self.effective_config(), self.output_dir / EFFECTIVE_CONFIG_FILE)

        workers = min(self.config.workers, len(self.config.sequences))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                results = list(executor.map(self.run_sequence, self.config.sequences))
        else:
            results = [self.run_sequence(inputs) for inputs in self.config.sequences]

        report = RunReport(sequences=results)
        save_run_report(report, self.output_dir / RUN_REPORT_FILE)
        failed = [r.sequence_id for r in report.sequences if r.status == "error"]
        self.logger.info(f"运行完成: {len(results)} 条序列, 失败 {len(failed)} 条")
        return report

    def evaluate(self, eval_service: Optional[EvaluationService] = None) -> MetricReport:
        """用配置中的真值评测本次运行的最终轨迹"""
        service = eval_service or EvaluationService(self.config.evaluation)
        triples = []
        for inputs in self.config.sequences:
            if inputs.annotations is None:
                continue
            sequence_id = load_manifest(inputs.manifest).sequence_id
            triples.append((self.output_dir / sequence_id / FINAL_TRACK_FILE, inputs.annotations, inputs.manifest))
        return service.evaluate_files(triples)


def run_pipeline(config: RunConfig) -> RunReport:
    preflight(config)
    return PipelineService(config).run()


def compute_expected_results(config_path: PathLike, switched_clips: Dict[str, List[str]]) -> Dict[str, Any]:
    """
    分别在开启 / 关闭身份校正时运行流水线并评测，记录两者的总体 F1 与逐片段校验结果

    Args:
        config_path: 合成评测集的 run_config.json
        switched_clips: 序列ID -> 注入了身份切换的片段ID
    """
    with tempfile.TemporaryDirectory() as tmp:
        outcomes = {}
        reports = {}
        for label, enabled in (("with_reid", True), ("without_reid", False)):
            config = load_run_config(
                config_path, {"output_dir": str(Path(tmp) / label), "reid.enabled": enabled}
            )
            preflight(config)
            service = PipelineService(config)
            reports[label] = service.run()
            if reports[label].failed:
                errors = [r.error for r in reports[label].sequences if r.error]
                raise SkiTrackError(f"期望结果计算失败: {errors}", "EXPECTED_RESULTS_FAILED")
            outcomes[label] = service.evaluate()

    clips: Dict[str, Dict[str, Any]] = {}
    for result in reports["with_reid"].sequences:
        clips[result.sequence_id] = {
            clip.clip_id: {
                "similarity": clip.similarity,
                "verified": clip.verified,
                "switched": clip.clip_id in switched_clips.get(result.sequence_id, []),
                "action": clip.action,
            }
            for clip in result.reid.clips
        }
    return {
        "overall_f1_with_reid": outcomes["with_reid"].overall_f1,
        "overall_f1_without_reid": outcomes["without_reid"].overall_f1,
        "per_sequence_f1_with_reid": {k: v.f1 for k, v in outcomes["with_reid"].per_sequence.items()},
        "per_sequence_f1_without_reid": {k: v.f1 for k, v in outcomes["without_reid"].per_sequence.items()},
        "clips": clips,
    }
