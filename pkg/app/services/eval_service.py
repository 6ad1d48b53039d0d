"""
长时跟踪评测服务

逐帧质量默认取 IoU 本身（hit 协议下为 IoU ≥ 阈值记 1，否则记 0）：
  precision = Σ_{预测存在帧} 质量 / 预测存在帧数（真值缺席的帧质量为 0）
  recall    = Σ_{真值存在帧} 质量 / 真值存在帧数（预测缺席的帧质量为 0）
  f1        = 2PR / (P + R)，P + R = 0 时为 0
项目分数为其下各序列的算术平均，总体分数为各项目分数的算术平均。
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from app.core.config import settings
from app.core.errors import SkiTrackError
from app.dataio.annotations import load_annotations
from app.dataio.manifest import load_manifest
from app.dataio.tracks import load_track
from app.models.geometry import iou
from app.models.sequence import Discipline, FrameRecord, GroundTruth, SequenceManifest, Track
from app.schemas.report import ComparisonSummary, MetricReport, ScoreDelta, SequenceScore
from app.schemas.run_config import EvalConfig, EvalProtocol, EvalSetting
from app.services.fusion_service import FrameDomainMismatchError, require_same_domain

logger = logging.getLogger(__name__)

# 分数差异在该范围内视为不变
DELTA_TOLERANCE = 1e-12
TABLE_ROWS = ("All",) + tuple(d.value for d in Discipline)


class DegenerateSequenceError(SkiTrackError):
    """真值在所有帧都缺席，召回率无定义"""
    def __init__(self, message: str):
        super().__init__(message, "DEGENERATE_SEQUENCE")


class SequenceSetMismatchError(SkiTrackError):
    """两份报告覆盖的序列集合不同"""
    def __init__(self, message: str):
        super().__init__(message, "SEQUENCE_SET_MISMATCH")


def frame_quality(
    record: FrameRecord, gt_box, protocol: EvalProtocol = EvalProtocol.IOU,
    hit_threshold: float = settings.EVAL_HIT_IOU_THRESHOLD,
) -> float:
    """单帧质量；任一方缺席时为 0"""
    if not record.present or gt_box is None:
        return 0.0
    overlap = iou(record.box, gt_box)
    if protocol is EvalProtocol.HIT:
        return 1.0 if overlap >= hit_threshold else 0.0
    return overlap


def _score_frames(
    pred: Track, gt: GroundTruth, frames: Iterable[int], protocol: EvalProtocol, hit_threshold: float
) -> SequenceScore:
    frames = list(frames)
    precision_sum = recall_sum = 0.0
    pred_present = gt_present = 0
    for frame in frames:
        record = pred[frame]
        gt_box = gt.box(frame)
        quality = frame_quality(record, gt_box, protocol, hit_threshold)
        if record.present:
            pred_present += 1
            precision_sum += quality
        if gt_box is not None:
            gt_present += 1
            recall_sum += quality

    if gt_present == 0:
        raise DegenerateSequenceError(f"序列 {gt.sequence_id} 的真值在评测帧上从未出现")
    precision = precision_sum / pred_present if pred_present else 0.0
    recall = recall_sum / gt_present
    return SequenceScore.from_pr(min(precision, 1.0), min(recall, 1.0), len(frames))


def score_sequence(
    pred: Track,
    gt: GroundTruth,
    protocol: EvalProtocol = EvalProtocol.IOU,
    hit_threshold: float = settings.EVAL_HIT_IOU_THRESHOLD,
) -> SequenceScore:
    """
    单条序列的精确率/召回率/F1

    Raises:
        FrameDomainMismatchError: 预测与真值帧域不同
        DegenerateSequenceError: 真值从未出现
    """
    require_same_domain(pred.frames, gt.frames, "预测轨迹与真值")
    return _score_frames(pred, gt, pred.frames, protocol, hit_threshold)


def clip_unit_id(sequence_id: str, clip_id: str) -> str:
    return f"{sequence_id}/{clip_id}"


def score_clips(
    pred: Track,
    gt: GroundTruth,
    manifest: SequenceManifest,
    protocol: EvalProtocol = EvalProtocol.IOU,
    hit_threshold: float = settings.EVAL_HIT_IOU_THRESHOLD,
) -> Dict[str, SequenceScore]:
    """单机位设置：每个片段作为独立评测单元；真值从未出现的片段跳过并告警"""
    require_same_domain(pred.frames, gt.frames, "预测轨迹与真值")
    require_same_domain(pred.frames, list(manifest.frames), "预测轨迹与清单")
    scores = {}
    for clip in manifest.clips:
        try:
            scores[clip_unit_id(manifest.sequence_id, clip.clip_id)] = _score_frames(
                pred, gt, clip.frames, protocol, hit_threshold
            )
        except DegenerateSequenceError:
            logger.warning(f"片段 {manifest.sequence_id}/{clip.clip_id} 的真值从未出现，跳过")
    return scores


def _mean_score(scores: List[SequenceScore]) -> SequenceScore:
    n = len(scores)
    return SequenceScore(
        precision=sum(s.precision for s in scores) / n,
        recall=sum(s.recall for s in scores) / n,
        f1=sum(s.f1 for s in scores) / n,
        frames_evaluated=sum(s.frames_evaluated for s in scores),
    )


def aggregate(
    scores: Mapping[str, SequenceScore],
    disciplines: Mapping[str, Discipline],
    protocol: EvalProtocol = EvalProtocol.IOU,
    setting: EvalSetting = EvalSetting.MC,
) -> MetricReport:
    """
    按项目聚合

    Args:
        scores: 评测单元ID -> 分数
        disciplines: 评测单元ID -> 项目

    Returns:
        MetricReport: 项目分数为各单元分数的逐项算术平均；总体分数只对出现的项目取平均，
        缺失的项目记录在 missing_disciplines 中
    """
    missing_labels = [unit for unit in scores if unit not in disciplines]
    if missing_labels:
        raise SkiTrackError(f"评测单元缺少项目标签: {missing_labels[:5]}", "MISSING_DISCIPLINE_LABEL")

    grouped: Dict[Discipline, List[SequenceScore]] = {}
    for unit in sorted(scores):
        grouped.setdefault(Discipline(disciplines[unit]), []).append(scores[unit])

    per_discipline = {d: _mean_score(grouped[d]) for d in Discipline if d in grouped}
    missing = [d for d in Discipline if d not in grouped]
    if missing:
        logger.warning(f"以下项目没有任何评测单元，总体分数只对其余项目平均: {[d.value for d in missing]}")

    present = list(per_discipline.values())
    count = len(present)
    report = MetricReport(
        per_sequence={unit: scores[unit] for unit in sorted(scores)},
        per_discipline=per_discipline,
        overall_f1=sum(s.f1 for s in present) / count if count else 0.0,
        overall_precision=sum(s.precision for s in present) / count if count else 0.0,
        overall_recall=sum(s.recall for s in present) / count if count else 0.0,
        missing_disciplines=missing,
        protocol=protocol,
        setting=setting,
    )
    logger.info(f"评测聚合完成: {len(scores)} 个单元, 总体 F1={report.overall_f1:.4f}")
    return report


def _delta(a: SequenceScore, b: SequenceScore) -> ScoreDelta:
    return ScoreDelta(precision=b.precision - a.precision, recall=b.recall - a.recall, f1=b.f1 - a.f1)


def ablation_compare(a: MetricReport, b: MetricReport) -> ComparisonSummary:
    """
    对比两份报告（b 相对 a 的变化）

    Raises:
        SequenceSetMismatchError: 两份报告的评测单元集合不同
    """
    if set(a.per_sequence) != set(b.per_sequence):
        only_a = sorted(set(a.per_sequence) - set(b.per_sequence))
        only_b = sorted(set(b.per_sequence) - set(a.per_sequence))
        raise SequenceSetMismatchError(f"序列集合不一致: 仅 A 有 {only_a[:5]}, 仅 B 有 {only_b[:5]}")

    summary = ComparisonSummary(overall_f1_delta=b.overall_f1 - a.overall_f1)
    for unit in sorted(a.per_sequence):
        delta = _delta(a.per_sequence[unit], b.per_sequence[unit])
        summary.per_sequence[unit] = delta
        if delta.f1 > DELTA_TOLERANCE:
            summary.improved.append(unit)
        elif delta.f1 < -DELTA_TOLERANCE:
            summary.degraded.append(unit)
        else:
            summary.unchanged.append(unit)
    for discipline in Discipline:
        if discipline in a.per_discipline and discipline in b.per_discipline:
            summary.per_discipline[discipline] = _delta(a.per_discipline[discipline], b.per_discipline[discipline])
    return summary


# ---- 表格渲染 ----

def _row_scores(report: MetricReport, row: str) -> Optional[Tuple[float, float, float]]:
    if row == "All":
        if not report.per_discipline:
            return None
        return report.overall_f1, report.overall_precision, report.overall_recall
    score = report.per_discipline.get(Discipline(row))
    if score is None:
        return None
    return score.f1, score.precision, score.recall


def render_table(reports: Mapping[str, MetricReport]) -> str:
    """
    按结果表的行结构渲染：行为 All/AL/JP/FS，每格 F1 在上、P 与 R 在下
    """
    names = list(reports)
    width = max([10] + [len(name) + 2 for name in names])
    header = f"{'':<6}{'':<4}" + "".join(f"{name:>{width}}" for name in names)
    lines = [header, "-" * len(header)]
    for row in TABLE_ROWS:
        cells = [_row_scores(reports[name], row) for name in names]
        for index, metric in enumerate(("F1", "P", "R")):
            label = row if index == 0 else ""
            values = "".join(
                f"{'-':>{width}}" if cell is None else f"{cell[index]:>{width}.3f}" for cell in cells
            )
            lines.append(f"{label:<6}{metric:<4}{values}")
    return "\n".join(lines)


def render_comparison(summary: ComparisonSummary) -> str:
    lines = [f"总体 F1 变化: {summary.overall_f1_delta:+.4f}"]
    for discipline, delta in summary.per_discipline.items():
        lines.append(f"  {discipline.value}: F1 {delta.f1:+.4f}  P {delta.precision:+.4f}  R {delta.recall:+.4f}")
    for unit, delta in summary.per_sequence.items():
        lines.append(f"  {unit}: F1 {delta.f1:+.4f}")
    lines.append(
        f"提升 {len(summary.improved)} / 下降 {len(summary.degraded)} / 不变 {len(summary.unchanged)}"
    )
    return "\n".join(lines)


# ---- 基于文件的评测 ----

class EvaluationService:
    """从文件读取预测、真值与清单并评测"""

    def __init__(self, cfg: Optional[EvalConfig] = None):
        self.cfg = cfg or EvalConfig()

    def score_units(
        self, pred: Track, gt: GroundTruth, manifest: SequenceManifest
    ) -> Dict[str, SequenceScore]:
        if self.cfg.setting is EvalSetting.SC:
            return score_clips(pred, gt, manifest, self.cfg.protocol, self.cfg.hit_iou_threshold)
        return {manifest.sequence_id: score_sequence(pred, gt, self.cfg.protocol, self.cfg.hit_iou_threshold)}

    def evaluate_files(self, triples: Iterable[Tuple[Path, Path, Path]]) -> MetricReport:
        """
        评测 (预测轨迹, 真值标注, 清单) 文件三元组

        Raises:
            FrameDomainMismatchError: 预测与真值帧域不同
            DataParseError: 文件解析失败
        """
        scores: Dict[str, SequenceScore] = {}
        disciplines: Dict[str, Discipline] = {}
        for pred_path, gt_path, manifest_path in triples:
            manifest = load_manifest(manifest_path)
            gt = load_annotations(gt_path, manifest)
            pred = load_track(pred_path, sequence_id=manifest.sequence_id)
            if pred.frames != gt.frames:
                raise FrameDomainMismatchError(
                    f"{pred_path}: 预测帧域 [{pred.frames[0]}..{pred.frames[-1]}] 与清单帧域 "
                    f"[{manifest.frames.start}..{manifest.frames.stop - 1}] 不一致"
                )
            for unit, score in self.score_units(pred, gt, manifest).items():
                if unit in scores:
                    raise SkiTrackError(f"评测单元 {unit} 重复", "DUPLICATE_SEQUENCE")
                scores[unit] = score
                disciplines[unit] = manifest.discipline
        return aggregate(scores, disciplines, self.cfg.protocol, self.cfg.setting)
