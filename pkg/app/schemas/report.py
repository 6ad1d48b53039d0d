"""
评测与运行报告的数据模型
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app.models.sequence import Discipline
from app.schemas.run_config import EvalProtocol, EvalSetting


class SequenceScore(BaseModel):
    """单条序列（或单个片段）的精确率/召回率/F1"""
    precision: float = Field(..., description="精确率", ge=0.0, le=1.0)
    recall: float = Field(..., description="召回率", ge=0.0, le=1.0)
    f1: float = Field(..., description="F1", ge=0.0, le=1.0)
    frames_evaluated: int = Field(0, description="参与评测的帧数", ge=0)

    @classmethod
    def from_pr(cls, precision: float, recall: float, frames_evaluated: int = 0) -> "SequenceScore":
        denominator = precision + recall
        f1 = 2.0 * precision * recall / denominator if denominator > 0 else 0.0
        return cls(precision=precision, recall=recall, f1=f1, frames_evaluated=frames_evaluated)


class MetricReport(BaseModel):
    """逐序列、逐项目与总体的评测报告"""
    per_sequence: Dict[str, SequenceScore] = Field(default_factory=dict)
    per_discipline: Dict[Discipline, SequenceScore] = Field(default_factory=dict)
    overall_f1: float = Field(0.0, ge=0.0, le=1.0)
    overall_precision: float = Field(0.0, ge=0.0, le=1.0)
    overall_recall: float = Field(0.0, ge=0.0, le=1.0)
    missing_disciplines: List[Discipline] = Field(default_factory=list, description="没有任何序列的项目")
    protocol: EvalProtocol = EvalProtocol.IOU
    setting: EvalSetting = EvalSetting.MC


class ScoreDelta(BaseModel):
    """两份报告之间的分数差（b - a）"""
    precision: float
    recall: float
    f1: float


class ComparisonSummary(BaseModel):
    """消融对比结果"""
    per_sequence: Dict[str, ScoreDelta] = Field(default_factory=dict)
    per_discipline: Dict[Discipline, ScoreDelta] = Field(default_factory=dict)
    overall_f1_delta: float = 0.0
    improved: List[str] = Field(default_factory=list)
    degraded: List[str] = Field(default_factory=list)
    unchanged: List[str] = Field(default_factory=list)


class ClipCorrection(BaseModel):
    """单个片段的校验/校正结果"""
    clip_id: str
    similarity: float = Field(..., ge=-1.0, le=1.0)
    verified: bool = Field(..., description="相似度是否达到阈值")
    action: str = Field(..., pattern="^(kept|corrected|no_candidates|correction_failed)$")
    middle_frame: Optional[int] = None
    b_mid: Optional[List[float]] = None
    message: Optional[str] = None


class ReidReport(BaseModel):
    """一条序列的身份校正报告"""
    sequence_id: str
    threshold: float
    clips: List[ClipCorrection] = Field(default_factory=list)

    @property
    def corrections(self) -> int:
        return sum(1 for clip in self.clips if clip.action == "corrected")

    @property
    def flagged(self) -> List[str]:
        return [clip.clip_id for clip in self.clips if clip.action in ("no_candidates", "correction_failed")]


class SequenceRunResult(BaseModel):
    """单序列运行结果"""
    sequence_id: str
    discipline: Optional[Discipline] = None
    mode: str
    status: str = Field("ok", pattern="^(ok|error)$")
    reid: Optional[ReidReport] = None
    fusion_conflicts: List[int] = Field(default_factory=list, description="主轨迹缺席而辅助轨迹存在的帧")
    warnings: List[str] = Field(default_factory=list)
    error: Optional[str] = None
    error_stage: Optional[str] = None


class RunReport(BaseModel):
    """一次运行的汇总报告"""
    sequences: List[SequenceRunResult] = Field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(result.status == "error" for result in self.sequences)

    @model_validator(mode="after")
    def sort_sequences(self):
        self.sequences.sort(key=lambda result: result.sequence_id)
        return self
