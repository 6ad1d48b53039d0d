"""
HTTP 接口的请求 / 响应模型
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.geometry import BoundingBox
from app.models.sequence import Discipline, FrameRecord, GroundTruth, Track
from app.schemas.report import SequenceScore
from app.schemas.run_config import EvalProtocol, EvalSetting


def _check_box(value: Optional[List[float]]) -> Optional[List[float]]:
    if value is not None and len(value) != 4:
        raise ValueError("box 需要 [x, y, w, h] 四个数值")
    return value


class TrackRecordIn(BaseModel):
    """单帧预测记录；box 为空表示缺席"""
    frame: int = Field(..., description="全局帧号")
    box: Optional[List[float]] = Field(None, description="[x, y, w, h]，缺席时为空")
    confidence: float = Field(1.0, description="置信度", ge=0.0, le=1.0)

    _box = field_validator("box")(_check_box)

    def to_record(self) -> FrameRecord:
        if self.box is None:
            return FrameRecord.absent(self.frame)
        return FrameRecord.observed(self.frame, BoundingBox.from_list(self.box), self.confidence)


class GroundTruthIn(BaseModel):
    """单帧真值；box 为空表示目标不可见"""
    frame: int = Field(..., description="全局帧号")
    box: Optional[List[float]] = Field(None, description="[x, y, w, h]，不可见时为空")

    _box = field_validator("box")(_check_box)


class ScoreRequest(BaseModel):
    """单序列评测请求"""
    sequence_id: str = Field(..., description="序列ID", min_length=1)
    predictions: List[TrackRecordIn] = Field(..., description="逐帧预测", min_length=1)
    ground_truth: List[GroundTruthIn] = Field(..., description="逐帧真值", min_length=1)
    protocol: EvalProtocol = Field(EvalProtocol.IOU, description="逐帧质量协议")
    hit_iou_threshold: float = Field(0.5, description="hit 协议的 IoU 阈值", gt=0.0, le=1.0)

    def to_track(self) -> Track:
        return Track.from_records(self.sequence_id, (r.to_record() for r in self.predictions))

    def to_ground_truth(self) -> GroundTruth:
        return GroundTruth(
            self.sequence_id,
            {g.frame: BoundingBox.from_list(g.box) if g.box is not None else None for g in self.ground_truth},
        )

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "sequence_id": "AL_001",
                "predictions": [
                    {"frame": 0, "box": [10, 10, 20, 40], "confidence": 0.9},
                    {"frame": 1, "box": None},
                ],
                "ground_truth": [
                    {"frame": 0, "box": [12, 10, 20, 40]},
                    {"frame": 1, "box": [14, 11, 20, 40]},
                ],
            }
        }
    )


class ScoreResponse(BaseModel):
    """单序列评测结果"""
    sequence_id: str
    score: SequenceScore


class AggregateRequest(BaseModel):
    """按项目聚合请求"""
    scores: Dict[str, SequenceScore] = Field(..., description="评测单元ID -> 分数", min_length=1)
    disciplines: Dict[str, Discipline] = Field(..., description="评测单元ID -> 项目")
    protocol: EvalProtocol = EvalProtocol.IOU
    setting: EvalSetting = EvalSetting.MC


class RunRequest(BaseModel):
    """启动流水线运行"""
    config_path: str = Field(..., description="服务端可访问的运行配置文件路径", min_length=1)
    overrides: Dict[str, Any] = Field(default_factory=dict, description="点分键覆盖项，如 reid.similarity_threshold")


class RunTaskResponse(BaseModel):
    """运行任务状态"""
    task_id: str
    config_path: str
    status: str
    created_at: str
    started_at: Optional[str] = None
    completed_at: Optional[str] = None
    result: Optional[Dict[str, Any]] = None
    error_message: Optional[str] = None


class ErrorResponse(BaseModel):
    """错误响应模型"""
    error_code: str = Field(..., description="错误代码")
    message: str = Field(..., description="错误消息")
    details: Optional[dict] = Field(None, description="错误详情")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "error_code": "FRAME_DOMAIN_MISMATCH",
                "message": "预测轨迹与真值的帧域不一致",
            }
        }
    )
