"""
运行配置相关的数据模型

包含卡尔曼、ReID、融合、评测、跟踪器客户端与逐序列输入的配置及校验规则。
默认值全部来自 settings，生效配置快照会把它们逐项写出。
"""
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings


class PipelineMode(str, Enum):
    """后处理路径"""
    SINGLE_SKIER = "single_skier"
    MULTI_SKIER = "multi_skier"


class ClipAggregation(str, Enum):
    """片段级相似度聚合方式"""
    MEAN = "mean"
    MEDIAN = "median"


class EvalProtocol(str, Enum):
    """逐帧质量定义：IoU 本身，或 IoU 阈值化后的命中"""
    IOU = "iou"
    HIT = "hit"


class EvalSetting(str, Enum):
    """评测单元：整条多机位序列，或单个机位片段"""
    MC = "mc"
    SC = "sc"


class KalmanParams(BaseModel):
    """卡尔曼滤波参数"""
    model_config = ConfigDict(frozen=True)

    process_noise_pos: float = Field(settings.KALMAN_PROCESS_NOISE_POS, description="位置过程噪声", gt=0)
    process_noise_vel: float = Field(settings.KALMAN_PROCESS_NOISE_VEL, description="速度过程噪声", gt=0)
    measurement_noise: float = Field(settings.KALMAN_MEASUREMENT_NOISE, description="观测噪声", gt=0)
    initial_velocity_variance: float = Field(
        settings.KALMAN_INITIAL_VELOCITY_VARIANCE, description="初始速度方差", gt=0
    )
    gate_iou: float = Field(settings.KALMAN_GATE_IOU, description="检测关联的IoU门限", ge=0.0, le=1.0)


class ReidConfig(BaseModel):
    """ReID 校验配置"""
    model_config = ConfigDict(frozen=True)

    similarity_threshold: float = Field(
        settings.REID_SIMILARITY_THRESHOLD, description="片段相似度阈值θ", ge=-1.0, le=1.0
    )
    clip_aggregation: ClipAggregation = Field(
        ClipAggregation(settings.REID_CLIP_AGGREGATION), description="逐帧相似度聚合方式"
    )
    enabled: bool = Field(True, description="是否执行身份校正阶段")


class FusionConfig(BaseModel):
    """多人场景的框融合配置"""
    model_config = ConfigDict(frozen=True)

    iou_threshold: float = Field(settings.FUSION_IOU_THRESHOLD, description="融合IoU阈值τ", ge=0.0, le=1.0)


class EvalConfig(BaseModel):
    """评测配置"""
    model_config = ConfigDict(frozen=True)

    protocol: EvalProtocol = Field(EvalProtocol.IOU, description="逐帧质量定义")
    hit_iou_threshold: float = Field(settings.EVAL_HIT_IOU_THRESHOLD, ge=0.0, le=1.0)
    setting: EvalSetting = Field(EvalSetting.MC, description="评测单元")


class TrackerClientConfig(BaseModel):
    """外部跟踪器客户端配置"""
    kind: Literal["oracle", "replay", "subprocess"] = Field("oracle", description="客户端类型")
    command: List[str] = Field(default_factory=list, description="子进程后端命令")
    timeout: float = Field(settings.TRACKER_TIMEOUT, description="每个片段的超时（秒）", gt=0)
    spawn_retries: int = Field(settings.TRACKER_SPAWN_RETRIES, description="后端启动重试次数", ge=1)
    noise_sigma: float = Field(0.0, description="oracle 跟踪器的框噪声标准差（像素）", ge=0.0)

    @field_validator("command")
    def validate_command(cls, v):
        """命令参数不能为空字符串"""
        if any(not part for part in v):
            raise ValueError("后端命令包含空参数")
        return v


class SwitchPoint(BaseModel):
    """oracle 跟踪器的身份切换计划"""
    frame: int = Field(..., description="切换发生的全局帧号", ge=0)
    distractor_id: str = Field(..., description="干扰者身份ID")


class SequenceInputs(BaseModel):
    """单个序列的输入文件"""
    manifest: str = Field(..., description="序列清单JSON")
    embeddings: str = Field(..., description="ReID特征文件")
    detections: str = Field(..., description="检测结果CSV")
    base_track: Optional[str] = Field(None, description="基础跟踪结果CSV；缺省时由跟踪器客户端生成")
    annotations: Optional[str] = Field(None, description="真值标注CSV")
    secondary_track: Optional[str] = Field(None, description="多人场景的辅助跟踪器结果CSV")
    replay_track: Optional[str] = Field(None, description="replay 客户端使用的预计算轨迹")
    distractors: Dict[str, str] = Field(default_factory=dict, description="oracle 客户端的干扰者真值")
    switches: List[SwitchPoint] = Field(default_factory=list, description="oracle 客户端的切换计划")
    initial_box: Optional[List[float]] = Field(None, description="首帧给定的目标框 [x,y,w,h]")

    @field_validator("initial_box")
    def validate_initial_box(cls, v):
        if v is not None and (len(v) != 4 or v[2] <= 0 or v[3] <= 0):
            raise ValueError("initial_box 必须是宽高为正的 [x,y,w,h]")
        return v


class RunConfig(BaseModel):
    """完整运行配置"""
    mode: Optional[PipelineMode] = Field(None, description="后处理路径；缺省时由项目类型决定")
    seed: int = Field(settings.PIPELINE_SEED, description="随机种子")
    workers: int = Field(settings.PIPELINE_WORKERS, description="并行处理的序列数", ge=1)
    output_dir: str = Field("output", description="输出目录")
    reid: ReidConfig = Field(default_factory=ReidConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    kalman: KalmanParams = Field(default_factory=KalmanParams)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    tracker: TrackerClientConfig = Field(default_factory=TrackerClientConfig)
    sequences: List[SequenceInputs] = Field(..., description="序列输入列表", min_length=1)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "seed": 42,
                "output_dir": "runs/demo",
                "reid": {"similarity_threshold": 0.6, "clip_aggregation": "mean"},
                "tracker": {"kind": "oracle", "noise_sigma": 0.5},
                "sequences": [
                    {
                        "manifest": "AL_000/manifest.json",
                        "annotations": "AL_000/gt.csv",
                        "base_track": "AL_000/base_track.csv",
                        "embeddings": "AL_000/embeddings.txt",
                        "detections": "AL_000/detections.csv",
                    }
                ],
            }
        }
    )
