"""
合成多机位序列的生成参数
"""
from enum import Enum
from typing import List

from pydantic import BaseModel, Field, model_validator

from app.models.sequence import Discipline


class TrajectoryKind(str, Enum):
    """运动轨迹类型"""
    LINEAR_DESCENT = "linear_descent"
    PARABOLIC_JUMP = "parabolic_jump"


class SwitchEvent(BaseModel):
    """注入的身份切换：在第 clip_index 个片段的第 frame_offset 帧切到干扰者"""
    clip_index: int = Field(..., ge=0)
    frame_offset: int = Field(..., ge=0)
    distractor_id: int = Field(..., ge=1, description="干扰者身份，目标身份固定为 0")


class SynthSpec(BaseModel):
    """合成序列规格"""
    sequence_id: str = Field("synth_000", min_length=1)
    discipline: Discipline = Discipline.AL
    seed: int = 42
    n_identities: int = Field(3, ge=1)
    n_clips: int = Field(3, ge=1)
    frames_per_clip: int = Field(60, ge=1)
    image_width: int = Field(1280, gt=0)
    image_height: int = Field(720, gt=0)
    trajectory: TrajectoryKind = TrajectoryKind.LINEAR_DESCENT
    embedding_dim: int = Field(64, ge=1)
    embedding_noise: float = Field(0.05, ge=0.0, description="特征噪声σ_e（逐分量）")
    box_noise: float = Field(1.0, ge=0.0, description="基础轨迹的框噪声σ_b（像素）")
    switch_events: List[SwitchEvent] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_switches(self):
        """干扰者必须存在且不是目标，切换帧必须落在片段内"""
        for event in self.switch_events:
            if event.distractor_id >= self.n_identities:
                raise ValueError(f"干扰者 {event.distractor_id} 超出身份数量 {self.n_identities}")
            if event.clip_index >= self.n_clips:
                raise ValueError(f"切换片段 {event.clip_index} 超出片段数量 {self.n_clips}")
            if event.frame_offset >= self.frames_per_clip:
                raise ValueError(f"切换偏移 {event.frame_offset} 超出片段长度 {self.frames_per_clip}")
        return self


class SynthSuiteSpec(BaseModel):
    """多条合成序列组成的评测集"""
    sequences: List[SynthSpec] = Field(..., min_length=1)
