"""
外部跟踪器 / 检测器客户端接口

跟踪器会话契约：start(请求) 之后反复 step()，按方向顺序逐帧产出记录直到片段边界；
提示帧的记录必须存在、框等于提示框且置信度为 1.0。
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Tuple

from app.core.errors import SkiTrackError
from app.models.embedding import Embedding
from app.models.geometry import BoundingBox, iou
from app.models.sequence import Detection, FrameRecord

logger = logging.getLogger(__name__)

# 提示帧的框被视为"等于提示框"的 IoU 下限
PROMPT_IOU_TOLERANCE = 0.99


class ClientError(SkiTrackError):
    """客户端异常基类，携带后端 stderr"""
    def __init__(self, message: str, error_code: str = "CLIENT_ERROR", stderr: str = ""):
        self.stderr = stderr
        if stderr:
            message = f"{message}\n--- backend stderr ---\n{stderr.rstrip()}"
        super().__init__(message, error_code)


class ProtocolViolationError(ClientError):
    """后端违反会话协议"""
    def __init__(self, message: str, stderr: str = "", error_code: str = "PROTOCOL_VIOLATION"):
        super().__init__(message, error_code, stderr)


class RangeViolationError(ProtocolViolationError):
    """后端返回的数值超出取值范围"""
    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message, stderr, "RANGE_VIOLATION")


class CoverageError(ClientError):
    """请求的帧范围超出客户端可提供的范围"""
    def __init__(self, message: str):
        super().__init__(message, "COVERAGE_ERROR")


class BackendTimeoutError(ClientError):
    """后端超时"""
    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message, "BACKEND_TIMEOUT", stderr)


class BackendUnavailableError(ClientError):
    """后端无法启动或提前退出"""
    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message, "BACKEND_UNAVAILABLE", stderr)


class TrackDirection(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class TrackingRequest:
    """一次跟踪会话请求：片段范围 [start_frame, end_frame]，从提示帧朝指定方向跟踪"""
    sequence_id: str
    start_frame: int
    end_frame: int
    prompt_frame: int
    prompt_box: BoundingBox
    direction: TrackDirection

    def __post_init__(self):
        if not self.start_frame <= self.prompt_frame <= self.end_frame:
            raise ClientError(
                f"提示帧 {self.prompt_frame} 不在片段 [{self.start_frame}..{self.end_frame}] 内",
                "INVALID_REQUEST",
            )
        self.prompt_box.require_valid()
        object.__setattr__(self, "direction", TrackDirection(self.direction))

    def expected_frames(self) -> List[int]:
        if self.direction is TrackDirection.FORWARD:
            return list(range(self.prompt_frame, self.end_frame + 1))
        return list(range(self.prompt_frame, self.start_frame - 1, -1))

    def to_wire(self) -> dict:
        return {
            "type": "track",
            "sequence_id": self.sequence_id,
            "clip": {"start": self.start_frame, "end": self.end_frame},
            "prompt_frame": self.prompt_frame,
            "prompt_box": self.prompt_box.to_list(),
            "direction": self.direction.value,
        }


def prompt_record_matches(request: TrackingRequest, record: FrameRecord) -> bool:
    return (
        record.frame == request.prompt_frame
        and record.present
        and iou(record.box, request.prompt_box) >= PROMPT_IOU_TOLERANCE
        and abs(record.confidence - 1.0) <= 1e-9
    )


def validate_session(request: TrackingRequest, records: List[FrameRecord]) -> Optional[str]:
    """
    检查会话输出的稠密性与方向顺序

    Returns:
        违规描述；合规时为 None
    """
    expected = request.expected_frames()
    frames = [record.frame for record in records]
    if frames == expected:
        return None

    seen = set(frames)
    missing = [frame for frame in expected if frame not in seen]
    if missing:
        return f"缺少帧 {missing[0]}" + (f" 等 {len(missing)} 帧" if len(missing) > 1 else "")
    outside = [frame for frame in frames if frame not in set(expected)]
    if outside:
        return f"返回了请求范围之外的帧 {outside[0]}"
    if len(frames) != len(seen):
        duplicated = next(frame for frame in frames if frames.count(frame) > 1)
        return f"帧 {duplicated} 重复返回"
    return f"帧顺序与方向 {request.direction.value} 不一致"


class TrackerClient(ABC):
    """跟踪器客户端；同一实例同一时间只承载一个会话"""

    name = "tracker"

    @abstractmethod
    def start(self, request: TrackingRequest) -> None:
        """开始一个跟踪会话"""

    @abstractmethod
    def step(self) -> Optional[FrameRecord]:
        """返回下一帧记录；会话结束时返回 None"""

    def close(self) -> None:
        """释放资源"""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    def stream(self, request: TrackingRequest) -> Iterator[FrameRecord]:
        self.start(request)
        while True:
            record = self.step()
            if record is None:
                return
            yield record

    def on_prompt_mismatch(self, request: TrackingRequest, record: Optional[FrameRecord]) -> None:
        """提示帧不满足契约时的处理，默认拒绝该后端"""
        raise ProtocolViolationError(
            f"{self.name}: 提示帧 {request.prompt_frame} 的输出与提示框不一致: {record}"
        )

    def track(self, request: TrackingRequest) -> List[FrameRecord]:
        """
        运行完整会话并校验契约

        Raises:
            ProtocolViolationError: 漏帧、越界、重复、方向错误或提示帧不符
        """
        records = list(self.stream(request))
        violation = validate_session(request, records)
        if violation is not None:
            raise ProtocolViolationError(f"{self.name}: {violation}")
        if not prompt_record_matches(request, records[0]):
            self.on_prompt_mismatch(request, records[0])
        logger.debug(
            f"{self.name}: 会话完成 序列={request.sequence_id}, 方向={request.direction.value}, 帧数={len(records)}"
        )
        return records


class DetectorClient(ABC):
    """检测器客户端：返回带特征的候选检测"""

    name = "detector"

    @abstractmethod
    def detect(self, frame: int) -> List[Tuple[Detection, Embedding]]:
        """检测指定帧中的候选目标"""

    def close(self) -> None:
        """释放资源"""
