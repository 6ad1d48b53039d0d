"""
跟踪器客户端一致性检查

对给定片段分别做向前 / 向后会话，逐项检查：
protocol（会话正常结束）、prompt_frame（提示帧契约）、density（逐帧恰好一条）、
direction（按方向顺序产出）。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from app.clients.base import (
    ClientError,
    TrackDirection,
    TrackerClient,
    TrackingRequest,
    prompt_record_matches,
)
from app.models.geometry import BoundingBox
from app.models.sequence import FrameRecord

logger = logging.getLogger(__name__)

CHECKS = ("protocol", "prompt_frame", "density", "direction")


@dataclass
class CheckResult:
    name: str
    passed: bool = True
    details: List[str] = field(default_factory=list)

    def fail(self, detail: str) -> None:
        self.passed = False
        self.details.append(detail)


@dataclass
class ConformanceReport:
    client: str
    results: Dict[str, CheckResult]

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results.values())

    def render(self) -> str:
        lines = [f"客户端一致性检查: {self.client}"]
        for name in CHECKS:
            result = self.results[name]
            verdict = "PASS" if result.passed else "FAIL"
            lines.append(f"  {name:<13} {verdict}")
            for detail in result.details:
                lines.append(f"      - {detail}")
        lines.append(f"结论: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def default_requests(
    sequence_id: str, start_frame: int, end_frame: int, prompt_box: BoundingBox,
    prompt_frame: Optional[int] = None,
) -> List[TrackingRequest]:
    """在片段中间帧上做向前、向后两个会话"""
    middle = (start_frame + end_frame) // 2 if prompt_frame is None else prompt_frame
    return [
        TrackingRequest(sequence_id, start_frame, end_frame, middle, prompt_box, TrackDirection.FORWARD),
        TrackingRequest(sequence_id, start_frame, end_frame, middle, prompt_box, TrackDirection.BACKWARD),
    ]


def _check_density(request: TrackingRequest, records: List[FrameRecord], result: CheckResult) -> None:
    expected = request.expected_frames()
    frames = [record.frame for record in records]
    label = request.direction.value
    missing = sorted(set(expected) - set(frames))
    if missing:
        result.fail(f"[{label}] 缺少帧 {missing[0]}" + (f"（共 {len(missing)} 帧）" if len(missing) > 1 else ""))
    outside = sorted(set(frames) - set(expected))
    if outside:
        result.fail(f"[{label}] 范围外的帧 {outside[0]}")
    duplicated = sorted({frame for frame in frames if frames.count(frame) > 1})
    if duplicated:
        result.fail(f"[{label}] 重复的帧 {duplicated[0]}")


def _check_direction(request: TrackingRequest, records: List[FrameRecord], result: CheckResult) -> None:
    frames = [record.frame for record in records]
    step = 1 if request.direction is TrackDirection.FORWARD else -1
    for prev, cur in zip(frames, frames[1:]):
        if (cur - prev) * step <= 0:
            result.fail(f"[{request.direction.value}] 帧 {prev} 之后出现帧 {cur}")
            return


def run_conformance(client: TrackerClient, requests: List[TrackingRequest]) -> ConformanceReport:
    """对客户端运行全部一致性检查"""
    results = {name: CheckResult(name) for name in CHECKS}
    for request in requests:
        label = request.direction.value
        records: List[FrameRecord] = []
        try:
            for record in client.stream(request):
                records.append(record)
        except ClientError as e:
            results["protocol"].fail(f"[{label}] {e.message.splitlines()[0]}")
            logger.warning(f"{client.name}: 会话异常 [{label}]: {e.message}")

        if not records:
            results["prompt_frame"].fail(f"[{label}] 没有任何输出")
        elif not prompt_record_matches(request, records[0]):
            results["prompt_frame"].fail(
                f"[{label}] 首条记录 {records[0]} 与提示帧 {request.prompt_frame} 的提示框不符"
            )
        _check_density(request, records, results["density"])
        _check_direction(request, records, results["direction"])

    report = ConformanceReport(client=client.name, results=results)
    logger.info(f"{client.name}: 一致性检查{'通过' if report.passed else '未通过'}")
    return report
