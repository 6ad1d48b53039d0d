# pytest配置文件
import sys
from pathlib import Path

import pytest

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.clients.subprocess_tracker import BACKEND_ENV_VAR  # noqa: E402
from app.models.geometry import BoundingBox  # noqa: E402
from app.models.sequence import (  # noqa: E402
    CameraClip,
    Discipline,
    FrameRecord,
    GroundTruth,
    SequenceManifest,
    Track,
)

BACKENDS_DIR = project_root / "tests" / "fixtures" / "backends"
ECHO_BACKEND = project_root / "scripts" / "echo_backend.py"


def make_manifest(
    sequence_id: str = "AL_test",
    discipline: Discipline = Discipline.AL,
    clip_lengths=(10, 10),
    width: int = 640,
    height: int = 480,
) -> SequenceManifest:
    """按片段长度构造首尾相接的清单，帧号从 0 开始"""
    clips, start = [], 0
    for index, length in enumerate(clip_lengths):
        clips.append(CameraClip(f"cam{index}", start, start + length - 1))
        start += length
    return SequenceManifest(sequence_id, discipline, tuple(clips), width, height)


def make_track(sequence_id: str, boxes, confidence: float = 0.9) -> Track:
    """boxes: 帧号 -> BoundingBox 或 None"""
    return Track.from_records(
        sequence_id,
        (
            FrameRecord.observed(frame, box, confidence) if box is not None else FrameRecord.absent(frame)
            for frame, box in boxes.items()
        ),
    )


def moving_boxes(frames, x0: float = 100.0, y0: float = 100.0, vx: float = 2.0, vy: float = 1.0):
    return {frame: BoundingBox(x0 + vx * frame, y0 + vy * frame, 40.0, 80.0) for frame in frames}


@pytest.fixture
def manifest():
    """两段各 10 帧的 AL 序列"""
    return make_manifest()


@pytest.fixture
def ground_truth(manifest):
    return GroundTruth(manifest.sequence_id, moving_boxes(manifest.frames))


@pytest.fixture(autouse=True)
def no_backend_override(monkeypatch):
    """测试中不受外部 SKITRACK_TRACKER_BACKEND 影响"""
    monkeypatch.delenv(BACKEND_ENV_VAR, raising=False)
    monkeypatch.setattr("app.core.config.settings.TRACKER_BACKEND", "")


@pytest.fixture
def echo_command():
    return [sys.executable, str(ECHO_BACKEND)]


@pytest.fixture
def faulty_command():
    def build(mode: str):
        return [sys.executable, str(BACKENDS_DIR / "faulty_backend.py"), "--mode", mode]
    return build
