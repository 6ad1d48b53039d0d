from app.models.embedding import Embedding
from app.models.geometry import BoundingBox, center_distance, clamp_box, iou
from app.models.sequence import (
    CameraClip,
    Detection,
    Discipline,
    FrameRecord,
    GroundTruth,
    SequenceManifest,
    Track,
)

__all__ = [
    "BoundingBox",
    "CameraClip",
    "Detection",
    "Discipline",
    "Embedding",
    "FrameRecord",
    "GroundTruth",
    "SequenceManifest",
    "Track",
    "center_distance",
    "clamp_box",
    "iou",
]
