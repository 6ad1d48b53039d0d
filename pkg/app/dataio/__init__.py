"""
磁盘文件读写：清单、标注、轨迹、检测、特征、报告与运行配置
"""

from app.dataio.annotations import load_annotations, save_annotations
from app.dataio.detections import load_detections, save_detections
from app.dataio.embeddings import ANCHOR_KEY, TRACK_CANDIDATE, EmbeddingStore, load_embeddings, save_embeddings
from app.dataio.errors import (
    ClipGapError,
    CountMismatchError,
    DataParseError,
    DuplicateKeyError,
    OverlappingClipsError,
    RangeError,
    RecordDimensionError,
    UnknownDisciplineError,
)
from app.dataio.manifest import load_manifest, save_manifest
from app.dataio.tracks import load_track, save_track

__all__ = [
    "ANCHOR_KEY",
    "TRACK_CANDIDATE",
    "ClipGapError",
    "CountMismatchError",
    "DataParseError",
    "DuplicateKeyError",
    "EmbeddingStore",
    "OverlappingClipsError",
    "RangeError",
    "RecordDimensionError",
    "UnknownDisciplineError",
    "load_annotations",
    "load_detections",
    "load_embeddings",
    "load_manifest",
    "load_track",
    "save_annotations",
    "save_detections",
    "save_embeddings",
    "save_manifest",
    "save_track",
]
