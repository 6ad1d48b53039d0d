"""
外部跟踪器 / 检测器客户端
"""

from app.clients.base import (
    BackendTimeoutError,
    BackendUnavailableError,
    ClientError,
    CoverageError,
    DetectorClient,
    ProtocolViolationError,
    RangeViolationError,
    TrackDirection,
    TrackerClient,
    TrackingRequest,
)
from app.clients.detector import StoreDetectorClient
from app.clients.oracle import OracleTrackerClient, ScheduledSwitch
from app.clients.replay import ReplayTrackerClient
from app.clients.subprocess_tracker import SubprocessTrackerClient

__all__ = [
    "BackendTimeoutError",
    "BackendUnavailableError",
    "ClientError",
    "CoverageError",
    "DetectorClient",
    "OracleTrackerClient",
    "ProtocolViolationError",
    "RangeViolationError",
    "ReplayTrackerClient",
    "ScheduledSwitch",
    "StoreDetectorClient",
    "SubprocessTrackerClient",
    "TrackDirection",
    "TrackerClient",
    "TrackingRequest",
]
