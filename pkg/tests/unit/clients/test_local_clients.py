"""
进程内客户端测试：oracle 跟踪器、回放跟踪器、检测器
"""

import pytest

from app.clients.base import CoverageError, TrackDirection, TrackingRequest
from app.clients.conformance import default_requests, run_conformance
from app.clients.detector import StoreDetectorClient
from app.clients.oracle import ORACLE_CONFIDENCE, OracleTrackerClient, ScheduledSwitch
from app.clients.replay import ReplayTrackerClient
from app.core.errors import SkiTrackError
from app.dataio.embeddings import EmbeddingStore
from app.models.embedding import Embedding
from app.models.geometry import BoundingBox
from app.models.sequence import Detection, GroundTruth
from tests.conftest import make_track, moving_boxes


class TestOracleTracker:
    """oracle 跟踪器测试"""

    def setup_method(self):
        frames = range(20)
        self.truth = GroundTruth("AL_test", moving_boxes(frames))
        self.other = GroundTruth("AL_test", moving_boxes(frames, x0=400.0))
        self.oracle = OracleTrackerClient(
            self.truth, {"1": self.other}, switches=[ScheduledSwitch(14, "1")]
        )

    def test_follows_truth_before_switch(self):
        request = TrackingRequest("AL_test", 0, 19, 0, self.truth.box(0), TrackDirection.FORWARD)
        records = self.oracle.track(request)
        assert records[0].confidence == 1.0
        assert records[5].box == self.truth.box(5)
        assert records[5].confidence == ORACLE_CONFIDENCE
        assert records[14].box == self.other.box(14)

    def test_correction_clears_switch(self):
        """测试提示框落在目标上时清空片段内的切换"""
        request = TrackingRequest("AL_test", 0, 19, 10, self.truth.box(10), TrackDirection.FORWARD)
        records = self.oracle.track(request)
        assert all(r.box == self.truth.box(r.frame) for r in records)

    def test_prompt_on_distractor_keeps_switch(self):
        request = TrackingRequest("AL_test", 0, 19, 10, self.other.box(10), TrackDirection.FORWARD)
        records = self.oracle.track(request)
        assert records[0].box == self.other.box(10)
        assert records[-1].box == self.other.box(19)
        assert records[1].box == self.truth.box(11)

    def test_noise_deterministic(self):
        noisy_a = OracleTrackerClient(self.truth, noise_sigma=2.0, seed=1)
        noisy_b = OracleTrackerClient(self.truth, noise_sigma=2.0, seed=1)
        request = TrackingRequest("AL_test", 0, 19, 0, self.truth.box(0), TrackDirection.FORWARD)
        first, second = noisy_a.track(request), noisy_b.track(request)
        assert first == second
        assert first[3].box != self.truth.box(3)

    def test_unknown_distractor(self):
        with pytest.raises(SkiTrackError) as exc_info:
            OracleTrackerClient(self.truth, switches=[ScheduledSwitch(3, "9")])
        assert exc_info.value.error_code == "UNKNOWN_DISTRACTOR"

    def test_conformance(self):
        report = run_conformance(self.oracle, default_requests("AL_test", 0, 19, self.truth.box(9)))
        assert report.passed


class TestReplayTracker:
    """回放跟踪器测试"""

    def setup_method(self):
        self.boxes = moving_boxes(range(10))
        self.track = make_track("AL_test", self.boxes, confidence=1.0)

    def test_backward_replay(self):
        client = ReplayTrackerClient(self.track)
        request = TrackingRequest("AL_test", 0, 9, 4, self.boxes[4], TrackDirection.BACKWARD)
        records = client.track(request)
        assert [r.frame for r in records] == [4, 3, 2, 1, 0]
        assert client.prompt_warnings == []

    def test_prompt_mismatch_warns_only(self):
        """测试提示框与存储记录不符时只告警，回放照常"""
        client = ReplayTrackerClient(self.track)
        request = TrackingRequest("AL_test", 0, 9, 4, BoundingBox(500, 400, 40, 80), TrackDirection.FORWARD)
        records = client.track(request)
        assert len(records) == 6
        assert client.prompt_warnings == [4]

    def test_coverage(self):
        short = make_track("AL_test", {f: self.boxes[f] for f in range(5)})
        client = ReplayTrackerClient(short)
        request = TrackingRequest("AL_test", 0, 9, 2, self.boxes[2], TrackDirection.FORWARD)
        with pytest.raises(CoverageError) as exc_info:
            client.track(request)
        assert exc_info.value.error_code == "COVERAGE_ERROR"


class TestStoreDetector:
    def test_skips_candidates_without_embedding(self):
        """测试没有特征的检测不作为候选"""
        store = EmbeddingStore()
        store.add(3, "a", Embedding.of([1.0, 0.0]))
        detections = {
            3: [Detection(BoundingBox(0, 0, 5, 5), 0.9, "a"), Detection(BoundingBox(9, 9, 5, 5), 0.8, "b")]
        }
        detector = StoreDetectorClient(detections, store)
        candidates = detector.detect(3)
        assert [d.embedding_ref for d, _ in candidates] == ["a"]
        assert detector.detect(4) == []
