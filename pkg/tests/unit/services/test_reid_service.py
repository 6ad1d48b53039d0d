"""
ReID 身份校正服务单元测试
"""

import numpy as np
import pytest

from app.clients.base import DetectorClient, ProtocolViolationError, TrackerClient
from app.clients.oracle import OracleTrackerClient, ScheduledSwitch
from app.models.embedding import DimensionMismatchError, Embedding
from app.models.geometry import BoundingBox
from app.models.sequence import Detection, GroundTruth
from app.schemas.run_config import ClipAggregation, ReidConfig
from app.services.reid_service import (
    MissingEmbeddingError,
    NoCandidateError,
    ReidService,
    clip_similarity,
    correct_clip,
    cosine_similarity,
    select_b_mid,
)
from tests.conftest import make_manifest, make_track, moving_boxes

E0 = Embedding.of([1.0, 0.0, 0.0])
E1 = Embedding.of([0.0, 1.0, 0.0])


class FixedDetector(DetectorClient):
    def __init__(self, candidates):
        self.candidates = candidates
        self.calls = []

    def detect(self, frame):
        self.calls.append(frame)
        return list(self.candidates.get(frame, []))


class FailingTracker(TrackerClient):
    name = "failing"

    def start(self, request):
        raise ProtocolViolationError("后端崩溃")

    def step(self):
        return None


class TestSimilarity:
    """相似度计算测试"""

    def test_cosine_basic(self):
        assert cosine_similarity(E0, E0) == pytest.approx(1.0)
        assert cosine_similarity(E0, E1) == pytest.approx(0.0)
        assert cosine_similarity(E0, Embedding.of([-2.0, 0.0, 0.0])) == pytest.approx(-1.0)

    def test_cosine_clipped(self):
        a = Embedding.of([1e-3, 1e-3, 1e-3])
        value = cosine_similarity(a, a)
        assert -1.0 <= value <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine_similarity(E0, Embedding.of([1.0, 0.0]))

    def test_cosine_scale_invariant(self):
        """测试余弦相似度对正数缩放不变（1e-12）"""
        rng = np.random.default_rng(3)
        for _ in range(500):
            dim = int(rng.integers(2, 64))
            a, b = rng.normal(size=dim), rng.normal(size=dim)
            scale_a, scale_b = 10.0 ** rng.uniform(-3, 3, size=2)
            base = cosine_similarity(Embedding(a), Embedding(b))
            scaled = cosine_similarity(Embedding(a * scale_a), Embedding(b * scale_b))
            assert abs(base - scaled) <= 1e-12

    def test_clip_similarity_mean_and_median(self):
        """测试均值与中位数聚合"""
        manifest = make_manifest(clip_lengths=(5,))
        track = make_track(manifest.sequence_id, moving_boxes(manifest.frames))
        embeddings = {0: E0, 1: E0, 2: E0, 3: E1, 4: E1}
        clip = manifest.clips[0]
        mean = clip_similarity(track, clip, embeddings, E0, ReidConfig(clip_aggregation=ClipAggregation.MEAN))
        median = clip_similarity(track, clip, embeddings, E0, ReidConfig(clip_aggregation=ClipAggregation.MEDIAN))
        assert mean == pytest.approx(0.6)
        assert median == pytest.approx(1.0)

    def test_clip_similarity_skips_absent_frames(self):
        manifest = make_manifest(clip_lengths=(3,))
        boxes = moving_boxes(manifest.frames)
        boxes[2] = None
        track = make_track(manifest.sequence_id, boxes)
        value = clip_similarity(track, manifest.clips[0], {0: E0, 1: E0}, E0, ReidConfig())
        assert value == pytest.approx(1.0)

    def test_empty_clip(self):
        """测试片段内没有存在帧时相似度为 -1"""
        manifest = make_manifest(clip_lengths=(3,))
        track = make_track(manifest.sequence_id, {f: None for f in manifest.frames})
        assert clip_similarity(track, manifest.clips[0], {}, E0, ReidConfig()) == -1.0

    def test_missing_embedding(self):
        manifest = make_manifest(clip_lengths=(3,))
        track = make_track(manifest.sequence_id, moving_boxes(manifest.frames))
        with pytest.raises(MissingEmbeddingError):
            clip_similarity(track, manifest.clips[0], {0: E0}, E0, ReidConfig())


class TestSelectBMid:
    """中间帧候选选择测试"""

    def test_best_similarity(self):
        a = Detection(BoundingBox(0, 0, 10, 10), 0.99)
        b = Detection(BoundingBox(50, 50, 10, 10), 0.5)
        assert select_b_mid([(a, E1), (b, E0)], E0) == b.box

    def test_tie_broken_by_score_then_order(self):
        """测试相似度并列时取得分高者，再并列取靠前者"""
        low = Detection(BoundingBox(0, 0, 10, 10), 0.5)
        high = Detection(BoundingBox(20, 0, 10, 10), 0.8)
        same = Detection(BoundingBox(40, 0, 10, 10), 0.8)
        assert select_b_mid([(low, E0), (high, E0), (same, E0)], E0) == high.box

    def test_no_candidates(self):
        with pytest.raises(NoCandidateError):
            select_b_mid([], E0)

    def test_select_b_mid_scale_invariant(self):
        """测试所有特征同乘一个正数时选中的框不变"""
        rng = np.random.default_rng(5)
        for _ in range(200):
            dim = int(rng.integers(4, 32))
            anchor = rng.normal(size=dim)
            raw = [
                (Detection(BoundingBox(*rng.uniform(0, 300, size=2), 30.0, 60.0), float(rng.uniform()), f"c{i}"),
                 rng.normal(size=dim))
                for i in range(int(rng.integers(1, 8)))
            ]
            scale = 10.0 ** rng.uniform(-3, 3)
            chosen = select_b_mid([(d, Embedding(v)) for d, v in raw], Embedding(anchor))
            rescaled = select_b_mid([(d, Embedding(v * scale)) for d, v in raw], Embedding(anchor * scale))
            assert rescaled == chosen


class TestReidPass:
    """逐片段校验与校正测试"""

    def setup_method(self):
        self.manifest = make_manifest(clip_lengths=(10, 10))
        frames = self.manifest.frames
        self.truth = GroundTruth(self.manifest.sequence_id, moving_boxes(frames))
        self.distractor = GroundTruth(self.manifest.sequence_id, moving_boxes(frames, x0=400.0, y0=300.0))
        # 第二个片段从帧 13 起跟错人
        boxes = {f: self.truth.box(f) if f < 13 else self.distractor.box(f) for f in frames}
        self.track = make_track(self.manifest.sequence_id, boxes)
        self.embeddings = {f: E0 if f < 13 else E1 for f in frames}
        self.middle = self.manifest.clips[1].middle_frame
        self.detector = FixedDetector({
            self.middle: [
                (Detection(self.distractor.box(self.middle), 0.95, "id1"), E1),
                (Detection(self.truth.box(self.middle), 0.9, "id0"), E0),
            ]
        })
        self.tracker = OracleTrackerClient(
            self.truth, {"1": self.distractor}, switches=[ScheduledSwitch(13, "1")]
        )
        self.service = ReidService(ReidConfig(similarity_threshold=0.6))

    def _run(self, detector=None, tracker=None):
        return self.service.reid_pass(
            self.track, self.manifest, E0, self.embeddings, detector or self.detector, tracker or self.tracker
        )

    def test_switched_clip_corrected(self):
        """测试低相似度片段被校正回目标"""
        corrected, report = self._run()
        kept, fixed = report.clips
        assert kept.action == "kept" and kept.verified
        assert fixed.action == "corrected" and not fixed.verified
        assert fixed.similarity == pytest.approx(0.3)
        assert fixed.middle_frame == self.middle
        assert fixed.b_mid == self.truth.box(self.middle).to_list()
        for frame in self.manifest.clips[1].frames:
            assert corrected[frame].box == self.truth.box(frame)
        assert self.detector.calls == [self.middle]

    def test_verified_clip_untouched(self):
        """测试通过校验的片段记录逐字节不变"""
        corrected, _ = self._run()
        for frame in self.manifest.clips[0].frames:
            assert corrected[frame] == self.track[frame]

    def test_no_candidates_keeps_clip(self):
        corrected, report = self._run(detector=FixedDetector({}))
        assert report.clips[1].action == "no_candidates"
        assert report.flagged == ["cam1"]
        assert corrected == self.track

    def test_tracker_failure_keeps_clip(self):
        """测试跟踪器失败时片段保持原样并标记"""
        corrected, report = self._run(tracker=FailingTracker())
        assert report.clips[1].action == "correction_failed"
        assert "后端崩溃" in report.clips[1].message
        assert corrected == self.track

    def test_threshold_boundary(self):
        """测试相似度恰好等于阈值时视为通过"""
        service = ReidService(ReidConfig(similarity_threshold=0.3))
        _, report = service.reid_pass(
            self.track, self.manifest, E0, self.embeddings, self.detector, self.tracker
        )
        assert report.clips[1].action == "kept"


class TestCorrectClip:
    def test_prompt_frame_is_b_mid(self):
        """测试校正后提示帧的框就是 b_mid，片段外不变"""
        manifest = make_manifest(clip_lengths=(6, 6))
        truth = GroundTruth(manifest.sequence_id, moving_boxes(manifest.frames))
        track = make_track(manifest.sequence_id, {f: None for f in manifest.frames})
        clip = manifest.clips[1]
        b_mid = truth.box(clip.middle_frame)
        corrected = correct_clip(track, clip, b_mid, OracleTrackerClient(truth))
        assert corrected[clip.middle_frame].box == b_mid
        assert corrected.present_frames() == list(clip.frames)
