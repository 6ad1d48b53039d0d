"""
卡尔曼精修服务单元测试

predict/update 与稠密矩阵的教科书实现逐步比对。
"""

import numpy as np
import pytest

from app.models.geometry import BoundingBox, iou
from app.models.sequence import Detection, FrameRecord
from app.schemas.run_config import KalmanParams
from app.services.kalman_service import (
    KalmanNumericalError,
    KalmanState,
    kf_init,
    kf_predict,
    kf_update,
    refine_single_skier,
)
from tests.conftest import make_manifest, make_track, moving_boxes


def _textbook(params: KalmanParams):
    F = np.eye(8)
    F[:4, 4:] = np.eye(4)
    H = np.hstack([np.eye(4), np.zeros((4, 4))])
    Q = np.diag([params.process_noise_pos] * 4 + [params.process_noise_vel] * 4)
    R = np.eye(4) * params.measurement_noise
    return F, H, Q, R


def _oracle_predict(x, P, F, Q):
    return F @ x, F @ P @ F.T + Q


def _oracle_update(x, P, z, H, R):
    S = H @ P @ H.T + R
    K = P @ H.T @ np.linalg.inv(S)
    x = x + K @ (z - H @ x)
    I_KH = np.eye(8) - K @ H
    P = I_KH @ P @ I_KH.T + K @ R @ K.T
    return x, P


class TestKalmanPrimitives:
    """predict/update 原语测试"""

    def setup_method(self):
        self.params = KalmanParams(
            process_noise_pos=1.0, process_noise_vel=0.1, measurement_noise=2.0, initial_velocity_variance=10.0
        )

    def test_init_state(self):
        """测试初始化：中心+宽高，速度为 0，协方差为对角阵"""
        state = kf_init(BoundingBox(10, 20, 30, 40), self.params)
        assert state.mean.tolist() == [25.0, 40.0, 30.0, 40.0, 0.0, 0.0, 0.0, 0.0]
        assert np.allclose(np.diag(state.covariance), [2.0] * 4 + [10.0] * 4)
        assert state.box == BoundingBox(10, 20, 30, 40)

    def test_matches_dense_oracle(self):
        """测试 100 个种子 × 200 步与稠密矩阵实现一致（1e-9）"""
        F, H, Q, R = _textbook(self.params)
        for seed in range(100):
            rng = np.random.default_rng(seed)
            box = BoundingBox(rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(20, 60), rng.uniform(40, 120))
            state = kf_init(box, self.params)
            x, P = state.mean.copy(), state.covariance.copy()
            velocity = rng.normal(0, 2, size=2)
            for step in range(200):
                state = kf_predict(state, self.params)
                x, P = _oracle_predict(x, P, F, Q)
                if rng.random() < 0.8:
                    cx = 300 + velocity[0] * step + rng.normal(0, 1.5)
                    cy = 300 + velocity[1] * step + rng.normal(0, 1.5)
                    w, h = 40 + rng.normal(0, 1), 80 + rng.normal(0, 1)
                    z = BoundingBox.from_center(cx, cy, w, h)
                    state = kf_update(state, z, self.params)
                    x, P = _oracle_update(x, P, np.array([cx, cy, w, h]), H, R)
                np.testing.assert_allclose(state.mean, x, rtol=1e-9, atol=1e-9)
                np.testing.assert_allclose(state.covariance, P, rtol=1e-9, atol=1e-9)

    def test_covariance_stays_symmetric_psd(self):
        state = kf_init(BoundingBox(0, 0, 10, 10), self.params)
        for _ in range(50):
            state = kf_predict(state, self.params)
            state = kf_update(state, BoundingBox(1, 1, 10, 10), self.params)
            assert np.allclose(state.covariance, state.covariance.T)
            assert np.all(np.linalg.eigvalsh(state.covariance) > 0)

    def test_update_with_predicted_box_keeps_mean(self):
        """测试以预测框作为观测更新时均值不变（零新息）"""
        rng = np.random.default_rng(7)
        for _ in range(200):
            box = BoundingBox(rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(20, 60), rng.uniform(40, 120))
            state = kf_init(box, self.params)
            for _ in range(int(rng.integers(0, 10))):
                state = kf_predict(state, self.params)
                state = kf_update(state, BoundingBox(box.x + rng.normal(0, 3), box.y + rng.normal(0, 3), box.w, box.h),
                                  self.params)
            predicted = kf_predict(state, self.params)
            updated = kf_update(predicted, predicted.box, self.params)
            np.testing.assert_allclose(updated.mean, predicted.mean, rtol=0, atol=1e-9)

    def test_covariance_symmetric_on_random_sequences(self):
        """测试随机 predict/update 序列（最长 1000 步）后协方差对称（1e-9）"""
        rng = np.random.default_rng(11)
        for _ in range(10):
            state = kf_init(BoundingBox(200, 200, 40, 80), self.params)
            for _ in range(int(rng.integers(1, 1001))):
                if rng.random() < 0.5:
                    state = kf_predict(state, self.params)
                else:
                    z = BoundingBox(rng.uniform(0, 400), rng.uniform(0, 400), rng.uniform(5, 80), rng.uniform(5, 120))
                    state = kf_update(state, z, self.params)
                assert np.max(np.abs(state.covariance - state.covariance.T)) <= 1e-9

    def test_non_finite_state(self):
        """测试非有限状态抛出 KalmanNumericalError"""
        bad = KalmanState(np.full(8, np.nan), np.eye(8))
        with pytest.raises(KalmanNumericalError):
            kf_predict(bad, self.params)
        with pytest.raises(KalmanNumericalError):
            kf_update(bad, BoundingBox(0, 0, 1, 1), self.params)

    def test_singular_innovation(self):
        """测试新息协方差奇异时抛出异常"""
        huge = np.eye(8)
        huge[0, 0] = 1e30
        state = KalmanState(np.zeros(8) + 10, huge)
        with pytest.raises(KalmanNumericalError):
            kf_update(state, BoundingBox(0, 0, 5, 5), self.params)


class TestRefineSingleSkier:
    """单人轨迹精修测试"""

    def setup_method(self):
        self.manifest = make_manifest(clip_lengths=(15, 15))
        self.params = KalmanParams()

    def test_presence_preserved(self):
        """测试存在帧集合与输入完全一致"""
        boxes = moving_boxes(self.manifest.frames)
        for frame in (3, 4, 17, 29):
            boxes[frame] = None
        track = make_track(self.manifest.sequence_id, boxes)
        refined = refine_single_skier(track, {}, self.params, self.manifest)
        assert refined.present_frames() == track.present_frames()
        assert refined.frames == track.frames
        for frame in refined.present_frames():
            assert refined[frame].confidence == track[frame].confidence

    def test_first_frame_of_clip_unchanged(self):
        """测试片段边界重置：每个片段首个存在帧直接取输入框"""
        track = make_track(self.manifest.sequence_id, moving_boxes(self.manifest.frames))
        refined = refine_single_skier(track, {}, self.params, self.manifest)
        for clip in self.manifest.clips:
            assert refined[clip.start_frame].box == track[clip.start_frame].box

    def test_constant_velocity_tracked(self):
        """测试匀速运动在无噪声时误差收敛"""
        track = make_track(self.manifest.sequence_id, moving_boxes(self.manifest.frames))
        refined = refine_single_skier(track, {}, self.params)
        last = self.manifest.frames[-1]
        assert abs(refined[last].box.x - track[last].box.x) < 1.0

    def test_exact_detections_converge(self):
        """测试检测框与输入框一致时，20 帧后输出与输入逐帧 IoU ≥ 0.99"""
        frames = range(0, 60)
        boxes = moving_boxes(frames)
        track = make_track("s", boxes)
        detections = {f: [Detection(b, 0.9, "d")] for f, b in boxes.items()}
        refined = refine_single_skier(track, detections, self.params)
        for frame in frames[20:]:
            assert iou(refined[frame].box, boxes[frame]) >= 0.99

    def test_constant_velocity_steady_state(self):
        """测试匀速运动且检测精确时，500 帧后稳态位置误差 < 0.1 像素"""
        frames = range(0, 500)
        boxes = moving_boxes(frames, vx=3.0, vy=-0.5)
        track = make_track("s", boxes)
        detections = {f: [Detection(b, 0.9, "d")] for f, b in boxes.items()}
        refined = refine_single_skier(track, detections, self.params)
        for frame in frames[400:]:
            (cx, cy), (tx, ty) = refined[frame].box.center, boxes[frame].center
            assert abs(cx - tx) < 0.1
            assert abs(cy - ty) < 0.1

    def test_gated_detection_preferred(self):
        """测试通过门限的检测优先于输入框"""
        frames = range(0, 10)
        truth = moving_boxes(frames)
        noisy = {f: BoundingBox(b.x + (6 if f % 2 else -6), b.y, b.w, b.h) for f, b in truth.items()}
        track = make_track("s", noisy)
        detections = {f: [Detection(truth[f], 0.9, "d")] for f in frames}
        with_det = refine_single_skier(track, detections, self.params)
        without = refine_single_skier(track, {}, self.params)
        err_with = sum(abs(with_det[f].box.x - truth[f].x) for f in frames[3:])
        err_without = sum(abs(without[f].box.x - truth[f].x) for f in frames[3:])
        assert err_with < err_without

    def test_far_detection_ignored(self):
        """测试低于门限的检测不参与更新"""
        frames = range(0, 8)
        track = make_track("s", moving_boxes(frames))
        far = {f: [Detection(BoundingBox(600, 400, 30, 30), 0.99, "far")] for f in frames}
        assert refine_single_skier(track, far, self.params) == refine_single_skier(track, {}, self.params)

    def test_all_absent(self):
        track = make_track("s", {f: None for f in range(5)})
        refined = refine_single_skier(track, {}, self.params)
        assert refined.present_frames() == []
        assert isinstance(refined[0], FrameRecord)
