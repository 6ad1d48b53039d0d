"""
流水线服务单元测试
"""

import json

import pytest

from app.clients.base import ProtocolViolationError, TrackerClient
from app.core.errors import ConfigError
from app.dataio.run_config import load_run_config
from app.dataio.tracks import load_track
from app.models.sequence import Discipline
from app.schemas.run_config import PipelineMode
from app.schemas.synth import SwitchEvent, SynthSpec, SynthSuiteSpec
from app.services.pipeline_service import (
    FINAL_TRACK_FILE,
    RUN_REPORT_FILE,
    PipelineService,
    preflight,
    resolve_mode,
)
from app.services.synth_service import generate_suite


def _small_suite(disciplines=(Discipline.AL, Discipline.FS)):
    return SynthSuiteSpec(
        sequences=[
            SynthSpec(
                sequence_id=f"{d.value}_000",
                discipline=d,
                seed=11 + index,
                frames_per_clip=20,
                switch_events=[SwitchEvent(clip_index=1, frame_offset=5, distractor_id=1)],
            )
            for index, d in enumerate(disciplines)
        ]
    )


def _edit_config(path, **changes):
    data = json.loads(path.read_text(encoding="utf-8"))
    for index, updates in changes.get("sequences", {}).items():
        data["sequences"][index].update(updates)
    for key, value in changes.items():
        if key != "sequences":
            data[key] = value
    path.write_text(json.dumps(data), encoding="utf-8")


class AlwaysFailingTracker(TrackerClient):
    name = "broken"

    def start(self, request):
        raise ProtocolViolationError("后端不可用")

    def step(self):
        return None


class TestPreflight:
    """运行前检查测试"""

    def test_multi_skier_requires_secondary(self, tmp_path):
        config_path, _ = generate_suite(_small_suite(), tmp_path)
        _edit_config(config_path, sequences={1: {"secondary_track": None}})
        config = load_run_config(config_path)
        with pytest.raises(ConfigError) as exc_info:
            preflight(config)
        assert "secondary_track" in exc_info.value.message

    def test_subprocess_requires_command(self, tmp_path):
        config_path, _ = generate_suite(_small_suite(), tmp_path)
        config = load_run_config(config_path, {"tracker.kind": "subprocess"})
        with pytest.raises(ConfigError):
            preflight(config)

    def test_unknown_distractor(self, tmp_path):
        config_path, _ = generate_suite(_small_suite(), tmp_path)
        _edit_config(config_path, sequences={0: {"switches": [{"frame": 3, "distractor_id": "9"}]}})
        with pytest.raises(ConfigError):
            preflight(load_run_config(config_path))

    def test_mode_follows_discipline(self, tmp_path):
        config_path, sequences = generate_suite(_small_suite(), tmp_path)
        config = load_run_config(config_path)
        assert resolve_mode(config, sequences[0].manifest) is PipelineMode.SINGLE_SKIER
        assert resolve_mode(config, sequences[1].manifest) is PipelineMode.MULTI_SKIER
        forced = load_run_config(config_path, {"mode": "single_skier"})
        assert resolve_mode(forced, sequences[1].manifest) is PipelineMode.SINGLE_SKIER


class TestPipelineService:
    """序列处理测试"""

    def test_run_writes_outputs(self, tmp_path):
        config_path, _ = generate_suite(_small_suite(), tmp_path / "suite")
        config = load_run_config(config_path, {"output_dir": str(tmp_path / "out")})
        preflight(config)
        report = PipelineService(config).run()
        assert not report.failed
        assert [r.sequence_id for r in report.sequences] == ["AL_000", "FS_000"]
        for result in report.sequences:
            assert [c.action for c in result.reid.clips] == ["kept", "corrected", "kept"]
            assert (tmp_path / "out" / result.sequence_id / FINAL_TRACK_FILE).is_file()
            assert (tmp_path / "out" / result.sequence_id / "reid_report.json").is_file()
        assert (tmp_path / "out" / RUN_REPORT_FILE).is_file()
        assert (tmp_path / "out" / "effective_config.json").is_file()

    def test_stage_error_isolated(self, tmp_path):
        """测试一条序列失败时记录阶段，其他序列继续"""
        config_path, _ = generate_suite(_small_suite(), tmp_path / "suite")
        bad = tmp_path / "suite" / "AL_000" / "base_track.csv"
        lines = bad.read_text(encoding="utf-8").splitlines()
        lines[3] = lines[3].rsplit(",", 1)[0] + ",2.0"
        bad.write_text("\n".join(lines) + "\n", encoding="utf-8")

        config = load_run_config(config_path, {"output_dir": str(tmp_path / "out")})
        report = PipelineService(config).run()
        assert report.failed
        failed, ok = report.sequences
        assert failed.status == "error"
        assert failed.error_stage == "load"
        assert "RANGE_ERROR" in failed.error
        assert ok.status == "ok"

    def test_tracker_failure_flags_clip(self, tmp_path):
        """测试跟踪器失败时片段保持原样并产生告警"""
        config_path, sequences = generate_suite(_small_suite((Discipline.AL,)), tmp_path / "suite")
        config = load_run_config(config_path, {"output_dir": str(tmp_path / "out")})
        report = PipelineService(config, tracker_factory=lambda bundle: AlwaysFailingTracker()).run()
        result = report.sequences[0]
        assert result.status == "ok"
        assert result.reid.clips[1].action == "correction_failed"
        assert any("correction_failed" in w for w in result.warnings)

    def test_generate_base_track(self, tmp_path):
        """测试没有 base_track 时由跟踪器逐片段生成"""
        config_path, sequences = generate_suite(_small_suite((Discipline.AL,)), tmp_path / "suite")
        _edit_config(config_path, sequences={0: {"base_track": None}})
        config = load_run_config(config_path, {"output_dir": str(tmp_path / "out"), "reid.enabled": False})
        preflight(config)
        report = PipelineService(config).run()
        assert not report.failed
        final = load_track(tmp_path / "out" / "AL_000" / FINAL_TRACK_FILE, sequences[0].manifest)
        assert final.frames == list(sequences[0].manifest.frames)

    def test_no_reid_skips_stage(self, tmp_path):
        config_path, _ = generate_suite(_small_suite((Discipline.AL,)), tmp_path / "suite")
        config = load_run_config(config_path, {"output_dir": str(tmp_path / "out"), "reid.enabled": False})
        report = PipelineService(config).run()
        assert report.sequences[0].reid is None
        assert not (tmp_path / "out" / "AL_000" / "reid_report.json").exists()

    def test_effective_config_records_backend_override(self, tmp_path, monkeypatch):
        """测试生效配置记录环境变量覆盖后实际运行的后端命令"""
        monkeypatch.setenv("SKITRACK_TRACKER_BACKEND", "real_backend --port 9")
        config_path, _ = generate_suite(_small_suite((Discipline.AL,)), tmp_path / "suite")
        config = load_run_config(config_path, {
            "output_dir": str(tmp_path / "out"),
            "tracker.kind": "subprocess",
            "tracker.command": ["configured_backend"],
            "reid.enabled": False,
        })
        report = PipelineService(config, tracker_factory=lambda bundle: AlwaysFailingTracker()).run()
        assert not report.failed

        snapshot = json.loads((tmp_path / "out" / "effective_config.json").read_text(encoding="utf-8"))
        assert snapshot["tracker"]["kind"] == "subprocess"
        assert snapshot["tracker"]["command"] == ["real_backend", "--port", "9"]
        assert config.tracker.command == ["configured_backend"]

    def test_effective_config_without_override(self, tmp_path):
        config_path, _ = generate_suite(_small_suite((Discipline.AL,)), tmp_path / "suite")
        config = load_run_config(config_path, {
            "tracker.kind": "subprocess",
            "tracker.command": ["configured_backend", "--fast"],
        })
        assert PipelineService(config).effective_config().tracker.command == ["configured_backend", "--fast"]
