"""
流水线运行接口测试
"""

import tempfile
import time
import unittest
from pathlib import Path
from unittest.mock import patch

from fastapi import status
from fastapi.testclient import TestClient

from app.main import app
from app.schemas.report import RunReport, SequenceRunResult
from app.schemas.synth import SwitchEvent, SynthSpec, SynthSuiteSpec
from app.services.synth_service import generate_suite
from app.utils.task_manager import TaskManager

FINISHED = {"completed", "failed", "timeout"}


def _ok_runner(config_path, overrides):
    return RunReport(sequences=[SequenceRunResult(sequence_id="AL_000", mode="single_skier")])


def _failing_runner(config_path, overrides):
    return RunReport(sequences=[
        SequenceRunResult(sequence_id="AL_000", mode="single_skier", status="error", error="boom", error_stage="reid"),
    ])


def _slow_runner(config_path, overrides):
    time.sleep(2.0)
    return _ok_runner(config_path, overrides)


class TestRunsAPI(unittest.TestCase):
    """运行接口测试类"""

    def _client_with(self, manager):
        patcher = patch("app.api.v2.endpoints.runs.task_manager", manager)
        patcher.start()
        self.addCleanup(patcher.stop)
        client = TestClient(app)
        client.__enter__()
        self.addCleanup(client.__exit__, None, None, None)
        return client

    def _wait(self, client, task_id, timeout=60.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            data = client.get(f"/api/v2/runs/{task_id}").json()
            if data["status"] in FINISHED:
                return data
            time.sleep(0.05)
        self.fail(f"任务 {task_id} 未在 {timeout}s 内结束")

    def test_create_and_complete(self):
        """测试创建任务并查询到完成状态与运行报告"""
        client = self._client_with(TaskManager(runner=_ok_runner))
        response = client.post("/api/v2/runs", json={"config_path": "run_config.json"})
        self.assertEqual(response.status_code, status.HTTP_202_ACCEPTED)
        task_id = response.json()["task_id"]
        data = self._wait(client, task_id)
        self.assertEqual(data["status"], "completed")
        self.assertEqual(data["result"]["sequences"][0]["sequence_id"], "AL_000")

        listed = client.get("/api/v2/runs", params={"limit": 5}).json()
        self.assertEqual([t["task_id"] for t in listed], [task_id])

    def test_failed_sequences(self):
        client = self._client_with(TaskManager(runner=_failing_runner))
        task_id = client.post("/api/v2/runs", json={"config_path": "x.json"}).json()["task_id"]
        data = self._wait(client, task_id)
        self.assertEqual(data["status"], "failed")
        self.assertIn("AL_000", data["error_message"])

    def test_config_error(self):
        """测试配置文件不存在时任务失败并带错误码"""
        client = self._client_with(TaskManager())
        task_id = client.post("/api/v2/runs", json={"config_path": "/nonexistent/run_config.json"}).json()["task_id"]
        data = self._wait(client, task_id)
        self.assertEqual(data["status"], "failed")
        self.assertIn("CONFIG_ERROR", data["error_message"])

    def test_timeout(self):
        client = self._client_with(TaskManager(runner=_slow_runner, task_timeout=0.2))
        task_id = client.post("/api/v2/runs", json={"config_path": "x.json"}).json()["task_id"]
        self.assertEqual(self._wait(client, task_id)["status"], "timeout")

    def test_task_limit(self):
        """测试并发任务达到上限时返回 400"""
        client = self._client_with(TaskManager(runner=_slow_runner, max_concurrent_tasks=1))
        first = client.post("/api/v2/runs", json={"config_path": "x.json"})
        self.assertEqual(first.status_code, status.HTTP_202_ACCEPTED)
        second = client.post("/api/v2/runs", json={"config_path": "x.json"})
        self.assertEqual(second.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertEqual(second.json()["error_code"], "TOO_MANY_TASKS")

    def test_unknown_task(self):
        client = self._client_with(TaskManager(runner=_ok_runner))
        response = client.get("/api/v2/runs/does-not-exist")
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)
        self.assertEqual(response.json()["error_code"], "NOT_FOUND")

    def test_real_pipeline_run(self):
        """测试在后台执行一次真实的合成评测集运行"""
        workdir = tempfile.TemporaryDirectory()
        self.addCleanup(workdir.cleanup)
        suite = SynthSuiteSpec(sequences=[
            SynthSpec(
                sequence_id="AL_000",
                frames_per_clip=20,
                switch_events=[SwitchEvent(clip_index=1, frame_offset=5, distractor_id=1)],
            )
        ])
        config_path, _ = generate_suite(suite, Path(workdir.name))
        client = self._client_with(TaskManager())
        response = client.post(
            "/api/v2/runs",
            json={"config_path": str(config_path), "overrides": {"output_dir": str(Path(workdir.name) / "out")}},
        )
        data = self._wait(client, response.json()["task_id"])
        self.assertEqual(data["status"], "completed")
        clips = data["result"]["sequences"][0]["reid"]["clips"]
        self.assertEqual([c["action"] for c in clips], ["kept", "corrected", "kept"])


if __name__ == "__main__":
    unittest.main()
