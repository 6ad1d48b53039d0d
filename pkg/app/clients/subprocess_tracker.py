"""
子进程跟踪器客户端

通过标准输入/输出上的逐行 JSON 协议驱动外部跟踪后端（SAMURAI、STARK 等的薄封装）。

请求:
  {"type":"track","sequence_id":...,"clip":{"start":s,"end":e},"prompt_frame":m,
   "prompt_box":[x,y,w,h],"direction":"forward"|"backward"}
  {"type":"shutdown"}
响应:
  {"type":"frame","frame":n,"present":true,"box":[x,y,w,h],"confidence":0.93}
  {"type":"done"}
  {"type":"error","message":"..."}
"""

import json
import logging
import math
import os
import queue
import shlex
import subprocess
import threading
import time
from collections import deque
from typing import Deque, List, Optional, Sequence

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from app.clients.base import (
    BackendTimeoutError,
    BackendUnavailableError,
    ProtocolViolationError,
    RangeViolationError,
    TrackerClient,
    TrackingRequest,
)
from app.core.config import settings
from app.core.errors import SkiTrackError
from app.models.geometry import BoundingBox
from app.models.sequence import FrameRecord

logger = logging.getLogger(__name__)

BACKEND_ENV_VAR = "SKITRACK_TRACKER_BACKEND"
STDERR_TAIL_LINES = 200
_EOF = None


def resolve_command(command: Sequence[str]) -> List[str]:
    """环境变量 SKITRACK_TRACKER_BACKEND 优先于配置中的命令"""
    override = os.getenv(BACKEND_ENV_VAR, settings.TRACKER_BACKEND).strip()
    if override:
        return shlex.split(override)
    return list(command)


def _pump_stdout(process: subprocess.Popen, lines: "queue.Queue[Optional[str]]") -> None:
    for line in process.stdout:
        lines.put(line)
    lines.put(_EOF)


def _pump_stderr(process: subprocess.Popen, tail: Deque[str]) -> None:
    for line in process.stderr:
        tail.append(line)


def _spawn(command: List[str]) -> subprocess.Popen:
    return subprocess.Popen(
        command,
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        encoding="utf-8",
        bufsize=1,
    )


def parse_frame_message(message: dict, stderr: str = "") -> FrameRecord:
    """
    解析一条 frame 响应

    Raises:
        ProtocolViolationError: 字段缺失或类型错误
        RangeViolationError: 置信度超出 [0,1] 或框非法
    """
    try:
        frame = message["frame"]
        present = message["present"]
    except KeyError as e:
        raise ProtocolViolationError(f"frame 响应缺少字段 {e}", stderr)
    if not isinstance(frame, int) or isinstance(frame, bool) or not isinstance(present, bool):
        raise ProtocolViolationError(f"frame 响应字段类型错误: {message}", stderr)
    if not present:
        return FrameRecord.absent(frame)

    confidence = message.get("confidence")
    if not isinstance(confidence, (int, float)) or isinstance(confidence, bool) or not math.isfinite(confidence):
        raise ProtocolViolationError(f"帧 {frame} 的置信度不是数值: {confidence!r}", stderr)
    if not 0.0 <= confidence <= 1.0:
        raise RangeViolationError(f"帧 {frame} 的置信度 {confidence} 超出 [0,1]", stderr)
    try:
        box = BoundingBox.from_list(message.get("box") or [])
    except (SkiTrackError, TypeError) as e:
        raise ProtocolViolationError(f"帧 {frame} 的框无法解析: {e}", stderr)
    if not box.is_valid():
        raise RangeViolationError(f"帧 {frame} 的框宽高非正: {box.to_list()}", stderr)
    return FrameRecord.observed(frame, box, float(confidence))


class SubprocessTrackerClient(TrackerClient):
    """逐行 JSON 协议的子进程跟踪器"""

    def __init__(
        self,
        command: Sequence[str],
        timeout: float = settings.TRACKER_TIMEOUT,
        spawn_retries: int = settings.TRACKER_SPAWN_RETRIES,
        name: Optional[str] = None,
    ):
        self.command = resolve_command(command)
        if not self.command:
            raise BackendUnavailableError(f"未配置跟踪后端命令（可通过 {BACKEND_ENV_VAR} 指定）")
        self.timeout = timeout
        self.spawn_retries = spawn_retries
        self.name = name or f"subprocess:{os.path.basename(self.command[-1])}"
        self._process: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._stderr: Deque[str] = deque(maxlen=STDERR_TAIL_LINES)
        self._deadline = 0.0
        self._active = False

    # ---- 进程管理 ----

    def _start_process(self) -> None:
        spawner = retry(
            retry=retry_if_exception_type(OSError),
            stop=stop_after_attempt(self.spawn_retries),
            wait=wait_exponential(multiplier=0.2, max=2.0),
            reraise=True,
        )(_spawn)
        try:
            process = spawner(self.command)
        except OSError as e:
            raise BackendUnavailableError(f"无法启动跟踪后端 {self.command}: {e}")

        # 每个进程独占自己的队列，旧进程的读线程收尾时不会写进新会话
        self._lines = queue.Queue()
        self._stderr = deque(maxlen=STDERR_TAIL_LINES)
        threading.Thread(target=_pump_stdout, args=(process, self._lines), daemon=True).start()
        threading.Thread(target=_pump_stderr, args=(process, self._stderr), daemon=True).start()
        self._process = process
        logger.info(f"{self.name}: 后端已启动 pid={process.pid}")

    def _stderr_text(self) -> str:
        return "".join(self._stderr)

    def _kill(self) -> None:
        if self._process is not None:
            if self._process.poll() is None:
                self._process.kill()
            try:
                self._process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                pass
            # 给 stderr 线程一点时间收尾
            time.sleep(0.05)
        self._process = None
        self._active = False

    def close(self) -> None:
        if self._process is None:
            return
        if self._process.poll() is None:
            try:
                self._process.stdin.write(json.dumps({"type": "shutdown"}) + "\n")
                self._process.stdin.flush()
                self._process.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                logger.warning(f"{self.name}: 后端未正常退出，强制结束")
        self._kill()

    # ---- 会话 ----

    def start(self, request: TrackingRequest) -> None:
        if self._active:
            raise ProtocolViolationError(f"{self.name}: 上一个会话尚未结束")
        if self._process is None or self._process.poll() is not None:
            self._start_process()
        try:
            self._process.stdin.write(json.dumps(request.to_wire()) + "\n")
            self._process.stdin.flush()
        except OSError as e:
            stderr = self._stderr_text()
            self._kill()
            raise BackendUnavailableError(f"{self.name}: 写入请求失败: {e}", stderr)
        self._deadline = time.monotonic() + self.timeout
        self._active = True

    def _read_message(self) -> dict:
        remaining = self._deadline - time.monotonic()
        try:
            line = self._lines.get(timeout=max(remaining, 0.0))
        except queue.Empty:
            stderr = self._stderr_text()
            self._kill()
            raise BackendTimeoutError(f"{self.name}: 后端在 {self.timeout:g}s 内未完成会话", stderr)

        if line is _EOF:
            code = self._process.wait() if self._process is not None else None
            time.sleep(0.05)
            stderr = self._stderr_text()
            self._kill()
            raise BackendUnavailableError(f"{self.name}: 后端提前退出 (exit code {code})", stderr)

        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            stderr = self._stderr_text()
            self._kill()
            raise ProtocolViolationError(f"{self.name}: 无法解析的响应行: {line.strip()[:200]!r}", stderr)
        if not isinstance(message, dict):
            self._kill()
            raise ProtocolViolationError(f"{self.name}: 响应不是 JSON 对象: {line.strip()[:200]!r}")
        return message

    def step(self) -> Optional[FrameRecord]:
        if not self._active:
            return None
        message = self._read_message()
        kind = message.get("type")
        if kind == "done":
            self._active = False
            return None
        if kind == "frame":
            try:
                return parse_frame_message(message, self._stderr_text())
            except ProtocolViolationError:
                self._kill()
                raise
        if kind == "error":
            stderr = self._stderr_text()
            self._kill()
            raise ProtocolViolationError(f"{self.name}: 后端报告错误: {message.get('message')}", stderr, "BACKEND_ERROR")
        self._kill()
        raise ProtocolViolationError(f"{self.name}: 未知的响应类型 {kind!r}")
