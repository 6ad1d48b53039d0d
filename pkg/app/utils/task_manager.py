"""
流水线运行任务管理器

负责后台运行任务的生命周期，包括任务创建、执行、状态跟踪与过期清理。
流水线本身是同步的 CPU/子进程工作，放到线程池中执行，事件循环只负责调度与超时。
"""

import asyncio
import logging
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from app.core.config import settings
from app.core.errors import SkiTrackError
from app.dataio.run_config import load_run_config
from app.schemas.report import RunReport
from app.services.pipeline_service import PipelineService, preflight

logger = logging.getLogger(__name__)


class TaskStatus(Enum):
    """任务状态枚举"""
    PENDING = "pending"      # 等待中
    RUNNING = "running"      # 执行中
    COMPLETED = "completed"  # 已完成
    FAILED = "failed"        # 失败
    TIMEOUT = "timeout"      # 超时


class TaskLimitError(SkiTrackError):
    """并发任务数已达上限"""
    def __init__(self, message: str):
        super().__init__(message, "TOO_MANY_TASKS")


@dataclass
class RunTask:
    """流水线运行任务"""
    task_id: str
    config_path: str
    overrides: Dict[str, Any] = field(default_factory=dict)
    status: TaskStatus = TaskStatus.PENDING
    created_at: datetime = field(default_factory=datetime.now)
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None
    result: Optional[Dict[str, Any]] = None
    error_message: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        return {
            "task_id": self.task_id,
            "config_path": self.config_path,
            "status": self.status.value,
            "created_at": self.created_at.isoformat(),
            "started_at": self.started_at.isoformat() if self.started_at else None,
            "completed_at": self.completed_at.isoformat() if self.completed_at else None,
            "result": self.result,
            "error_message": self.error_message,
        }


def execute_run(config_path: str, overrides: Dict[str, Any]) -> RunReport:
    """同步执行一次完整运行：读取配置、预检、处理全部序列"""
    config = load_run_config(config_path, overrides)
    preflight(config)
    return PipelineService(config).run()


class TaskManager:
    """任务管理器"""

    def __init__(
        self,
        runner: Callable[[str, Dict[str, Any]], RunReport] = execute_run,
        max_concurrent_tasks: int = settings.RUN_MAX_CONCURRENT_TASKS,
        task_timeout: float = settings.RUN_TASK_TIMEOUT,
    ):
        self.tasks: Dict[str, RunTask] = {}
        self.running_tasks: Dict[str, asyncio.Task] = {}
        self.runner = runner
        self.max_concurrent_tasks = max_concurrent_tasks
        self.task_timeout = task_timeout
        self._cleanup_task = None

    async def start_cleanup_task(self):
        """启动清理任务"""
        if self._cleanup_task is None:
            self._cleanup_task = asyncio.create_task(self._cleanup_old_tasks())

    async def stop_cleanup_task(self):
        if self._cleanup_task is not None:
            self._cleanup_task.cancel()
            self._cleanup_task = None

    async def create_task(self, config_path: str, overrides: Optional[Dict[str, Any]] = None) -> str:
        """
        创建新的运行任务

        Raises:
            TaskLimitError: 等待中与执行中的任务数已达上限
        """
        # 超时但工作线程仍未结束的任务继续占用名额
        if len(self.running_tasks) >= self.max_concurrent_tasks:
            raise TaskLimitError(f"当前运行任务过多（上限 {self.max_concurrent_tasks}），请稍后再试")

        task = RunTask(task_id=str(uuid.uuid4()), config_path=config_path, overrides=dict(overrides or {}))
        self.tasks[task.task_id] = task
        self.running_tasks[task.task_id] = asyncio.create_task(self._execute_task(task.task_id))
        logger.info(f"创建运行任务: {task.task_id}, 配置: {config_path}")
        return task.task_id

    async def get_task_status(self, task_id: str) -> Optional[Dict[str, Any]]:
        """获取任务状态"""
        task = self.tasks.get(task_id)
        return task.to_dict() if task else None

    async def list_tasks(self, limit: int = 10) -> List[Dict[str, Any]]:
        """按创建时间倒序列出任务"""
        ordered = sorted(self.tasks.values(), key=lambda t: t.created_at, reverse=True)
        return [task.to_dict() for task in ordered[:limit]]

    async def wait(self, task_id: str) -> None:
        """等待任务结束（测试与脚本使用）"""
        running = self.running_tasks.get(task_id)
        if running is not None:
            await asyncio.shield(running)

    async def _execute_task(self, task_id: str):
        task = self.tasks[task_id]
        try:
            task.status = TaskStatus.RUNNING
            task.started_at = datetime.now()
            logger.info(f"开始执行运行任务: {task_id}")

            loop = asyncio.get_running_loop()
            future = loop.run_in_executor(None, self.runner, task.config_path, task.overrides)
            try:
                report = await asyncio.wait_for(asyncio.shield(future), timeout=self.task_timeout)
            except asyncio.TimeoutError:
                task.status = TaskStatus.TIMEOUT
                task.error_message = "任务执行超时"
                task.completed_at = datetime.now()
                logger.error(f"运行任务超时: {task_id}，等待工作线程结束后释放名额")
                await asyncio.gather(future, return_exceptions=True)
                logger.info(f"超时任务的工作线程已结束: {task_id}")
                return

            task.result = report.model_dump(mode="json")
            task.status = TaskStatus.FAILED if report.failed else TaskStatus.COMPLETED
            if report.failed:
                failed = [r.sequence_id for r in report.sequences if r.status == "error"]
                task.error_message = f"{len(failed)} 条序列处理失败: {failed}"
            task.completed_at = datetime.now()
            logger.info(f"运行任务结束: {task_id}, 状态: {task.status.value}")

        except SkiTrackError as e:
            task.status = TaskStatus.FAILED
            task.error_message = f"{e.message} ({e.error_code})"
            task.completed_at = datetime.now()
            logger.error(f"运行任务失败: {task_id}, 错误: {e.message}")

        except Exception as e:
            task.status = TaskStatus.FAILED
            task.error_message = str(e)
            task.completed_at = datetime.now()
            logger.exception(f"运行任务异常: {task_id}")

        finally:
            self.running_tasks.pop(task_id, None)

    async def _cleanup_old_tasks(self):
        """定期清理已结束超过 24 小时的任务"""
        while True:
            try:
                await asyncio.sleep(3600)
                cutoff = datetime.now() - timedelta(hours=24)
                expired = [
                    task_id for task_id, task in self.tasks.items()
                    if task.completed_at and task.completed_at < cutoff
                ]
                for task_id in expired:
                    del self.tasks[task_id]
                if expired:
                    logger.info(f"清理了 {len(expired)} 个过期任务")
            except asyncio.CancelledError:
                break
            except Exception as e:
                logger.error(f"清理任务时出错: {e}")


# 全局任务管理器实例
task_manager = TaskManager()
