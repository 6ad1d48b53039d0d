"""
流水线运行接口：后台启动运行并查询状态
"""
import logging
from typing import List

from fastapi import APIRouter, HTTPException

from app.schemas.api import ErrorResponse, RunRequest, RunTaskResponse
from app.utils.task_manager import task_manager

router = APIRouter()
logger = logging.getLogger(__name__)


@router.post("", response_model=RunTaskResponse, status_code=202, responses={400: {"model": ErrorResponse}})
async def create_run(request: RunRequest):
    """
    创建运行任务

    配置在后台任务中读取与预检；配置错误反映在任务状态的 error_message 中。
    """
    task_id = await task_manager.create_task(request.config_path, request.overrides)
    return await task_manager.get_task_status(task_id)


@router.get("", response_model=List[RunTaskResponse])
async def list_runs(limit: int = 10):
    return await task_manager.list_tasks(limit)


@router.get("/{task_id}", response_model=RunTaskResponse, responses={404: {"model": ErrorResponse}})
async def get_run(task_id: str):
    status = await task_manager.get_task_status(task_id)
    if status is None:
        raise HTTPException(status_code=404, detail=f"任务 {task_id} 不存在")
    return status
