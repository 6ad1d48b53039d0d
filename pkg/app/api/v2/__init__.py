from fastapi import APIRouter
from app.api.v2.endpoints import evaluation, runs

api_router = APIRouter()

# 评测相关路由
api_router.include_router(evaluation.router, prefix="/evaluation", tags=["评测"])

# 流水线运行相关路由
api_router.include_router(runs.router, prefix="/runs", tags=["运行"])
