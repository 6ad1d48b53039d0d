import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from app.api.v2 import api_router
from app.core.config import settings
from app.core.errors import SkiTrackError
from app.utils.task_manager import task_manager

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """应用生命周期管理"""
    # 启动时初始化任务管理器
    await task_manager.start_cleanup_task()
    yield
    await task_manager.stop_cleanup_task()

app = FastAPI(
    title=settings.PROJECT_NAME,
    description="SkiTrack 滑雪运动员跟踪与身份校正 API",
    version="1.0.0",
    openapi_url="/openapi.json",
    lifespan=lifespan
)

# Set all CORS enabled origins
if settings.BACKEND_CORS_ORIGINS:
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[str(origin) for origin in settings.BACKEND_CORS_ORIGINS],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )


@app.exception_handler(SkiTrackError)
async def skitrack_error_handler(request: Request, exc: SkiTrackError):
    logger.warning(f"请求 {request.url.path} 失败: {exc.message} ({exc.error_code})")
    return JSONResponse(status_code=400, content=exc.to_dict())


@app.exception_handler(StarletteHTTPException)
async def http_error_handler(request: Request, exc: StarletteHTTPException):
    error_code = "NOT_FOUND" if exc.status_code == 404 else f"HTTP_{exc.status_code}"
    return JSONResponse(status_code=exc.status_code, content={"error_code": error_code, "message": str(exc.detail)})


@app.exception_handler(Exception)
async def unhandled_error_handler(request: Request, exc: Exception):
    logger.exception(f"请求 {request.url.path} 出现未处理异常")
    return JSONResponse(status_code=500, content={"error_code": "INTERNAL_ERROR", "message": "服务器内部错误"})


app.include_router(api_router, prefix=settings.API_V2_STR)

@app.get("/")
async def root():
    return {"message": f"{settings.PROJECT_NAME} API v1.0.0"}

@app.get("/health")
async def health_check():
    return {"status": "healthy"}
