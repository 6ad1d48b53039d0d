#!/usr/bin/env python3
"""
SkiTrack HTTP 服务启动文件（development 环境下启用热重载）

命令行工具见 cli.py
"""

import logging
import os

import uvicorn

from app.core.config import settings


def main():
    """启动服务器"""
    host = os.getenv("HOST", "0.0.0.0")
    port = int(os.getenv("PORT", 8000))

    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    logger = logging.getLogger(__name__)
    logger.info(f"{settings.PROJECT_NAME} 启动中: http://{host}:{port}")
    logger.info(f"API 文档: http://{host}:{port}/docs")

    uvicorn.run(
        "app.main:app",
        host=host,
        port=port,
        reload=settings.ENVIRONMENT == "development",
        reload_dirs=["app"],
        log_level="info"
    )

if __name__ == "__main__":
    main()
