import os
from dotenv import load_dotenv

load_dotenv()

class Settings:
    API_V2_STR = "/api/v2"
    PROJECT_NAME = "SkiTrack"

    # CORS
    BACKEND_CORS_ORIGINS = [
        origin.strip()
        for origin in os.getenv("BACKEND_CORS_ORIGINS", "http://localhost:3000,http://localhost:5173").split(",")
        if origin.strip()
    ]

    # ReID 校验配置
    REID_SIMILARITY_THRESHOLD = float(os.getenv("REID_SIMILARITY_THRESHOLD", "0.6"))
    REID_CLIP_AGGREGATION = os.getenv("REID_CLIP_AGGREGATION", "mean")  # mean | median

    # 融合配置（多人场景）
    FUSION_IOU_THRESHOLD = float(os.getenv("FUSION_IOU_THRESHOLD", "0.5"))

    # 卡尔曼滤波配置（单人场景）
    KALMAN_PROCESS_NOISE_POS = float(os.getenv("KALMAN_PROCESS_NOISE_POS", "1.0"))
    KALMAN_PROCESS_NOISE_VEL = float(os.getenv("KALMAN_PROCESS_NOISE_VEL", "0.1"))
    KALMAN_MEASUREMENT_NOISE = float(os.getenv("KALMAN_MEASUREMENT_NOISE", "1.0"))
    KALMAN_INITIAL_VELOCITY_VARIANCE = float(os.getenv("KALMAN_INITIAL_VELOCITY_VARIANCE", "10.0"))
    KALMAN_GATE_IOU = float(os.getenv("KALMAN_GATE_IOU", "0.3"))

    # 评测配置
    EVAL_HIT_IOU_THRESHOLD = float(os.getenv("EVAL_HIT_IOU_THRESHOLD", "0.5"))

    # 外部跟踪器后端
    TRACKER_BACKEND = os.getenv("SKITRACK_TRACKER_BACKEND", "")
    TRACKER_TIMEOUT = float(os.getenv("TRACKER_TIMEOUT", "60"))  # 秒，每个片段
    TRACKER_SPAWN_RETRIES = int(os.getenv("TRACKER_SPAWN_RETRIES", "3"))

    # 流水线
    PIPELINE_WORKERS = int(os.getenv("PIPELINE_WORKERS", "1"))
    PIPELINE_SEED = int(os.getenv("PIPELINE_SEED", "42"))

    # 后台运行任务
    RUN_MAX_CONCURRENT_TASKS = int(os.getenv("RUN_MAX_CONCURRENT_TASKS", "2"))
    RUN_TASK_TIMEOUT = int(os.getenv("RUN_TASK_TIMEOUT", "1800"))  # 30分钟

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Environment
    ENVIRONMENT = os.getenv("ENVIRONMENT", "development")

settings = Settings()
