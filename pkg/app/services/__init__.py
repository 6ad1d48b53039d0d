from app.services.eval_service import EvaluationService, aggregate, ablation_compare, score_sequence
from app.services.fusion_service import fuse_tracks
from app.services.kalman_service import refine_single_skier
from app.services.pipeline_service import PipelineService, run_pipeline
from app.services.reid_service import ReidService, reid_pass
from app.services.synth_service import generate, generate_suite

__all__ = [
    "EvaluationService", "aggregate", "ablation_compare", "score_sequence",
    "fuse_tracks",
    "refine_single_skier",
    "PipelineService", "run_pipeline",
    "ReidService", "reid_pass",
    "generate", "generate_suite",
]
