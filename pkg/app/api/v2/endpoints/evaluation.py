"""
评测接口：对内联记录打分，以及按项目聚合
"""
import logging

from fastapi import APIRouter

from app.schemas.api import AggregateRequest, ErrorResponse, ScoreRequest, ScoreResponse
from app.schemas.report import MetricReport
from app.services.eval_service import aggregate, score_sequence

router = APIRouter()
logger = logging.getLogger(__name__)


@router.post("/score", response_model=ScoreResponse, responses={400: {"model": ErrorResponse}})
async def score(request: ScoreRequest):
    """
    评测单条序列

    预测与真值必须覆盖相同的帧集合；真值从未出现的序列返回 400。
    """
    pred = request.to_track()
    gt = request.to_ground_truth()
    result = score_sequence(pred, gt, request.protocol, request.hit_iou_threshold)
    logger.info(f"接口评测: 序列={request.sequence_id}, F1={result.f1:.4f}")
    return ScoreResponse(sequence_id=request.sequence_id, score=result)


@router.post("/aggregate", response_model=MetricReport, responses={400: {"model": ErrorResponse}})
async def aggregate_scores(request: AggregateRequest):
    """按项目聚合逐单元分数；没有任何单元的项目记入 missing_disciplines"""
    return aggregate(request.scores, request.disciplines, request.protocol, request.setting)
