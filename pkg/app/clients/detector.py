"""
基于预计算结果的检测器客户端
"""

import logging
from typing import List, Mapping, Optional, Sequence, Tuple

from app.clients.base import DetectorClient
from app.dataio.embeddings import EmbeddingStore
from app.models.embedding import Embedding
from app.models.sequence import Detection

logger = logging.getLogger(__name__)


class StoreDetectorClient(DetectorClient):
    """从检测文件与特征库读取候选；没有特征的检测不参与 ReID 匹配"""

    def __init__(
        self,
        detections: Mapping[int, Sequence[Detection]],
        store: EmbeddingStore,
        name: Optional[str] = None,
    ):
        self.detections = detections
        self.store = store
        self.name = name or "store-detector"

    def detect(self, frame: int) -> List[Tuple[Detection, Embedding]]:
        candidates = []
        skipped = 0
        for detection in self.detections.get(frame, ()):
            embedding = self.store.get(frame, detection.embedding_ref) if detection.embedding_ref else None
            if embedding is None:
                skipped += 1
                continue
            candidates.append((detection, embedding))
        if skipped:
            logger.debug(f"{self.name}: 帧 {frame} 有 {skipped} 个检测没有特征，已跳过")
        return candidates
