"""
ReID 特征读写

每条记录一行: frame,candidate_id,v1,...,vD
锚点特征使用保留键 anchor,anchor；跟踪框裁剪的特征使用候选ID track。
"""

import logging
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from app.dataio.errors import DataParseError, DuplicateKeyError, RecordDimensionError
from app.dataio.text import PathLike, format_float, iter_records, parse_float, parse_int, write_lines
from app.models.embedding import DimensionMismatchError, Embedding

logger = logging.getLogger(__name__)

ANCHOR_KEY = "anchor"
TRACK_CANDIDATE = "track"

StoreKey = Tuple[Optional[int], str]


class EmbeddingStore:
    """按 (帧号, 候选ID) 索引的特征库，锚点存于保留键"""

    def __init__(self, dim: Optional[int] = None):
        self.dim = dim
        self._items: Dict[StoreKey, Embedding] = {}
        self._anchor: Optional[Embedding] = None

    def _check_dim(self, embedding: Embedding) -> None:
        if self.dim is None:
            self.dim = embedding.dim
        elif embedding.dim != self.dim:
            raise DimensionMismatchError(f"特征维度 {embedding.dim} 与特征库维度 {self.dim} 不一致")

    def add(self, frame: int, candidate_id: str, embedding: Embedding) -> None:
        if candidate_id == ANCHOR_KEY:
            raise DataParseError(f"候选ID {ANCHOR_KEY!r} 为锚点保留", field="candidate_id", error_code="RESERVED_KEY")
        key = (frame, candidate_id)
        if key in self._items:
            raise DuplicateKeyError(f"重复的特征键 (帧 {frame}, 候选 {candidate_id})")
        self._check_dim(embedding)
        self._items[key] = embedding

    def set_anchor(self, embedding: Embedding) -> None:
        if self._anchor is not None:
            raise DuplicateKeyError("锚点特征重复")
        self._check_dim(embedding)
        self._anchor = embedding

    @property
    def anchor(self) -> Embedding:
        if self._anchor is None:
            raise DataParseError("特征库中没有锚点特征", field="anchor", error_code="MISSING_ANCHOR")
        return self._anchor

    @property
    def has_anchor(self) -> bool:
        return self._anchor is not None

    def get(self, frame: int, candidate_id: str) -> Optional[Embedding]:
        return self._items.get((frame, candidate_id))

    def track_embeddings(self) -> Dict[int, Embedding]:
        """帧号 -> 跟踪框特征"""
        return {frame: emb for (frame, cid), emb in self._items.items() if cid == TRACK_CANDIDATE}

    def items(self) -> Iterator[Tuple[StoreKey, Embedding]]:
        """按 (帧号, 候选ID) 排序产出，锚点在最前"""
        if self._anchor is not None:
            yield (None, ANCHOR_KEY), self._anchor
        for key in sorted(self._items):
            yield key, self._items[key]

    def __len__(self) -> int:
        return len(self._items) + (1 if self._anchor is not None else 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return list(self.items()) == list(other.items())


def load_embeddings(path: PathLike, expected_dim: Optional[int] = None) -> EmbeddingStore:
    """
    读取特征文件

    Args:
        path: 特征文件
        expected_dim: 期望维度 D；缺省时取第一条记录的维度

    Raises:
        RecordDimensionError: 记录维度与 D 不一致
        DuplicateKeyError: (帧号, 候选ID) 重复
        DataParseError: 非数值字段或零范数向量
    """
    store = EmbeddingStore(expected_dim)
    for line, tokens in iter_records(path):
        if len(tokens) < 3:
            raise DataParseError("需要 frame,candidate_id,v1,...,vD", path, line, None, "MALFORMED_RECORD")
        frame_token, candidate_id = tokens[0], tokens[1]
        is_anchor = frame_token == ANCHOR_KEY and candidate_id == ANCHOR_KEY
        if not candidate_id:
            raise DataParseError("候选ID为空", path, line, "candidate_id", "MALFORMED_RECORD")

        values = tokens[2:]
        if store.dim is not None and len(values) != store.dim:
            raise RecordDimensionError(
                f"记录有 {len(values)} 个分量，期望 {store.dim}", path, line, "values"
            )
        vector = np.array(
            [parse_float(token, path, line, f"v{index}") for index, token in enumerate(values, start=1)]
        )
        if not np.linalg.norm(vector) > 0:
            raise DataParseError("零范数特征向量", path, line, "values", "ZERO_NORM")
        embedding = Embedding(vector)

        if is_anchor:
            if store.has_anchor:
                raise DuplicateKeyError("锚点特征重复", path, line, "frame")
            store.set_anchor(embedding)
            continue
        frame = parse_int(frame_token, path, line, "frame")
        if candidate_id == ANCHOR_KEY:
            raise DataParseError(f"候选ID {ANCHOR_KEY!r} 为锚点保留", path, line, "candidate_id", "RESERVED_KEY")
        if store.get(frame, candidate_id) is not None:
            raise DuplicateKeyError(f"重复的特征键 (帧 {frame}, 候选 {candidate_id})", path, line, "candidate_id")
        store.add(frame, candidate_id, embedding)

    logger.debug(f"读取特征 {path}: {len(store)} 条，维度 {store.dim}")
    return store


def format_embeddings(store: EmbeddingStore) -> list:
    lines = []
    for (frame, candidate_id), embedding in store.items():
        head = f"{ANCHOR_KEY},{ANCHOR_KEY}" if frame is None else f"{frame},{candidate_id}"
        lines.append(head + "," + ",".join(format_float(v) for v in embedding.values))
    return lines


def save_embeddings(store: EmbeddingStore, path: PathLike) -> None:
    write_lines(path, format_embeddings(store))
