"""
ReID 特征向量
"""

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from app.core.errors import SkiTrackError


class EmbeddingError(SkiTrackError):
    """特征向量异常基类"""
    def __init__(self, message: str, error_code: str = "EMBEDDING_ERROR"):
        super().__init__(message, error_code)


class DimensionMismatchError(EmbeddingError):
    """特征维度不一致"""
    def __init__(self, message: str = "特征维度不一致"):
        super().__init__(message, "DIMENSION_MISMATCH")


class ZeroNormError(EmbeddingError):
    """零范数特征向量"""
    def __init__(self, message: str = "特征向量范数为零"):
        super().__init__(message, "ZERO_NORM")


@dataclass(frozen=True, eq=False)
class Embedding:
    """只读的实数特征向量，构造时要求有限且范数大于零"""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise DimensionMismatchError("特征向量维度为零")
        if not np.all(np.isfinite(values)):
            raise EmbeddingError("特征向量包含非有限值", "NON_FINITE_EMBEDDING")
        if not np.linalg.norm(values) > 0:
            raise ZeroNormError()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, values: Iterable[float]) -> "Embedding":
        return cls(np.asarray(list(values), dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def normalized(self) -> "Embedding":
        return Embedding(self.values / self.norm)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())
