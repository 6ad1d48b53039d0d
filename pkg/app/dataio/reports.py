"""
评测与运行报告的 JSON 读写
"""

from typing import Type, TypeVar

from pydantic import BaseModel, ValidationError

from app.dataio.errors import DataParseError
from app.dataio.text import PathLike, read_json, write_json
from app.schemas.report import ComparisonSummary, MetricReport, ReidReport, RunReport

ModelT = TypeVar("ModelT", bound=BaseModel)


def save_model(model: BaseModel, path: PathLike) -> None:
    write_json(path, model.model_dump(mode="json"))


def load_model(path: PathLike, model_cls: Type[ModelT]) -> ModelT:
    data = read_json(path)
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise DataParseError(first["msg"], path, None, field, "INVALID_REPORT")


def save_metric_report(report: MetricReport, path: PathLike) -> None:
    save_model(report, path)


def load_metric_report(path: PathLike) -> MetricReport:
    return load_model(path, MetricReport)


def save_reid_report(report: ReidReport, path: PathLike) -> None:
    save_model(report, path)


def load_reid_report(path: PathLike) -> ReidReport:
    return load_model(path, ReidReport)


def save_run_report(report: RunReport, path: PathLike) -> None:
    save_model(report, path)


def load_run_report(path: PathLike) -> RunReport:
    return load_model(path, RunReport)


def save_comparison(summary: ComparisonSummary, path: PathLike) -> None:
    save_model(summary, path)
