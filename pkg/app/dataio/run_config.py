"""
运行配置读取与生效配置快照
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.dataio.errors import DataParseError
from app.dataio.text import PathLike, read_json, write_json
from app.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

PATH_FIELDS = ("manifest", "embeddings", "detections", "base_track", "annotations", "secondary_track", "replay_track")
REQUIRED_PATH_FIELDS = ("manifest", "embeddings", "detections")


def _format_validation_error(e: ValidationError) -> str:
    parts = []
    for error in e.errors():
        loc = ".".join(str(part) for part in error["loc"])
        parts.append(f"{loc}: {error['msg']}")
    return "; ".join(parts)


def _set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"配置项 {dotted} 无法覆盖：{key} 不是对象")
    node[keys[-1]] = value


def _resolve(base: Path, value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else (base / path).resolve())


def resolve_paths(config: RunConfig, base_dir: Path) -> RunConfig:
    """相对路径按配置文件所在目录解析"""
    sequences = []
    for inputs in config.sequences:
        updates = {name: _resolve(base_dir, getattr(inputs, name)) for name in PATH_FIELDS}
        updates["distractors"] = {key: _resolve(base_dir, value) for key, value in inputs.distractors.items()}
        sequences.append(inputs.model_copy(update=updates))
    return config.model_copy(update={"sequences": sequences})


def check_inputs_exist(config: RunConfig) -> None:
    """在任何处理开始之前检查所有输入文件都存在"""
    for index, inputs in enumerate(config.sequences):
        for name in PATH_FIELDS:
            value = getattr(inputs, name)
            if value is None:
                if name in REQUIRED_PATH_FIELDS:
                    raise ConfigError(f"sequences[{index}].{name} 未配置")
                continue
            if not Path(value).is_file():
                raise ConfigError(f"sequences[{index}].{name} 指向的文件不存在: {value}")
        for key, value in inputs.distractors.items():
            if not Path(value).is_file():
                raise ConfigError(f"sequences[{index}].distractors.{key} 指向的文件不存在: {value}")


def build_run_config(
    data: Mapping[str, Any], base_dir: PathLike = ".", overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """
    校验配置数据并应用覆盖项

    Args:
        data: 配置文件内容
        base_dir: 相对路径的基准目录
        overrides: 点分键 -> 值，例如 {"reid.similarity_threshold": 0.7}

    Raises:
        ConfigError: 配置校验失败或输入文件缺失
    """
    merged = dict(data)
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(merged, dotted, value)
    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"运行配置无效: {_format_validation_error(e)}")

    config = resolve_paths(config, Path(base_dir).resolve())
    if overrides and overrides.get("output_dir") is not None:
        config = config.model_copy(update={"output_dir": str(Path(overrides["output_dir"]).resolve())})
    else:
        config = config.model_copy(update={"output_dir": _resolve(Path(base_dir).resolve(), config.output_dir)})
    check_inputs_exist(config)
    return config


def load_run_config(path: PathLike, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """读取运行配置文件；解析错误统一转为 ConfigError"""
    try:
        data = read_json(path)
    except DataParseError as e:
        raise ConfigError(e.message)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: 运行配置必须是 JSON 对象")
    config = build_run_config(data, Path(path).parent, overrides)
    logger.info(f"读取运行配置 {path}: {len(config.sequences)} 条序列")
    return config


def effective_config_dict(config: RunConfig) -> Dict[str, Any]:
    """生效配置：所有默认值都显式写出"""
    return config.model_dump(mode="json")


def save_effective_config(config: RunConfig, path: PathLike) -> None:
    write_json(path, effective_config_dict(config))

