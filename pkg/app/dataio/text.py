"""
行式文本与 JSON 的读写工具
"""

import json
import math
from pathlib import Path
from typing import Any, Iterator, List, Tuple, Union

from app.dataio.errors import DataParseError, RangeError

PathLike = Union[str, Path]

ABSENT_MARKER = "absent"


def format_float(value: float) -> str:
    """最短往返十进制表示"""
    return repr(float(value))


def dump_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: PathLike, data: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(data), encoding="utf-8")


def write_lines(path: PathLike, lines: List[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataParseError("文件不存在", path, error_code="FILE_NOT_FOUND")
    except OSError as e:
        raise DataParseError(f"无法读取文件: {e}", path, error_code="FILE_UNREADABLE")


def read_json(path: PathLike) -> Any:
    text = read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise DataParseError(f"JSON 格式错误: {e.msg}", path, e.lineno, error_code="MALFORMED_JSON")


def iter_records(path: PathLike) -> Iterator[Tuple[int, List[str]]]:
    """逐行产出 (行号, 逗号分隔的字段)，跳过空行与 # 注释行"""
    for lineno, raw in enumerate(read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, [token.strip() for token in line.split(",")]


def line_of(text: str, needle: str) -> Union[int, None]:
    """needle 首次出现所在的行号（从 1 开始）"""
    index = text.find(needle)
    if index < 0:
        return None
    return text.count("\n", 0, index) + 1


def parse_int(token: str, path: PathLike, line: int, field: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise DataParseError(f"不是整数: {token!r}", path, line, field, "NON_NUMERIC")


def parse_float(token: str, path: PathLike, line: int, field: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataParseError(f"不是数值: {token!r}", path, line, field, "NON_NUMERIC")
    if not math.isfinite(value):
        raise RangeError(f"不是有限数值: {token!r}", path, line, field, "NON_FINITE")
    return value


def parse_unit_interval(token: str, path: PathLike, line: int, field: str) -> float:
    value = parse_float(token, path, line, field)
    if not 0.0 <= value <= 1.0:
        raise RangeError(f"取值 {token} 超出 [0,1]", path, line, field)
    return value
