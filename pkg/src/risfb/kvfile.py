"""Human-readable ``key = value`` files (config, sidecars, run manifests)."""
from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ConfigError

_SECTION = "risfb"


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_kv(text, source=str(path))


def parse_kv(text: str, source="<string>") -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed key-value file {source}: {exc}") from exc
    return dict(parser[_SECTION])


def write_kv(path, values: dict) -> None:
    lines = [f"{k} = {v}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
