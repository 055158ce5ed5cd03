"""Tool defaults, the key = value config format and log setup."""
from __future__ import annotations

import dataclasses
import logging
import sys
from dataclasses import dataclass

from .errors import ParseError, UnknownKey

LOG_FORMAT = "%(levelname)s|%(name)s|%(message)s"


@dataclass(frozen=True)
class ToolConfig:
    quad_bump: int = 0
    tol_residual: float = 1e-10
    tol_identity: float = 1e-12
    seed: int = 12345
    threads: int = 1

    def __post_init__(self):
        if self.tol_residual <= 0 or self.tol_identity <= 0:
            raise ValueError("tolerances must be positive")
        if self.quad_bump < 0:
            raise ValueError("quad_bump must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


_FIELDS = {f.name: f.type for f in dataclasses.fields(ToolConfig)}
_CASTS = {"int": int, "float": float}


def parse_config(text: str) -> ToolConfig:
    """``key = value`` lines; ``#`` starts a comment; missing keys take defaults."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise UnknownKey(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _CASTS[_FIELDS[key]](value)
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {value!r}", lineno) from exc
        try:
            ToolConfig(**{key: values[key]})
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    return ToolConfig(**values)


def load_config(path) -> ToolConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(cfg: ToolConfig) -> str:
    return "".join(f"{k} = {getattr(cfg, k)!r}\n" for k in _FIELDS)


def emit_config(cfg: ToolConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_config(cfg))


def configure_logging(level=logging.INFO) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)
