"""Minimal key=value config parsing used for manifests and constant tables.

Format: one `key = value` pair per line, `#` starts a comment, blank lines
ignored.  Keys are case-sensitive.  Duplicate keys are an error: silent
last-wins behaviour has bitten us before in sweep manifests.
"""

from __future__ import annotations

import os

from .errors import ConfigError


def parse_kv_text(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse key=value text into an ordered dict of raw strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_kv_file(path: str | os.PathLike) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read(), source=str(path))


def get_str(cfg: dict[str, str], key: str, default: str | None = None) -> str:
    if key in cfg:
        return cfg[key]
    if default is None:
        raise ConfigError(f"missing required key {key!r}")
    return default


def get_float(cfg: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: not a number: {cfg[key]!r}") from exc


def get_int(cfg: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(cfg[key], 0)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: not an integer: {cfg[key]!r}") from exc


def get_float_list(cfg: dict[str, str], key: str, default: str | None = None) -> list[float]:
    """Comma- or whitespace-separated list of floats."""
    if key in cfg:
        raw = cfg[key]
    elif default is not None:
        raw = default
    else:
        raise ConfigError(f"missing required key {key!r}")
    parts = [p for p in raw.replace(",", " ").split() if p]
    if not parts:
        raise ConfigError(f"key {key!r}: empty list")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: not a list of numbers: {raw!r}") from exc
