"""Flat key=value run configuration.

Files hold one `key = value` pair per line with `#` comments. Unknown
keys are rejected with their line number; command-line overrides win
over file values; everything else falls back to the documented defaults
(the ExperimentConfig field defaults).
"""

from __future__ import annotations

from dataclasses import fields, replace

from .engine import ExperimentConfig
from .errors import ConfigError

# fields with non-scalar parsing rules
_INT_LIST_KEYS = {"hidden_dims"}
_AUTO_INT_KEYS = {"n_vote_clusters", "krum_m"}
_BOOL_TRUE = {"true", "yes", "on", "1"}
_BOOL_FALSE = {"false", "no", "off", "0"}

_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str, line: int | None):
    raw = raw.strip()
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}", line)
    if key in _INT_LIST_KEYS:
        if raw == "":
            return ()
        try:
            return tuple(int(part) for part in raw.split(","))
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated integers, got {raw!r}", line) from None
    if key in _AUTO_INT_KEYS:
        if raw.lower() == "auto":
            return None
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected integer or 'auto', got {raw!r}", line) from None
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}", line) from None


def _read_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"expected 'key = value', got {text!r}", lineno)
            key, raw = text.split("=", 1)
            key = key.strip()
            values[key] = _coerce(key, raw, lineno)
    return values


def parse_config(path: str | None = None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Resolve defaults, file values and overrides into a validated config."""
    values = _read_file(path) if path else {}
    for key, raw in (overrides or {}).items():
        values[key] = _coerce(key, str(raw), None)
    cfg = replace(ExperimentConfig(), **values)
    cfg.validate()
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Config as flat, file-writable values (inverse of parse_config)."""
    out = {}
    for name in _FIELDS:
        v = getattr(cfg, name)
        if name in _INT_LIST_KEYS:
            v = ",".join(str(x) for x in v)
        elif name in _AUTO_INT_KEYS and v is None:
            v = "auto"
        out[name] = v
    return out
