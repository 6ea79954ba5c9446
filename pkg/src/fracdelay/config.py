"""Flat ``key = value`` configuration files with environment-variable overrides.

Keys mirror the dataclass fields they feed (``t_p``, ``tau_o``, ``batch_size``
...). Any key may be overridden by ``FRACDELAY_<KEY>`` in the environment.
"""

from __future__ import annotations

import os
from dataclasses import fields
from pathlib import Path

from .ddpg.agent import HyperParams
from .lti_core import PlantParams

ENV_PREFIX = "FRACDELAY_"


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key.lower()] = value
    return out


def load_config(path=None, environ=None) -> dict[str, str]:
    cfg = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {str(path)!r} not found")
        cfg = parse_config(path.read_text(), str(path))
    environ = os.environ if environ is None else environ
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            cfg[key[len(ENV_PREFIX):].lower()] = value
    return cfg


def _coerce(kind, text: str, key: str):
    try:
        if kind in (int, "int"):
            return int(text)
        if kind in (bool, "bool"):
            low = text.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(text)
            return low in ("1", "true", "yes")
        if kind in ("tuple[int, ...]",):
            return tuple(int(v) for v in text.replace(",", " ").split())
        if kind in ("str",):
            return text
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def _typed(cls, cfg: dict[str, str], defaults: dict | None = None) -> dict:
    out = dict(defaults or {})
    for f in fields(cls):
        if f.name in cfg:
            out[f.name] = _coerce(f.type, cfg[f.name], f.name)
    return out


def plant_params(cfg: dict[str, str], base: PlantParams | None = None) -> PlantParams:
    base = base or PlantParams()
    values = {f.name: getattr(base, f.name) for f in fields(PlantParams)}
    values.update(_typed(PlantParams, cfg))
    try:
        return PlantParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def hyper_params(cfg: dict[str, str], base: HyperParams | None = None) -> HyperParams:
    base = base or HyperParams()
    values = {f.name: getattr(base, f.name) for f in fields(HyperParams)}
    values.update(_typed(HyperParams, cfg))
    try:
        return HyperParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def get_float(cfg: dict[str, str], key: str, default: float) -> float:
    return _coerce(float, cfg[key], key) if key in cfg else default
