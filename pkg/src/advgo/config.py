"""Flat key = value configuration files for training runs.

Lines look like ``visits = 64``; ``#`` starts a comment. Values are coerced
by the target dataclass field types; the ``stages`` key holds
semicolon-separated victim agent descriptors.
"""

from __future__ import annotations

import dataclasses

from .training import AttackConfig, SelfPlayConfig


class ConfigError(ValueError):
    pass


def parse_flat_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _coerce(value: str, typ):
    if typ in ("int", int):
        return int(value)
    if typ in ("float", float):
        return float(value)
    if typ in ("bool", bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean {value!r}")
    return value


def _fill_dataclass(cls, mapping: dict[str, str]):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        f = fields[key]
        if key == "stages":
            kwargs[key] = [s.strip() for s in value.split(";") if s.strip()]
        elif f.type in ("Optional[int]", "int | None"):
            kwargs[key] = None if value.lower() == "none" else int(value)
        elif f.type in ("int", "float", "bool", "str"):
            kwargs[key] = _coerce(value, f.type)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_attack_config(path: str) -> AttackConfig:
    with open(path) as fh:
        return _fill_dataclass(AttackConfig, parse_flat_config(fh.read()))


def load_selfplay_config(path: str) -> SelfPlayConfig:
    with open(path) as fh:
        return _fill_dataclass(SelfPlayConfig, parse_flat_config(fh.read()))


def dump_config(cfg) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, list):
            value = ";".join(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
