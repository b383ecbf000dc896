"""
Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Every key must be known; values
are type-checked and range-checked, and every error names the key and line.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .prsh import MUTATIONS


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool]
    rule: str


def _pos(x) -> bool:
    return x > 0


def _nonneg(x) -> bool:
    return x >= 0


def _ints_at_least(n):
    return lambda xs: len(xs) > 0 and all(x >= n for x in xs)


DEFAULT_COUNT = 20

SCHEMA: dict[str, Key] = {
    "duration": Key(int, 1000, _pos, "> 0"),
    "ticks_per_second": Key(int, 1, lambda x: x >= 1, ">= 1"),
    "lambda": Key(float, 2.0, _pos, "> 0"),
    "seed": Key(int, 0, _nonneg, ">= 0"),
    "runs": Key(int, 100, lambda x: x >= 2, ">= 2"),
    "pop.GVWY": Key(int, DEFAULT_COUNT, _nonneg, ">= 0"),
    "pop.ZIC": Key(int, DEFAULT_COUNT, _nonneg, ">= 0"),
    "pop.ZIP": Key(int, DEFAULT_COUNT, _nonneg, ">= 0"),
    "pop.SNPR": Key(int, DEFAULT_COUNT, _nonneg, ">= 0"),
    "pop.SHVR": Key(int, DEFAULT_COUNT, _nonneg, ">= 0"),
    "pop.PRSH": Key(int, DEFAULT_COUNT, _nonneg, ">= 0"),
    "pop.PRB": Key(int, DEFAULT_COUNT, _nonneg, ">= 0"),
    "snpr.window": Key(float, 0.05, lambda x: 0 < x < 1, "in (0, 1)"),
    "prsh.k": Key(int, 6, lambda x: x >= 2, ">= 2"),
    "prsh.v": Key(int, 128, _pos, "> 0"),
    "prsh.m": Key(str, "m3", lambda x: x in MUTATIONS, "one of m1, m2, m3"),
    "prb.k": Key(int, 2, lambda x: x >= 2, ">= 2"),
    "prb.v": Key(int, 32, _pos, "> 0"),
    "gp.noise": Key(float, 0.1, _nonneg, ">= 0"),
    "gp.capacity": Key(int, 200, _pos, "> 0"),
    "sweep.runs": Key(int, 100, lambda x: x >= 2, ">= 2"),
    "sweep.prsh.k": Key(_int_list, (2, 4, 6, 8, 10, 12, 14, 16), _ints_at_least(2), "integers >= 2"),
    "sweep.prsh.v": Key(_int_list, (32, 64, 128, 256), _ints_at_least(1), "integers >= 1"),
    "sweep.prsh.m": Key(_str_list, ("m1", "m2", "m3"),
                        lambda xs: len(xs) > 0 and all(x in MUTATIONS for x in xs), "subset of m1, m2, m3"),
    "sweep.prb.k": Key(_int_list, (2, 3, 4), _ints_at_least(2), "integers >= 2"),
    "sweep.prb.v": Key(_int_list, (32, 64, 128, 256), _ints_at_least(1), "integers >= 1"),
    "kde.points": Key(int, 200, lambda x: x >= 2, ">= 2"),
}


def defaults() -> dict[str, Any]:
    return {name: key.default for name, key in SCHEMA.items()}


def _set(cfg: dict, name: str, raw: str, where: str) -> None:
    key = SCHEMA.get(name)
    if key is None:
        raise ConfigError(f"{where}: unknown key {name!r}")
    try:
        value = key.parse(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: {name} has the wrong type (got {raw.strip()!r})") from None
    if not key.check(value):
        raise ConfigError(f"{where}: {name} out of range, must be {key.rule} (got {raw.strip()!r})")
    cfg[name] = value


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    cfg = defaults()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        name, raw = stripped.split("=", 1)
        _set(cfg, name.strip(), raw, f"{source}:{lineno}")
    return cfg


def load_config(path) -> dict[str, Any]:
    if path is None:
        return defaults()
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def override(cfg: dict[str, Any], name: str, value: Any) -> dict[str, Any]:
    """Apply a command-line override through the same validation as the file."""
    out = dict(cfg)
    _set(out, name, str(value), f"--{name}")
    return out


def dump(cfg: dict[str, Any]) -> dict[str, Any]:
    """JSON-friendly copy (tuples become lists)."""
    return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())}
