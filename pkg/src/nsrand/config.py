"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields

from .errors import ConfigError
from .profiles import KINDS as PROFILE_KINDS

_PI_RE = re.compile(r"^\s*([-+0-9.eE]*)\s*\*?\s*pi\s*$")


def _float(raw: str) -> float:
    """A float, also accepting ``pi``, ``2pi`` and ``2*pi``."""
    m = _PI_RE.match(raw)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    return float(raw)


def _int(raw: str) -> int:
    if not re.fullmatch(r"[+-]?\d+", raw):
        raise ValueError(f"not an integer: {raw!r}")
    return int(raw)


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(_float(x) for x in raw.split(",") if x.strip())


def _auto_or(conv):
    def parse(raw: str):
        return "auto" if raw.lower() == "auto" else conv(raw)
    return parse


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class ExperimentConfig:
    profile_path: str = ""
    profile: str = "power-law"
    profile_seed: int = 0
    d: int = 2
    s: float = 0.0
    epsilon: float = 0.05
    a: int | None = None
    n_max: int | None = None
    q: float = 4.0
    grid_M: int = 256
    grid_L: float = 2 * math.pi
    n_samples: int = 10_000
    seed: int = 0
    rho_list: tuple[float, ...] = (2.0, 3.0, 4.0, 6.0, 8.0)
    lambda_grid: str | tuple[float, ...] = "auto"
    hermitian: bool = False
    refine_samples: int = 200

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[_KEY_OF[f.name]] = list(v) if isinstance(v, tuple) else v
        return out


# file key -> (attribute, parser)
_SCHEMA = {
    "profile_path": ("profile_path", str),
    "profile": ("profile", str),
    "profile_seed": ("profile_seed", _int),
    "d": ("d", _int),
    "s": ("s", _float),
    "epsilon": ("epsilon", _float),
    "a": ("a", _auto_or(_int)),
    "n_max": ("n_max", _auto_or(_int)),
    "q": ("q", _float),
    "grid.M": ("grid_M", _int),
    "grid.L": ("grid_L", _float),
    "n_samples": ("n_samples", _int),
    "seed": ("seed", _int),
    "rho_list": ("rho_list", _floats),
    "lambda_grid": ("lambda_grid", _auto_or(_floats)),
    "hermitian": ("hermitian", _bool),
    "refine_samples": ("refine_samples", _int),
}
_KEY_OF = {attr: key for key, (attr, _) in _SCHEMA.items()}


def _validate(cfg: dict, line_of: dict) -> None:
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", line_of.get(key))

    if not 0.0 < cfg["epsilon"] < 0.5:
        fail("epsilon", f"must lie in (0, 1/2), got {cfg['epsilon']}")
    if cfg["d"] not in (2, 3):
        fail("d", f"must be 2 or 3, got {cfg['d']}")
    if not (cfg["q"] >= 1.0):
        fail("q", f"must be >= 1, got {cfg['q']}")
    if not _is_pow2(cfg["grid_M"]) or cfg["grid_M"] < 8:
        fail("grid.M", f"must be a power of two >= 8, got {cfg['grid_M']}")
    if not cfg["grid_L"] > 0 or not math.isfinite(cfg["grid_L"]):
        fail("grid.L", f"must be positive, got {cfg['grid_L']}")
    if cfg["n_samples"] < 1:
        fail("n_samples", "must be positive")
    if cfg["refine_samples"] < 1:
        fail("refine_samples", "must be positive")
    if not 0 <= cfg["seed"] < 2 ** 64:
        fail("seed", "must be an unsigned 64-bit integer")
    if not 0 <= cfg["profile_seed"] < 2 ** 64:
        fail("profile_seed", "must be an unsigned 64-bit integer")
    if cfg["a"] is not None and cfg["a"] < 0:
        fail("a", "must be a nonnegative integer or auto")
    if cfg["n_max"] is not None and not _is_pow2(cfg["n_max"]):
        fail("n_max", "must be a power of two or auto")
    if cfg["profile"] not in PROFILE_KINDS:
        fail("profile", f"must be one of {', '.join(PROFILE_KINDS)}")
    rho = cfg["rho_list"]
    if not rho or any(not 2.0 <= r <= 16.0 for r in rho) or any(b <= a for a, b in zip(rho, rho[1:])):
        fail("rho_list", "must be increasing values in [2, 16]")
    lam = cfg["lambda_grid"]
    if lam != "auto" and (len(lam) < 2 or any(b <= a for a, b in zip(lam, lam[1:]))):
        fail("lambda_grid", "must be auto or at least two increasing values")
    for key in ("s", "q", "grid_L", "epsilon"):
        if not math.isfinite(cfg[key]):
            fail(_KEY_OF[key], "must be finite")


def parse_config(text: str) -> ExperimentConfig:
    """Parse a config file; ``#`` starts a comment, blank lines are ignored."""
    values = {f.name: f.default for f in fields(ExperimentConfig)}
    line_of = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            raise ConfigError(f"expected key = value, got {body!r}", lineno)
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in line_of:
            raise ConfigError(f"duplicate key {key!r} (first on line {line_of[key]})", lineno)
        attr, conv = _SCHEMA[key]
        try:
            val = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        if val == "auto" and attr in ("a", "n_max"):
            val = None
        values[attr] = val
        line_of[key] = lineno
    _validate(values, line_of)
    return ExperimentConfig(**values)


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    lines = []
    for key, (attr, _) in _SCHEMA.items():
        lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
