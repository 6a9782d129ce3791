"""Discrete Lebesgue, Sobolev and Besov norms on the periodic box."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .decomp import CubeFamily, dyadic_scales, lattice_partition, low_symbol, lp_symbol
from .errors import DegenerateInputError, DomainError, SingularityError
from .spectral import SpectralGrid, VectorField

log = logging.getLogger(__name__)

MEAN_TOL = 1e-14


def _check_p(p: float, name: str = "p") -> float:
    p = float(p)
    if not p >= 1.0:
        raise DomainError(f"{name} must be >= 1, got {p}")
    return p


def _pointwise_modulus(values: np.ndarray) -> np.ndarray:
    """Euclidean length over components, ``values`` shaped ``(n, M, ...)``."""
    if values.shape[0] == 1:
        return np.abs(values[0])
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=0))


def _lp_of_samples(mod: np.ndarray, grid: SpectralGrid, p: float) -> float:
    if math.isinf(p):
        return float(mod.max())
    top = float(mod.max())
    if top == 0.0:
        return 0.0
    # scale by the max so large p cannot overflow
    s = np.sum((mod / top) ** p)
    return top * float(s * grid.dx ** grid.d) ** (1.0 / p)


def _physical(grid: SpectralGrid, spec: np.ndarray) -> np.ndarray:
    return sfft.ifftn(spec, axes=grid.axes) * grid.M ** grid.d


def lp_norm(u: VectorField, p: float) -> float:
    """``((L/M)^d sum_n |u(x_n)|^p)^{1/p}``; ``p = inf`` gives the grid max."""
    p = _check_p(p)
    return _lp_of_samples(_pointwise_modulus(u.values()), u.grid, p)


def spectral_lp_norm(grid: SpectralGrid, spec: np.ndarray, p: float) -> float:
    """:func:`lp_norm` of the field with coefficients ``spec``."""
    return _lp_of_samples(_pointwise_modulus(_physical(grid, spec)), grid, p)


def _zero_mode(grid: SpectralGrid) -> tuple:
    return (slice(None),) + (0,) * grid.d


def has_mean(spec: np.ndarray, grid: SpectralGrid) -> bool:
    mean = np.abs(spec[_zero_mode(grid)]).max()
    return mean > MEAN_TOL * max(np.abs(spec).max(), 1e-300)


def sobolev_weight(grid: SpectralGrid, s: float, homogeneous: bool) -> np.ndarray:
    """``|k|^s`` or ``<k>^s`` on the lattice; the homogeneous zero mode gets 0 (1 if ``s = 0``)."""
    if not homogeneous:
        return (1.0 + grid.k2) ** (s / 2.0)
    k = grid.kabs.copy()
    zero = (0,) * grid.d
    k[zero] = 1.0
    w = k ** s
    w[zero] = 1.0 if s == 0 else 0.0
    return w


def sobolev_norm(u: VectorField, s: float, homogeneous: bool = False) -> float:
    """``(L^d sum_k w(k)^{2s} |u_hat(k)|^2)^{1/2}``."""
    g = u.grid
    uh = u.spectrum()
    if homogeneous and s < 0 and has_mean(uh, g):
        raise SingularityError("homogeneous norm of negative order needs a mean-zero field")
    w = sobolev_weight(g, s, homogeneous)
    return float(np.sqrt(g.L ** g.d * np.sum(w ** 2 * np.abs(uh) ** 2)))


@dataclass(frozen=True)
class BesovResult:
    value: float
    s: float
    p: float
    q: float
    blocks: tuple[tuple[float, float], ...]  # (N, ||P_N u||_{L^p})
    infrared_cutoff: float
    mean_block: bool

    def to_dict(self) -> dict:
        return {"value": self.value, "s": self.s, "p": self.p, "q": self.q,
                "infrared_cutoff": self.infrared_cutoff, "mean_in_lowest_block": self.mean_block,
                "blocks": [{"N": N, "lp_value": v} for N, v in self.blocks]}


def _lq_sum(terms: np.ndarray, q: float) -> float:
    if terms.size == 0:
        return 0.0
    if math.isinf(q):
        return float(terms.max())
    top = terms.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((terms / top) ** q) ** (1.0 / q))


def besov_blocks(u: VectorField, p: float) -> tuple[list[float], list[float], bool]:
    """Dyadic scales and ``||P_N u||_{L^p}``; a nonzero mean joins the lowest block."""
    g = u.grid
    uh = u.spectrum()
    scales = dyadic_scales(g)
    mean = has_mean(uh, g)
    if mean:
        log.warning("field has a nonzero mean; it is counted in the lowest block N=%g", scales[0])
    vals = []
    for i, N in enumerate(scales):
        sym = low_symbol(g, N) if (i == 0 and mean) else lp_symbol(g, N)
        vals.append(spectral_lp_norm(g, uh * sym, p))
    return scales, vals, mean


def besov_norm(u: VectorField, s: float, p: float, q: float) -> BesovResult:
    """``(sum_N (N^s ||P_N u||_{L^p})^q)^{1/q}`` over the dyadic scales the box resolves.

    Frequencies below the box spacing do not exist on the lattice, so the
    sum starts at the first dyadic ``N`` above ``dk / 2`` (the infrared
    cutoff recorded in the result).
    """
    p = _check_p(p)
    q = _check_p(q, "q")
    scales, vals, mean = besov_blocks(u, p)
    terms = np.array([N ** s * v for N, v in zip(scales, vals)])
    return BesovResult(_lq_sum(terms, q), s, p, q, tuple(zip(scales, vals)), scales[0], mean)


def besov_value(u: VectorField, s: float, p: float, q: float) -> float:
    return besov_norm(u, s, p, q).value


def bessel_multiplier(grid: SpectralGrid, order: float) -> np.ndarray:
    """``<k>^order``."""
    return (1.0 + grid.k2) ** (order / 2.0)


def bernstein_ratio(f: VectorField, j: int, fam: CubeFamily, p: float, q: float,
                    a: int | None = None, k: int = 0, N: int | None = None) -> float:
    """``||<D>^k box_j f||_{L^q} / ||<D>^{k - a(d/p - d/q)} box_j f||_{L^p}``.

    ``a`` defaults to the family's narrowing exponent; ``N`` if given must be
    the shell of cube ``j``.
    """
    p = _check_p(p)
    q = _check_p(q, "q")
    if not 2.0 <= p <= q:
        raise DomainError(f"need 2 <= p <= q, got p={p}, q={q}")
    if k < 0:
        raise DomainError("derivative count must be nonnegative")
    if N is not None and fam[j].N != N:
        raise DomainError(f"cube {j} belongs to shell {fam[j].N}, not {N}")
    a = fam.params.a if a is None else a
    g = f.grid
    part = lattice_partition(fam, g)
    part.require_resolved(j)
    piece = f.spectrum() * part.weight(j)
    d = g.d
    shift = a * (d / p - (0.0 if math.isinf(q) else d / q))
    den = spectral_lp_norm(g, piece * bessel_multiplier(g, k - shift), p)
    if den == 0.0:
        raise DegenerateInputError(f"box_{j} f vanishes")
    num = spectral_lp_norm(g, piece * bessel_multiplier(g, k), q)
    return num / den


def critical_block_ratio(f: VectorField, j: int, N: float, fam: CubeFamily, p: float,
                         s: float) -> float:
    """``|| |D|^{d/p - 1} P_N box_j f ||_{L^p} / || P_N box_j f ||_{H^s}``."""
    p = _check_p(p)
    g = f.grid
    part = lattice_partition(fam, g)
    part.require_resolved(j)
    piece = f.spectrum() * part.weight(j) * lp_symbol(g, N)
    w = sobolev_weight(g, g.d / p - 1.0, homogeneous=True)
    den = float(np.sqrt(g.L ** g.d * np.sum((1.0 + g.k2) ** s * np.abs(piece) ** 2)))
    if den == 0.0:
        raise DegenerateInputError(f"P_{N} box_{j} f vanishes")
    return spectral_lp_norm(g, piece * w, p) / den


# -- norm specifications -----------------------------------------------------

KINDS = {
    "lp": "Lp", "l": "Lp",
    "sobolevh": "SobolevH", "h": "SobolevH",
    "sobolevhdot": "SobolevHdot", "hdot": "SobolevHdot",
    "besovbdot": "BesovBdot", "bdot": "BesovBdot",
    "sobolevwk": "SobolevWk", "w": "SobolevWk", "wk": "SobolevWk",
}
_DEFAULTS = {"s": 0.0, "p": 2.0, "q": 2.0, "k": 0}


@dataclass(frozen=True)
class NormSpec:
    kind: str
    s: float = 0.0
    p: float = 2.0
    q: float = 2.0
    k: int = 0

    def __post_init__(self):
        if self.kind not in set(KINDS.values()):
            raise DomainError(f"unknown norm kind {self.kind!r}")
        _check_p(self.p)
        _check_p(self.q, "q")
        if self.k < 0:
            raise DomainError("k must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        """Parse ``"Kind:key=value,..."``, e.g. ``"Bdot:s=-0.8,p=20,q=4"``."""
        head, _, rest = text.strip().partition(":")
        kind = KINDS.get(head.strip().lower())
        if kind is None:
            raise DomainError(f"unknown norm kind {head!r}; expected one of {sorted(set(KINDS.values()))}")
        vals = dict(_DEFAULTS)
        for item in filter(None, (t.strip() for t in rest.split(","))):
            m = re.fullmatch(r"([a-z]+)\s*=\s*(\S+)", item)
            if not m or m.group(1) not in vals:
                raise DomainError(f"bad norm parameter {item!r}")
            key, raw = m.groups()
            try:
                vals[key] = int(raw) if key == "k" else float(raw)
            except ValueError as exc:
                raise DomainError(f"bad value for {key}: {raw!r}") from exc
        return cls(kind, **vals)

    def __str__(self) -> str:
        return f"{self.kind}:s={self.s!r},p={self.p!r},q={self.q!r},k={self.k}"

    def evaluate(self, u: VectorField) -> dict:
        if self.kind == "Lp":
            return {"value": lp_norm(u, self.p)}
        if self.kind == "SobolevH":
            return {"value": sobolev_norm(u, self.s, homogeneous=False)}
        if self.kind == "SobolevHdot":
            return {"value": sobolev_norm(u, self.s, homogeneous=True)}
        if self.kind == "SobolevWk":
            spec = u.spectrum() * bessel_multiplier(u.grid, self.k)
            return {"value": spectral_lp_norm(u.grid, spec, self.p)}
        res = besov_norm(u, self.s, self.p, self.q)
        return res.to_dict()
