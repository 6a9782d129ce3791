"""Monte Carlo checks of the randomized-data estimates.

Every sample is a pure function of ``(seed, sample_index)``, so the pool
only decides who computes which index.  Values are gathered back in index
order and every reduction goes through sorted data and ``math.fsum``; the
statistics are therefore bit-identical for any worker count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .decomp import CubeFamily, DecompParams, lattice_partition
from .errors import (DegenerateInputError, DomainError, GridError, HypothesisWarning,
                     StatisticalPowerError)
from .norms import NormSpec
from .parallel import pmap
from .randomize import RandomDraw, check_randomizable, coefficients, min_admissible_a
from .spectral import SpectralGrid, VectorField

BOOTSTRAP_RESAMPLES = 200
BOOTSTRAP_SEED_TAG = 0xB007


def target_norm(d: int, eps: float, q: float) -> NormSpec:
    """The critical Besov norm with ``p = 1/eps``."""
    return NormSpec("BesovBdot", s=d * eps - 1.0, p=1.0 / eps, q=q)


# -- orthogonality -------------------------------------------------------------

@dataclass(frozen=True)
class OrthogonalityReport:
    ratio: float
    K: int
    lower: float
    upper: float
    within_bounds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def verify_orthogonality(f: VectorField, fam: CubeFamily) -> OrthogonalityReport:
    """``r = (sum_j ||box_j f||^2)^{1/2} / ||f||`` against ``[K^{-1/2}, 1]``."""
    part = lattice_partition(fam, f.grid)
    check_randomizable(f, part)
    e = np.sum(np.abs(f.spectrum()) ** 2, axis=0)
    total = math.fsum(np.sort(e.ravel()))
    if total == 0:
        raise DegenerateInputError("orthogonality ratio of the zero field is undefined")
    pieces = math.fsum(np.sort((e * part.square_sum).ravel()))
    r = math.sqrt(pieces / total)
    K = part.overlap_bound
    lower = K ** -0.5
    return OrthogonalityReport(r, K, lower, 1.0, lower <= r <= 1.0 + 1e-10)


# -- sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class SamplePlan:
    """Everything a worker needs to evaluate a range of samples."""

    grid: SpectralGrid
    spectrum: np.ndarray
    params: DecompParams
    seed: int
    norm: NormSpec
    hermitian: bool
    constant_draw: complex | None = None

    def value(self, i: int) -> float:
        fam = CubeFamily(self.params)
        part = lattice_partition(fam, self.grid)
        if self.constant_draw is None:
            draw = RandomDraw(self.seed, i)
        else:
            g = np.full(int(part.cube_ids.max()) + 1, self.constant_draw, dtype=complex)
            draw = RandomDraw(self.seed, i, g)
        m = part.multiplier(coefficients(draw, part, self.hermitian))
        u = VectorField(self.grid, spectral=self.spectrum * m, real=self.hermitian)
        return float(self.norm.evaluate(u)["value"])

    def values(self, start: int, stop: int) -> np.ndarray:
        return np.array([self.value(i) for i in range(start, stop)])


def _run_chunk(args):
    plan, start, stop = args
    return plan.values(start, stop)


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    per = max(1, math.ceil(n / max(1, 4 * workers)))
    return [(a, min(n, a + per)) for a in range(0, n, per)]


def sample_norms(f: VectorField, fam: CubeFamily, seed: int, n_samples: int,
                 norm: NormSpec | None = None, hermitian: bool = False, workers: int = 1,
                 constant_draw: complex | None = None, check: bool = True) -> np.ndarray:
    """``norm(f^omega_i)`` for ``i = 0 .. n_samples - 1``, in index order."""
    norm = norm or target_norm(fam.params.d, fam.params.eps, 4.0)
    part = lattice_partition(fam, f.grid)
    part.require_resolved()
    if check:
        check_randomizable(f, part)
    plan = SamplePlan(f.grid, f.spectrum(), fam.params, seed, norm, hermitian, constant_draw)
    if workers <= 1 or n_samples < 2:
        return plan.values(0, n_samples)
    tasks = [(plan, a, b) for a, b in _chunks(n_samples, workers)]
    return np.concatenate(pmap(_run_chunk, tasks, workers))


# -- moments ------------------------------------------------------------------

def _mean(x: np.ndarray) -> float:
    return math.fsum(np.sort(x)) / len(x)


def _moment(x: np.ndarray, rho: float) -> float:
    return _mean(x ** rho) ** (1.0 / rho)


def _bootstrap_halfwidths(x: np.ndarray, rho_list, seed: int) -> list[float]:
    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, BOOTSTRAP_SEED_TAG]))
    idx = rng.integers(0, len(x), size=(BOOTSTRAP_RESAMPLES, len(x)))
    out = []
    for rho in rho_list:
        xr = x ** rho
        reps = np.mean(xr[idx], axis=1) ** (1.0 / rho)
        lo, hi = np.quantile(reps, [0.025, 0.975])
        out.append(float(hi - lo) / 2.0)
    return out


def _linear_fit(x: np.ndarray, y: np.ndarray, w: np.ndarray | None = None) -> tuple[float, float, float]:
    """Weighted least squares ``y = b x + c``; returns ``(b, c, r_squared)``."""
    w = np.ones_like(x) if w is None else w
    sw = math.fsum(w)
    xm = math.fsum(w * x) / sw
    ym = math.fsum(w * y) / sw
    sxx = math.fsum(w * (x - xm) ** 2)
    sxy = math.fsum(w * (x - xm) * (y - ym))
    syy = math.fsum(w * (y - ym) ** 2)
    if sxx == 0:
        raise DegenerateInputError("fit needs at least two distinct abscissae")
    b = sxy / sxx
    c = ym - b * xm
    r2 = 1.0 if syy == 0 else 1.0 - math.fsum(w * (y - b * x - c) ** 2) / syy
    return b, c, r2


@dataclass(frozen=True)
class MomentReport:
    rho_list: tuple[float, ...]
    moments: tuple[float, ...]
    half_widths: tuple[float, ...]
    fit_exponent: float
    fit_constant: float
    sample_count: int
    lyapunov_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def moment_report(values: np.ndarray, rho_list=(2, 3, 4, 6, 8), seed: int = 0) -> MomentReport:
    """Moments ``(E X^rho)^{1/rho}``, bootstrap half-widths and the log-log slope in ``rho``."""
    rho_list = tuple(float(r) for r in rho_list)
    if not rho_list or any(not 2.0 <= r <= 16.0 for r in rho_list) or list(rho_list) != sorted(set(rho_list)):
        raise DomainError(f"rho_list must be increasing values in [2, 16], got {rho_list}")
    n = len(values)
    need = 10 * max(rho_list) ** 2
    if n < need:
        raise StatisticalPowerError(f"{n} samples are too few for rho={max(rho_list):g}; need >= {need:g}")
    x = np.asarray(values, dtype=float)
    moments = [_moment(x, r) for r in rho_list]
    hw = _bootstrap_halfwidths(x, rho_list, seed)
    if len(rho_list) > 1 and min(moments) > 0:
        b, c, _ = _linear_fit(np.log(rho_list), np.log(moments))
    else:
        b, c = 0.0, math.log(moments[0]) if moments[0] > 0 else -math.inf
    lyap = all(m2 >= m1 - (h1 + h2) for m1, m2, h1, h2 in zip(moments, moments[1:], hw, hw[1:]))
    return MomentReport(rho_list, tuple(moments), tuple(hw), b, math.exp(c), n, lyap)


def estimate_moments(f: VectorField, fam: CubeFamily, seed: int, rho_list=(2, 3, 4, 6, 8),
                     n_samples: int = 10_000, norm: NormSpec | None = None, hermitian: bool = False,
                     workers: int = 1, constant_draw: complex | None = None) -> MomentReport:
    need = 10 * max(rho_list) ** 2
    if n_samples < need:
        raise StatisticalPowerError(f"{n_samples} samples are too few for rho={max(rho_list):g}; need >= {need:g}")
    vals = sample_norms(f, fam, seed, n_samples, norm, hermitian, workers, constant_draw)
    return moment_report(vals, rho_list, seed)


# -- tails --------------------------------------------------------------------

MIN_TAIL_SAMPLES = 10_000


@dataclass(frozen=True)
class TailReport:
    lambda_grid: tuple[float, ...]
    tail_probs: tuple[float, ...]
    K: float
    c: float
    C1: float
    r_squared: float
    linear_slope: float
    linear_r_squared: float
    preferred_model: str
    sample_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def tail_probabilities(values: np.ndarray, lambda_grid) -> np.ndarray:
    x = np.sort(np.asarray(values, dtype=float))
    lam = np.asarray(lambda_grid, dtype=float)
    above = len(x) - np.searchsorted(x, lam, side="right")
    return above / len(x)


def auto_lambda_grid(values: np.ndarray, points: int = 12) -> np.ndarray:
    """Evenly spaced ``lambda`` between the median and the level exceeded by 10 samples."""
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    lo = x[n // 2]
    hi = x[n - 11]
    return np.linspace(lo, hi, points)


def tail_report(values: np.ndarray, lambda_grid=None, min_samples: int = MIN_TAIL_SAMPLES) -> TailReport:
    """Empirical ``P(X > lambda)`` with weighted fits of ``log P`` against ``lambda^2`` and ``lambda``.

    Weights are the inverse binomial variances of ``log P``.  ``K`` is the
    measured second moment, so the ``lambda^2`` fit reads
    ``log P = log C1 - c lambda^2 / K^2``.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n < min_samples:
        raise StatisticalPowerError(f"tail estimation needs >= {min_samples} samples, got {n}")
    lam = auto_lambda_grid(x) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if len(lam) < 2 or np.any(np.diff(lam) <= 0):
        raise DomainError("lambda grid must be increasing with at least two points")
    probs = tail_probabilities(x, lam)
    if np.any(probs == 0):
        raise GridError(f"no samples exceed lambda = {lam[probs == 0][0]:g}; shrink the lambda grid")
    K = _moment(x, 2.0)
    y = np.log(probs)
    interior = probs < 1.0
    w = np.where(interior, n * probs / np.where(interior, 1.0 - probs, 1.0), n)
    b2, c2, r2 = _linear_fit(lam ** 2, y, w)
    b1, _, r1 = _linear_fit(lam, y, w)
    return TailReport(tuple(lam.tolist()), tuple(probs.tolist()), K, -b2 * K ** 2, math.exp(c2), r2,
                      b1, r1, "lambda^2" if r2 >= r1 else "lambda", n)


def estimate_tail(f: VectorField, fam: CubeFamily, seed: int, lambda_grid=None, n_samples: int = 10_000,
                  norm: NormSpec | None = None, hermitian: bool = False, workers: int = 1) -> TailReport:
    if n_samples < MIN_TAIL_SAMPLES:
        raise StatisticalPowerError(f"tail estimation needs >= {MIN_TAIL_SAMPLES} samples, got {n_samples}")
    vals = sample_norms(f, fam, seed, n_samples, norm, hermitian, workers)
    return tail_report(vals, lambda_grid)


# -- experiments --------------------------------------------------------------

def largest_shell(grid: SpectralGrid) -> int:
    """Largest power of two ``N`` with ``2 N <= kmax``."""
    n = 2 ** math.floor(math.log2(grid.kmax / 2.0 * (1 + 1e-12)))
    if n < 1:
        raise DomainError(f"grid cutoff {grid.kmax:g} cannot hold the unit cube family")
    return n


def median(values: np.ndarray) -> float:
    return float(np.median(np.asarray(values, dtype=float)))


def run_experiment(cfg, workers: int = 1, profile: VectorField | None = None) -> dict:
    """Full report bundle for an :class:`nsrand.config.ExperimentConfig`.

    The profile comes from ``profile`` if given, else from ``cfg.profile_path``,
    else it is generated (``cfg.profile`` kind, band-limited to the coverage).
    The headline refinement check recomputes the median of the target norm
    on the grid with ``2M`` samples per axis and the correspondingly larger
    cube family.
    """
    from . import nsrf
    from .profiles import make_profile

    grid = SpectralGrid(cfg.d, cfg.grid_L, cfg.grid_M)
    a = cfg.a if cfg.a is not None else min_admissible_a(cfg.s, cfg.epsilon, cfg.d)
    a_min = min_admissible_a(cfg.s, cfg.epsilon, cfg.d)
    violated = a < a_min
    if violated:
        warnings.warn(f"a={a} is below the admissible minimum {a_min}", HypothesisWarning, stacklevel=2)

    def family_for(g: SpectralGrid) -> CubeFamily:
        n_max = cfg.n_max if cfg.n_max is not None else largest_shell(g)
        return CubeFamily(DecompParams(cfg.d, a, cfg.epsilon, cfg.s, n_max))

    def profile_for(g: SpectralGrid, fam: CubeFamily) -> VectorField:
        if profile is not None or cfg.profile_path:
            base = profile if profile is not None else nsrf.read(cfg.profile_path)
            return embed(base, g)
        kw = {"band": 2.0 * fam.params.n_max} if cfg.profile == "power-law" else {}
        return make_profile(cfg.profile, cfg.s, g, seed=cfg.profile_seed, **kw)

    fam = family_for(grid)
    f = profile_for(grid, fam)
    norm = target_norm(cfg.d, cfg.epsilon, cfg.q)
    vals = sample_norms(f, fam, cfg.seed, cfg.n_samples, norm, cfg.hermitian, workers)
    moments = moment_report(vals, cfg.rho_list, cfg.seed)
    lam = None if cfg.lambda_grid == "auto" else cfg.lambda_grid
    tail = tail_report(vals, lam, min_samples=min(MIN_TAIL_SAMPLES, cfg.n_samples))
    ortho = verify_orthogonality(f, fam)

    fine = SpectralGrid(cfg.d, cfg.grid_L, 2 * cfg.grid_M)
    fam_fine = family_for(fine)
    f_fine = profile_for(fine, fam_fine)
    n_ref = min(cfg.n_samples, cfg.refine_samples)
    med_coarse = median(vals[:n_ref])
    med_fine = median(sample_norms(f_fine, fam_fine, cfg.seed, n_ref, norm, cfg.hermitian, workers))
    change = abs(med_fine - med_coarse) / med_coarse
    return {
        "config": cfg.to_dict(),
        "a": a,
        "min_admissible_a": a_min,
        "hypothesis_violated": violated,
        "norm": str(norm),
        "orthogonality": ortho.to_dict(),
        "moments": moments.to_dict(),
        "tail": tail.to_dict(),
        "headline": {
            "M": cfg.grid_M, "median": med_coarse, "n_max": fam.params.n_max,
            "M_refined": 2 * cfg.grid_M, "median_refined": med_fine, "n_max_refined": fam_fine.params.n_max,
            "samples": n_ref, "relative_change": change,
            "finite": bool(np.isfinite(med_coarse) and np.isfinite(med_fine)),
            "stable": bool(change <= 0.05),
        },
    }


def embed(u: VectorField, grid: SpectralGrid) -> VectorField:
    """Spectral zero-padding (or truncation) of ``u`` onto ``grid`` with the same box."""
    src = u.grid
    if src == grid:
        return u
    if src.d != grid.d or abs(src.L - grid.L) > 1e-12 * grid.L:
        raise DomainError("embedding needs the same dimension and box size")
    m_src = np.round(src.k1d / src.dk).astype(int)
    keep = (m_src >= -grid.M // 2) & (m_src < grid.M // 2)
    dst = m_src[keep] % grid.M
    src_idx = np.nonzero(keep)[0]
    out = np.zeros((u.n,) + grid.shape, dtype=complex)
    out[(slice(None),) + np.ix_(*([dst] * grid.d))] = u.spectrum()[(slice(None),) + np.ix_(*([src_idx] * grid.d))]
    return VectorField(grid, spectral=out, solenoidal=u.solenoidal, real=u.real, meta=dict(u.meta))
