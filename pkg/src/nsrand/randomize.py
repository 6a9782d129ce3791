"""Randomized data ``f^omega = sum_j g_j(omega) box_j f``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decomp import CubeFamily, DecompParams, LatticePartition, lattice_partition
from .errors import DomainError, PreconditionError, TruncationError
from .rng import gaussians_at
from .spectral import VectorField, max_divergence

DIV_TOL = 1e-10
TRUNCATION_TOL = 1e-8


def min_admissible_a(s: float, eps: float, d: int) -> int:
    """Smallest integer ``a >= 0`` with ``a >= 2(d eps - 1 - s) / (d (1 - 2 eps))``."""
    if not 0.0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    bound = 2.0 * (d * eps - 1.0 - s) / (d * (1.0 - 2.0 * eps))
    # guard against 1.0000000000000002-style round-up of exact integers
    return max(0, math.ceil(bound - 1e-12))


def is_admissible(params: DecompParams) -> bool:
    return params.a >= min_admissible_a(params.s, params.eps, params.d)


@dataclass(frozen=True, eq=False)
class RandomDraw:
    """Coefficients ``g_j`` of one sample.

    If ``g`` is None the coefficients are generated on demand from
    ``(seed, sample_index)``; otherwise ``g[j]`` is used verbatim (test hooks
    such as the all-ones draw).
    """

    seed: int
    sample_index: int
    g: np.ndarray | None = None

    @classmethod
    def constant(cls, count: int, value: complex = 1.0) -> "RandomDraw":
        return cls(-1, 0, np.full(count, value, dtype=np.complex128))

    def at(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if self.g is None:
            return gaussians_at(self.seed, self.sample_index, ids)
        if ids.size and ids.max() >= len(self.g):
            raise DomainError(f"draw holds {len(self.g)} coefficients, cube {ids.max()} requested")
        return self.g[ids]


def sample_gaussians(seed: int, sample_index: int, count: int) -> RandomDraw:
    """Materialise ``g_0 .. g_{count-1}`` for one sample."""
    g = gaussians_at(seed, sample_index, np.arange(count))
    return RandomDraw(seed, sample_index, g)


def paired_coefficients(draw: RandomDraw, ids: np.ndarray, refl: np.ndarray) -> np.ndarray:
    """Coefficients with ``g_{j'} = conj(g_j)`` for mirrored cubes ``j' = -j``.

    The representative of a pair is the smaller index.  A self-mirrored cube
    gets the real number ``Re g + Im g``, which is N(0, 1) and equals 1 for
    the all-ones test draw.
    """
    canon = np.minimum(ids, refl)
    g = draw.at(canon)
    out = np.where(ids == canon, g, np.conj(g))
    self_pair = ids == refl
    out[self_pair] = g[self_pair].real + g[self_pair].imag
    return out


def coefficients(draw: RandomDraw, part: LatticePartition, hermitian: bool) -> np.ndarray:
    if hermitian:
        return paired_coefficients(draw, part.cube_ids, part.reflect_ids)
    return draw.at(part.cube_ids)


def check_randomizable(f: VectorField, part: LatticePartition) -> None:
    if f.n == f.grid.d and max_divergence(f) > DIV_TOL:
        raise PreconditionError("randomization needs a divergence-free datum")
    res = part.residual(f.spectrum())
    if res > TRUNCATION_TOL:
        raise TruncationError(
            f"datum has relative L2 mass {res:.3e} outside the decomposition (limit {TRUNCATION_TOL:g})")


def randomize(f: VectorField, fam: CubeFamily, draw: RandomDraw, hermitian: bool = True, *,
              allow_unresolved: bool = False, check: bool = True) -> VectorField:
    """Spectrum ``sum_j g_j psi_j f_hat``; one ``g_j`` is shared by all components.

    With ``hermitian`` the coefficients of mirrored cubes are conjugate so a
    real datum stays real.  Without it the output is complex-valued, as in
    the unpaired randomization.
    """
    part = lattice_partition(fam, f.grid)
    if not allow_unresolved:
        part.require_resolved()
    if check:
        check_randomizable(f, part)
    m = part.multiplier(coefficients(draw, part, hermitian))
    out = f.spectrum() * m
    meta = dict(f.meta, seed=draw.seed, sample_index=draw.sample_index, hermitian=hermitian)
    return VectorField(f.grid, spectral=out, solenoidal=f.solenoidal,
                       real=bool(hermitian and f.real), meta=meta)
