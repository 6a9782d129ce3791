"""Cube decomposition of frequency space and dyadic Littlewood-Paley blocks.

The family consists of the unit-scale cube ``O_1 = [-1, 1]^d`` followed by the
shells ``Q_N = O_{2N} \\ O_N`` for ``N = 1, 2, 4, ..., n_max``, each tiled by
cells of side ``N**-a`` aligned to ``N**-a * Z^d``.  Cubes are numbered
shell by shell, lexicographically by center inside a shell.

Families are implicit: a shell is described by its cell count per axis and
the cube index of a cell is computed arithmetically, so even families with
billions of cubes can be queried on a lattice.

Each cube carries a tensor-product bump equal to one on the cube and vanishing
outside the concentric cube of twice the side; the normalised weights
``psi_j = bump_j / sum_i bump_i`` form a partition of unity.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import CoverageError, DomainError, ResolutionError
from .spectral import SpectralGrid, VectorField

MIN_POINTS_PER_SIDE = 4


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``.

    ``exp(-1/t) / (exp(-1/t) + exp(-1/(1-t)))`` written as a logistic to
    avoid overflow.  Satisfies ``smooth_step(t) + smooth_step(1-t) == 1``.
    """
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    if np.any(mid):
        tm = t[mid]
        out[mid] = expit(1.0 / (1.0 - tm) - 1.0 / tm)
    return out


def cube_profile(x):
    """1-D bump in units of the side: 1 for ``|x| <= 1/2``, 0 for ``|x| >= 1``."""
    x = np.abs(np.asarray(x, dtype=float))
    return smooth_step(2.0 * (1.0 - x))


def _is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class DecompParams:
    """Parameters of the narrowed decomposition.

    ``a`` is the narrowing exponent, ``eps`` the integrability parameter
    (target space uses ``p = 1/eps``), ``s`` the regularity of the data and
    ``n_max`` the largest shell.  Admissibility of ``a`` is *not* enforced
    here because comparison runs deliberately violate it; see
    :func:`nsrand.randomize.min_admissible_a`.
    """

    d: int
    a: int = 0
    eps: float = 0.05
    s: float = 0.0
    n_max: int = 8

    def __post_init__(self):
        if self.d not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.d}")
        if not isinstance(self.a, (int, np.integer)) or self.a < 0:
            raise DomainError(f"narrowing exponent must be a nonnegative integer, got {self.a}")
        if not 0.0 < self.eps < 0.5:
            raise DomainError(f"eps must lie in (0, 1/2), got {self.eps}")
        if not _is_power_of_two(self.n_max):
            raise DomainError(f"n_max must be a power of two, got {self.n_max}")


@dataclass(frozen=True)
class Cube:
    j: int
    N: int
    center: tuple[float, ...]
    side: float


@dataclass(frozen=True)
class Shell:
    N: int
    side: float
    n: int  # cells per axis across [-2N, 2N]
    offset: int  # global index of the first cube
    count: int

    @property
    def lo(self) -> int:
        return self.n // 4

    @property
    def hi(self) -> int:
        return 3 * self.n // 4

    def centers_of(self, idx: np.ndarray) -> np.ndarray:
        return -2.0 * self.N + (idx + 0.5) * self.side


def _make_shell(N: int, a: int, d: int, offset: int) -> Shell:
    side = 2.0 ** (-a * int(round(math.log2(N))))
    n = 4 * N ** (a + 1)
    return Shell(N, side, n, offset, n ** d - (n // 2) ** d)


def _rank(shell: Shell, idx: np.ndarray) -> np.ndarray:
    """Lexicographic rank of shell cells ``idx`` (shape ``(P, d)``) among shell cells."""
    n, lo, hi = shell.n, shell.lo, shell.hi
    w = hi - lo
    d = idx.shape[1]
    idx = idx.astype(np.int64)
    lin = np.zeros(len(idx), dtype=np.int64)
    holes = np.zeros(len(idx), dtype=np.int64)
    prefix_inner = np.ones(len(idx), dtype=bool)
    for ax in range(d):
        rem = d - 1 - ax
        lin = lin * n + idx[:, ax]
        before = np.clip(idx[:, ax] - lo, 0, w)
        holes += np.where(prefix_inner, before * w ** rem, 0)
        prefix_inner &= (idx[:, ax] >= lo) & (idx[:, ax] < hi)
    return lin - holes


def _unrank(shell: Shell, r: int, d: int) -> tuple[int, ...]:
    n, lo, hi = shell.n, shell.lo, shell.hi
    w = hi - lo
    out = []
    inner = True
    for ax in range(d):
        rem = d - 1 - ax
        full = n ** rem
        if not inner:
            v, r = divmod(r, full)
        elif r < lo * full:
            v, r = divmod(r, full)
            inner = False
        else:
            r -= lo * full
            sub = full - w ** rem
            if r < w * sub:
                q, r = divmod(r, sub)
                v = lo + q
            else:
                r -= w * sub
                v, r = divmod(r, full)
                v += hi
                inner = False
        out.append(int(v))
    return tuple(out)


class CubeFamily(Sequence):
    """The enumerated cube family for one :class:`DecompParams`.

    Behaves as a read-only sequence of :class:`Cube`; cubes are generated on
    access.  Index 0 is ``O_1``.
    """

    def __init__(self, params: DecompParams):
        self.params = params
        shells = []
        offset = 1
        N = 1
        while N <= params.n_max:
            sh = _make_shell(N, params.a, params.d, offset)
            shells.append(sh)
            offset += sh.count
            N *= 2
        self.shells = tuple(shells)
        self._len = offset

    def __len__(self):
        return self._len

    def __eq__(self, other):
        return isinstance(other, CubeFamily) and other.params == self.params

    def __hash__(self):
        return hash(self.params)

    def __repr__(self):
        return f"CubeFamily({self.params!r}, cubes={len(self)})"

    def shell_of(self, j: int) -> Shell | None:
        if j == 0:
            return None
        for sh in self.shells:
            if sh.offset <= j < sh.offset + sh.count:
                return sh
        raise IndexError(j)

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(len(self)))]
        j = int(j)
        if j < 0:
            j += len(self)
        if not 0 <= j < len(self):
            raise IndexError(j)
        if j == 0:
            return Cube(0, 1, (0.0,) * self.params.d, 2.0)
        sh = self.shell_of(j)
        idx = np.array(_unrank(sh, j - sh.offset, self.params.d))
        return Cube(j, sh.N, tuple(float(c) for c in sh.centers_of(idx)), sh.side)

    def shell_cells(self, sh: Shell) -> np.ndarray:
        """All cell indices of a shell in enumeration order (materialised)."""
        d = self.params.d
        grid = np.indices((sh.n,) * d).reshape(d, -1).T
        inner = np.all((grid >= sh.lo) & (grid < sh.hi), axis=1)
        return grid[~inner]

    def index_of_cells(self, sh: Shell, idx: np.ndarray) -> np.ndarray:
        return sh.offset + _rank(sh, idx)

    def reflect(self, j: int) -> int:
        """Index of the cube mirrored through the origin."""
        if j == 0:
            return 0
        sh = self.shell_of(j)
        idx = np.array(_unrank(sh, j - sh.offset, self.params.d))
        return int(self.index_of_cells(sh, (sh.n - 1 - idx)[None])[0])

    # -- bump evaluation ---------------------------------------------------

    def bump_entries(self, points: np.ndarray):
        """Nonzero unnormalised bumps at ``points`` (shape ``(P, d)``).

        Returns ``rows, cols, refl, vals, sides, centers`` where ``rows``
        indexes points, ``cols`` are global cube indices and ``refl`` the
        indices of the mirrored cubes.
        """
        points = np.asarray(points, dtype=float)
        d = self.params.d
        rows, cols, refl, vals, sides, centers = [], [], [], [], [], []
        rows_all = np.arange(len(points))
        v0 = np.prod(cube_profile(points / 2.0), axis=1)
        keep = v0 > 0
        rows.append(rows_all[keep])
        cols.append(np.zeros(keep.sum(), dtype=np.int64))
        refl.append(np.zeros(keep.sum(), dtype=np.int64))
        vals.append(v0[keep])
        sides.append(np.full(keep.sum(), 2.0))
        centers.append(np.zeros((keep.sum(), d)))
        linf = np.max(np.abs(points), axis=1)
        offsets = np.array(list(product((0, 1), repeat=d)), dtype=np.int64)
        for sh in self.shells:
            near = (linf > sh.N - sh.side) & (linf < 2 * sh.N + sh.side)
            if not np.any(near):
                continue
            pr = rows_all[near]
            t = (points[near] + 2.0 * sh.N) / sh.side
            i0 = np.floor(t - 0.5).astype(np.int64)
            for off in offsets:
                idx = i0 + off
                ok = np.all((idx >= 0) & (idx < sh.n), axis=1)
                ok &= ~np.all((idx >= sh.lo) & (idx < sh.hi), axis=1)
                if not np.any(ok):
                    continue
                val = np.prod(cube_profile(t[ok] - (idx[ok] + 0.5)), axis=1)
                nz = val > 0
                if not np.any(nz):
                    continue
                cidx = idx[ok][nz]
                rows.append(pr[ok][nz])
                cols.append(self.index_of_cells(sh, cidx))
                refl.append(self.index_of_cells(sh, sh.n - 1 - cidx))
                vals.append(val[nz])
                sides.append(np.full(nz.sum(), sh.side))
                centers.append(sh.centers_of(cidx))
        return (np.concatenate(rows), np.concatenate(cols), np.concatenate(refl),
                np.concatenate(vals), np.concatenate(sides), np.concatenate(centers))

    def partition_entries(self, points: np.ndarray):
        """Like :meth:`bump_entries` but with normalised weights ``psi_j``.

        Also returns the per-point bump sum; points where it vanishes are
        outside the covered region and carry no entries.
        """
        rows, cols, refl, vals, sides, centers = self.bump_entries(points)
        total = np.bincount(rows, weights=vals, minlength=len(points))
        return rows, cols, refl, vals / total[rows], sides, centers, total


def build_cubes(params: DecompParams) -> CubeFamily:
    """Construct the cube family; raises :class:`DomainError` for bad ``n_max``."""
    if not _is_power_of_two(params.n_max):
        raise DomainError(f"n_max must be a power of two, got {params.n_max}")
    return CubeFamily(params)


def cube_count(N: int, params: DecompParams) -> int:
    """Number of side-``N**-a`` cells tiling the shell ``Q_N`` (volume count)."""
    n = 4 * N ** (params.a + 1)
    return n ** params.d - (n // 2) ** params.d


def closed_form_count(N: int, params: DecompParams) -> int:
    """The closed form ``(2^d - 1) N^{d(a+1)}`` quoted for the shell count."""
    return (2 ** params.d - 1) * N ** (params.d * (params.a + 1))


def partition_weight(xi, j: int, fam: CubeFamily) -> float:
    """``psi_j(xi)`` for a single frequency ``xi``."""
    xi = np.asarray(xi, dtype=float).reshape(1, -1)
    if xi.shape[1] != fam.params.d:
        raise DomainError(f"frequency must have {fam.params.d} components")
    rows, cols, _, psi, _, _, total = fam.partition_entries(xi)
    if total[0] <= 0:
        raise CoverageError(f"frequency {xi[0].tolist()} lies outside the covered region")
    hit = cols == j
    return float(psi[hit].sum()) if np.any(hit) else 0.0


def inventory(fam: CubeFamily, include_cubes: bool = True) -> dict:
    """JSON-ready description of the family."""
    p = fam.params
    shells = []
    for sh in fam.shells:
        geo = cube_count(sh.N, p)
        closed = closed_form_count(sh.N, p)
        shells.append({"N": sh.N, "side": sh.side, "geometric_count": geo,
                       "paper_formula_count": closed, "ratio": geo / closed})
    out = {"params": {"d": p.d, "a": p.a, "eps": p.eps, "s": p.s, "n_max": p.n_max},
           "n_cubes": len(fam), "shells": shells}
    if include_cubes:
        cubes = [{"j": 0, "N": 1, "center": [0.0] * p.d, "side": 2.0}]
        for sh in fam.shells:
            cells = fam.shell_cells(sh)
            centers = sh.centers_of(cells)
            for r, c in enumerate(centers):
                cubes.append({"j": sh.offset + r, "N": sh.N, "center": c.tolist(), "side": sh.side})
        out["cubes"] = cubes
    return out


class LatticePartition:
    """The partition of unity sampled on the frequency lattice of a grid.

    ``matrix`` is a sparse ``(M**d, n_used)`` array of ``psi_j(k)`` whose
    columns correspond to ``cube_ids`` (the cubes that touch the lattice).
    """

    def __init__(self, fam: CubeFamily, grid: SpectralGrid):
        p = fam.params
        if grid.d != p.d:
            raise DomainError(f"grid dimension {grid.d} != decomposition dimension {p.d}")
        if 2 * p.n_max > grid.kmax * (1 + 1e-12):
            raise CoverageError(
                f"decomposition reaches |xi_i| = {2 * p.n_max} beyond the grid cutoff {grid.kmax:g}")
        self.fam = fam
        self.grid = grid
        pts = grid.lattice_points()
        rows, cols, refl, psi, sides, centers, total = fam.partition_entries(pts)
        ids, first, local = np.unique(cols, return_index=True, return_inverse=True)
        self.cube_ids = ids
        self.reflect_ids = refl[first]
        self.sides = sides[first]
        self.centers = centers[first]
        self.matrix = sp.csr_matrix((psi, (rows, local)), shape=(len(pts), len(ids)))
        self.coverage = (total > 0).reshape(grid.shape)
        self.multiplicity = np.bincount(rows, minlength=len(pts)).reshape(grid.shape)
        self.square_sum = np.asarray(self.matrix.multiply(self.matrix).sum(axis=1)).reshape(grid.shape)
        self.psi_sum = np.asarray(self.matrix.sum(axis=1)).reshape(grid.shape)
        lo_c = (self.centers - self.sides[:, None] / 2) / grid.dk
        hi_c = (self.centers + self.sides[:, None] / 2) / grid.dk
        per_axis = np.floor(hi_c + 1e-9) - np.ceil(lo_c - 1e-9) + 1
        self.points_per_side = per_axis.min(axis=1).astype(np.int64)

    @property
    def n_used(self) -> int:
        return len(self.cube_ids)

    @property
    def overlap_bound(self) -> int:
        """Maximal number of overlapping cube supports at a covered lattice point."""
        return int(self.multiplicity.max())

    def column_of(self, j: int) -> int | None:
        pos = np.searchsorted(self.cube_ids, j)
        if pos < len(self.cube_ids) and self.cube_ids[pos] == j:
            return int(pos)
        return None

    def is_resolved(self, j: int) -> bool:
        col = self.column_of(j)
        return col is None or self.points_per_side[col] >= MIN_POINTS_PER_SIDE

    def require_resolved(self, j: int | None = None) -> None:
        if j is not None:
            if not self.is_resolved(j):
                raise ResolutionError(
                    f"cube {j} spans fewer than {MIN_POINTS_PER_SIDE} lattice points per side")
            return
        bad = self.points_per_side < MIN_POINTS_PER_SIDE
        if np.any(bad):
            side = float(self.sides[bad].min())
            raise ResolutionError(
                f"{int(bad.sum())} cubes (smallest side {side:g}) span fewer than "
                f"{MIN_POINTS_PER_SIDE} lattice points per side at dk={self.grid.dk:g}")

    def weight(self, j: int) -> np.ndarray:
        """``psi_j`` on the lattice, grid-shaped."""
        col = self.column_of(j)
        if col is None:
            return np.zeros(self.grid.shape)
        return self.matrix[:, [col]].toarray().reshape(self.grid.shape)

    def multiplier(self, g_used: np.ndarray) -> np.ndarray:
        """``sum_j g_j psi_j(k)`` on the lattice for coefficients on ``cube_ids``."""
        return (self.matrix @ g_used).reshape(self.grid.shape)

    def residual(self, spectrum: np.ndarray) -> float:
        """Relative L^2 size of ``f - sum_j box_j f``."""
        tot = np.sum(np.abs(spectrum) ** 2)
        if tot == 0:
            return 0.0
        return float(np.sqrt(np.sum(np.abs(spectrum * (1.0 - self.psi_sum)) ** 2) / tot))


@lru_cache(maxsize=16)
def lattice_partition(fam: CubeFamily, grid: SpectralGrid) -> LatticePartition:
    return LatticePartition(fam, grid)


def box_project(f: VectorField, j: int, fam: CubeFamily) -> VectorField:
    """``box_j f``: multiply the spectrum by ``psi_j``."""
    part = lattice_partition(fam, f.grid)
    part.require_resolved(j)
    out = f.spectrum() * part.weight(j)
    return VectorField(f.grid, spectral=out, solenoidal=f.solenoidal, real=False)


# -- dyadic Littlewood-Paley blocks -----------------------------------------

def lp_profile(r):
    """Radial cutoff: 1 for ``r <= 1``, 0 for ``r >= 2``, smooth in between."""
    return smooth_step(2.0 - np.asarray(r, dtype=float))


def lp_symbol(grid: SpectralGrid, N: float) -> np.ndarray:
    """Annular multiplier ``Phi(|k|/N) - Phi(2|k|/N)`` supported in ``N/2 < |k| < 2N``."""
    r = grid.kabs
    return lp_profile(r / N) - lp_profile(2.0 * r / N)


def low_symbol(grid: SpectralGrid, N: float) -> np.ndarray:
    """``Phi(|k|/N)``: everything up to and including block ``N`` (and the mean)."""
    return lp_profile(grid.kabs / N)


def dyadic_scales(grid: SpectralGrid) -> list[float]:
    """Dyadic ``N`` whose annulus meets a nonzero lattice frequency.

    The smallest is the first power of two above ``dk/2``; the largest is the
    first power of two at or above the largest lattice ``|k|``, so that the
    blocks resolve the identity off the zero mode.
    """
    lo = 2.0 ** (math.floor(math.log2(grid.dk / 2.0)) + 1)
    top = math.sqrt(grid.d) * grid.kmax
    hi = 2.0 ** math.ceil(math.log2(top))
    out = []
    N = lo
    while N <= hi * (1 + 1e-12):
        out.append(N)
        N *= 2.0
    return out


def lp_project(f: VectorField, N: float) -> VectorField:
    """Smooth dyadic projection ``P_N``."""
    scales = dyadic_scales(f.grid)
    if not any(abs(N - s) <= 1e-12 * s for s in scales):
        raise DomainError(f"N={N} is not a dyadic scale resolved by this grid ({scales[0]}..{scales[-1]})")
    out = f.spectrum() * lp_symbol(f.grid, N)
    return VectorField(f.grid, spectral=out, solenoidal=f.solenoidal, real=f.real)
