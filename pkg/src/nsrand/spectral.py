"""Periodic grids, vector fields and the basic Fourier multipliers.

Conventions
-----------
The box is ``[0, L)^d`` sampled at ``x = (L/M) n``.  Spectral coefficients are

    u_hat(k) = M^{-d} sum_n u(x_n) exp(-i k.x_n),   k in (2 pi / L) {-M/2, ..., M/2 - 1}^d

stored in FFT order on the full complex lattice.  With this normalisation
Parseval reads ``||u||^2_{L^2(box)} = L^d sum_k |u_hat(k)|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, LatticeError, RepresentationError, ShapeError


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpectralGrid:
    """Periodic box of side ``L`` in ``d`` dimensions with ``M`` samples per axis."""

    d: int
    L: float
    M: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.d}")
        if not isinstance(self.M, (int, np.integer)) or not _is_power_of_two(int(self.M)) or self.M < 8:
            raise DomainError(f"M must be a power of two >= 8, got {self.M}")
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "L", float(self.L))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.d

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def dk(self) -> float:
        """Lattice spacing in frequency."""
        return 2 * np.pi / self.L

    @property
    def kmax(self) -> float:
        """Spectral cutoff ``pi M / L``; lattice values satisfy ``-kmax <= k_i < kmax``."""
        return np.pi * self.M / self.L

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    @cached_property
    def k1d(self) -> np.ndarray:
        return sfft.fftfreq(self.M, d=1.0 / self.M) * self.dk

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavenumber arrays, one per axis."""
        out = []
        for ax in range(self.d):
            shp = [1] * self.d
            shp[ax] = self.M
            out.append(self.k1d.reshape(shp))
        return tuple(out)

    @cached_property
    def kvec(self) -> np.ndarray:
        """Full wavenumber array of shape ``(d, M, ..., M)``."""
        return np.stack(np.broadcast_arrays(*self.k))

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(ki ** 2 for ki in self.k) * np.ones(self.shape)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on lattice points with any component equal to ``-kmax``."""
        idx = np.zeros(self.shape, dtype=bool)
        for ax in range(self.d):
            sl = [slice(None)] * self.d
            sl[ax] = self.M // 2
            idx[tuple(sl)] = True
        return idx

    def coords(self) -> tuple[np.ndarray, ...]:
        x1 = np.arange(self.M) * self.dx
        return tuple(np.meshgrid(*([x1] * self.d), indexing="ij"))

    def lattice_points(self) -> np.ndarray:
        """All lattice frequencies as a ``(M**d, d)`` array in C order of the spectral array."""
        return self.kvec.reshape(self.d, -1).T


@dataclass(frozen=True, eq=False)
class VectorField:
    """An ``n``-component field on ``grid``.

    ``physical`` has shape ``(n, M, ..., M)`` and is real unless the field was
    produced by an unpaired (complex) randomization.  ``spectral`` has the same
    shape and complex dtype.  ``solenoidal`` records that the field was built
    or projected to be divergence-free.
    """

    grid: SpectralGrid
    physical: np.ndarray | None = None
    spectral: np.ndarray | None = None
    solenoidal: bool = False
    real: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.physical is None and self.spectral is None:
            raise RepresentationError("a VectorField needs at least one representation")
        for arr in (self.physical, self.spectral):
            if arr is not None and arr.shape[1:] != self.grid.shape:
                raise ShapeError(f"array shape {arr.shape} does not match grid {self.grid.shape}")
        if self.physical is not None and np.iscomplexobj(self.physical):
            object.__setattr__(self, "real", False)

    @property
    def n(self) -> int:
        arr = self.physical if self.physical is not None else self.spectral
        return arr.shape[0]

    @classmethod
    def from_physical(cls, grid, values, **kw) -> "VectorField":
        values = np.asarray(values)
        if values.ndim == grid.d:
            values = values[None]
        dtype = np.complex128 if np.iscomplexobj(values) else np.float64
        return cls(grid, physical=np.ascontiguousarray(values, dtype=dtype), **kw)

    @classmethod
    def from_spectral(cls, grid, coeffs, **kw) -> "VectorField":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim == grid.d:
            coeffs = coeffs[None]
        return cls(grid, spectral=coeffs, **kw)

    def with_spectral(self) -> "VectorField":
        return self if self.spectral is not None else forward_transform(self)

    def with_physical(self) -> "VectorField":
        return self if self.physical is not None else inverse_transform(self)

    def spectrum(self) -> np.ndarray:
        return self.with_spectral().spectral

    def values(self) -> np.ndarray:
        return self.with_physical().physical

    def scaled(self, alpha) -> "VectorField":
        phys = None if self.physical is None else alpha * self.physical
        spec = None if self.spectral is None else alpha * self.spectral
        real = self.real and np.isrealobj(alpha)
        return VectorField(self.grid, phys, spec, self.solenoidal, real, dict(self.meta))


def forward_transform(u: VectorField) -> VectorField:
    """Populate the spectral representation from the physical samples."""
    if u.physical is None:
        raise RepresentationError("forward_transform needs physical samples")
    g = u.grid
    spec = sfft.fftn(u.physical, axes=g.axes) / g.M ** g.d
    return replace(u, spectral=spec)


def inverse_transform(u: VectorField, real: bool | None = None) -> VectorField:
    """Populate the physical representation from spectral coefficients.

    For fields flagged real the (round-off sized) imaginary part is dropped.
    """
    if u.spectral is None:
        raise RepresentationError("inverse_transform needs spectral coefficients")
    g = u.grid
    phys = sfft.ifftn(u.spectral, axes=g.axes) * g.M ** g.d
    keep_real = u.real if real is None else real
    if keep_real:
        phys = phys.real.copy()
    return VectorField(u.grid, phys, u.spectral, u.solenoidal, keep_real, dict(u.meta))


def l2_norm(u: VectorField) -> float:
    """Box L^2 norm via Parseval."""
    g = u.grid
    return float(np.sqrt(g.L ** g.d * np.sum(np.abs(u.spectrum()) ** 2)))


def inner(u: VectorField, v: VectorField) -> float:
    """Real L^2(box) inner product."""
    g = u.grid
    return float(g.L ** g.d * np.sum(np.conj(u.spectrum()) * v.spectrum()).real)


def divergence_spectrum(u: VectorField) -> np.ndarray:
    uh = u.spectrum()
    return sum(1j * ki * uh[i] for i, ki in enumerate(u.grid.k))


def max_divergence(u: VectorField) -> float:
    """``max_k |k . u_hat(k)| / ||u_hat||_{l^2}``; zero for the zero field."""
    uh = u.spectrum()
    nrm = np.sqrt(np.sum(np.abs(uh) ** 2))
    if nrm == 0:
        return 0.0
    return float(np.max(np.abs(divergence_spectrum(u))) / nrm)


def imaginary_residue(u: VectorField) -> float:
    """Largest imaginary part of the physical field relative to its box L^2 norm."""
    g = u.grid
    phys = sfft.ifftn(u.spectrum(), axes=g.axes) * g.M ** g.d
    nrm = l2_norm(u)
    if nrm == 0:
        return 0.0
    return float(np.max(np.abs(phys.imag)) / nrm)


def leray_project(u: VectorField) -> VectorField:
    """Apply ``I - k k^T / |k|^2`` mode by mode; the zero mode passes through."""
    g = u.grid
    if u.n != g.d:
        raise ShapeError(f"Leray projection needs {g.d} components, got {u.n}")
    uh = u.spectrum()
    k2 = g.k2.copy()
    k2[(0,) * g.d] = 1.0
    kdotu = sum(ki * uh[i] for i, ki in enumerate(g.k)) / k2
    out = np.stack([uh[i] - ki * kdotu for i, ki in enumerate(g.k)])
    return VectorField(g, spectral=out, solenoidal=True, real=u.real, meta=dict(u.meta))


def heat_propagate(u: VectorField, t: float, nu: float = 1.0) -> VectorField:
    """Multiply every coefficient by ``exp(-nu |k|^2 t)``."""
    if t < 0:
        raise DomainError(f"heat propagation needs t >= 0, got {t}")
    g = u.grid
    out = u.spectrum() * np.exp(-nu * g.k2 * t)
    return VectorField(g, spectral=out, solenoidal=u.solenoidal, real=u.real, meta=dict(u.meta))


def scale_field(u: VectorField, lam: float, t: float = 0.0, *, resample: bool = False
                ) -> tuple[VectorField, float]:
    """Navier-Stokes rescaling ``u_lam(x) = lam * u(lam x)``.

    If ``u`` is the state at time ``t``, the result is the rescaled solution at
    time ``t / lam**2``; both are returned.

    Without ``resample`` the box is kept and ``lam`` must be a positive integer
    power of two; mode ``k`` then moves to ``lam k``, which must stay on the
    lattice.  With ``resample`` any ``lam > 0`` is accepted and the samples are
    reinterpreted on the box of side ``L / lam`` (an exact relabelling).
    """
    if not lam > 0:
        raise DomainError(f"scale factor must be positive, got {lam}")
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    g = u.grid
    if resample:
        new_grid = SpectralGrid(g.d, g.L / lam, g.M)
        phys = None if u.physical is None else lam * u.physical
        spec = None if u.spectral is None else lam * u.spectral
        return VectorField(new_grid, phys, spec, u.solenoidal, u.real, dict(u.meta)), t / lam ** 2
    ilam = int(round(lam))
    if abs(lam - ilam) > 1e-12 or not _is_power_of_two(ilam):
        raise LatticeError(f"scale factor {lam} does not map the lattice to itself; pass resample=True")
    if ilam == 1:
        return u, t
    uh = u.spectrum()
    M = g.M
    m = np.round(g.k1d / g.dk).astype(int)
    target = m * ilam
    inside = (target >= -M // 2) & (target < M // 2)
    lost = np.ones(uh.shape[1:], dtype=bool)
    sl = np.ix_(*([inside] * g.d))
    lost[sl] = False
    total = np.sum(np.abs(uh) ** 2)
    if total > 0 and np.sum(np.abs(uh[:, lost]) ** 2) > 1e-24 * total:
        raise LatticeError("field is not band-limited enough to be rescaled on the same lattice")
    out = np.zeros_like(uh)
    src_idx = np.nonzero(inside)[0]
    dst_idx = target[inside] % M
    out[(slice(None),) + np.ix_(*([dst_idx] * g.d))] = uh[(slice(None),) + np.ix_(*([src_idx] * g.d))]
    return VectorField(g, spectral=lam * out, solenoidal=u.solenoidal, real=u.real,
                       meta=dict(u.meta)), t / lam ** 2
