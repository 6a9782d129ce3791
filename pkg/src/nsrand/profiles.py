"""Deterministic divergence-free test profiles."""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .norms import sobolev_norm
from .rng import PROFILE_TAG, gaussians_at
from .spectral import SpectralGrid, VectorField, leray_project

KINDS = ("power-law", "single-shell", "taylor-green")
DELTA = 0.1


def _linf(grid: SpectralGrid) -> np.ndarray:
    return np.max(np.abs(grid.kvec), axis=0)


def _finish(grid: SpectralGrid, spec: np.ndarray, s: float | None, meta: dict) -> VectorField:
    spec = spec.copy()
    spec[:, grid.nyquist_mask] = 0.0
    spec[(slice(None),) + (0,) * grid.d] = 0.0
    u = leray_project(VectorField(grid, spectral=spec))
    if s is not None:
        nrm = sobolev_norm(u, s)
        if nrm == 0:
            raise DomainError("profile is empty on this grid")
        u = u.scaled(1.0 / nrm)
    return VectorField(grid, spectral=u.spectral, solenoidal=True, meta=meta)


def _mirror(z: np.ndarray, d: int) -> np.ndarray:
    """``z(-k)`` on an FFT-ordered lattice."""
    axes = tuple(range(-d, 0))
    return np.roll(np.flip(z, axis=axes), 1, axis=axes)


def random_solenoidal(grid: SpectralGrid, seed: int, k_lo: float = 0.0, k_hi: float | None = None,
                      s: float | None = 0.0) -> VectorField:
    """Real divergence-free field with Gaussian coefficients on ``k_lo <= max_i |k_i| < k_hi``.

    Normalised to unit ``H^s`` norm (pass ``s=None`` to skip).
    """
    d = grid.d
    n = d * grid.M ** d
    z = gaussians_at(seed, 0, np.arange(n), PROFILE_TAG).reshape((d,) + grid.shape)
    z = 0.5 * (z + np.conj(_mirror(z, d)))
    linf = _linf(grid)
    band = linf >= k_lo
    if k_hi is not None:
        band &= linf < k_hi
    return _finish(grid, z * band, s, {"profile": "random", "seed": seed})


def power_law(grid: SpectralGrid, s: float, seed: int = 0, band: float | None = None,
              delta: float = DELTA, normalize: bool = True) -> VectorField:
    """Localised profile with ``|f_hat(k)|`` proportional to ``<k>^{-s-d/2-delta}``.

    The seed fixes the centre ``x0`` and the polarisation; the phases are
    ``exp(-i k.x0)`` so the field is a coherent bump at ``x0`` rather than
    noise.  ``band`` zeroes frequencies with ``max_i |k_i| > band``.
    Normalised to ``||f||_{H^s} = 1`` unless ``normalize`` is off, in which
    case the coefficients are the bare power law.
    """
    d = grid.d
    r = gaussians_at(seed, 0, np.arange(2 * d), PROFILE_TAG)
    x0 = grid.L * ((np.angle(r[:d]) / (2 * np.pi)) % 1.0)
    pol = r[d:].real
    pol = pol / np.linalg.norm(pol)
    amp = (1.0 + grid.k2) ** (-(s + d / 2.0 + delta) / 2.0)
    phase = np.exp(-1j * sum(ki * xi for ki, xi in zip(grid.k, x0)))
    spec = pol.reshape((d,) + (1,) * d) * (amp * phase)[None]
    if band is not None:
        spec = spec * (_linf(grid) <= band * (1 + 1e-12))
    meta = {"profile": "power-law", "s": s, "seed": seed, "x0": x0.tolist(), "delta": delta}
    return _finish(grid, spec, s if normalize else None, meta)


def single_shell(grid: SpectralGrid, s: float, seed: int = 0, N: int = 1) -> VectorField:
    """Random-phase field filling the shell ``N <= max_i |k_i| < 2N``."""
    u = random_solenoidal(grid, seed, k_lo=N, k_hi=2 * N, s=s)
    return VectorField(grid, spectral=u.spectral, solenoidal=True,
                       meta={"profile": "single-shell", "s": s, "seed": seed, "N": N})


def taylor_green(grid: SpectralGrid) -> VectorField:
    """``(sin x cos y, -cos x sin y)`` in 2D (``w = 0`` and a ``cos z`` factor in 3D), wavenumber ``2 pi / L``."""
    x = [grid.dk * xi for xi in grid.coords()]
    if grid.d == 2:
        comps = [np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])]
    else:
        cz = np.cos(x[2])
        comps = [np.sin(x[0]) * np.cos(x[1]) * cz, -np.cos(x[0]) * np.sin(x[1]) * cz,
                 np.zeros(grid.shape)]
    return VectorField.from_physical(grid, np.stack(comps), solenoidal=True,
                                     meta={"profile": "taylor-green"})


def single_mode(grid: SpectralGrid, k, polarization=None, complex_valued: bool = True) -> VectorField:
    """``e exp(i k.x)`` with ``e`` perpendicular to ``k`` (unit amplitude).

    With ``complex_valued=False`` the real part ``e cos(k.x)`` is returned.
    """
    d = grid.d
    k = np.asarray(k, dtype=float)
    m = k / grid.dk
    if np.any(np.abs(m - np.round(m)) > 1e-9) or np.any(np.abs(k) >= grid.kmax):
        raise DomainError(f"{k.tolist()} is not an interior lattice frequency")
    if polarization is None:
        if d == 2:
            e = np.array([-k[1], k[0]]) if np.any(k) else np.array([1.0, 0.0])
        else:
            ref = np.eye(3)[int(np.argmin(np.abs(k)))]
            e = np.cross(k, ref) if np.any(k) else ref
    else:
        e = np.asarray(polarization, dtype=float)
    e = e / np.linalg.norm(e)
    if abs(e @ k) > 1e-12 * max(np.linalg.norm(k), 1.0):
        raise DomainError("polarization must be perpendicular to k")
    x = grid.coords()
    wave = np.exp(1j * sum(ki * xi for ki, xi in zip(k, x)))
    vals = e.reshape((d,) + (1,) * d) * wave[None]
    if not complex_valued:
        vals = vals.real
    return VectorField.from_physical(grid, vals, solenoidal=True, meta={"profile": "single-mode"})


def make_profile(kind: str, s: float, grid: SpectralGrid, seed: int = 0, **kw) -> VectorField:
    """Build one of :data:`KINDS`."""
    if kind == "power-law":
        return power_law(grid, s, seed=seed, **kw)
    if kind == "single-shell":
        return single_shell(grid, s, seed=seed, **kw)
    if kind == "taylor-green":
        return taylor_green(grid)
    raise DomainError(f"unknown profile kind {kind!r}; expected one of {KINDS}")
