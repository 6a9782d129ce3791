import math

import numpy as np
import pytest

from nsrand.errors import DomainError
from nsrand.norms import sobolev_norm
from nsrand.profiles import KINDS, make_profile, power_law, single_mode, taylor_green
from nsrand.spectral import SpectralGrid, imaginary_residue, l2_norm, max_divergence

G = SpectralGrid(2, 2 * math.pi, 64)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("d", [2, 3])
def test_profiles_are_solenoidal_and_real(kind, d):
    g = SpectralGrid(d, 2 * math.pi, 64 if d == 2 else 16)
    u = make_profile(kind, -0.8, g, seed=3)
    assert max_divergence(u) <= 1e-10
    assert imaginary_residue(u) <= 1e-12
    if kind != "taylor-green":
        assert sobolev_norm(u, -0.8) == pytest.approx(1.0, rel=1e-12)


def test_taylor_green_is_the_classical_field():
    u = taylor_green(G)
    x, y = G.coords()
    assert np.abs(u.values()[0] - np.sin(x) * np.cos(y)).max() == 0
    assert np.abs(u.values()[1] + np.cos(x) * np.sin(y)).max() == 0


def test_power_law_refinement():
    # bare coefficients: H^-0.8 stays put while L^2 keeps growing as the lattice widens
    a, b = (power_law(SpectralGrid(2, 2 * math.pi, M), -0.8, normalize=False) for M in (256, 512))
    assert abs(sobolev_norm(b, -0.8) / sobolev_norm(a, -0.8) - 1) <= 0.05
    assert l2_norm(b) / l2_norm(a) >= 1.5


def test_power_law_spectral_density():
    u = power_law(G, 0.5, seed=1, normalize=False)
    e = np.sqrt(np.sum(np.abs(u.spectral) ** 2, axis=0))
    sel = (G.kabs > 2) & (G.kabs < 20) & ~G.nyquist_mask
    ratio = e[sel] / (1 + G.k2[sel]) ** (-(0.5 + 1 + 0.1) / 2)
    # Leray projection only rotates the polarisation, so the envelope is between |sin| and 1 of it
    assert ratio.max() <= 1 + 1e-12


def test_seeds_reproduce():
    a, b = power_law(G, -0.8, seed=5), power_law(G, -0.8, seed=5)
    assert np.array_equal(a.spectral, b.spectral)
    assert not np.array_equal(a.spectral, power_law(G, -0.8, seed=6).spectral)


def test_band_limit():
    u = power_law(G, -0.8, band=8.0)
    linf = np.max(np.abs(G.kvec), axis=0)
    assert np.abs(u.spectral[:, linf > 8]).max() == 0


def test_single_mode_guards():
    with pytest.raises(DomainError):
        single_mode(G, (0.5, 0.0))
    with pytest.raises(DomainError):
        single_mode(G, (1.0, 0.0), polarization=(1.0, 0.0))
    with pytest.raises(DomainError):
        make_profile("vortex-ring", 0.0, G)
