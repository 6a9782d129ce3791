import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsrand.errors import DomainError, LatticeError, RepresentationError, ShapeError
from nsrand.norms import sobolev_norm
from nsrand.spectral import (
    SpectralGrid, VectorField, forward_transform, heat_propagate, inner, inverse_transform,
    l2_norm, leray_project, max_divergence, scale_field,
)


def random_field(grid, seed, n=None):
    rng = np.random.default_rng(seed)
    n = grid.d if n is None else n
    return VectorField.from_physical(grid, rng.standard_normal((n,) + grid.shape))


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.mark.parametrize("d,L,M", [(1, 1.0, 8), (2, 0.0, 8), (2, 1.0, 12), (2, 1.0, 4), (4, 1.0, 8)])
def test_grid_rejects_bad_parameters(d, L, M):
    with pytest.raises(DomainError):
        SpectralGrid(d, L, M)


def test_grid_geometry():
    g = SpectralGrid(2, 8 * math.pi, 16)
    assert g.dk == pytest.approx(0.25)
    assert g.kmax == pytest.approx(0.25 * 8)
    assert g.k1d.min() == pytest.approx(-g.kmax)
    x = g.coords()
    assert x[0][1, 0] == pytest.approx(g.L / g.M)


def test_sine_has_two_coefficients():
    g = SpectralGrid(2, 2 * math.pi, 16)
    x, _ = g.coords()
    uh = forward_transform(VectorField.from_physical(g, np.sin(x))).spectral[0]
    assert uh[1, 0] == pytest.approx(-0.5j)
    assert uh[-1, 0] == pytest.approx(0.5j)
    uh[1, 0] = uh[-1, 0] = 0
    assert np.abs(uh).max() < 1e-15


def test_constant_maps_to_zero_mode():
    g = SpectralGrid(3, 4.0, 8)
    uh = forward_transform(VectorField.from_physical(g, np.ones(g.shape))).spectral[0]
    assert uh[0, 0, 0] == pytest.approx(1.0)
    uh[0, 0, 0] = 0
    assert np.abs(uh).max() < 1e-15


def test_missing_representation():
    g = SpectralGrid(2, 1.0, 8)
    with pytest.raises(RepresentationError):
        VectorField(g)
    with pytest.raises(ShapeError):
        VectorField(g, physical=np.zeros((2, 8, 4)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.sampled_from([2, 3]))
def test_round_trip_and_parseval(seed, d):
    g = SpectralGrid(d, 3.0, 8)
    u = random_field(g, seed)
    back = inverse_transform(forward_transform(u)).physical
    assert rel(back, u.physical) <= 1e-12
    direct = math.sqrt(np.sum(u.physical ** 2) * g.dx ** d)
    parseval = math.sqrt(g.L ** d * np.sum(np.abs(forward_transform(u).spectral) ** 2))
    assert abs(direct - parseval) <= 1e-12 * direct


def test_leray_kills_gradients():
    g = SpectralGrid(2, 2 * math.pi, 16)
    x, y = g.coords()
    grad = np.stack([-np.sin(x), np.zeros_like(x)])
    out = leray_project(VectorField.from_physical(g, grad))
    assert np.abs(out.spectral).max() < 1e-15


def test_leray_keeps_stream_function_fields():
    g = SpectralGrid(2, 2 * math.pi, 16)
    x, y = g.coords()
    # psi = sin(x) sin(2y)
    u = np.stack([2 * np.sin(x) * np.cos(2 * y), -np.cos(x) * np.sin(2 * y)])
    f = VectorField.from_physical(g, u)
    assert rel(leray_project(f).values(), u) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.sampled_from([2, 3]))
def test_leray_idempotent_and_self_adjoint(seed, d):
    g = SpectralGrid(d, 5.0, 8)
    u, v = random_field(g, seed), random_field(g, seed + 1)
    pu = leray_project(u)
    assert rel(leray_project(pu).spectral, pu.spectral) <= 1e-12
    assert max_divergence(pu) <= 1e-10 * np.linalg.norm(pu.spectral)
    a, b = inner(pu, v), inner(u, leray_project(v))
    assert abs(a - b) <= 1e-12 * l2_norm(u) * l2_norm(v)


def test_leray_rejects_scalars():
    g = SpectralGrid(2, 1.0, 8)
    with pytest.raises(ShapeError):
        leray_project(random_field(g, 0, n=1))


def test_heat_single_mode_and_semigroup():
    g = SpectralGrid(2, 2 * math.pi, 16)
    x, _ = g.coords()
    u = VectorField.from_physical(g, np.cos(x))
    assert heat_propagate(u, 0.0).spectral == pytest.approx(u.spectrum())
    amp = np.abs(heat_propagate(u, 1.0).spectral[0, 1, 0]) * 2
    assert amp == pytest.approx(math.exp(-1.0), rel=1e-14)
    w = random_field(g, 3)
    two = heat_propagate(heat_propagate(w, 0.1), 0.25).spectral
    one = heat_propagate(w, 0.35).spectral
    assert rel(two, one) <= 1e-12
    assert l2_norm(heat_propagate(w, 0.1)) <= l2_norm(w)
    with pytest.raises(DomainError):
        heat_propagate(w, -1.0)


def test_scaling_of_sine():
    g = SpectralGrid(2, 2 * math.pi, 16)
    x, _ = g.coords()
    u = VectorField.from_physical(g, np.stack([np.sin(x), np.zeros_like(x)]))
    same, t = scale_field(u, 1.0, 0.3)
    assert same is u and t == 0.3
    v, t = scale_field(u, 2.0, 0.4)
    assert t == pytest.approx(0.1)
    assert np.abs(v.values()[0] - 2 * np.sin(2 * x)).max() < 1e-13
    with pytest.raises(LatticeError):
        scale_field(u, 3.0)


def test_scaling_composes_and_preserves_critical_norm():
    g = SpectralGrid(2, 2 * math.pi, 32)
    rng = np.random.default_rng(1)
    spec = np.zeros((2,) + g.shape, complex)
    spec[:, :4, :4] = rng.standard_normal((2, 4, 4))
    spec[:, 0, 0] = 0
    u = leray_project(VectorField(g, spectral=spec))
    four, _ = scale_field(u, 4.0)
    twice, _ = scale_field(scale_field(u, 2.0)[0], 2.0)
    assert rel(twice.spectral, four.spectral) <= 1e-14
    # the critical norm is invariant for the whole-space rescaling (box L -> L/lam);
    # on a fixed box the rescaled field tiles lam^d copies instead
    a = sobolev_norm(u, 0.0, homogeneous=True)
    b = sobolev_norm(scale_field(u, 2.0, resample=True)[0], 0.0, homogeneous=True)
    assert abs(a - b) <= 1e-10 * a
    g3 = SpectralGrid(3, 2 * math.pi, 8)
    w = leray_project(random_field(g3, 2))
    w = VectorField(g3, spectral=w.spectral * (g3.k2 > 0))
    a = sobolev_norm(w, 0.5, homogeneous=True)
    b = sobolev_norm(scale_field(w, 2.0, resample=True)[0], 0.5, homogeneous=True)
    assert abs(a - b) <= 1e-10 * a


def test_resampled_scaling_relabels_box():
    g = SpectralGrid(2, 4.0, 8)
    u = random_field(g, 5)
    v, t = scale_field(u, 1.5, 0.9, resample=True)
    assert v.grid.L == pytest.approx(4.0 / 1.5)
    assert t == pytest.approx(0.4)
    assert np.array_equal(v.physical, 1.5 * u.physical)
