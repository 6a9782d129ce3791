import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsrand.decomp import (
    CubeFamily, DecompParams, build_cubes, box_project, cube_count, cube_profile, dyadic_scales,
    inventory, lattice_partition, lp_project, lp_symbol, closed_form_count, partition_weight,
    smooth_step,
)
from nsrand.errors import CoverageError, DomainError, ResolutionError
from nsrand.profiles import random_solenoidal, single_mode
from nsrand.spectral import SpectralGrid, VectorField, l2_norm


def test_smooth_step_shape():
    t = np.linspace(-1, 2, 301)
    v = smooth_step(t)
    assert np.all(v[t <= 0] == 0) and np.all(v[t >= 1] == 1)
    assert np.all(np.diff(v) >= 0)
    assert smooth_step(0.5) == pytest.approx(0.5)
    assert np.allclose(smooth_step(t) + smooth_step(1 - t), 1.0, atol=1e-15)


def test_cube_profile_plateau_and_support():
    h = 1.0
    assert cube_profile(np.array([0.0, 0.5, -0.5])).tolist() == [1.0, 1.0, 1.0]
    assert cube_profile(np.array([1.0, -1.0, 1.3])).tolist() == [0.0, 0.0, 0.0]
    assert 0 < cube_profile(np.array([0.75 * h]))[0] < 1


def test_params_validation():
    with pytest.raises(DomainError):
        DecompParams(2, n_max=6)
    with pytest.raises(DomainError):
        DecompParams(2, eps=0.5)
    with pytest.raises(DomainError):
        DecompParams(4)
    with pytest.raises(DomainError):
        DecompParams(2, a=-1)


def _integer_cells(N, a, d):
    # count unit cells of side N^-a tiling [-2N, 2N]^d minus [-N, N]^d by brute force
    side = N ** -a
    c = np.arange(-2 * N + side / 2, 2 * N, side)
    pts = np.stack(np.meshgrid(*([c] * d), indexing="ij")).reshape(d, -1)
    return int(np.sum(np.max(np.abs(pts), axis=0) > N))


@pytest.mark.parametrize("d,a,N,expect", [(2, 0, 2, 48), (2, 1, 2, 192), (2, 0, 1, 12), (3, 0, 2, 448)])
def test_geometric_counts(d, a, N, expect):
    p = DecompParams(d, a, n_max=N)
    assert cube_count(N, p) == expect == _integer_cells(N, a, d)


def test_closed_form_ratio_is_constant():
    for d in (2, 3):
        for a in (0, 1, 2):
            p = DecompParams(d, a)
            ratios = {cube_count(N, p) / closed_form_count(N, p) for N in (2, 4, 8)}
            assert ratios == {2.0 ** d}
    assert closed_form_count(2, DecompParams(2, 0)) == 12


def test_enumeration_is_shell_major_and_lexicographic():
    fam = build_cubes(DecompParams(2, 1, n_max=4))
    assert fam[0].N == 1 and fam[0].side == 2.0
    Ns = [fam[j].N for j in range(len(fam))]
    assert Ns == sorted(Ns)
    centers = [fam[j].center for j in range(1, 1 + cube_count(1, fam.params))]
    assert centers == sorted(centers)
    assert len(fam) == 1 + sum(cube_count(N, fam.params) for N in (1, 2, 4))


def test_cells_disjoint_and_tile_the_shell():
    fam = build_cubes(DecompParams(2, 1, n_max=2))
    for sh in fam.shells:
        cells = fam.shell_cells(sh)
        assert len({tuple(c) for c in cells}) == len(cells) == sh.count
        # ranks invert the enumeration
        assert np.array_equal(fam.index_of_cells(sh, cells), sh.offset + np.arange(sh.count))
    # sample a fine lattice: every covered point lies in exactly one closed-open cell
    pts = np.random.default_rng(0).uniform(-4, 4, size=(4000, 2))
    owners = np.zeros(len(pts), int)
    for j in range(len(fam)):
        c = fam[j]
        lo = np.array(c.center) - c.side / 2
        inside = np.all((pts >= lo) & (pts < lo + c.side), axis=1)
        if j == 0:
            inside = np.all(np.abs(pts) < 1, axis=1)
        owners += inside
    assert np.all(owners == 1)


def test_reflection_is_an_involution():
    fam = build_cubes(DecompParams(3, 0, n_max=2))
    for j in range(len(fam)):
        r = fam.reflect(j)
        assert fam.reflect(r) == j
        assert np.allclose(fam[r].center, -np.array(fam[j].center))


def test_partition_weight_examples():
    fam = build_cubes(DecompParams(2, 0, n_max=2))
    assert partition_weight([0.0, 0.0], 0, fam) == 1.0
    # a face between two unit cells of shell 2 at (2.5, 0) | (3.5, 0)... face x = 3
    j1 = next(j for j in range(len(fam)) if fam[j].center == (2.5, 0.5))
    j2 = next(j for j in range(len(fam)) if fam[j].center == (3.5, 0.5))
    a, b = partition_weight([3.0, 0.5], j1, fam), partition_weight([3.0, 0.5], j2, fam)
    assert 0 < a < 1 and 0 < b < 1 and a + b == pytest.approx(1.0, abs=1e-15)
    assert a == pytest.approx(0.5)
    with pytest.raises(CoverageError):
        partition_weight([9.0, 0.0], 0, fam)


@settings(max_examples=30, deadline=None)
@given(xi=st.tuples(st.floats(-8, 8), st.floats(-8, 8)), a=st.integers(0, 1))
def test_partition_of_unity_and_support(xi, a):
    fam = build_cubes(DecompParams(2, a, n_max=4))
    rows, cols, _, psi, sides, centers, total = fam.partition_entries(np.array([xi]))
    if total[0] == 0:
        assert max(abs(x) for x in xi) >= 8
        return
    assert abs(psi.sum() - 1) <= 1e-12
    assert np.all((psi >= 0) & (psi <= 1))
    # supported in the doubled cube
    assert np.all(np.max(np.abs(np.array(xi) - centers), axis=1) < sides + 1e-12)


@pytest.mark.parametrize("d,a", [(2, 0), (2, 1), (3, 0)])
def test_lattice_partition_of_unity(d, a):
    M = 64 if d == 2 else 32
    fam = build_cubes(DecompParams(d, a, n_max=4))
    part = lattice_partition(fam, SpectralGrid(d, M * math.pi / 8, M))
    cov = part.coverage
    assert np.max(np.abs(part.psi_sum[cov] - 1)) <= 1e-12
    assert np.all(part.square_sum[cov] >= 1.0 / part.overlap_bound - 1e-12)


def test_coverage_guard():
    fam = build_cubes(DecompParams(2, 0, n_max=8))
    with pytest.raises(CoverageError):
        lattice_partition(fam, SpectralGrid(2, 2 * math.pi, 16))


def test_box_project_sums_to_identity():
    g = SpectralGrid(2, 8 * math.pi, 64)
    fam = build_cubes(DecompParams(2, 0, n_max=2))
    f = random_solenoidal(g, 4, k_hi=4.0)
    part = lattice_partition(fam, g)
    total = sum(box_project(f, int(j), fam).spectral for j in part.cube_ids)
    assert np.linalg.norm(total - f.spectral) <= 1e-10 * np.linalg.norm(f.spectral)
    pieces = sum(l2_norm(box_project(f, int(j), fam)) ** 2 for j in part.cube_ids)
    r = math.sqrt(pieces) / l2_norm(f)
    assert part.overlap_bound ** -0.5 <= r <= 1 + 1e-10


def test_box_project_on_interior_mode():
    g = SpectralGrid(2, 8 * math.pi, 64)
    fam = build_cubes(DecompParams(2, 0, n_max=2))
    j = next(j for j in range(len(fam)) if fam[j].center == (2.5, 1.5))
    f = single_mode(g, (2.5, 1.5))
    assert np.allclose(box_project(f, j, fam).spectral, f.spectrum(), atol=1e-15)
    assert np.abs(box_project(f, fam.reflect(j), fam).spectral).max() <= 1e-15


def test_unresolved_cube_raises():
    g = SpectralGrid(2, 4 * math.pi, 32)  # dk = 1/2, side-1/4 cubes are too small
    fam = build_cubes(DecompParams(2, 1, n_max=4))
    part = lattice_partition(fam, g)
    with pytest.raises(ResolutionError):
        part.require_resolved()


def test_inventory_lists_every_cube():
    fam = build_cubes(DecompParams(2, 0, n_max=2))
    inv = inventory(fam)
    assert inv["n_cubes"] == len(inv["cubes"]) == 1 + 12 + 48
    assert [s["geometric_count"] for s in inv["shells"]] == [12, 48]
    assert inv["cubes"][5] == {"j": 5, "N": fam[5].N, "center": list(fam[5].center), "side": 1.0}


def test_littlewood_paley_resolution_of_identity():
    g = SpectralGrid(2, 2 * math.pi, 32)
    f = random_solenoidal(g, 9, s=None)
    f = VectorField(g, spectral=f.spectral + 0.3)  # add a mean
    blocks = sum(lp_project(f, N).spectral for N in dyadic_scales(g))
    mean_free = f.spectral.copy()
    mean_free[:, 0, 0] = 0
    assert np.linalg.norm(blocks - mean_free) <= 1e-10 * np.linalg.norm(mean_free)
    for N in dyadic_scales(g):
        assert l2_norm(lp_project(f, N)) <= l2_norm(f)
    with pytest.raises(DomainError):
        lp_project(f, 3.0)


def test_lp_block_keeps_mode_at_its_scale():
    g = SpectralGrid(2, 2 * math.pi, 32)
    f = single_mode(g, (4.0, 0.0))
    assert np.allclose(lp_project(f, 4.0).spectral, f.spectrum(), atol=1e-15)
    assert np.all((lp_symbol(g, 4.0) >= 0) & (lp_symbol(g, 4.0) <= 1))


def test_family_is_implicit_for_large_parameters():
    fam = CubeFamily(DecompParams(3, 2, n_max=16))
    assert len(fam) > 10 ** 12
    j = len(fam) - 1
    assert fam[j].N == 16 and fam.reflect(fam.reflect(j)) == j
