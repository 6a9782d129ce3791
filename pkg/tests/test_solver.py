import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsrand import solver
from nsrand.errors import ConservationError, DomainError, PreconditionError, ResolutionWarning
from nsrand.profiles import random_solenoidal, taylor_green
from nsrand.solver import (
    SolverConfig, energy_report, integrate, nonlinear_term, phi, picard_iterate, relative_l2,
    scaling_symmetry_check,
)
from nsrand.spectral import (
    SpectralGrid, VectorField, inner, l2_norm, leray_project, max_divergence, imaginary_residue,
)

TG = SpectralGrid(2, 2 * math.pi, 32)


def smooth_datum(grid, seed=0, band=4.0, amp=1.0):
    """Band-limited solenoidal field with L^2 norm ``amp``."""
    return random_solenoidal(grid, seed, k_hi=band, s=0.0).scaled(amp)


def tg_exact(grid, t):
    return taylor_green(grid).scaled(math.exp(-2 * t))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_phi_functions(k):
    z = np.array([-1e-9, -0.3, -0.999, -1.0, -2.5, -40.0, 0.5, 3.0])
    ref = []
    for x in z:
        # direct series with many terms is exact enough for |z| <= 40 in mpmath-free form
        import mpmath
        ref.append(float(mpmath.nsum(lambda n: mpmath.mpf(x) ** n / mpmath.factorial(n + k), [0, mpmath.inf])))
    assert np.allclose(phi(k, z), ref, rtol=1e-13, atol=0)
    assert phi(0, np.array([0.7])) == pytest.approx(math.exp(0.7))


def test_config_validation():
    for kw in (dict(dt=0), dict(T=-1), dict(scheme="euler"), dict(cfl_guard=0.7), dict(snapshot_every=0)):
        base = dict(dt=1e-3, T=1.0) | kw
        with pytest.raises(DomainError):
            SolverConfig(**base)


def test_nonlinear_term_identities():
    g = SpectralGrid(2, 2 * math.pi, 32)
    const = VectorField.from_physical(g, np.stack([np.full(g.shape, 0.3), np.full(g.shape, -1.2)]))
    assert np.abs(nonlinear_term(const).values()).max() <= 1e-15
    assert np.abs(nonlinear_term(taylor_green(g)).values()).max() <= 1e-13
    u = smooth_datum(g, 3, band=6.0)
    n = nonlinear_term(u)
    assert abs(inner(n, u)) <= 1e-10 * l2_norm(n) * l2_norm(u)
    assert max_divergence(n) <= 1e-10


def test_nonlinear_term_matches_direct_formula():
    g = SpectralGrid(2, 2 * math.pi, 64)
    u = smooth_datum(g, 5, band=5.0)
    uh = u.spectrum()
    grads = [[np.fft.ifftn(1j * k * uh[i]).real * g.M ** 2 for k in g.k] for i in range(2)]
    vel = u.values()
    adv = np.stack([sum(vel[j] * grads[i][j] for j in range(2)) for i in range(2)])
    ref = leray_project(VectorField.from_physical(g, -adv))
    assert relative_l2(nonlinear_term(u), ref) <= 1e-12


def test_aliasing_warning():
    rough = random_solenoidal(TG, 1)
    with pytest.warns(ResolutionWarning):
        nonlinear_term(rough)


@pytest.mark.parametrize("scheme", ["ifrk4", "etdrk4"])
def test_taylor_green_exact(scheme):
    traj = integrate(taylor_green(TG), SolverConfig(1e-2, 0.5, scheme=scheme, snapshot_every=0.25))
    assert traj.status == "ok"
    assert traj.snapshot_times == pytest.approx([0.0, 0.25, 0.5])
    for t, snap in zip(traj.snapshot_times, traj.snapshots):
        assert relative_l2(snap, tg_exact(TG, t)) <= 1e-12
    rep = energy_report(traj)
    assert rep.balance_defect <= 1e-8 and rep.monotone
    assert traj.energy[-1] == pytest.approx(traj.energy[0] * math.exp(-4 * 0.5), rel=1e-12)


def test_zero_data_stays_zero():
    zero = VectorField(TG, spectral=np.zeros((2,) + TG.shape, complex))
    traj = integrate(zero, SolverConfig(0.1, 1.0))
    assert traj.status == "ok" and max(traj.energy) == 0.0
    assert energy_report(traj).balance_defect == 0.0


def test_invariants_along_a_nonlinear_run():
    u0 = smooth_datum(TG, 7, band=6.0, amp=20.0)
    traj = integrate(u0, SolverConfig(5e-3, 0.3, snapshot_every=0.1))
    assert traj.status == "ok"
    for snap, md in zip(traj.snapshots, traj.max_divergence):
        assert max_divergence(snap) <= 1e-9
        assert imaginary_residue(snap) <= 1e-10
    assert traj.energy_monotone()
    assert energy_report(traj).balance_defect <= 1e-6


def test_fourth_order_in_dt():
    g = SpectralGrid(2, 2 * math.pi, 32)
    u0 = smooth_datum(g, 2, band=4.0, amp=20.0)
    final = {dt: integrate(u0, SolverConfig(dt, 0.2)).final for dt in (1e-2 / 2, 1e-2 / 4, 1e-2 / 64)}
    ref = final[1e-2 / 64]
    e1 = relative_l2(final[1e-2 / 2], ref)
    e2 = relative_l2(final[1e-2 / 4], ref)
    assert 12 <= e1 / e2 <= 20


def test_cfl_abort_keeps_last_state():
    u0 = smooth_datum(TG, 4, amp=200.0)
    traj = integrate(u0, SolverConfig(0.05, 1.0))
    assert traj.status == "cfl" and "CFL" in traj.message
    assert traj.times[-1] == 0.0 and np.all(np.isfinite(traj.final.values()))
    adaptive = integrate(u0, SolverConfig(0.05, 0.02, adaptive=True))
    assert adaptive.status == "ok" and adaptive.times[-1] == pytest.approx(0.02)


def test_blowup_is_flagged(monkeypatch):
    real_step = solver._Stepper.step
    calls = []

    def poisoned(self, uh, dt, n0=None):
        calls.append(dt)
        out = real_step(self, uh, dt, n0)
        return out * np.nan if len(calls) == 3 else out

    monkeypatch.setattr(solver._Stepper, "step", poisoned)
    traj = integrate(taylor_green(TG), SolverConfig(1e-2, 1.0))
    assert traj.status == "blowup" and traj.blowup
    assert traj.steps == 2 and np.all(np.isfinite(traj.final.values()))


def test_energy_report_detects_defects():
    traj = integrate(taylor_green(TG), SolverConfig(1e-2, 0.1))
    traj.dissipation[-1] *= 1.01
    with pytest.raises(ConservationError):
        energy_report(traj)
    assert energy_report(traj, check=False).balance_defect > 1e-6


def test_rejects_bad_initial_data():
    rng = np.random.default_rng(0)
    with pytest.raises(PreconditionError):
        integrate(VectorField.from_physical(TG, rng.standard_normal((2,) + TG.shape)), SolverConfig(1e-2, 0.1))


def test_scaling_symmetry():
    cfg = SolverConfig(1e-3, 0.1)
    assert scaling_symmetry_check(taylor_green(TG), 2.0, 0.0, cfg) == 0.0
    assert scaling_symmetry_check(taylor_green(TG), 2.0, 0.1, cfg) <= 1e-6


def test_scaling_defect_grows_when_underresolved():
    defects = []
    for M in (64, 32, 16):
        g = SpectralGrid(2, 2 * math.pi, M)
        u0 = random_solenoidal(g, 3, k_hi=4.0).scaled(5.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ResolutionWarning)
            defects.append(scaling_symmetry_check(u0, 2.0, 0.05, SolverConfig(2e-3, 0.05)))
    assert defects[0] <= 1e-6
    assert defects[0] < defects[1] < defects[2]


def test_picard_zero_and_small_data():
    zero = VectorField(TG, spectral=np.zeros((2,) + TG.shape, complex))
    res = picard_iterate(zero, 0.5)
    assert res.T == 0.5 and res.ratios == [] and np.abs(res.final.values()).max() == 0
    u0 = smooth_datum(TG, 1, band=4.0)
    u0 = u0.scaled(1e-3 / l2_norm(u0))
    res = picard_iterate(u0, 0.5, n_steps=32)
    assert res.halvings == 0 and res.contracted and res.converged
    assert res.ratios[0] < 1e-2


def test_picard_agrees_with_time_stepper():
    u0 = smooth_datum(TG, 6, band=4.0, amp=5.0)
    res = picard_iterate(u0, 0.5, n_steps=64)
    assert res.contracted
    traj = integrate(u0, SolverConfig(res.T / 200, res.T))
    assert relative_l2(res.final, traj.final) <= 1e-4


def test_picard_halves_when_large():
    u0 = smooth_datum(TG, 6, band=4.0, amp=400.0)
    res = picard_iterate(u0, 2.0, n_steps=16, n_iter=15)
    assert res.halvings >= 1
    assert res.T is None or res.T < 2.0
    assert len(res.attempts) == res.halvings + 1
