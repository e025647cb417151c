import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlspread.errors import ConfigError, PreconditionError
from nlspread.fbsolver import (
    FbState,
    Outcome,
    Profile,
    SolverConfig,
    Trajectory,
    boundary_flux,
    classify_outcome,
    coeffs,
    init_state,
    nonlocal_term,
    simulate,
    step,
    y_nodes,
)
from nlspread.kernel import Gaussian, Laplace

G = Gaussian(1.0)
H_STAR = 0.787997  # d=2, f0=1, nu=0.1, Gaussian(1)


def spread_cfg(**kw):
    base = dict(d=2.0, nu=0.1, mu=1.0, h0=1.2 * H_STAR, kernel=G, n=200, t_end=60.0)
    base.update(kw)
    return SolverConfig(**base)


# ------------------------------------------------------------------ init


def test_parabolic_profile():
    st0 = init_state(SolverConfig(1.0, 0.0, 1.0, 1.0, G, n=101))
    assert st0.w[50] == pytest.approx(1.0)
    assert st0.w[0] == st0.w[-1] == 0.0
    assert (st0.g, st0.h, st0.t) == (-1.0, 1.0, 0.0)
    x = st0.x
    assert np.allclose(st0.w[1:-1], 1 - x[1:-1] ** 2)
    half = init_state(SolverConfig(1.0, 0.0, 1.0, 1.0, G, n=101), Profile.parabolic(0.5))
    assert half.max_w == pytest.approx(0.5)


def test_custom_profiles_rejected():
    cfg = SolverConfig(1.0, 0.0, 1.0, 1.0, G, n=64)
    with pytest.raises(PreconditionError):
        init_state(cfg, Profile.custom(np.zeros(64)))
    bad = np.ones(64)
    with pytest.raises(PreconditionError):
        init_state(cfg, Profile.custom(bad))
    neg = np.zeros(64)
    neg[5] = -1
    neg[6] = 1
    with pytest.raises(PreconditionError):
        init_state(cfg, Profile.custom(neg))
    with pytest.raises(PreconditionError):
        init_state(cfg, Profile.custom(np.zeros(10)))
    with pytest.raises(PreconditionError):
        init_state(cfg, Profile.parabolic(0.0))


def test_config_validation():
    for kw in (dict(d=0), dict(nu=-1), dict(mu=-1), dict(h0=0), dict(n=10), dict(cfl=1.5), dict(t_end=0)):
        base = dict(d=1.0, nu=0.0, mu=1.0, h0=1.0, kernel=G)
        base.update(kw)
        with pytest.raises(ConfigError):
            SolverConfig(**base)


# ---------------------------------------------------------------- coeffs


def test_coeffs_examples():
    A, B = coeffs(0.0, -1.0, 1.0, 0.0, 0.0)
    assert A == 1.0
    assert coeffs(0.0, -1.0, 1.0, -0.5, 0.5)[1] == 0.0
    assert coeffs(1.0, -1.0, 1.0, -0.5, 0.5)[1] == pytest.approx(-0.5)
    with pytest.raises(PreconditionError):
        coeffs(0.0, 1.0, 1.0, 0.0, 0.0)


def test_node_motion_matches_transport_sign():
    # a node at fixed y moves with dx/dt = -B/A
    g, h, gr, hr = -1.3, 2.1, -0.4, 0.7
    y = np.linspace(-1, 1, 7)
    A, B = coeffs(y, g, h, gr, hr)
    dxdt = (y + 1) / 2 * hr + (1 - y) / 2 * gr
    assert np.allclose(dxdt, -B / A)


# --------------------------------------------------------------- nonlocal


def test_nonlocal_zero_state():
    st0 = FbState(0.0, -1.0, 1.0, np.zeros(100))
    assert np.all(nonlocal_term(st0, G, 1.0) == 0.0)
    assert boundary_flux(st0, G, 1.0) == (0.0, 0.0)


def test_nonlocal_constant_field_laplace():
    n, hh, c0, d = 400, 1.0, 0.7, 1.3
    k = Laplace(1.0)
    st0 = FbState(0.0, -hh, hh, np.full(n, c0))
    y = y_nodes(n)
    got = nonlocal_term(st0, k, d)
    exact = -d * c0 * (k.tail_mass((1 - y) * hh) + k.tail_mass((1 + y) * hh))
    inner = slice(1, -1)
    assert np.max(np.abs(got[inner] - exact[inner]) / np.abs(exact[inner])) <= 1e-4


def test_nonlocal_impulse():
    n, d = 80, 0.9
    w = np.zeros(n)
    j = 31
    w[j] = 2.0
    st0 = FbState(0.0, -2.0, 3.0, w)
    got = nonlocal_term(st0, G, d)
    x = st0.x
    dx = x[1] - x[0]
    expect = d * dx * G.eval(x - x[j]) * 2.0 - d * w
    assert np.allclose(got, expect, rtol=1e-12, atol=1e-14)


def test_flux_constant_field_laplace():
    n, c0, mu = 400, 0.6, 1.7
    k = Laplace(1.0)
    st0 = FbState(0.0, -0.8, 1.5, np.full(n, c0))
    hr, gr = boundary_flux(st0, k, mu)
    expect = mu * c0 * (1 - math.exp(-2.3)) / 2
    assert hr == pytest.approx(expect, rel=1e-5)
    assert gr == pytest.approx(-expect, rel=1e-5)


def test_flux_symmetric():
    cfg = SolverConfig(1.0, 0.0, 2.0, 1.5, G, n=121)
    st0 = init_state(cfg)
    hr, gr = boundary_flux(st0, G, 2.0)
    assert hr > 0 and hr == pytest.approx(-gr, rel=1e-14)


# ------------------------------------------------------------------ step


def test_zero_state_equilibrium():
    cfg = SolverConfig(1.0, 0.2, 1.0, 1.0, G, n=64)
    st0 = FbState(0.0, -1.0, 1.0, np.zeros(64))
    nxt = step(st0, cfg)
    assert nxt.t > 0
    assert (nxt.g, nxt.h) == (-1.0, 1.0)
    assert np.all(nxt.w == 0)


def test_step_respects_requested_dt():
    cfg = SolverConfig(1.0, 0.2, 1.0, 1.0, G, n=64)
    st0 = init_state(cfg)
    assert step(st0, cfg, dt=1e-3).t == pytest.approx(1e-3)


def test_frozen_fronts_when_mu_zero():
    cfg = SolverConfig(1.0, 0.2, 0.0, 1.0, G, n=100, t_end=5.0)
    tr = simulate(cfg)
    assert np.all(tr.h == 1.0) and np.all(tr.g == -1.0)


def test_positivity_and_fronts_over_500_steps():
    cfg = spread_cfg(n=200)
    s = init_state(cfg)
    from nlspread.fbsolver import StepStats

    stats = StepStats()
    for _ in range(500):
        s = step(s, cfg, stats=stats)
        assert s.h_rate > 0 and s.g_rate < 0
    assert stats.clamps == 0 and stats.min_w >= 0


def test_symmetry_without_drift():
    tr = simulate(SolverConfig(1.0, 0.0, 1.0, 1.0, G, n=150, t_end=10.0))
    assert tr.diagnostics.max_asymmetry <= 1e-9
    assert np.all(np.abs(tr.g + tr.h) <= 1e-9 * np.maximum(1, tr.h))


def test_sampling_and_trajectory_invariants():
    cfg = SolverConfig(1.0, 0.1, 1.0, 1.0, G, n=100, t_end=2.0, sample_dt=0.25, snapshot_every=2)
    tr = simulate(cfg)
    assert np.allclose(tr.t, np.arange(9) * 0.25)
    assert np.all(np.diff(tr.t) > 0) and np.all(tr.mass >= 0)
    assert [s.t for s in tr.snapshots] == [0.0, 0.5, 1.0, 1.5, 2.0]
    snap = tr.snapshots[2]
    assert snap.x[0] == pytest.approx(tr.g[4]) and snap.x[-1] == pytest.approx(tr.h[4])


def test_simulate_deterministic():
    cfg = SolverConfig(1.0, 0.3, 2.0, 1.0, Laplace(1.0), n=80, t_end=3.0)
    a, b = simulate(cfg), simulate(cfg)
    for name in ("t", "g", "h", "max_w", "mass"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_advection_warning():
    cfg = SolverConfig(1.0, 5.0, 1.0, 1.0, G, n=64, t_end=0.2)
    assert cfg.advection_warning() is not None
    with pytest.warns(RuntimeWarning):
        simulate(cfg)


def test_comparison_with_larger_initial_data():
    cfg = SolverConfig(1.0, 0.2, 1.0, 1.5, G, n=200, t_end=10.0)
    base = simulate(cfg, Profile.parabolic(0.8))
    big = simulate(cfg, Profile.parabolic(0.96))
    assert np.all(big.h >= base.h - 1e-9)
    assert np.all(big.g <= base.g + 1e-9)


@settings(max_examples=6, deadline=None)
@given(
    nu=st.floats(0.0, 0.4),
    mu=st.floats(0.1, 4.0),
    amp=st.floats(0.2, 1.6),
)
def test_boundedness_by_ode_comparison(nu, mu, amp):
    cfg = SolverConfig(1.0, nu, mu, 1.0, G, n=100, t_end=5.0, sample_dt=0.5)
    tr = simulate(cfg, Profile.parabolic(amp))
    assert tr.diagnostics.max_w_seen <= max(amp, 1.0) + 0.02
    assert tr.diagnostics.clamps == 0


# ---------------------------------------------------------- convergence


@pytest.fixture(scope="module")
def spreading_runs():
    return simulate(spread_cfg(n=200)), simulate(spread_cfg(n=400))


def test_grid_convergence(spreading_runs):
    coarse, fine = spreading_runs
    assert abs(coarse.h[-1] - fine.h[-1]) <= 0.02 * fine.h[-1]


def test_spreading_plateau(spreading_runs):
    fine = spreading_runs[1]
    fs = fine.final_state
    core = np.abs(y_nodes(fs.n)) <= 0.5
    assert np.max(np.abs(fs.w[core] - 1.0)) <= 0.05
    assert classify_outcome(fine, spread_cfg(n=400), H_STAR) is Outcome.SPREADING


# -------------------------------------------------------- classification


def _synthetic(t, g, h, maxw, hr, gr, final=None, t_end=None):
    z = np.asarray
    tr = Trajectory(z(t), z(g), z(h), z(hr), z(gr), z(maxw), z(maxw), final_state=final)
    tr.t_end = t_end if t_end is not None else float(t[-1])
    return tr


def test_classify_all_zero_is_vanishing():
    cfg = SolverConfig(2.0, 0.1, 1.0, 0.4, G, t_end=10.0)
    t = np.linspace(0, 10, 11)
    tr = _synthetic(t, -0.4 * np.ones(11), 0.4 * np.ones(11), np.zeros(11), np.zeros(11), np.zeros(11))
    assert classify_outcome(tr, cfg, H_STAR) is Outcome.VANISHING


def test_classify_linear_growth_is_spreading():
    cfg = SolverConfig(2.0, 0.1, 1.0, 1.0, G, n=100, t_end=50.0)
    t = np.linspace(0, 50, 51)
    h = 1 + 0.3 * t
    final = FbState(50.0, -h[-1], h[-1], np.concatenate([[0.0], np.ones(98), [0.0]]), -0.3, 0.3)
    tr = _synthetic(t, -h, h, np.ones(51), 0.3 * np.ones(51), -0.3 * np.ones(51), final)
    assert classify_outcome(tr, cfg, H_STAR) is Outcome.SPREADING


def test_classify_short_run_is_undecided():
    cfg = SolverConfig(2.0, 0.1, 1.0, 0.4, G, n=100, t_end=60.0)
    tr = simulate(replace(cfg, t_end=1.0))
    tr.t_end = 60.0
    assert classify_outcome(tr, cfg, H_STAR) is Outcome.UNDECIDED
    assert classify_outcome(Trajectory.empty(), cfg, H_STAR) is Outcome.UNDECIDED
