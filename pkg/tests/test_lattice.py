from __future__ import annotations

import numpy as np
import pytest

from nanopteron import params as P
from nanopteron.lattice import (
    BlowUpError,
    ChainState,
    ChainTooShortError,
    SimConfig,
    SiteSampler,
    energy,
    init_traveling,
    momentum_defect,
    rhs,
    shape_error,
    simulate,
    step,
)
from nanopteron.params import DimerParams
from nanopteron.solver import descale

W = 2.0
P01 = DimerParams(W, 0.1)


def chain(r, v=None):
    r = np.asarray(r, dtype=float)
    return ChainState(r, np.zeros_like(r) if v is None else v, 0.0, P01)


# right-hand side ---------------------------------------------------------------------


def test_rhs_zero():
    assert np.all(rhs(chain(np.zeros(16))) == 0.0)


@pytest.mark.parametrize("k", [4, 5])
def test_rhs_single_site_stencil(k):
    d = 0.1
    r = np.zeros(12)
    r[k] = d
    acc = rhs(chain(r))
    F = d + d * d
    expected = np.zeros(12)
    expected[k] = -(1 + W) * F
    if k % 2 == 0:
        # odd neighbours: weight w on their j+1 partner, 1 on their j-1 partner
        expected[k - 1] = W * F
        expected[k + 1] = F
    else:
        expected[k - 1] = F
        expected[k + 1] = W * F
    np.testing.assert_allclose(acc, expected, atol=1e-16)


@pytest.mark.parametrize("branch", [0, 1])
def test_linear_plane_wave(branch):
    J = 64
    k = 2 * np.pi * 5 / J
    j = np.arange(J)
    lam = P.lambda_pm(k, W)[branch]
    om = np.sqrt(lam)
    A = 1e-8
    B = (1 + W - lam) * A / P.beta(k, W)
    amp = np.where(j % 2 == 1, A, B)

    def exact(t, d=0):
        return ((-1j * om) ** d * amp * np.exp(1j * (k * j - om * t))).real

    s = chain(exact(0.0), exact(0.0, 1))
    for _ in range(500):
        s = step(s, 0.01)
    assert np.max(np.abs(s.r - exact(s.t))) < 1e-6 * A


# integrator ----------------------------------------------------------------------------


def test_zero_data_stays_zero():
    s = chain(np.zeros(32))
    for _ in range(10):
        s = step(s, 0.02)
    assert np.all(s.r == 0) and np.all(s.v == 0)


def test_fourth_order_convergence():
    J = 64
    j = np.arange(J)
    r0 = 0.1 / np.cosh(0.3 * (j - J / 2)) ** 2

    def run(dt, T=2.0):
        s = chain(r0.copy())
        for _ in range(int(round(T / dt))):
            s = step(s, dt)
        return s.r

    a, b, c = run(0.02), run(0.01), run(0.005)
    ratio = np.max(np.abs(a - b)) / np.max(np.abs(b - c))
    assert 14.0 < ratio < 18.0


def test_linear_regime_energy_and_momentum():
    J = 200
    j = np.arange(J)
    s = chain(1e-4 / np.cosh(0.2 * (j - J / 2)) ** 2)
    e0, m0 = energy(s), momentum_defect(s)
    drift = 0.0
    for n in range(10_000):
        s = step(s, 0.01)
        if n % 100 == 99:
            drift = max(drift, abs(energy(s) - e0) / e0)
    assert drift < 1e-8
    assert abs(momentum_defect(s) - m0) < 1e-15


def test_blow_up_is_reported():
    s = chain(np.full(8, 1e200))
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(BlowUpError, match="t ="):
        for _ in range(5):
            s = step(s, 0.02)


def test_sim_config_checks():
    SimConfig().check(P01)
    with pytest.raises(ValueError, match="sqrt"):
        SimConfig(dt=0.3).check(P01)
    with pytest.raises(ValueError):
        SimConfig(J=801).check(P01)
    with pytest.raises(ValueError):
        ChainState(np.zeros(3), np.zeros(3), 0.0, P01)


# initialization and shape tracking -------------------------------------------------------


@pytest.fixture(scope="module")
def profiles(sol01):
    state, _, prob = sol01
    full = descale(state, prob.ripple(state.a), prob.p, prob.grid)
    lo = descale(None, None, prob.p, prob.grid)
    return full, lo


def test_init_traveling_samples_profile(profiles):
    full, _ = profiles
    cfg = SimConfig(J=800)
    s = init_traveling(full, cfg)
    jc = cfg.J // 2
    assert int(np.argmax(s.r)) in (jc - 1, jc, jc + 1)
    x = np.arange(cfg.J) - jc
    vals = full.values(x)
    odd = np.arange(cfg.J) % 2 == 1
    expected = np.where(odd, vals[0], vals[1])
    assert np.max(np.abs(s.r - expected)) < 1e-9 * np.max(np.abs(s.r))
    der = full.derivs(x)
    vexp = -full.c * np.where(odd, der[0], der[1])
    assert np.max(np.abs(s.v - vexp)) < 1e-9 * np.max(np.abs(s.v))
    assert not s.approximate


def test_site_profiles_differ_by_split(profiles):
    full, _ = profiles
    s = init_traveling(full, SimConfig(J=800))
    jc = 400
    # odd-site and even-site neighbours of the peak follow p1 and p2
    v = full.values(np.array([-1.0, 1.0]))
    assert s.r[jc - 1] == pytest.approx(v[0][0], rel=1e-9)
    assert s.r[jc + 1] == pytest.approx(v[0][1], rel=1e-9)
    assert s.r[jc] == pytest.approx(full.values(np.array([0.0]))[1][0], rel=1e-9)


def test_leading_order_data_flagged(profiles):
    _, lo = profiles
    s = init_traveling(lo, SimConfig(J=800))
    assert s.approximate


def test_chain_too_short(profiles):
    full, _ = profiles
    with pytest.raises(ChainTooShortError):
        init_traveling(full, SimConfig(J=1000))
    with pytest.raises(ChainTooShortError):
        init_traveling(full, SimConfig(J=40))


def test_shape_error_at_t0(profiles):
    full, _ = profiles
    s = init_traveling(full, SimConfig(J=800))
    err, shift = shape_error(s.r, SiteSampler(full, 800), s.r, 0.0)
    assert err < 1e-14 and abs(shift) < 1e-9


def test_shape_error_recovers_known_shift(profiles):
    full, _ = profiles
    sm = SiteSampler(full, 800)
    r = sm.sample(3.37)
    err, shift = shape_error(r, sm, sm.sample(0.0))
    assert shift == pytest.approx(3.37, abs=1e-6)
    # the ripple does not wrap exactly on the periodic chain
    assert err < 1e-8 * np.max(np.abs(r))


@pytest.fixture(scope="module")
def short_runs(profiles):
    full, lo = profiles
    cfg = SimConfig(dt=0.02, T=50.0, J=800, sample_every=5.0)
    return simulate(full, cfg), simulate(lo, cfg)


def test_full_data_travels(short_runs):
    full, _ = short_runs
    summ = full.summary()
    assert summ["speed_rel_error"] < 1e-6
    assert summ["energy_drift"] < 1e-9
    assert summ["shape_error_t0"] < 1e-14
    assert summ["shape_error_max"] < 1e-8
    assert len(full.rows()) == 11


def test_leading_order_data_is_worse(short_runs):
    full, lo = short_runs
    assert lo.approximate
    assert lo.errors[-1] > 100 * full.errors[-1]
    assert lo.errors[-1] > lo.errors[1]
