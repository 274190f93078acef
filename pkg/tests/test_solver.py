from __future__ import annotations

import numpy as np
import pytest

from nanopteron import params as P
from nanopteron.io import dumps
from nanopteron.kdv import sigma_integral
from nanopteron.params import DimerParams
from nanopteron.ripple import period_interval
from nanopteron.solver import (
    ConvergenceError,
    NanopteronProblem,
    NanopteronState,
    SolverConfig,
    compute_kappa,
    descale,
    iterate_nanopteron,
    leading_order_profile,
)
from nanopteron.spectral import LocalizedField, iota_values

W = 2.0


def slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


@pytest.fixture(scope="module")
def problems():
    return {e: NanopteronProblem(DimerParams(W, e)) for e in (0.2, 0.1, 0.05, 0.025)}


# chi and kappa ---------------------------------------------------------------------


def test_chi_is_odd(problems):
    for prob in problems.values():
        chi = prob.chi
        assert np.max(np.abs(chi + prob.grid.reflect(chi))) < 1e-10 * np.max(np.abs(chi))


@pytest.mark.parametrize("eps,level", [(0.1, 1e-4), (0.05, 1e-8), (0.025, 1e-12)])
def test_chi_envelope_follows_sigma(problems, eps, level):
    # at eps = 0.2 the J1 pole at eps K = pi leaves a 1e-4 tail not enveloped by sigma
    prob = problems[eps]
    core = prob.sigma > level * prob.p.sigma0
    ratio = np.abs(prob.chi[core]) / prob.sigma[core]
    assert ratio.max() < 30.0


def test_chi_sup_is_eps_independent(problems):
    sups = [np.max(np.abs(problems[e].chi)) for e in (0.2, 0.1, 0.05)]
    assert max(sups) / min(sups) < 1.5


def test_kappa_agreement_and_exponential_gap(problems):
    gaps = {e: abs(pr.kappa - pr.kappa_star) / abs(pr.kappa_star) for e, pr in problems.items()}
    assert gaps[0.1] < 1e-6
    assert gaps[0.05] < gaps[0.2] / 100
    assert gaps[0.05] < gaps[0.1] < gaps[0.2]


def test_kappa_star_lower_bound_and_sign(problems):
    signs = set()
    for pr in problems.values():
        p = pr.p
        assert pr.kappa_star > (1 + p.w) * sigma_integral(p) * 2 * p.w > 0
        signs.add(np.sign(pr.kappa))
    assert signs == {1.0}


def test_compute_kappa_function():
    k, ks = compute_kappa(DimerParams(W, 0.1))
    assert abs(k - ks) / ks < 1e-6


# forcing terms -------------------------------------------------------------------


def test_zero_state_terms(problems):
    prob = problems[0.1]
    t = prob.terms(NanopteronState.zero(prob.grid), prob.ripple(0.0))
    nonzero = {k for k, v in t.items() if np.max(np.abs(v)) > 0}
    assert nonzero == {"j1", "l1"}


@pytest.mark.xfail(strict=True, reason="measured sup-norm of j1 scales like eps^2 (slope 1.94); "
                   "the O(eps) statement is an upper bound, not the rate")
def test_j1_slope_window(problems):
    eps = sorted(problems)
    sups = []
    for e in eps:
        pr = problems[e]
        t = pr.terms(NanopteronState.zero(pr.grid), pr.ripple(0.0))
        sups.append(np.max(np.abs(t["j1"])))
    s = slope(eps, sups)
    assert 0.9 <= s <= 1.2


def test_j1_is_order_eps(problems):
    eps = sorted(problems)
    vals = []
    for e in eps:
        pr = problems[e]
        t = pr.terms(NanopteronState.zero(pr.grid), pr.ripple(0.0))
        vals.append(np.max(np.abs(t["j1"])) / e)
    assert np.all(np.diff(vals) > 0)  # j1/eps shrinks as eps shrinks


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_term_parity_at_solution(sweep, eps):
    state, _, prob = sweep[eps]
    t = prob.terms(state, prob.ripple(state.a))
    prob.check_term_parity(t)
    for k, v in t.items():
        par = "even" if k.startswith("j") else "odd"
        f = LocalizedField(prob.grid, v, par)
        assert f.parity_defect() <= 1e-10 * max(1.0, f.sup())


def test_l31_matches_its_definition(sweep):
    state, _, prob = sweep[0.2]
    a = state.a
    t = prob.terms(state, prob.ripple(a))
    alt = t["l3"] + 2 * a * prob.chi
    # index 0 (X = -L) has no mirror point; chi is odd-projected there
    assert np.max(np.abs(t["l31"] - alt)[1:]) < 1e-9 * abs(a)


# P_eps ----------------------------------------------------------------------------


def test_P_solve_round_trip(problems):
    prob = problems[0.1]
    X = prob.grid.X
    v = X * np.exp(-X * X / 4) + 0.3 * np.sin(2 * X) / np.cosh(X)
    g = prob.ops.T(v)
    u = prob.P_solve(g)
    assert np.max(np.abs(u - v)) < 1e-7 * np.max(np.abs(v))
    assert prob.last_p_info.residual < 1e-7


def test_P_solve_of_chi_is_zero(problems):
    prob = problems[0.1]
    u = prob.P_solve(prob.chi)
    assert np.max(np.abs(u)) < 1e-12 * np.max(np.abs(prob.chi))


def test_P_solve_scaling(problems):
    ratios = []
    for e in (0.2, 0.1, 0.05):
        pr = problems[e]
        t = pr.terms(NanopteronState.zero(pr.grid), pr.ripple(0.0))
        g = pr.grid.odd_part(t["l1"])
        ratios.append(e * np.max(np.abs(pr.P_solve(g))) / np.max(np.abs(g)))
    # eps * |P g| / |g| must not grow as eps shrinks
    assert np.all(np.diff(ratios) <= 0)


# N step and iteration ---------------------------------------------------------------


def test_N_step_from_zero(problems):
    n1, n3 = [], []
    for e in (0.2, 0.1, 0.05, 0.025):
        pr = problems[e]
        z = NanopteronState.zero(pr.grid)
        new, info = pr.N_step(z)
        t = pr.terms(z, pr.ripple(0.0))
        direct = pr.A.solve(LocalizedField(pr.grid, pr.grid.even_part(t["j1"]), "even"))
        np.testing.assert_allclose(new.eta1.values, direct.values, atol=1e-14)
        new.check()
        n1.append(new.eta1.sup() / e)
        n3.append(abs(info["N3"]) / e**2)
    assert np.all(np.diff(n1) < 0)
    assert max(n3) < 0.1


def test_fixed_point_idempotence(sweep):
    for e in (0.1, 0.05):
        state, _, prob = sweep[e]
        new, _ = prob.N_step(state)
        d = max(np.max(np.abs(new.eta1.values - state.eta1.values)),
                np.max(np.abs(new.eta2.values - state.eta2.values)))
        assert d < 1e-10
        assert abs(new.a - state.a) <= 1e-10 * abs(state.a) + 1e-16


def test_solve_residual_and_report(sol01):
    state, rep, prob = sol01
    assert rep.theta_residual["total"] < 1e-7
    assert rep.theta_residual["component1"] < 1e-7
    assert rep.theta_residual["component2"] < 1e-7
    assert rep.extra["consistency"] < 1e-9
    assert state.eta1.parity_defect() < 1e-10
    assert state.eta2.parity_defect() < 1e-10
    d = rep.to_dict()
    for key in ("iterations", "final_update_norm", "theta_residual", "a_value", "eta_norms",
                "kappa_eps", "kappa_star", "boundary", "consistency"):
        assert key in d
    assert set(d["eta_norms"]) >= {"r0", "r1", "r2"}


def test_boundary_decay(sol01):
    _, rep, _ = sol01
    assert rep.boundary["eta1"] < 1e-8
    assert rep.boundary["eta2"] < 1e-8


@pytest.mark.xfail(strict=True, reason="measured eta norms scale like eps^2 (slopes 2.02 to 2.03); "
                   "the O(eps) bound holds but is not the rate")
def test_eta_slope_window(sweep):
    eps = sorted(sweep)
    s = slope(eps, [sweep[e][1].eta_norms["r1"] for e in eps])
    assert 0.8 <= s <= 1.2


def test_eta_is_order_eps(sweep):
    eps = sorted(sweep)
    for key in ("r1", "h1", "sup"):
        vals = [sweep[e][1].eta_norms[key] / e for e in eps]
        assert np.all(np.diff(vals) > 0)


def test_amplitude_super_polynomial(sweep):
    eps = sorted(sweep, reverse=True)
    for r in (1, 2, 3):
        seq = [abs(sweep[e][1].a_value) / e**r for e in eps]
        assert np.all(np.diff(seq) < 0), (r, seq)


def test_divergence_or_stall_raises():
    with pytest.raises(ConvergenceError) as exc:
        iterate_nanopteron(DimerParams(W, 0.1), max_iter=3)
    assert len(exc.value.history) == 3


def test_determinism(sol01):
    _, rep, _ = sol01
    _, rep2, _ = iterate_nanopteron(DimerParams(W, 0.1))
    assert dumps(rep.to_dict()) == dumps(rep2.to_dict())


# descale --------------------------------------------------------------------------------


def test_leading_order_error_is_cubic(sweep):
    eps = sorted(sweep)
    errs = []
    for e in eps:
        state, _, prob = sweep[e]
        prof = descale(state, prob.ripple(state.a), prob.p, prob.grid)
        j = np.arange(-int(20 / e), int(20 / e) + 1)
        v = prof.values(j)
        lo = leading_order_profile(j, prob.p)
        errs.append(max(np.max(np.abs(v[0] - lo)), np.max(np.abs(v[1] - lo))))
    assert slope(eps, errs) >= 2.9
    assert max(np.array(errs) / np.array(eps) ** 3) < 1.0


def test_p1_p2_agree_at_leading_order(sweep):
    eps = sorted(sweep)
    gaps = []
    for e in eps:
        state, _, prob = sweep[e]
        v = descale(state, prob.ripple(state.a), prob.p, prob.grid).values(
            np.arange(-200, 201) / e / 10)
        gaps.append(np.max(np.abs(v[0] - v[1])) / np.max(np.abs(v[0])))
    assert np.all(np.diff(gaps) > 0)
    assert gaps[0] < 0.05


def test_ripple_period_in_interval(sweep):
    lo, hi = period_interval(W)
    for e, (state, _, prob) in sweep.items():
        prof = descale(state, prob.ripple(state.a), prob.p, prob.grid)
        assert lo <= prof.period <= hi


@pytest.mark.parametrize("eps,tol", [(0.1, 1e-7), (0.05, 1e-7)])
def test_lattice_equations_hold(sweep, eps, tol):
    state, _, prob = sweep[eps]
    prof = descale(state, prob.ripple(state.a), prob.p, prob.grid)
    x = np.linspace(-150, 150, 1201)
    r1, r2 = prof.lattice_residual(x)
    assert r1 < tol and r2 < tol


def test_leading_order_descale_is_flagged(sol01):
    _, _, prob = sol01
    lo = descale(None, None, prob.p, prob.grid)
    assert lo.approximate
    j = np.arange(-50, 51)
    ref = leading_order_profile(j, prob.p)
    # J2 at eps K instead of J2(0) changes the profile at relative order eps^2
    assert np.max(np.abs(lo.values(j)[0] - ref)) < 5 * 0.1**2 * np.max(ref)


def test_theta_reflection_symmetry(sol01):
    state, _, prob = sol01
    th1 = prob.sigma + state.eta1.values
    th2 = state.eta2.values
    g = prob.grid
    assert np.max(np.abs(th1 - g.reflect(th1))[1:]) < 1e-12
    assert np.max(np.abs(th2 + g.reflect(th2))[1:]) < 1e-12


def test_solver_config_round_trip():
    cfg = SolverConfig(L=30.0, N=2048)
    d = cfg.to_dict()
    assert d["L"] == 30.0 and d["N"] == 2048 and d["damping"] == 0.5
    assert float(P.T_eps_symbol(find_K(), DimerParams(W, 0.1))) == pytest.approx(0.0, abs=1e-10)


def find_K():
    from nanopteron.ripple import find_Keps
    return find_Keps(DimerParams(W, 0.1))
