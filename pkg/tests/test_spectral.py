from __future__ import annotations

import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erfc

from nanopteron import params as P
from nanopteron.operators import LongWaveOps, PeriodicPair
from nanopteron.params import DimerParams
from nanopteron.spectral import (
    BoundaryDecayWarning,
    Grid,
    LocalizedField,
    ParityError,
    PeriodicFieldCoeffs,
    ResolutionError,
    SymbolError,
    apply_multiplier_localized,
    apply_multiplier_modulated,
    apply_multiplier_periodic,
    fft,
    ifft,
    iota_quadrature,
    product_mixed,
    read_localized_csv,
    read_periodic_csv,
    spectral_derivative,
    weighted_norm,
)

PAR = DimerParams(2.0, 0.1)


def gaussian(grid, s=1.0, x0=0.0):
    return np.exp(-((grid.X - x0) ** 2) / s**2)


# grid ----------------------------------------------------------------------------


def test_grid_basics():
    g = Grid(20.0, 1024)
    assert g.dx * g.N == pytest.approx(2 * g.L)
    assert np.all(np.diff(g.K_sorted) > 0)
    assert g.K_sorted[0] == pytest.approx(-np.pi * g.N / 2 / g.L)
    with pytest.raises(ValueError):
        Grid(20.0, 1000)


def test_grid_resolution_guard_escalates():
    g = Grid.for_frequency(40.0, 256, 80.0)
    assert g.k_nyquist >= 5 * 80.0
    assert g.N > 256
    with pytest.raises(ResolutionError):
        Grid(40.0, 256).require_resolution(80.0)


def test_round_trip_and_parseval():
    g = Grid(20.0, 1024)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(g.N)
    back = ifft(fft(v)).real
    assert np.max(np.abs(back - v)) < 1e-12 * np.max(np.abs(v))
    c = fft(v)
    assert np.sum(np.abs(c) ** 2) / g.N == pytest.approx(np.sum(v * v), rel=1e-10)


# localized multipliers -----------------------------------------------------------------


def test_identity_symbol():
    g = Grid(20.0, 1024)
    f = LocalizedField(g, gaussian(g), "even")
    out = apply_multiplier_localized(lambda K: np.ones_like(K), f)
    assert np.max(np.abs(out.values - f.values)) < 1e-14


def test_second_derivative_of_gaussian():
    g = Grid(20.0, 1024)
    f = LocalizedField(g, gaussian(g), "even")
    out = apply_multiplier_localized(lambda K: (1j * K) ** 2, f)
    X = g.X
    exact = (4 * X**2 - 2) * np.exp(-X**2)
    assert np.max(np.abs(out.values - exact)) < 1e-8


def test_varpi0_green_function():
    g = Grid(40.0, 4096)
    s = 0.05
    delta = np.exp(-g.X**2 / (2 * s * s)) / (s * np.sqrt(2 * np.pi))
    out = apply_multiplier_localized(P.symbol(P.varpi0, PAR, "even"),
                                     LocalizedField(g, delta, "even"))
    a = np.sqrt(PAR.alpha_w)
    X = np.abs(g.X)
    # exponential kernel e^{-|X|/a}/(2a) convolved with the Gaussian, in closed form
    conv = (0.25 / a) * np.exp(s * s / (2 * a * a)) * (
        np.exp(-X / a) * erfc((s * s / a - X) / (s * np.sqrt(2)))
        + np.exp(X / a) * erfc((s * s / a + X) / (s * np.sqrt(2))))
    conv = np.nan_to_num(conv)
    exact = -PAR.c_w2 * conv
    assert np.max(np.abs(out.values - exact)) < 1e-8
    far = X > 0.5
    green = -PAR.c_w2 * np.exp(-X / a) / (2 * a)
    np.testing.assert_allclose(out.values[far], green[far] * np.exp(s * s / (2 * a * a)),
                               rtol=1e-6, atol=1e-14)


def test_nonfinite_symbol_is_rejected():
    g = Grid(20.0, 256)
    f = LocalizedField(g, gaussian(g), "even")
    with np.errstate(divide="ignore"), pytest.raises(SymbolError, match="K ="):
        apply_multiplier_localized(lambda K: 1.0 / K, f)


def test_even_symbols_preserve_parity():
    g = Grid(20.0, 1024)
    sym = P.symbol(P.varpi0, PAR, "even")
    fe = LocalizedField(g, gaussian(g, 1.0, 1.0) + gaussian(g, 1.0, -1.0), "even")
    fo = LocalizedField(g, gaussian(g, 1.0, 1.0) - gaussian(g, 1.0, -1.0), "odd")
    oe, oo = apply_multiplier_localized(sym, fe), apply_multiplier_localized(sym, fo)
    assert oe.parity == "even" and oo.parity == "odd"
    assert oe.parity_defect() < 1e-14
    assert oo.parity_defect() < 1e-14


# periodic multipliers --------------------------------------------------------------


def test_periodic_identity_and_single_mode():
    K = 3.7
    s = PeriodicFieldCoeffs.sine(K, 4)
    same = apply_multiplier_periodic(lambda k: np.ones_like(k), s)
    np.testing.assert_array_equal(same.coeffs, s.coeffs)
    lam = P.symbol(lambda k, p: P.lambda_plus(0.1 * k, p), 2.0, "even")
    out = apply_multiplier_periodic(lam, s)
    X = np.linspace(-3, 3, 101)
    expected = float(P.lambda_plus(0.1 * K, 2.0)) * np.sin(K * X)
    assert np.max(np.abs(out.evaluate(X) - expected)) < 1e-13
    assert out.parity == "odd"


def test_J2_on_nu_coefficients():
    g = Grid(40.0, 4096)
    ops = LongWaveOps(PAR, g)
    K = 31.0
    nu = PeriodicPair.nu(K, 3)
    out = ops.J2_periodic(nu)
    for m, sgn in ((1, 1.0), (-1, -1.0)):
        J = P.J2(PAR.eps * m * K, PAR)
        expected = J @ np.array([0.0, sgn / 2j])
        np.testing.assert_allclose(out.coeffs[:, 3 + m], expected, atol=1e-14)
    assert np.max(np.abs(out.coeffs[:, [0, 1, 3, 5, 6]])) == 0.0


def test_periodic_coeff_invariants():
    s = PeriodicFieldCoeffs.sine(2.0, 5)
    assert s.reality_defect() == 0.0
    assert s.parity_defect() == 0.0
    c = PeriodicFieldCoeffs(2.0, np.array([0.5, 1.0, 0.5], dtype=complex), "even")
    assert c.parity_defect() == 0.0
    assert c.evaluate(0.0) == pytest.approx(2.0)


# modulated multipliers -------------------------------------------------------------


def test_modulated_identity():
    g = Grid(20.0, 1024)
    f = gaussian(g)
    om = 3.3
    out = apply_multiplier_modulated(lambda K: np.ones_like(K), f, om, g)
    assert np.max(np.abs(out - f * np.exp(1j * om * g.X))) < 1e-14


def test_modulated_matches_direct_on_fine_grid():
    g = Grid(20.0, 8192)
    f = gaussian(g)
    om = 7.25
    sym = P.symbol(P.varpi0, PAR, "even")
    out = apply_multiplier_modulated(sym, f, om, g)
    direct = ifft(P.varpi0(g.K, PAR) * fft(f * np.exp(1j * om * g.X)))
    assert np.max(np.abs(out - direct)) < 1e-8


def test_modulated_decay_in_frequency():
    g = Grid(40.0, 8192)
    f = 1.0 / np.cosh(g.X) ** 2
    sym = P.symbol(P.varpi0, PAR, "even")
    sups = [np.max(np.abs(apply_multiplier_modulated(sym, f, om, g))) for om in (10, 20, 40, 80)]
    ratios = np.array(sups[1:]) / np.array(sups[:-1])
    # sup <= C / omega means the sup at least halves as omega doubles
    assert np.all(ratios <= 0.5 + 1e-9)


# mixed products ---------------------------------------------------------------------


def test_mixed_product_constant_is_identity():
    g = Grid(40.0, 1024)
    f = 1.0 / np.cosh(g.X) ** 2
    one = PeriodicFieldCoeffs(2.0, np.array([0, 1.0, 0], dtype=complex), "even")
    cf = product_mixed(g, f, one)
    assert np.max(np.abs(cf.evaluate()[0] - f)) < 1e-15


def test_mixed_product_pointwise_and_parity():
    g = Grid(40.0, 4096)
    K = 9.0
    f = 1.0 / np.cosh(g.X) ** 2
    cf = product_mixed(g, f, PeriodicFieldCoeffs.sine(K, 3))
    vals = cf.evaluate()[0]
    assert np.max(np.abs(vals - f * np.sin(K * g.X))) < 1e-10
    assert LocalizedField(g, vals, "odd").parity_defect() < 1e-14
    assert sorted(cf.frequencies()) == [-K, K]


def test_mixed_product_resolution_guard():
    g = Grid(40.0, 256)
    f = 1.0 / np.cosh(g.X) ** 2
    with pytest.raises(ResolutionError):
        product_mixed(g, f, PeriodicFieldCoeffs.sine(9.0, 3))


# quadrature ------------------------------------------------------------------------------


def test_iota_even_integrand_against_adaptive():
    g = Grid(40.0, 4096)
    K = 2.5
    f = np.sin(K * g.X) / np.cosh(g.X)
    res = iota_quadrature(LocalizedField(g, f, "odd"), K)
    half, _ = integrate.quad(lambda x: np.sin(K * x) ** 2 / np.cosh(x), 0, 60, limit=400)
    assert res.value == pytest.approx(2 * half, rel=1e-10)
    assert res.warning is None


def test_iota_gaussian_closed_form():
    g = Grid(40.0, 4096)
    K, x0 = 3.0, 0.7
    res = iota_quadrature(LocalizedField(g, gaussian(g, 1.0, x0)), K)
    exact = np.sqrt(np.pi) * np.exp(-K * K / 4) * np.sin(K * x0)
    assert abs(res.value - exact) < 1e-10


def test_iota_riemann_lebesgue_decay():
    g = Grid(40.0, 8192)
    f = 1.0 / np.cosh(g.X - 1.0) ** 2
    norm = np.sqrt(np.sum(f * f) * g.dx)
    for K in (21.0, 30.0, 45.0):
        assert abs(iota_quadrature(LocalizedField(g, f), K).value) < 1e-6 * norm


def test_iota_boundary_warning():
    g = Grid(10.0, 1024)
    f = 1.0 / np.cosh(0.5 * g.X)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        res = iota_quadrature(LocalizedField(g, f), 1.0)
    assert res.warning is not None
    assert any(issubclass(w.category, BoundaryDecayWarning) for w in rec)


# weighted norms --------------------------------------------------------------------------


def test_weighted_norm_l2_gaussian():
    g = Grid(20.0, 1024)
    assert weighted_norm(gaussian(g), 0, 0.0, g) == pytest.approx((np.pi / 2) ** 0.25, rel=1e-8)


def test_weighted_norm_h1_definition():
    g = Grid(20.0, 1024)
    f = gaussian(g)
    df = spectral_derivative(g, f, 1)
    expected = np.sqrt(np.sum(f * f) * g.dx + np.sum(df * df) * g.dx)
    assert weighted_norm(f, 1, 0.0, g) == pytest.approx(expected, rel=1e-13)


def test_weighted_norm_monotone():
    g = Grid(20.0, 1024)
    f = 1.0 / np.cosh(2 * g.X) ** 2
    qs = (0.0, 0.5, 1.0, 2.0)
    vals = np.array([[weighted_norm(f, r, q, g) for q in qs] for r in (0, 1, 2)])
    assert np.all(np.diff(vals, axis=0) >= 0)
    assert np.all(np.diff(vals[0]) >= 0)


def test_weighted_norm_not_monotone_in_q_for_derivatives():
    # (cosh(qX) f)' = cosh f' + q sinh f; the cross term lowers the H^1 part
    g = Grid(20.0, 1024)
    f = 1.0 / np.cosh(2 * g.X) ** 2
    assert weighted_norm(f, 1, 0.5, g) < weighted_norm(f, 1, 0.0, g)


def test_weighted_norm_overflow_guard():
    g = Grid(20.0, 1024)
    f = 1.0 / np.cosh(0.5 * g.X)
    with pytest.raises(OverflowError):
        weighted_norm(f, 0, 2.0, g)


# fields and serialization ------------------------------------------------------------------


def test_parity_check_and_boundary():
    g = Grid(20.0, 1024)
    f = LocalizedField(g, gaussian(g, 1.0, 1.0), "even")
    with pytest.raises(ParityError):
        f.check_parity()
    assert f.symmetrized().parity_defect() < 1e-15
    assert LocalizedField(g, gaussian(g)).boundary_ratio() < 1e-8


def test_csv_round_trips(tmp_path):
    g = Grid(20.0, 64)
    f = LocalizedField(g, gaussian(g), "even")
    f.to_csv(tmp_path / "f.csv")
    back = read_localized_csv(tmp_path / "f.csv", g, "even")
    np.testing.assert_array_equal(back.values, f.values)
    s = PeriodicFieldCoeffs.sine(1.234567890123, 3)
    s.to_csv(tmp_path / "s.csv")
    sb = read_periodic_csv(tmp_path / "s.csv", "odd")
    assert sb.K == s.K
    np.testing.assert_array_equal(sb.coeffs, s.coeffs)
