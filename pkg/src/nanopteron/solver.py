"""Beale-ansatz contraction for the nanopteron ``theta = sigma + a phi^a + eta``.

Unknowns are ``eta_1`` (even), ``eta_2`` (odd) and the ripple amplitude
``a``; one sweep of :meth:`NanopteronProblem.N_step` evaluates the
forcing terms, inverts ``A`` and ``T_eps`` and updates ``a`` from the
solvability functional ``iota``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import params as P
from .io import fmt
from .kdv import AOperator, KdvProfile, sigma_integral
from .operators import LongWaveOps, PeriodicPair
from .params import DimerParams
from .ripple import RippleSolution, find_Keps, solve_ripple
from .spectral import (
    Grid,
    LocalizedField,
    PARITY_TOL,
    ParityError,
    boundary_ratio,
    fft,
    fit_decay_rate,
    ifft,
    iota_values,
    parity_defect,
    trig_interpolate,
    weighted_norm,
)


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, history: list | None = None):
        super().__init__(msg)
        self.history = history or []


class PSolveError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    L: float = 40.0
    N: int = 4096
    M: int = 32
    tol: float = 1e-11
    max_iter: int = 200
    damping: float = 0.5
    ripple_tol: float = 1e-12
    ripple_max_iter: int = 200
    a0: float = 1e-2
    band: float = 1e-5  # L'Hopital band half-width, in grid spacings of K
    resolve_rel: float = 0.01
    q_norm: float | None = None
    p_check: float = 1e-7

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class NanopteronState:
    eta1: LocalizedField
    eta2: LocalizedField
    a: float

    @classmethod
    def zero(cls, grid: Grid) -> "NanopteronState":
        z = np.zeros(grid.N)
        return cls(LocalizedField(grid, z, "even"), LocalizedField(grid, z.copy(), "odd"), 0.0)

    def pair(self) -> np.ndarray:
        return np.stack([self.eta1.values, self.eta2.values])

    def check(self) -> None:
        self.eta1.check_parity(name="eta1")
        self.eta2.check_parity(name="eta2")


@dataclass
class SolveReport:
    iterations: int
    final_update_norm: float
    theta_residual: dict
    a_value: float
    eta_norms: dict
    kappa_eps: float
    kappa_star: float
    boundary: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_update_norm": self.final_update_norm,
            "theta_residual": self.theta_residual,
            "a_value": self.a_value,
            "eta_norms": self.eta_norms,
            "kappa_eps": self.kappa_eps,
            "kappa_star": self.kappa_star,
            "boundary": self.boundary,
            **self.extra,
        }


@dataclass
class PSolveInfo:
    iota_in: float
    residual: float
    band_modes: int
    iota_out: float


class NanopteronProblem:
    """Discretized nanopteron system for one ``(w, eps)``."""

    def __init__(self, p: DimerParams, cfg: SolverConfig | None = None):
        self.p = p
        self.cfg = cfg or SolverConfig()
        self.K_eps = find_Keps(p)
        self.grid = Grid.for_frequency(self.cfg.L, self.cfg.N, self.K_eps)
        g = self.grid
        self.ops = LongWaveOps(p, g)
        self.kdv = KdvProfile(p, g)
        self.sigma = self.kdv.sigma.values
        self.S = self.kdv.pair
        self.J2S = self.ops.J2(self.S)
        self.dJ2S = self.ops.dJ2(self.S)
        self.A = AOperator(p, g, self.sigma)
        self.nu_eps = PeriodicPair.nu(self.K_eps, self.cfg.M)
        self.J2nu = self.ops.J2_periodic(self.nu_eps)
        self.chi = self.compute_chi()
        self.kappa = iota_values(g, self.chi, self.K_eps)
        self.kappa_star = ((1.0 + p.w) * float(P.lambda_plus(p.eps * self.K_eps, p))
                           * sigma_integral(p))
        self._ripple: RippleSolution | None = None
        self.last_p_info: PSolveInfo | None = None

    # ------------------------------------------------------------------ chi
    def compute_chi(self) -> np.ndarray:
        """``lambda_+ J1 (J2^0 sigma . J2 nu_eps)``, second component."""
        j20s = 2.0 * (1.0 + self.p.w) * self.sigma
        base = np.stack([j20s, j20s])
        cf = self.ops.mixed_product(base, self.J2nu).apply_matrix(self.ops.J1_fn)
        chi = self.ops.second_lam(cf)
        return self.grid.odd_part(chi)

    def kappa_pair(self) -> tuple[float, float]:
        return self.kappa, self.kappa_star

    # ------------------------------------------------------------------ ripple
    def ripple(self, a: float) -> RippleSolution:
        r = self._ripple
        stale = (r is None or (r.a == 0.0 and a != 0.0)
                 or abs(a - r.a) > self.cfg.resolve_rel * abs(r.a))
        if stale:
            self._ripple = solve_ripple(a, self.p, tol=self.cfg.ripple_tol,
                                        max_iter=self.cfg.ripple_max_iter, M=self.cfg.M,
                                        a0=self.cfg.a0, K_eps=self.K_eps)
        return self._ripple

    # ------------------------------------------------------------------ terms
    def terms(self, state: NanopteronState, rip: RippleSolution) -> dict:
        """The forcing terms ``j1..j5`` (even) and ``l1..l5``, ``l31`` (odd)."""
        ops, p, a = self.ops, self.p, state.a
        E = state.pair()
        J2E = ops.J2(E)
        bSS = ops.J1(self.J2S * self.J2S)
        bSE = ops.J1(self.J2S * J2E)
        bEE = ops.J1(J2E * J2E)
        zero = np.zeros(self.grid.N)
        t: dict[str, np.ndarray] = {}
        t["j1"] = -(self.sigma + ops.varpi(bSS[0]))
        t["j2"] = -(2.0 * ops.varpi(bSE[0])
                    - 4.0 * (1.0 + p.w) * ops.varpi0(self.sigma * E[0]))
        t["j5"] = -ops.varpi(bEE[0])
        t["l1"] = -ops.lam(bSS[1])
        t["l2"] = -2.0 * ops.lam(bSE[1])
        t["l5"] = -ops.lam(bEE[1])
        if a == 0.0:
            for k in ("j3", "j4", "l3", "l4", "l31"):
                t[k] = zero.copy()
            return t
        phi = rip.phi()
        J2phi = ops.J2_periodic(phi)
        cfS = ops.mixed_product(self.J2S, J2phi).apply_matrix(ops.J1_fn)
        cfE = ops.mixed_product(J2E, J2phi).apply_matrix(ops.J1_fn)
        t["j3"] = -2.0 * a * ops.first_varpi(cfS)
        t["j4"] = -2.0 * a * ops.first_varpi(cfE)
        t["l3"] = -2.0 * a * ops.second_lam(cfS)
        t["l4"] = -2.0 * a * ops.second_lam(cfE)
        # l31 from its own two-term formula
        c1 = ops.mixed_product(self.dJ2S, self.J2nu)
        c2 = (ops.mixed_product(self.J2S, J2phi)
              + ops.mixed_product(self.J2S, PeriodicPair(self.K_eps, -self.J2nu.coeffs)))
        cf31 = (c1 + c2).apply_matrix(ops.J1_fn)
        t["l31"] = -2.0 * a * ops.second_lam(cf31)
        return t

    def check_term_parity(self, t: dict) -> None:
        for k, v in t.items():
            par = "even" if k.startswith("j") else "odd"
            d = parity_defect(self.grid, v, par)
            if d > PARITY_TOL * max(1.0, float(np.max(np.abs(v)))):
                raise ParityError(f"term {k} violates {par} parity by {d:.3e}")

    # ------------------------------------------------------------------ P_eps
    def P_solve(self, g: np.ndarray) -> np.ndarray:
        """``T_eps^{-1}(g - iota[g] chi / kappa)`` for odd ``g``."""
        grid, p = self.grid, self.p
        g = np.asarray(g, dtype=float)
        gsup = float(np.max(np.abs(g)))
        if gsup == 0.0:
            self.last_p_info = PSolveInfo(0.0, 0.0, 0, 0.0)
            return np.zeros(grid.N)
        iota_g = iota_values(grid, g, self.K_eps)
        gp = g - (iota_g / self.kappa) * self.chi
        ghat = fft(gp)
        T = self.ops.T_s
        uhat = np.empty_like(ghat)
        K = grid.K
        near = np.zeros(grid.N, dtype=bool)
        for sgn in (1.0, -1.0):
            near |= np.abs(K - sgn * self.K_eps) < self.cfg.band * grid.dK
        uhat[~near] = ghat[~near] / T[~near]
        if near.any():
            shift = grid.X + grid.L
            k0 = p.eps * self.K_eps
            for m in np.nonzero(near)[0]:
                Kc = self.K_eps if K[m] > 0 else -self.K_eps
                delta = K[m] - Kc
                ph = np.exp(-1j * Kc * shift)
                G1 = np.sum(gp * (-1j * shift) * ph)
                G2 = np.sum(gp * (-1j * shift) ** 2 * ph)
                sgn = 1.0 if Kc > 0 else -1.0
                T1 = sgn * p.eps * float(P.xi_c_prime(k0, p.c_eps, p))
                T2 = p.eps**2 * float(P.xi_c_second(k0, p.c_eps, p))
                uhat[m] = (G1 + 0.5 * G2 * delta) / (T1 + 0.5 * T2 * delta)
        u = grid.odd_part(ifft(uhat).real)
        res = float(np.max(np.abs(self.ops.T(u) - gp)))
        iota_out = iota_values(grid, self.ops.T(u) - gp, self.K_eps)
        self.last_p_info = PSolveInfo(iota_g, res / gsup, int(near.sum()), iota_out)
        if res > self.cfg.p_check * gsup:
            raise PSolveError(
                f"T_eps inversion residual {res / gsup:.3e} exceeds {self.cfg.p_check:.1e} "
                f"({int(near.sum())} band modes)"
            )
        return u

    # ------------------------------------------------------------------ iteration
    def N_step(self, state: NanopteronState) -> tuple[NanopteronState, dict]:
        rip = self.ripple(state.a)
        t = self.terms(state, rip)
        self.check_term_parity(t)
        sj = t["j1"] + t["j2"] + t["j3"] + t["j4"] + t["j5"]
        sl = t["l1"] + t["l2"] + t["l31"] + t["l4"] + t["l5"]
        g = self.grid
        eta1 = self.A.solve(LocalizedField(g, g.even_part(sj), "even"))
        eta2 = self.p.eps**2 * self.P_solve(g.odd_part(sl))
        N3 = iota_values(g, sl, self.K_eps) / (2.0 * self.kappa)
        w = self.cfg.damping
        a_new = (1.0 - w) * state.a + w * N3
        new = NanopteronState(eta1, LocalizedField(g, eta2, "odd"), float(a_new))
        new.check()
        floor = 64 * np.finfo(float).eps * float(np.sum(np.abs(sl)) * g.dx) / abs(2 * self.kappa)
        return new, {"N3": float(N3), "a_floor": float(floor)}

    def iterate(self, tol: float | None = None, max_iter: int | None = None
                ) -> tuple[NanopteronState, SolveReport]:
        tol = self.cfg.tol if tol is None else tol
        max_iter = self.cfg.max_iter if max_iter is None else max_iter
        state = NanopteronState.zero(self.grid)
        history: list[dict] = []
        best = math.inf
        converged = False
        it = 0
        upd = math.inf
        for it in range(1, max_iter + 1):
            new, info = self.N_step(state)
            d_eta = max(float(np.max(np.abs(new.eta1.values - state.eta1.values))),
                        float(np.max(np.abs(new.eta2.values - state.eta2.values))))
            d_a = abs(new.a - state.a)
            upd = max(d_eta, d_a)
            history.append({"iter": it, "d_eta": d_eta, "d_a": d_a, "a": new.a})
            state = new
            a_ok = d_a <= max(tol * abs(state.a), info["a_floor"])
            if d_eta < tol and a_ok:
                converged = True
                break
            best = min(best, upd)
            if upd > 5.0 * best and upd > 100.0 * tol:
                raise ConvergenceError(
                    f"nanopteron iteration diverging at step {it}: update {upd:.3e} "
                    f"vs minimum {best:.3e}", history)
        if not converged:
            raise ConvergenceError(
                f"nanopteron iteration did not converge in {max_iter} steps "
                f"(last update {upd:.3e})", history)
        self.history = history
        return state, self.report(state, it, upd)

    # ------------------------------------------------------------------ diagnostics
    def theta_residual(self, state: NanopteronState, rip: RippleSolution | None = None) -> dict:
        """Sup-norms of the scaled traveling-wave system on the composite."""
        ops, p, a = self.ops, self.p, state.a
        rip = self.ripple(a) if rip is None else rip
        th = self.S + state.pair()
        b = ops.B(th)
        r1 = th[0] + ops.varpi(b[0])
        r2 = ops.T(th[1]) + p.eps**2 * ops.lam(b[1])
        if a != 0.0:
            cf = ops.B_mixed(th, rip.phi())
            r1 = r1 + 2.0 * a * ops.first_varpi(cf)
            r2 = r2 + 2.0 * a * p.eps**2 * ops.second_lam(cf)
        loc1 = float(np.max(np.abs(r1)))
        loc2 = float(np.max(np.abs(r2)))
        return {"component1": loc1, "component2": loc2, "periodic": float(rip.residual),
                "total": max(loc1, loc2, float(rip.residual))}

    def consistency(self, state: NanopteronState) -> float:
        """``|iota[l1+...+l5]| / int |l1+...+l5|`` at the state."""
        rip = self.ripple(state.a)
        t = self.terms(state, rip)
        s = t["l1"] + t["l2"] + t["l3"] + t["l4"] + t["l5"]
        den = float(np.sum(np.abs(s)) * self.grid.dx)
        return abs(iota_values(self.grid, s, self.K_eps)) / den if den else 0.0

    def q_norm(self, fields=()) -> float:
        """Weight rate for reported norms.

        Capped so that ``cosh(q L)`` times each field's boundary level stays
        below ``1e-7``; otherwise rounding noise would dominate the norm.
        """
        if self.cfg.q_norm is not None:
            return self.cfg.q_norm
        q = min(0.5 * self.p.q0, 12.0 / self.grid.L)
        for f in fields:
            br = boundary_ratio(self.grid, f)
            if br > 0:
                q = min(q, math.acosh(max(1.0, 1e-7 / br)) / self.grid.L)
        return q

    def report(self, state: NanopteronState, iterations: int, upd: float) -> SolveReport:
        g = self.grid
        # final ripple exactly at the converged amplitude
        rip = solve_ripple(state.a, self.p, tol=self.cfg.ripple_tol,
                           max_iter=self.cfg.ripple_max_iter, M=self.cfg.M,
                           a0=self.cfg.a0, K_eps=self.K_eps)
        self._ripple = rip
        E = state.pair()
        q = self.q_norm(E)
        norms = {}
        for r in (0, 1, 2):
            n1 = weighted_norm(E[0], r, q, g)
            n2 = weighted_norm(E[1], r, q, g)
            norms[f"r{r}"] = math.hypot(n1, n2)
        for r in (0, 1, 2):
            norms[f"h{r}"] = math.hypot(weighted_norm(E[0], r, 0.0, g),
                                        weighted_norm(E[1], r, 0.0, g))
        norms["q"] = q
        norms["sup"] = float(np.max(np.abs(E)))
        boundary = {
            "eta1": boundary_ratio(g, E[0]),
            "eta2": boundary_ratio(g, E[1]),
            "sigma": boundary_ratio(g, self.sigma),
            "chi": boundary_ratio(g, self.chi),
        }
        extra = {
            "w": self.p.w,
            "eps": self.p.eps,
            "grid": {"L": g.L, "N": g.N},
            "K_eps": self.K_eps,
            "t_shift": rip.t_shift,
            "ripple_residual": rip.residual,
            "a_sign": int(np.sign(state.a)),
            "consistency": self.consistency(state),
            "parity_defect": {"eta1": state.eta1.parity_defect(),
                              "eta2": state.eta2.parity_defect()},
            "decay_rate_fit": {"eta1": fit_decay_rate(g, E[0]),
                               "eta2": fit_decay_rate(g, E[1])},
            "kappa_rel_gap": abs(self.kappa - self.kappa_star) / abs(self.kappa_star),
            "A_solve": dict(self.A.last_info),
            "P_solve_residual": self.last_p_info.residual if self.last_p_info else 0.0,
        }
        return SolveReport(
            iterations=iterations,
            final_update_norm=upd,
            theta_residual=self.theta_residual(state, rip),
            a_value=state.a,
            eta_norms=norms,
            kappa_eps=self.kappa,
            kappa_star=self.kappa_star,
            boundary=boundary,
            extra=extra,
        )

    # ------------------------------------------------------------------ output
    def profiles_rows(self, state: NanopteronState) -> list:
        rip = self.ripple(state.a)
        X = self.grid.X
        per = state.a * rip.phi().evaluate(X) if state.a else np.zeros((2, X.size))
        th1 = self.sigma + state.eta1.values + per[0]
        th2 = state.eta2.values + per[1]
        return list(zip(X, th1, th2, state.eta1.values, state.eta2.values))


def compute_kappa(p: DimerParams, cfg: SolverConfig | None = None) -> tuple[float, float]:
    prob = NanopteronProblem(p, cfg)
    return prob.kappa, prob.kappa_star


def iterate_nanopteron(p: DimerParams, tol: float = 1e-11, max_iter: int = 200,
                       cfg: SolverConfig | None = None):
    cfg = cfg or SolverConfig(tol=tol, max_iter=max_iter)
    prob = NanopteronProblem(p, cfg)
    state, rep = prob.iterate(tol, max_iter)
    return state, rep, prob


# ---------------------------------------------------------------------- descale


class LatticeWaveProfile:
    """Relative-displacement profiles ``p1`` (odd sites) and ``p2`` (even
    sites) as functions of the traveling variable ``x = j - c t``."""

    def __init__(self, p: DimerParams, grid: Grid, P_loc: np.ndarray,
                 P_per: PeriodicPair | None, K_a: float, approximate: bool = False):
        self.params = p
        self.grid = grid
        self.P_loc = P_loc
        self.P_per = P_per
        self.c = p.c_eps
        self.period = 2.0 * np.pi / (K_a * p.eps)
        self.approximate = approximate

    @property
    def half_width(self) -> float:
        """Half-length of the lattice interval covered by the localized part."""
        return self.grid.L / self.params.eps

    def _eval(self, x, deriv: int, periodic: bool = True) -> np.ndarray:
        eps = self.params.eps
        X = eps * np.asarray(x, dtype=float)
        out = trig_interpolate(self.grid, self.P_loc, X, deriv=deriv)
        if periodic and self.P_per is not None:
            per = self.P_per
            coeffs = per.coeffs * (1j * per.K * per.modes) ** deriv
            ph = np.exp(1j * per.K * np.multiply.outer(X, per.modes))
            out = out + np.stack([(ph @ coeffs[i]).real for i in range(2)])
        return eps ** (2 + deriv) * out

    def values(self, x, periodic: bool = True) -> np.ndarray:
        """``(p1(x), p2(x))``; ``periodic=False`` drops the ripple."""
        return self._eval(x, 0, periodic)

    def derivs(self, x) -> np.ndarray:
        return self._eval(x, 1)

    def second_derivs(self, x) -> np.ndarray:
        return self._eval(x, 2)

    def p1(self, x):
        return self.values(x)[0]

    def p2(self, x):
        return self.values(x)[1]

    def dp1(self, x):
        return self.derivs(x)[0]

    def dp2(self, x):
        return self.derivs(x)[1]

    def lattice_residual(self, x) -> tuple[float, float]:
        """Relative residual of the traveling-wave lattice equations at ``x``."""
        w, c = self.params.w, self.c
        x = np.asarray(x, dtype=float)
        F = lambda r: r + r * r  # noqa: E731
        v0, vp, vm = self.values(x), self.values(x + 1.0), self.values(x - 1.0)
        d2 = self.second_derivs(x)
        r1 = c * c * d2[0] + (1 + w) * F(v0[0]) - w * F(vp[1]) - F(vm[1])
        r2 = c * c * d2[1] + (1 + w) * F(v0[1]) - F(vp[0]) - w * F(vm[0])
        s1 = float(np.max(np.abs(c * c * d2[0])))
        s2 = float(np.max(np.abs(c * c * d2[1])))
        return float(np.max(np.abs(r1))) / s1, float(np.max(np.abs(r2))) / s2


def descale(state: NanopteronState | None, rip: RippleSolution | None,
            p: DimerParams, grid: Grid, include_eta: bool = True) -> LatticeWaveProfile:
    """Lattice profiles ``p = J2 h`` with ``h(x) = eps^2 theta(eps x)``.

    With ``state=None`` the leading-order profile (``theta = sigma``) is
    returned, flagged approximate.
    """
    ops = LongWaveOps(p, grid)
    th = KdvProfile(p, grid).pair
    approximate = state is None or not include_eta
    a = 0.0
    if state is not None and include_eta:
        th = th + state.pair()
        a = state.a
    P_loc = ops.J2(th)
    P_per = None
    K_a = find_Keps(p) if rip is None else rip.K_eps_a
    if rip is not None and a != 0.0:
        P_per = ops.J2_periodic(rip.phi()).scaled(a)
    return LatticeWaveProfile(p, grid, P_loc, P_per, K_a, approximate)


def leading_order_profile(j, p: DimerParams) -> np.ndarray:
    """Closed-form leading term ``(3(1+w)/(4w)) eps^2 sech^2(q0 eps j)``."""
    j = np.asarray(j, dtype=float)
    return 3.0 * (1.0 + p.w) / (4.0 * p.w) * p.eps**2 / np.cosh(p.q0 * p.eps * j) ** 2


def format_report(rep: SolveReport) -> str:
    return (f"iterations={rep.iterations} residual={fmt(rep.theta_residual['total'])} "
            f"a={fmt(rep.a_value)}")
