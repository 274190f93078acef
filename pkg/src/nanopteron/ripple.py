"""Periodic traveling waves ``a * phi^a`` by contraction of the map ``Psi``.

The ripple is ``a (nu + psi)(K^a X)`` with ``nu(Y) = (0, sin Y)``, ``psi_1``
even, ``psi_2`` odd with no ``sin Y`` content and ``K^a = K_eps + t``.
Coefficients are stored for modes ``-M..M`` in the variable ``Y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import params as P
from .io import fmt, write_csv
from .operators import PeriodicPair
from .params import DimerParams
from .spectral import PeriodicFieldCoeffs


class RippleError(RuntimeError):
    pass


def find_Keps(p: DimerParams, tol: float = 1e-13) -> float:
    """Scaled resonant frequency ``K_eps = k_{c_eps} / eps``."""
    k, _ = P.find_kc(p.c_eps, p, tol=tol)
    return k / p.eps


def Keps_residual(K: float, p: DimerParams) -> float:
    return float(-p.eps**2 * p.c_eps2 * K * K + P.lambda_plus(p.eps * K, p))


def R_eps(tau, p: DimerParams, K_eps: float | None = None, cutoff: float = 1e-6):
    """Taylor remainder of ``xi_{c_eps}`` about ``eps K_eps``.

    ``(xi(k0 + tau) - xi'(k0) tau) / tau^2`` with the limit ``xi''(k0)/2``
    below ``cutoff``.
    """
    K = find_Keps(p) if K_eps is None else K_eps
    k0 = p.eps * K
    c = p.c_eps
    tau = np.asarray(tau, dtype=float)
    d1 = P.xi_c_prime(k0, c, p)
    d2 = P.xi_c_second(k0, c, p)
    small = np.abs(tau) < cutoff
    safe = np.where(small, 1.0, tau)
    val = (P.xi_c(k0 + safe, c, p) - d1 * safe) / safe**2
    out = np.where(small, 0.5 * d2, val)
    return float(out) if out.ndim == 0 else out


@dataclass
class RippleState:
    psi: np.ndarray  # (2, 2M+1) complex coefficients
    t: float


class RippleMap:
    """The three-component map ``Psi`` for fixed ``(p, a, M)``."""

    def __init__(self, p: DimerParams, a: float, M: int = 32, K_eps: float | None = None):
        self.p = p
        self.a = float(a)
        self.M = int(M)
        self.K_eps = find_Keps(p) if K_eps is None else float(K_eps)
        self.k0 = p.eps * self.K_eps
        self.xi_p = float(P.xi_c_prime(self.k0, p.c_eps, p))
        self.ny = int(2 ** np.ceil(np.log2(4 * self.M + 2)))
        self.modes = np.arange(-self.M, self.M + 1)

    def nu(self) -> np.ndarray:
        c = np.zeros((2, 2 * self.M + 1), dtype=complex)
        c[1, self.M + 1] = 1.0 / 2j
        c[1, self.M - 1] = -1.0 / 2j
        return c

    def _to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        n = coeffs.shape[-1]
        m = np.arange(n) - (n - 1) // 2
        buf = np.zeros(coeffs.shape[:-1] + (self.ny,), dtype=complex)
        buf[..., m % self.ny] = coeffs
        return np.fft.ifft(buf, axis=-1) * self.ny

    def _from_grid(self, vals: np.ndarray, mmax: int) -> np.ndarray:
        c = np.fft.fft(vals, axis=-1) / self.ny
        m = np.arange(-mmax, mmax + 1)
        return c[..., m % self.ny]

    def quadratic(self, u: np.ndarray, omega: float, mmax: int | None = None) -> np.ndarray:
        """Coefficients of ``B^{eps}(u, u)`` for ``u`` periodic at frequency ``omega``."""
        mmax = self.M if mmax is None else mmax
        k_in = self.p.eps * omega * self.modes
        v = np.einsum("mij,jm->im", P.J2(k_in, self.p), u)
        s = self._from_grid(self._to_grid(v) ** 2, mmax)
        k_out = self.p.eps * omega * np.arange(-mmax, mmax + 1)
        return np.einsum("mij,jm->im", P.J1_reg(k_out, self.p), s)

    def apply(self, state: RippleState) -> RippleState:
        p, a, M = self.p, self.a, self.M
        t = float(state.t)
        omega = self.K_eps + t
        u = self.nu() + state.psi
        b = self.quadratic(u, omega)
        K_m = omega * self.modes
        k_m = p.eps * K_m
        new = np.zeros_like(u)
        new[0] = -a * P.varpi_eps(K_m, p) * b[0]
        xi = P.xi_c(k_m, p.c_eps, p)
        far = np.abs(self.modes) >= 2
        if np.any(np.abs(xi[far]) < 1e-12):
            bad = self.modes[far][np.abs(xi[far]) < 1e-12][0]
            raise RippleError(f"xi^(eps,t) nearly vanishes at mode {bad}; eps outside validated range")
        lam = P.lambda_plus(k_m, p)
        new[1, far] = -a * p.eps**2 * lam[far] * b[1, far] / xi[far]
        # parity projection: psi_1 cosine series, psi_2 sine series
        new[0] = new[0].real + 0j
        new[1] = 1j * new[1].imag
        lam1 = float(P.lambda_plus(p.eps * omega, p))
        f1 = b[1, M + 1]
        t_new = (-(p.eps / self.xi_p) * R_eps(p.eps * t, p, self.K_eps) * t * t
                 - (2j * p.eps * a / self.xi_p) * lam1 * f1)
        return RippleState(new, float(np.real(t_new)))

    def residual(self, state: RippleState) -> float:
        """Sup-norm over one period of the periodic system on ``a (nu + psi)``."""
        p, a = self.p, self.a
        if a == 0.0:
            return 0.0
        omega = self.K_eps + state.t
        u = self.nu() + state.psi
        mm = 2 * self.M
        b = self.quadratic(u, omega, mmax=mm)
        modes = np.arange(-mm, mm + 1)
        u_pad = np.zeros((2, 2 * mm + 1), dtype=complex)
        u_pad[:, self.M:self.M + 2 * self.M + 1] = u
        K_m = omega * modes
        k_m = p.eps * K_m
        r1 = a * u_pad[0] + P.varpi_eps(K_m, p) * a * a * b[0]
        r2 = (P.xi_c(k_m, p.c_eps, p) * a * u_pad[1]
              + p.eps**2 * P.lambda_plus(k_m, p) * a * a * b[1])
        buf = np.zeros((2, 4 * self.ny), dtype=complex)
        buf[:, modes % (4 * self.ny)] = np.stack([r1, r2])
        vals = np.fft.ifft(buf, axis=-1) * buf.shape[-1]
        return float(np.max(np.abs(vals)))


@dataclass
class RippleSolution:
    a: float
    K_eps: float
    t_shift: float
    psi1: PeriodicFieldCoeffs
    psi2: PeriodicFieldCoeffs
    iterations: int
    residual: float
    params: DimerParams
    ratios: list = field(default_factory=list)

    @property
    def K_eps_a(self) -> float:
        return self.K_eps + self.t_shift

    @property
    def M(self) -> int:
        return self.psi1.M

    def psi_norm(self) -> float:
        return float(max(np.max(np.abs(self.psi1.coeffs)), np.max(np.abs(self.psi2.coeffs))))

    def phi(self) -> PeriodicPair:
        """``nu + psi`` as a periodic pair at frequency ``K_eps_a`` in ``X``."""
        c = np.stack([self.psi1.coeffs, self.psi2.coeffs]).astype(complex)
        c[1, self.M + 1] += 1.0 / 2j
        c[1, self.M - 1] -= 1.0 / 2j
        return PeriodicPair(self.K_eps_a, c)

    def nu_base(self) -> PeriodicPair:
        """``nu`` at the unperturbed frequency ``K_eps``."""
        return PeriodicPair.nu(self.K_eps, self.M)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "K_eps": self.K_eps,
            "t_shift": self.t_shift,
            "residual": self.residual,
            "iterations": self.iterations,
        }

    def write(self, json_path, csv_path) -> None:
        from .io import write_json
        write_json(json_path, self.to_dict())
        rows = [(int(m), c1.real, c1.imag, c2.real, c2.imag)
                for m, c1, c2 in zip(self.psi1.modes, self.psi1.coeffs, self.psi2.coeffs)]
        with open(csv_path, "w") as fh:
            fh.write(f"# K={fmt(self.K_eps_a)}\n")
        with open(csv_path, "a") as fh:
            fh.write("mode,re,im,re2,im2\n")
            for r in rows:
                fh.write(f"{r[0]}," + ",".join(fmt(v) for v in r[1:]) + "\n")


def Psi_map(state: RippleState, a: float, p: DimerParams, M: int | None = None) -> RippleState:
    M = (state.psi.shape[1] - 1) // 2 if M is None else M
    return RippleMap(p, a, M).apply(state)


def solve_ripple(a: float, p: DimerParams, tol: float = 1e-12, max_iter: int = 200,
                 M: int = 32, a0: float = 1e-2, K_eps: float | None = None) -> RippleSolution:
    """Iterate ``Psi`` from zero until successive iterates differ by < ``tol``."""
    a = float(a)
    if abs(a) > a0:
        raise RippleError(f"|a| = {abs(a):.3e} exceeds a0 = {a0:.3e}")
    rmap = RippleMap(p, a, M, K_eps)
    state = RippleState(np.zeros((2, 2 * M + 1), dtype=complex), 0.0)
    ratios: list[float] = []
    prev = None
    it = 0
    for it in range(1, max_iter + 1):
        new = rmap.apply(state)
        diff = max(float(np.max(np.abs(new.psi - state.psi))), abs(new.t - state.t))
        if prev is not None and prev > 0:
            ratios.append(diff / prev)
        prev = diff
        state = new
        if diff < tol:
            break
    else:
        raise RippleError(
            f"ripple iteration did not converge in {max_iter} steps; "
            f"last ratios {[float(fmt(r)) for r in ratios[-5:]]}"
        )
    return RippleSolution(
        a=a,
        K_eps=rmap.K_eps,
        t_shift=state.t,
        psi1=PeriodicFieldCoeffs(rmap.K_eps + state.t, state.psi[0], "even"),
        psi2=PeriodicFieldCoeffs(rmap.K_eps + state.t, state.psi[1], "odd"),
        iterations=it,
        residual=rmap.residual(state),
        params=p,
        ratios=ratios,
    )


def ripple_period(sol: RippleSolution) -> float:
    """Ripple period in lattice units."""
    return 2.0 * np.pi / (sol.K_eps_a * sol.params.eps)


def period_interval(w: float) -> tuple[float, float]:
    """Closed interval containing the lattice ripple period for small eps."""
    c_w2 = 2.0 * w / (1.0 + w)
    m_lo = np.sqrt(2.0 * w / (c_w2 + 1.0))
    m_hi = np.sqrt(2.0 + 2.0 * w) / np.sqrt(c_w2)
    return float(2.0 * np.pi / m_hi), float(2.0 * np.pi / m_lo)
