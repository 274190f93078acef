"""Long-wave multipliers and the quadratic map ``B^eps`` on a fixed grid.

Symbol values are evaluated once per (params, grid) and reused; carrier
terms evaluate shifted symbols on demand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import params as P
from .params import DimerParams
from .spectral import CarrierField, Grid, PeriodicFieldCoeffs, fft, ifft, product_mixed


def _mat_apply(m: np.ndarray, pair: np.ndarray) -> np.ndarray:
    """Apply an ``(N, 2, 2)`` symbol to a ``(2, N)`` pair in Fourier space."""
    return ifft(np.einsum("nij,jn->in", m, fft(pair)))


def _as_pair(theta) -> np.ndarray:
    arr = np.asarray(theta)
    if arr.shape[0] != 2:
        raise ValueError("expected a field pair with leading dimension 2")
    return arr


@dataclass(frozen=True)
class PeriodicPair:
    """Two-component periodic field ``sum_m c[:, m] exp(i m K X)``."""

    K: float
    coeffs: np.ndarray  # shape (2, 2M+1)

    @property
    def M(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def components(self) -> tuple[PeriodicFieldCoeffs, PeriodicFieldCoeffs]:
        return (PeriodicFieldCoeffs(self.K, self.coeffs[0]),
                PeriodicFieldCoeffs(self.K, self.coeffs[1]))

    def evaluate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ph = np.exp(1j * self.K * np.multiply.outer(X, self.modes))
        return np.stack([(ph @ self.coeffs[i]).real for i in range(2)])

    def scaled(self, c: float) -> "PeriodicPair":
        return PeriodicPair(self.K, c * self.coeffs)

    @classmethod
    def nu(cls, K: float, M: int) -> "PeriodicPair":
        """``(0, sin(K X))``."""
        c = np.zeros((2, 2 * M + 1), dtype=complex)
        c[1, M + 1] = 1.0 / 2j
        c[1, M - 1] = -1.0 / 2j
        return cls(K, c)


class LongWaveOps:
    """Multipliers of the scaled traveling-wave system on one grid."""

    def __init__(self, p: DimerParams, grid: Grid):
        self.p = p
        self.grid = grid
        K = grid.K
        k = p.eps * K
        self.K = K
        self.J1s = P.J1_reg(k, p)
        self.J2s = P.J2(k, p)
        self.J20 = P.J2(np.zeros_like(K), p)
        self.dJ2s = self.J2s - self.J20
        self.varpi_s = P.varpi_eps(K, p)
        self.varpi0_s = P.varpi0(K, p)
        self.lam_s = P.lambda_plus(k, p)
        self.T_s = P.T_eps_symbol(K, p)

    # symbol functions of the scaled wavenumber (for shifted evaluations)
    def J1_fn(self, K):
        return P.J1_reg(self.p.eps * np.asarray(K), self.p)

    def J2_fn(self, K):
        return P.J2(self.p.eps * np.asarray(K), self.p)

    def dJ2_fn(self, K):
        K = np.asarray(K)
        return P.J2(self.p.eps * K, self.p) - P.J2(np.zeros_like(K), self.p)

    def varpi_fn(self, K):
        return P.varpi_eps(K, self.p)

    def varpi0_fn(self, K):
        return P.varpi0(K, self.p)

    def lam_fn(self, K):
        return P.lambda_plus(self.p.eps * np.asarray(K), self.p)

    def T_fn(self, K):
        return P.T_eps_symbol(K, self.p)

    # localized operations
    def scalar(self, sym: np.ndarray, f: np.ndarray) -> np.ndarray:
        return ifft(sym * fft(f)).real

    def varpi(self, f):
        return self.scalar(self.varpi_s, f)

    def varpi0(self, f):
        return self.scalar(self.varpi0_s, f)

    def lam(self, f):
        return self.scalar(self.lam_s, f)

    def T(self, f):
        return self.scalar(self.T_s, f)

    def J2(self, theta) -> np.ndarray:
        return _mat_apply(self.J2s, _as_pair(theta)).real

    def J1(self, theta) -> np.ndarray:
        return _mat_apply(self.J1s, _as_pair(theta)).real

    def dJ2(self, theta) -> np.ndarray:
        return _mat_apply(self.dJ2s, _as_pair(theta)).real

    def B(self, theta, theta2=None) -> np.ndarray:
        """``J1 (J2 theta . J2 theta2)``."""
        a = self.J2(theta)
        b = a if theta2 is None else self.J2(theta2)
        return self.J1(a * b)

    # periodic operations
    def J2_periodic(self, phi: PeriodicPair) -> PeriodicPair:
        m = P.J2(self.p.eps * phi.K * phi.modes, self.p)
        return PeriodicPair(phi.K, np.einsum("mij,jm->im", m, phi.coeffs))

    # mixed localized x periodic
    def mixed_product(self, f_pair: np.ndarray, phi: PeriodicPair, rel_cut=1e-17) -> CarrierField:
        """``f_pair . phi`` as carriers (no multipliers applied)."""
        return product_mixed(self.grid, f_pair, phi.components(), rel_cut=rel_cut)

    def B_mixed(self, theta, phi: PeriodicPair, J2theta=None) -> CarrierField:
        """``J1 (J2 theta . J2 phi)`` for localized ``theta`` and periodic ``phi``."""
        a = self.J2(theta) if J2theta is None else J2theta
        prod = self.mixed_product(a, self.J2_periodic(phi))
        return prod.apply_matrix(self.J1_fn)

    def first_varpi(self, cf: CarrierField) -> np.ndarray:
        return cf.apply_scalar(self.varpi_fn, 0).evaluate()[0]

    def second_lam(self, cf: CarrierField) -> np.ndarray:
        return cf.apply_scalar(self.lam_fn, 1).evaluate()[0]
