"""The eps = 0 layer: KdV profile, limit bilinear map and the operator A."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from . import params as P
from .params import DimerParams
from .spectral import Grid, LocalizedField, ParityError, fft, ifft, spectral_derivative


class SolveError(RuntimeError):
    """A linear solve failed its residual certificate."""


def sigma_values(X, p: DimerParams) -> np.ndarray:
    """``sigma0 sech^2(q0 X)``, the even solitary solution of
    ``alpha_w s'' - s + 4 w s^2 = 0``."""
    X = np.asarray(X, dtype=float)
    return p.sigma0 / np.cosh(p.q0 * X) ** 2


def sigma_integral(p: DimerParams) -> float:
    return 2.0 * p.sigma0 / p.q0


@dataclass
class KdvProfile:
    params: DimerParams
    grid: Grid
    sigma: LocalizedField = field(init=False)

    def __post_init__(self) -> None:
        self.sigma = LocalizedField(self.grid, sigma_values(self.grid.X, self.params),
                                    "even", decay_rate=2.0 * self.params.q0)

    @property
    def pair(self) -> np.ndarray:
        return np.stack([self.sigma.values, np.zeros(self.grid.N)])

    def kdv_residual(self) -> float:
        s = self.sigma.values
        p = self.params
        s2 = spectral_derivative(self.grid, s, 2)
        return float(np.max(np.abs(p.alpha_w * s2 - s + 4.0 * p.w * s * s)))


def B0(theta, theta2, p: DimerParams) -> np.ndarray:
    """``2(1+w) (t1 s1 + t2 s2, t1 s2 + t2 s1)``."""
    t = np.asarray(theta, dtype=float)
    s = np.asarray(theta2, dtype=float)
    if t.shape != s.shape:
        raise ValueError(f"grid mismatch: {t.shape} vs {s.shape}")
    c = 2.0 * (1.0 + p.w)
    return c * np.stack([t[0] * s[0] + t[1] * s[1], t[0] * s[1] + t[1] * s[0]])


def B0_matrix_route(theta, theta2, p: DimerParams) -> np.ndarray:
    """``J1(0) (J2(0) theta . J2(0) theta2)`` from the params-core matrices."""
    j1 = P.J1(0.0, p).real
    j2 = P.J2(0.0, p).real
    return j1 @ ((j2 @ np.asarray(theta)) * (j2 @ np.asarray(theta2)))


def sigma_identity_residual(p: DimerParams, grid: Grid | None = None) -> float:
    """Sup-norm of ``sigma + varpi0 b1^0(sigma, sigma)``."""
    grid = grid or Grid()
    prof = KdvProfile(p, grid)
    s = prof.sigma.values
    b1 = 2.0 * (1.0 + p.w) * s * s
    v0 = P.varpi0(grid.K, p)
    res = s + ifft(v0 * fft(b1)).real
    return float(np.max(np.abs(res)))


class AOperator:
    """``A f = f + 4(1+w) varpi0(sigma f)`` restricted to even fields."""

    def __init__(self, p: DimerParams, grid: Grid, sigma: np.ndarray | None = None,
                 rtol: float = 1e-13, check: float = 1e-9):
        self.p = p
        self.grid = grid
        self.sigma = sigma_values(grid.X, p) if sigma is None else np.asarray(sigma, float)
        self.v0 = P.varpi0(grid.K, p)
        self.coef = 4.0 * (1.0 + p.w)
        self.rtol = rtol
        self.check = check
        self._lu = None
        self.last_info: dict = {}

    def _raw(self, f: np.ndarray) -> np.ndarray:
        return f + self.coef * ifft(self.v0 * fft(self.sigma * f)).real

    def _values(self, f, name: str) -> np.ndarray:
        vals = f.values if isinstance(f, LocalizedField) else np.asarray(f, dtype=float)
        if isinstance(f, LocalizedField) and f.parity not in ("even",):
            raise ParityError(f"{name} requires an even field, got parity {f.parity!r}")
        scale = max(float(np.max(np.abs(vals))), 1e-300)
        if float(np.max(np.abs(vals - self.grid.reflect(vals)))) > 1e-10 * scale:
            raise ParityError(f"{name} requires an even field")
        return vals

    def apply(self, f) -> LocalizedField:
        vals = self._values(f, "A_apply")
        return LocalizedField(self.grid, self.grid.even_part(self._raw(vals)), "even")

    def dense(self) -> np.ndarray:
        N = self.grid.N
        # columns of the circulant varpi0 kernel
        kernel = ifft(self.v0).real
        idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
        C = kernel[idx]
        return np.eye(N) + self.coef * C * self.sigma[None, :]

    def solve(self, g) -> LocalizedField:
        b = self.grid.even_part(self._values(g, "A_inverse"))
        bnorm = float(np.max(np.abs(b)))
        if bnorm == 0.0:
            return LocalizedField(self.grid, np.zeros(self.grid.N), "even")
        N = self.grid.N
        sym = self.grid.even_part
        op = LinearOperator((N, N), matvec=lambda x: sym(self._raw(sym(x))), dtype=float)
        u, info = gmres(op, b, rtol=self.rtol, atol=0.0, restart=200, maxiter=20)
        u = sym(u)
        res = float(np.max(np.abs(self._raw(u) - b)))
        method = "gmres"
        if (info != 0 or res > self.check * bnorm) and N <= 2048:
            u = self._dense_solve(b)
            res = float(np.max(np.abs(self._raw(u) - b)))
            method = "dense"
        self.last_info = {"method": method, "gmres_info": int(info), "residual": res / bnorm}
        if res > self.check * bnorm:
            raise SolveError(
                f"A_inverse residual {res / bnorm:.3e} exceeds {self.check:.1e} "
                f"(gmres info={info}, N={N}); smallest even singular value may be tiny"
            )
        return LocalizedField(self.grid, u, "even")

    def _dense_solve(self, b: np.ndarray) -> np.ndarray:
        if self._lu is None:
            N = self.grid.N
            R = np.eye(N)[(-np.arange(N)) % N]
            Pe = 0.5 * (np.eye(N) + R)
            M = Pe @ self.dense() @ Pe + (np.eye(N) - Pe)
            self._lu = lu_factor(M)
        return self.grid.even_part(lu_solve(self._lu, b))

    def subspace_singular_values(self) -> dict:
        """Smallest singular values of A on the even and odd subspaces."""
        N = self.grid.N
        A = self.dense()
        c = N // 2
        js = np.arange(1, c)
        Qe = np.zeros((N, c + 1))
        Qo = np.zeros((N, c - 1))
        Qe[0, 0] = 1.0
        Qe[c, c] = 1.0
        for i, j in enumerate(js):
            Qe[c + j, j] = Qe[c - j, j] = 1 / np.sqrt(2)
            Qo[c + j, i] = 1 / np.sqrt(2)
            Qo[c - j, i] = -1 / np.sqrt(2)
        se = np.linalg.svd(Qe.T @ A @ Qe, compute_uv=False)
        so = np.linalg.svd(Qo.T @ A @ Qo, compute_uv=False)
        return {"even_min": float(se.min()), "odd_min": float(so.min())}


def A_apply(f, p: DimerParams, grid: Grid | None = None) -> LocalizedField:
    grid = grid or f.grid
    return AOperator(p, grid).apply(f)


def A_inverse(g, p: DimerParams, grid: Grid | None = None) -> LocalizedField:
    grid = grid or g.grid
    return AOperator(p, grid).solve(g)
