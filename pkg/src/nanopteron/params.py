"""Lattice parameters and the dispersion symbols of the diatomic FPUT chain.

Every symbol is a vectorized function of a real wavenumber ``k`` (lattice
units) or ``K`` (long-wave scaled units, ``k = eps*K``).  Matrix-valued
symbols return arrays of shape ``k.shape + (2, 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ParameterError(ValueError):
    """Raised when lattice parameters violate a precondition."""


@dataclass(frozen=True)
class DimerParams:
    """Mass ratio ``w`` and long-wave parameter ``eps`` with derived constants.

    ``sigma0`` and ``q0`` parametrize the KdV profile
    ``sigma(X) = sigma0 * sech(q0 X)**2``.
    """

    w: float
    eps: float
    c_w: float = field(init=False)
    c_eps: float = field(init=False)
    alpha_w: float = field(init=False)
    sigma0: float = field(init=False)
    q0: float = field(init=False)

    def __post_init__(self) -> None:
        w, eps = float(self.w), float(self.eps)
        if not np.isfinite(w) or w <= 1.0:
            raise ParameterError(f"mass ratio w must exceed 1, got {self.w!r}")
        if not np.isfinite(eps) or not 0.0 < eps < 1.0:
            raise ParameterError(f"eps must lie in (0, 1), got {self.eps!r}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "eps", eps)
        c_w2 = 2.0 * w / (1.0 + w)
        alpha = (c_w2 / 3.0) * (1.0 - w + w * w) / (1.0 + w) ** 2
        object.__setattr__(self, "c_w", float(np.sqrt(c_w2)))
        object.__setattr__(self, "c_eps", float(np.sqrt(c_w2 + eps * eps)))
        object.__setattr__(self, "alpha_w", float(alpha))
        object.__setattr__(self, "sigma0", 3.0 / (8.0 * w))
        object.__setattr__(self, "q0", float(1.0 / (2.0 * np.sqrt(alpha))))

    @property
    def c_w2(self) -> float:
        return 2.0 * self.w / (1.0 + self.w)

    @property
    def c_eps2(self) -> float:
        return self.c_w2 + self.eps**2

    def with_eps(self, eps: float) -> "DimerParams":
        return DimerParams(self.w, eps)

    def to_dict(self) -> dict:
        return {
            "w": self.w,
            "eps": self.eps,
            "c_w": self.c_w,
            "c_eps": self.c_eps,
            "alpha_w": self.alpha_w,
            "sigma0": self.sigma0,
            "q0": self.q0,
        }


@dataclass(frozen=True)
class SymbolFn:
    """A Fourier symbol with declared parity and period.

    ``parity`` is ``"even"``, ``"odd"`` or ``"none"``; ``period`` is the
    period in the wavenumber or ``None``.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    parity: str = "none"
    period: float | None = None
    name: str = "symbol"

    def __call__(self, k):
        return self.evaluate(np.asarray(k, dtype=float))

    def check_parity(self, ks: np.ndarray, tol: float = 1e-12) -> bool:
        if self.parity == "none":
            return True
        plus, minus = self(ks), self(-ks)
        if self.parity == "even":
            return bool(np.allclose(plus, minus, rtol=tol, atol=tol))
        return bool(np.allclose(plus, -minus, rtol=tol, atol=tol))


def _w(p) -> float:
    return p.w if isinstance(p, DimerParams) else float(p)


# scalar symbols -------------------------------------------------------------


def rho(k, p) -> np.ndarray:
    w = _w(p)
    k = np.asarray(k, dtype=float)
    return np.sqrt((1.0 - w) ** 2 + 4.0 * w * np.cos(k) ** 2)


def rho_prime(k, p) -> np.ndarray:
    w = _w(p)
    k = np.asarray(k, dtype=float)
    return -2.0 * w * np.sin(2.0 * k) / rho(k, w)


def rho_second(k, p) -> np.ndarray:
    w = _w(p)
    k = np.asarray(k, dtype=float)
    r = rho(k, w)
    rp = -2.0 * w * np.sin(2.0 * k) / r
    return (-4.0 * w * np.cos(2.0 * k) - rp * rp) / r


def lambda_minus(k, p) -> np.ndarray:
    # 4w sin^2 k / (1+w+rho) avoids the cancellation in 1+w-rho near k=0
    w = _w(p)
    k = np.asarray(k, dtype=float)
    return 4.0 * w * np.sin(k) ** 2 / (1.0 + w + rho(k, w))


def lambda_plus(k, p) -> np.ndarray:
    w = _w(p)
    return 1.0 + w + rho(k, w)


def lambda_pm(k, p) -> tuple[np.ndarray, np.ndarray]:
    return lambda_minus(k, p), lambda_plus(k, p)


def lambda_minus_over_k2(k, p) -> np.ndarray:
    """``lambda_-(k)/k**2``, finite at ``k = 0`` where it equals ``c_w**2``."""
    w = _w(p)
    k = np.asarray(k, dtype=float)
    sinc = np.sinc(k / np.pi)  # sin(k)/k
    return 4.0 * w * sinc**2 / (1.0 + w + rho(k, w))


def beta(k, p) -> np.ndarray:
    w = _w(p)
    k = np.asarray(k, dtype=float)
    return w * np.exp(1j * k) + np.exp(-1j * k)


def gamma(k, p) -> np.ndarray:
    w = _w(p)
    k = np.asarray(k, dtype=float)
    return np.exp(-1j * k) + np.exp(1j * k) * rho(k, w) / beta(k, w)


# matrix symbols -------------------------------------------------------------


def _mat(a, b, c, d) -> np.ndarray:
    out = np.empty(np.shape(a) + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = c
    out[..., 1, 1] = d
    return out


def J2(k, p) -> np.ndarray:
    w = _w(p)
    g = gamma(k, w)
    gb = g * beta(k, w)
    gr = g * rho(k, w)
    return _mat(gb, gb, gr, -gr)


def J1(k, p) -> np.ndarray:
    """Inverse of :func:`J2`, written out in closed form."""
    w = _w(p)
    g = gamma(k, w)
    u = 1.0 / (2.0 * g * beta(k, w))
    v = 1.0 / (2.0 * g * rho(k, w))
    return _mat(u, v, u, -v)


GAMMA_REG = 1e-3


def J1_reg(k, p, delta: float = GAMMA_REG) -> np.ndarray:
    """:func:`J1` tapered by ``|gamma|^8 / (|gamma|^8 + delta^8)``.

    ``gamma`` vanishes at ``k = pi (mod 2 pi)``, where ``J1`` has a pole.
    The taper bounds the amplification by about ``1/delta``, leaves ``J1``
    unchanged to rounding where ``|gamma| >> delta`` and, because ``|gamma|``
    is even, keeps the parity structure of ``J1``.
    """
    w = _w(p)
    k = np.asarray(k, dtype=float)
    g = gamma(k, w)
    a2 = np.abs(g) ** 2
    ginv = np.conj(g) * a2**3 / (a2**4 + delta**8)
    u = 0.5 * ginv / beta(k, w)
    v = 0.5 * ginv / rho(k, w)
    return _mat(u, v, u, -v)


def L_tilde(k, p) -> np.ndarray:
    w = _w(p)
    k = np.asarray(k, dtype=float)
    diag = np.full(k.shape, 1.0 + w, dtype=complex)
    return _mat(diag, -beta(k, w), -beta(-k, w), diag)


# speed-dependent symbols ----------------------------------------------------


def _check_supersonic(c: float, p) -> None:
    w = _w(p)
    c_w2 = 2.0 * w / (1.0 + w)
    if not c * c > c_w2:
        raise ParameterError(f"speed c={c!r} is not supersonic (c_w^2={c_w2!r})")


def varpi_c(k, c: float, p) -> np.ndarray:
    """Friesecke-Pego multiplier ``-lambda_-(k) / (c^2 k^2 - lambda_-(k))``.

    Written as ``-zeta/(c^2 - zeta)`` with ``zeta = lambda_-(k)/k^2`` so the
    removable singularity at ``k = 0`` never appears.
    """
    _check_supersonic(c, p)
    zeta = lambda_minus_over_k2(k, p)
    return -zeta / (c * c - zeta)


def varpi_c_raw(k, c: float, p) -> np.ndarray:
    """The unsimplified quotient; undefined at ``k = 0``."""
    k = np.asarray(k, dtype=float)
    lm = lambda_minus(k, p)
    return -lm / (c * c * k * k - lm)


def xi_c(k, c: float, p) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return -c * c * k * k + lambda_plus(k, p)


def xi_c_prime(k, c: float, p) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return -2.0 * c * c * k + rho_prime(k, p)


def xi_c_second(k, c: float, p) -> np.ndarray:
    return -2.0 * c * c + rho_second(k, p)


def kc_bracket(c: float, p) -> tuple[float, float]:
    w = _w(p)
    return float(np.sqrt(2.0 * w) / c), float(np.sqrt(2.0 + 2.0 * w) / c)


def find_kc(c: float, p, tol: float = 1e-13) -> tuple[float, float]:
    """Root of ``xi_c`` on its guaranteed bracket, by bisection.

    Returns ``(k_c, |xi_c'(k_c)|)``; the second value is the measured
    transversality constant.
    """
    _check_supersonic(c, p)
    lo, hi = kc_bracket(c, p)
    f_lo, f_hi = float(xi_c(lo, c, p)), float(xi_c(hi, c, p))
    if f_lo < 0.0 or f_hi > 0.0:
        raise ParameterError(
            f"xi_c has no sign change on [{lo}, {hi}] for c={c}, w={_w(p)}"
        )
    if f_lo == 0.0:
        return lo, float(abs(xi_c_prime(lo, c, p)))
    if f_hi == 0.0:
        return hi, float(abs(xi_c_prime(hi, c, p)))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = float(xi_c(mid, c, p))
        if f_mid == 0.0:
            lo = hi = mid
            break
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
    # the endpoint with the smaller residual
    k = lo if abs(float(xi_c(lo, c, p))) <= abs(float(xi_c(hi, c, p))) else hi
    return k, float(abs(xi_c_prime(k, c, p)))


# long-wave scaled symbols ---------------------------------------------------


def varpi_eps(K, p: DimerParams) -> np.ndarray:
    """``eps^2 varpi_{c_eps}(eps K)``; equals ``-c_w^2`` at ``K = 0``."""
    K = np.asarray(K, dtype=float)
    eps = p.eps
    zeta = lambda_minus_over_k2(eps * K, p)
    # c_eps^2 - zeta = eps^2 + (c_w^2 - zeta); the bracket is O(eps^2 K^2)
    return -eps * eps * zeta / (eps * eps + (p.c_w2 - zeta))


def varpi0(K, p: DimerParams) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    return -p.c_w2 / (1.0 + p.alpha_w * K * K)


def lambda_plus_eps(K, p: DimerParams) -> np.ndarray:
    return lambda_plus(p.eps * np.asarray(K, dtype=float), p)


def T_eps_symbol(K, p: DimerParams) -> np.ndarray:
    """Symbol of ``eps^2 c_eps^2 d^2/dX^2 + lambda_+^eps``."""
    K = np.asarray(K, dtype=float)
    return -p.eps**2 * p.c_eps2 * K * K + lambda_plus(p.eps * K, p)


def symbol(fn: Callable, p, parity: str = "none", period=None, name=None) -> SymbolFn:
    """Bind ``p`` into a symbol function."""
    return SymbolFn(lambda k: fn(k, p), parity=parity, period=period,
                    name=name or fn.__name__)
