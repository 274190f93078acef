"""Discrete fields on the scaled line and Fourier-multiplier machinery.

Conventions: the grid is ``X_j = -L + j*dx`` for ``j = 0..N-1`` (periodic),
transforms follow numpy ordering, and a multiplier with symbol ``mu`` acts as
``ifft(mu(K) * fft(f))``.  Periodic functions are stored as coefficients
``c_m`` of ``sum_m c_m exp(i m K X)`` for ``m = -M..M``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .io import fmt


class ResolutionError(ValueError):
    """The grid cannot resolve a requested frequency."""


class SymbolError(ValueError):
    """A symbol evaluated to a non-finite value on the grid."""


class ParityError(ValueError):
    """A field violates its declared parity."""


class BoundaryDecayWarning(UserWarning):
    pass


PARITY_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)`` with ``N`` points."""

    L: float = 40.0
    N: int = 4096

    def __post_init__(self) -> None:
        if self.N < 4 or self.N % 2:
            raise ValueError(f"N must be even and >= 4, got {self.N}")
        if self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def X(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def K(self) -> np.ndarray:
        """Wavenumbers in transform order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @property
    def K_sorted(self) -> np.ndarray:
        return np.fft.fftshift(self.K)

    @property
    def dK(self) -> float:
        return np.pi / self.L

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.dx

    @property
    def center(self) -> int:
        return self.N // 2

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """``f(-X)`` sampled on the grid (last axis)."""
        idx = (-np.arange(self.N)) % self.N
        return values[..., idx]

    def even_part(self, values: np.ndarray) -> np.ndarray:
        return 0.5 * (values + self.reflect(values))

    def odd_part(self, values: np.ndarray) -> np.ndarray:
        return 0.5 * (values - self.reflect(values))

    def resolves(self, freq: float, points_per_period: float = 10.0) -> bool:
        return self.k_nyquist >= 0.5 * points_per_period * abs(freq)

    def require_resolution(self, freq: float) -> None:
        if not self.resolves(freq):
            raise ResolutionError(
                f"grid (L={self.L}, N={self.N}) resolves up to {self.k_nyquist:.6g}, "
                f"needs >= 5*{abs(freq):.6g}"
            )

    @classmethod
    def for_frequency(cls, L: float, N: int, freq: float) -> "Grid":
        """Smallest power-of-two escalation of ``N`` resolving ``freq``."""
        g = cls(L, N)
        while not g.resolves(freq):
            g = cls(L, 2 * g.N)
        return g


def fft(values: np.ndarray) -> np.ndarray:
    return np.fft.fft(values, axis=-1)


def ifft(coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifft(coeffs, axis=-1)


def _eval_symbol(sym: Callable, K: np.ndarray) -> np.ndarray:
    vals = np.asarray(sym(K))
    bad = ~np.isfinite(vals)
    if bad.any():
        if vals.ndim > K.ndim:
            bad = bad.reshape(K.shape + (-1,)).any(axis=-1)
        raise SymbolError(f"symbol is not finite at K = {K[bad][0]!r}")
    return vals


def parity_of_product(*parities: str) -> str:
    if any(p == "none" for p in parities):
        return "none"
    odd = sum(p == "odd" for p in parities) % 2
    return "odd" if odd else "even"


def parity_defect(grid: Grid, values: np.ndarray, parity: str) -> float:
    """Sup-norm mismatch between ``values`` and its declared reflection.

    The sample at ``X = -L`` has no mirror partner on the truncated line and
    is excluded.
    """
    if parity == "none":
        return 0.0
    refl = grid.reflect(values)
    diff = values - refl if parity == "even" else values + refl
    return float(np.max(np.abs(diff[..., 1:]))) if values.size > 1 else 0.0


@dataclass
class LocalizedField:
    """Real samples of a decaying function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray
    parity: str = "none"
    decay_rate: float | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N,):
            raise ValueError("values must match the grid")
        if self.parity not in ("even", "odd", "none"):
            raise ValueError(f"unknown parity {self.parity!r}")

    @property
    def X(self) -> np.ndarray:
        return self.grid.X

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def parity_defect(self) -> float:
        return parity_defect(self.grid, self.values, self.parity)

    def check_parity(self, tol: float = PARITY_TOL, name: str = "field") -> None:
        d = self.parity_defect()
        scale = max(1.0, self.sup())
        if d > tol * scale:
            raise ParityError(f"{name} violates declared {self.parity} parity by {d:.3e}")

    def boundary_ratio(self, fraction: float = 0.05) -> float:
        """max |f| on the outer ``fraction`` of the grid over max |f|."""
        return boundary_ratio(self.grid, self.values, fraction)

    def symmetrized(self) -> "LocalizedField":
        if self.parity == "even":
            v = self.grid.even_part(self.values)
        elif self.parity == "odd":
            v = self.grid.odd_part(self.values)
        else:
            v = self.values
        return LocalizedField(self.grid, v, self.parity, self.decay_rate)

    def __add__(self, other: "LocalizedField") -> "LocalizedField":
        par = self.parity if self.parity == other.parity else "none"
        return LocalizedField(self.grid, self.values + other.values, par)

    def scaled(self, c: float) -> "LocalizedField":
        return LocalizedField(self.grid, c * self.values, self.parity, self.decay_rate)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("X,value\n")
            for x, v in zip(self.grid.X, self.values):
                fh.write(f"{fmt(x)},{fmt(v)}\n")


def boundary_ratio(grid: Grid, values: np.ndarray, fraction: float = 0.05) -> float:
    values = np.atleast_2d(values)
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return 0.0
    n_edge = max(1, int(round(fraction * grid.N / 2)))
    edge = np.concatenate([values[..., :n_edge], values[..., -n_edge:]], axis=-1)
    return float(np.max(np.abs(edge))) / peak


def read_localized_csv(path, grid: Grid, parity: str = "none") -> LocalizedField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.N or not np.allclose(data[:, 0], grid.X, atol=1e-12):
        raise ValueError("CSV samples do not match the grid")
    return LocalizedField(grid, data[:, 1], parity)


@dataclass
class PeriodicFieldCoeffs:
    """Coefficients ``c_m``, ``m = -M..M``, of ``sum_m c_m exp(i m K X)``."""

    K: float
    coeffs: np.ndarray
    parity: str = "none"

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 1 or self.coeffs.size % 2 == 0:
            raise ValueError("coefficients must be a 1-D array of odd length")

    @property
    def M(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def coeff(self, m: int) -> complex:
        return complex(self.coeffs[m + self.M])

    def reality_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1]))))

    def parity_defect(self) -> float:
        if self.parity == "even":
            return float(np.max(np.abs(self.coeffs.imag)))
        if self.parity == "odd":
            return float(np.max(np.abs(self.coeffs.real)))
        return 0.0

    def evaluate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ph = np.exp(1j * self.K * np.multiply.outer(X, self.modes))
        return (ph @ self.coeffs).real

    @classmethod
    def zeros(cls, K: float, M: int, parity: str = "none") -> "PeriodicFieldCoeffs":
        return cls(K, np.zeros(2 * M + 1, dtype=complex), parity)

    @classmethod
    def sine(cls, K: float, M: int) -> "PeriodicFieldCoeffs":
        """``sin(K X)``."""
        c = np.zeros(2 * M + 1, dtype=complex)
        c[M + 1] = 1.0 / 2j
        c[M - 1] = -1.0 / 2j
        return cls(K, c, "odd")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# K={fmt(self.K)}\n")
            fh.write("mode,re,im\n")
            for m, c in zip(self.modes, self.coeffs):
                fh.write(f"{m},{fmt(c.real)},{fmt(c.imag)}\n")


def read_periodic_csv(path, parity: str = "none") -> PeriodicFieldCoeffs:
    with open(path) as fh:
        head = fh.readline().strip()
    if not head.startswith("# K="):
        raise ValueError("missing K header line")
    K = float(head[4:])
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return PeriodicFieldCoeffs(K, data[:, 1] + 1j * data[:, 2], parity)


# multipliers ----------------------------------------------------------------


def symbol_parity_rule(sym_parity: str, f_parity: str) -> str:
    """Even real symbols preserve parity; odd ones flip it."""
    if sym_parity == "even":
        return f_parity
    if sym_parity == "odd" and f_parity != "none":
        return "even" if f_parity == "odd" else "odd"
    return "none"


def apply_multiplier_localized(sym, f: LocalizedField) -> LocalizedField:
    mu = _eval_symbol(sym, f.grid.K)
    out = ifft(mu * fft(f.values)).real
    parity = symbol_parity_rule(getattr(sym, "parity", "none"), f.parity)
    return LocalizedField(f.grid, out, parity, f.decay_rate)


def apply_multiplier_periodic(sym, g: PeriodicFieldCoeffs) -> PeriodicFieldCoeffs:
    mu = _eval_symbol(sym, g.modes * g.K)
    parity = symbol_parity_rule(getattr(sym, "parity", "none"), g.parity)
    return PeriodicFieldCoeffs(g.K, mu * g.coeffs, parity)


def apply_multiplier_modulated(sym, f, omega: float, grid: Grid | None = None) -> np.ndarray:
    """``mu(f e^{i omega X})`` on the grid via the shift theorem.

    ``f`` may be a :class:`LocalizedField` or a (complex) sample array.
    Returns complex samples.
    """
    if isinstance(f, LocalizedField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f)
    if grid is None:
        raise ValueError("grid required for raw arrays")
    mu = _eval_symbol(sym, grid.K + omega)
    env = ifft(mu * fft(vals))
    return env * np.exp(1j * omega * grid.X)


def spectral_derivative(grid: Grid, values: np.ndarray, order: int = 1) -> np.ndarray:
    ik = 1j * grid.K
    if order % 2 == 1:
        ik[grid.N // 2] = 0.0  # drop the unpaired Nyquist mode for odd orders
    out = ifft(ik**order * fft(values))
    return out.real if np.isrealobj(values) else out


# carrier representation -----------------------------------------------------


@dataclass
class CarrierField:
    """Finite sum ``sum_w g_w(X) exp(i w X)`` of modulated envelopes.

    Envelopes have shape ``(C, N)`` (``C`` components).  The represented
    function is real when the terms come in conjugate pairs.
    """

    grid: Grid
    terms: dict = field(default_factory=dict)
    ncomp: int = 2

    @classmethod
    def from_localized(cls, grid: Grid, values: np.ndarray) -> "CarrierField":
        values = np.atleast_2d(np.asarray(values))
        return cls(grid, {0.0: values.astype(complex)}, values.shape[0])

    def add_term(self, omega: float, env: np.ndarray) -> None:
        omega = float(omega)
        if omega in self.terms:
            self.terms[omega] = self.terms[omega] + env
        else:
            self.terms[omega] = np.array(env, dtype=complex)

    def frequencies(self) -> list[float]:
        return sorted(self.terms)

    def require_resolution(self) -> None:
        for om in self.terms:
            if abs(om) > 0.8 * self.grid.k_nyquist:
                raise ResolutionError(
                    f"carrier frequency {om:.6g} exceeds 0.8 of Nyquist "
                    f"{self.grid.k_nyquist:.6g}"
                )

    def apply_matrix(self, mat_fn: Callable[[np.ndarray], np.ndarray]) -> "CarrierField":
        """Apply a 2x2 matrix symbol ``mat_fn(K)`` (shape ``(N, 2, 2)``)."""
        out = CarrierField(self.grid, {}, 2)
        for om, env in self.terms.items():
            m = _eval_symbol(mat_fn, self.grid.K + om)
            fe = fft(env)
            res = np.einsum("nij,jn->in", m, fe)
            out.terms[om] = ifft(res)
        return out

    def apply_scalar(self, sym: Callable, comp: int) -> "CarrierField":
        """Apply a scalar symbol to one component; result has one component."""
        out = CarrierField(self.grid, {}, 1)
        for om, env in self.terms.items():
            mu = _eval_symbol(sym, self.grid.K + om)
            out.terms[om] = ifft(mu * fft(env[comp]))[None, :]
        return out

    def evaluate(self) -> np.ndarray:
        """Real samples, shape ``(C, N)``."""
        X = self.grid.X
        total = np.zeros((self.ncomp, self.grid.N), dtype=complex)
        for om, env in self.terms.items():
            total += env if om == 0.0 else env * np.exp(1j * om * X)
        return total.real

    def scaled(self, c: complex) -> "CarrierField":
        return CarrierField(self.grid, {om: c * e for om, e in self.terms.items()},
                            self.ncomp)

    def __add__(self, other: "CarrierField") -> "CarrierField":
        out = CarrierField(self.grid, {om: e.copy() for om, e in self.terms.items()},
                           self.ncomp)
        for om, env in other.terms.items():
            out.add_term(om, env)
        return out


def _coeff_stack(g) -> tuple[float, np.ndarray]:
    """Frequency and ``(C, 2M+1)`` coefficient stack of one or two periodic fields."""
    if isinstance(g, PeriodicFieldCoeffs):
        return g.K, g.coeffs[None, :]
    gs = list(g)
    K = gs[0].K
    if any(abs(x.K - K) > 0 for x in gs) or len({x.coeffs.size for x in gs}) != 1:
        raise ValueError("periodic components must share K and M")
    return K, np.stack([x.coeffs for x in gs])


def product_mixed(
    grid: Grid,
    f: np.ndarray,
    g,
    rel_cut: float = 1e-17,
) -> CarrierField:
    """Pointwise product of localized samples ``f`` (``(C, N)`` or ``(N,)``)
    with a periodic field (or component pair), as one carrier per mode.

    Modes whose coefficients are below ``rel_cut`` of the largest are dropped
    (their contribution is under rounding level).
    """
    K, stack = _coeff_stack(g)
    f = np.atleast_2d(np.asarray(f))
    if f.shape[0] != stack.shape[0]:
        if f.shape[0] == 1:
            f = np.repeat(f, stack.shape[0], axis=0)
        elif stack.shape[0] == 1:
            stack = np.repeat(stack, f.shape[0], axis=0)
        else:
            raise ValueError("component count mismatch")
    M = (stack.shape[1] - 1) // 2
    mags = np.max(np.abs(stack), axis=0)
    top = float(mags.max()) if mags.size else 0.0
    out = CarrierField(grid, {}, f.shape[0])
    for i, m in enumerate(range(-M, M + 1)):
        if mags[i] == 0.0 or mags[i] < rel_cut * top:
            continue
        out.add_term(m * K, f * stack[:, i][:, None])
    out.require_resolution()
    return out


# quadrature and norms -------------------------------------------------------


@dataclass(frozen=True)
class IotaResult:
    value: float
    boundary_ratio: float
    warning: str | None = None

    def __float__(self) -> float:
        return self.value


def iota_quadrature(f, K: float, grid: Grid | None = None, guard: float = 1e-10) -> IotaResult:
    """Trapezoid rule for ``int f(X) sin(K X) dX`` over the grid."""
    if isinstance(f, LocalizedField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f, dtype=float)
        if grid is None:
            raise ValueError("grid required for raw arrays")
    X = grid.X
    val = float(np.sum(vals * np.sin(K * X)) * grid.dx)
    br = boundary_ratio(grid, vals)
    msg = None
    if br > guard:
        msg = f"integrand boundary ratio {br:.3e} exceeds {guard:.1e}"
        warnings.warn(msg, BoundaryDecayWarning, stacklevel=2)
    return IotaResult(val, br, msg)


def iota_values(grid: Grid, vals: np.ndarray, K: float) -> float:
    """Unguarded version of :func:`iota_quadrature` for inner loops."""
    return float(np.sum(vals * np.sin(K * grid.X)) * grid.dx)


def weighted_norm(f, r: int = 0, q: float = 0.0, grid: Grid | None = None,
                  guard: float = 1e-6) -> float:
    """Discrete ``H^r`` norm of ``cosh(q X) f``.

    Raises ``OverflowError`` when the weighted field has not decayed at the
    boundary (relative level ``guard``), i.e. the norm would be dominated by
    truncation or rounding noise.
    """
    if isinstance(f, LocalizedField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f, dtype=float)
        if grid is None:
            raise ValueError("grid required for raw arrays")
    if q * grid.L > 700:
        raise OverflowError(f"cosh(q L) overflows for q={q}, L={grid.L}; use a smaller q")
    g = np.cosh(q * grid.X) * vals
    if q > 0 and boundary_ratio(grid, g) > guard:
        raise OverflowError(
            f"weighted field not decayed at the boundary (ratio "
            f"{boundary_ratio(grid, g):.2e}); use a smaller q or a field with faster decay"
        )
    ghat = fft(g)
    total = 0.0
    for j in range(r + 1):
        dj = ifft((1j * grid.K) ** j * ghat).real if j else g
        total += float(np.sum(dj * dj) * grid.dx)
    return float(np.sqrt(total))


def fit_decay_rate(grid: Grid, values: np.ndarray, floor: float = 1e-12) -> float:
    """Empirical exponential decay rate from a log-linear fit of the tails.

    Uses the samples where ``floor * max < |f| < 1e-3 * max``.
    """
    a = np.abs(np.asarray(values))
    peak = a.max()
    if peak == 0:
        return float("nan")
    X = np.abs(grid.X)
    sel = (a > floor * peak) & (a < 1e-3 * peak) & (X > 0)
    if sel.sum() < 8:
        return float("nan")
    # upper envelope: bin by |X| and keep the maximum per bin
    bins = np.linspace(X[sel].min(), X[sel].max(), 24)
    idx = np.digitize(X[sel], bins)
    xs, ys = [], []
    for b in np.unique(idx):
        m = idx == b
        j = np.argmax(a[sel][m])
        xs.append(X[sel][m][j])
        ys.append(np.log(a[sel][m][j]))
    if len(xs) < 3:
        return float("nan")
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)


def trig_interpolate(grid: Grid, values: np.ndarray, Xq, deriv: int = 0,
                     rel_cut: float = 1e-18) -> np.ndarray:
    """Evaluate the trigonometric interpolant (or its derivative) at ``Xq``.

    Modes below ``rel_cut`` of the largest are skipped.
    """
    Xq = np.asarray(Xq, dtype=float)
    vals = np.atleast_2d(values)
    c = fft(vals) / grid.N
    K = grid.K.copy()
    nyq = grid.N // 2
    c[..., nyq] = 0.0
    keep = np.max(np.abs(c), axis=0) > rel_cut * np.max(np.abs(c))
    Kk = K[keep]
    ck = c[..., keep] * (1j * Kk) ** deriv
    out = np.empty((vals.shape[0],) + Xq.shape)
    flat = Xq.ravel() + grid.L
    # chunk to bound memory
    step = max(1, 2_000_000 // max(1, Kk.size))
    res = np.empty((vals.shape[0], flat.size))
    for s in range(0, flat.size, step):
        ph = np.exp(1j * np.multiply.outer(flat[s:s + step], Kk))
        res[:, s:s + step] = (ck @ ph.T).real
    out[:] = res.reshape((vals.shape[0],) + Xq.shape)
    return out if np.ndim(values) > 1 else out[0]
