"""Run configuration: TOML file sections overridden by command-line flags."""

from __future__ import annotations

import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .params import ParameterError

OUT_ENV = "NANOPTERON_OUT"
DEFAULT_OUT = "nanopteron_out"


class ConfigError(ValueError):
    pass


@dataclass
class ParamsSection:
    w: float = 2.0
    eps: float = 0.1


@dataclass
class GridSection:
    L: float = 40.0
    N: int = 4096


@dataclass
class SolverSection:
    tol: float = 1e-11
    max_iter: int = 200
    damping: float = 0.5
    M: int = 32
    a0: float = 1e-2
    residual_check: float = 1e-7
    consistency_check: float = 1e-9


@dataclass
class RippleSection:
    a: float = 1e-3
    tol: float = 1e-12
    max_iter: int = 200
    M: int = 32


@dataclass
class DispersionSection:
    k_max: float = math.pi
    n_k: int = 1001
    c: list = field(default_factory=lambda: [1.05, 1.1, 1.2, 1.3, 1.5, 2.0])


@dataclass
class SimulateSection:
    dt: float = 0.02
    T: float = 500.0
    J: int = 0  # 0 selects 2 * floor(L / eps) rounded down to even
    sample_every: float = 5.0
    initial: str = "nanopteron"  # or "leading-order"
    compare: bool = True


@dataclass
class SweepSection:
    eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    workers: int = 1


@dataclass
class RunConfig:
    command: str = "solve"
    out: str = ""
    seed: int = 0
    params: ParamsSection = field(default_factory=ParamsSection)
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    ripple: RippleSection = field(default_factory=RippleSection)
    dispersion: DispersionSection = field(default_factory=DispersionSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def chain_length(self) -> int:
        if self.simulate.J:
            return int(self.simulate.J)
        J = int(2 * math.floor(self.grid.L / self.params.eps))
        return J - (J % 2)

    def validate(self) -> None:
        p, g, s = self.params, self.grid, self.solver
        if not (p.w > 1.0 and math.isfinite(p.w)):
            raise ParameterError(f"w must be finite and > 1, got {p.w}")
        if not (0.0 < p.eps <= 0.3):
            raise ParameterError(f"eps must lie in (0, 0.3], got {p.eps}")
        if g.L <= 0 or g.N < 16 or g.N & (g.N - 1):
            raise ConfigError(f"grid needs L > 0 and N a power of two >= 16, got L={g.L}, N={g.N}")
        if s.tol <= 0 or s.max_iter < 1 or not (0.0 < s.damping <= 1.0) or s.M < 4:
            raise ConfigError("solver needs tol > 0, max_iter >= 1, 0 < damping <= 1, M >= 4")
        if self.ripple.tol <= 0 or self.ripple.max_iter < 1 or self.ripple.M < 4:
            raise ConfigError("ripple needs tol > 0, max_iter >= 1, M >= 4")
        if self.dispersion.n_k < 2 or self.dispersion.k_max <= 0:
            raise ConfigError("dispersion needs n_k >= 2 and k_max > 0")
        if self.simulate.initial not in ("nanopteron", "leading-order"):
            raise ConfigError(f"unknown initial data {self.simulate.initial!r}")
        if self.simulate.J % 2:
            raise ConfigError("simulate.J must be even")
        if not self.sweep.eps or any(not (0.0 < e <= 0.3) for e in self.sweep.eps):
            raise ConfigError("sweep.eps must be a non-empty list in (0, 0.3]")
        if self.sweep.workers < 1:
            raise ConfigError("sweep.workers must be >= 1")


_SECTIONS = ("params", "grid", "solver", "ripple", "dispersion", "simulate", "sweep")


def _merge_section(obj, data: dict, name: str) -> None:
    known = {f.name: f for f in fields(obj)}
    for key, val in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
        cur = getattr(obj, key)
        if isinstance(cur, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{name}.{key} must be a boolean")
        elif isinstance(cur, int) and not isinstance(cur, bool):
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(f"{name}.{key} must be an integer")
        elif isinstance(cur, float):
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"{name}.{key} must be a number")
            val = float(val)
        elif isinstance(cur, list):
            if not isinstance(val, list):
                raise ConfigError(f"{name}.{key} must be a list")
            val = [float(v) for v in val]
        setattr(obj, key, val)


def load_config(path: str | os.PathLike | None, command: str,
                overrides: dict | None = None) -> RunConfig:
    """Defaults, then the TOML file, then flag overrides (flags win)."""
    cfg = RunConfig(command=command)
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for key, val in data.items():
            if key in _SECTIONS:
                if not isinstance(val, dict):
                    raise ConfigError(f"section [{key}] must be a table")
                _merge_section(getattr(cfg, key), val, key)
            elif key in ("out", "seed"):
                setattr(cfg, key, val)
            else:
                raise ConfigError(f"unknown top-level key {key!r}")
    for dotted, val in (overrides or {}).items():
        if val is None:
            continue
        if "." in dotted:
            sec, key = dotted.split(".", 1)
            _merge_section(getattr(cfg, sec), {key: val}, sec)
        else:
            setattr(cfg, dotted, val)
    cfg.validate()
    return cfg


def output_dir(cfg: RunConfig) -> Path:
    """``--out`` if given, else ``$NANOPTERON_OUT/<command>``, else a local default."""
    if cfg.out:
        return Path(cfg.out)
    root = os.environ.get(OUT_ENV) or DEFAULT_OUT
    return Path(root) / cfg.command
