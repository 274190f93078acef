"""Command-line driver: ``nanopteron {dispersion,ripple,solve,simulate,sweep}``."""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import params as P
from .config import DEFAULT_OUT, OUT_ENV, ConfigError, RunConfig, load_config, output_dir
from .io import write_csv, write_json
from .lattice import SimConfig, SiteSampler, simulate
from .params import DimerParams, ParameterError
from .ripple import RippleError, ripple_period, solve_ripple
from .solver import SolverConfig, descale, iterate_nanopteron

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


def _params(cfg: RunConfig, eps: float | None = None) -> DimerParams:
    return DimerParams(cfg.params.w, cfg.params.eps if eps is None else eps)


def _solver_config(cfg: RunConfig) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(L=cfg.grid.L, N=cfg.grid.N, M=s.M, tol=s.tol, max_iter=s.max_iter,
                        damping=s.damping, a0=s.a0)


def _prepare(cfg: RunConfig) -> Path:
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", {"version": __version__, "config": cfg.to_dict()})
    return out


# ---------------------------------------------------------------------- commands


def cmd_dispersion(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    p = _params(cfg)
    k = np.linspace(0.0, cfg.dispersion.k_max, cfg.dispersion.n_k)
    lm, lp = P.lambda_minus(k, p), P.lambda_plus(k, p)
    acoustic = np.sqrt(P.lambda_minus_over_k2(k, p))
    with np.errstate(divide="ignore"):
        optical = np.where(k > 0, np.sqrt(lp) / np.where(k > 0, k, 1.0), np.inf)
    write_csv(out / "dispersion.csv",
              ["k", "lambda_minus", "lambda_plus", "speed_acoustic", "speed_optical"],
              zip(k, lm, lp, acoustic, optical))
    rows = []
    for c in cfg.dispersion.c:
        if c <= p.c_w:
            continue
        kc, slope = P.find_kc(c, p)
        rows.append((c, kc, slope, float(P.xi_c(kc, c, p))))
    write_csv(out / "kc.csv", ["c", "k_c", "abs_xi_prime", "xi_residual"], rows)
    write_json(out / "report.json", {
        "w": p.w, "c_w": p.c_w, "lambda_plus_0": float(lp[0]),
        "acoustic_speed_max": float(acoustic.max()), "n_kc": len(rows),
    })
    return EXIT_OK


def cmd_ripple(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    p = _params(cfg)
    r = cfg.ripple
    sol = solve_ripple(r.a, p, tol=r.tol, max_iter=r.max_iter, M=r.M, a0=cfg.solver.a0)
    rep = sol.to_dict()
    rep.update({"w": p.w, "eps": p.eps, "period": ripple_period(sol),
                "psi_norm": sol.psi_norm(), "M": sol.M})
    ok = sol.residual < 1e-9 * max(1.0, abs(r.a))
    rep["checks"] = {"residual": ok}
    write_json(out / "report.json", rep)
    sol.write(out / "ripple.json", out / "ripple_coeffs.csv")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _solve(cfg: RunConfig, eps: float | None = None):
    p = _params(cfg, eps)
    state, rep, prob = iterate_nanopteron(p, cfg.solver.tol, cfg.solver.max_iter,
                                          cfg=_solver_config(cfg))
    checks = {
        "residual": rep.theta_residual["total"] < cfg.solver.residual_check,
        "consistency": rep.extra["consistency"] < cfg.solver.consistency_check,
    }
    return p, state, rep, prob, checks


def _write_solution(out: Path, cfg: RunConfig, p, state, rep, prob, checks) -> None:
    d = rep.to_dict()
    d["checks"] = checks
    write_json(out / "report.json", d)
    write_csv(out / "profiles.csv", ["X", "theta1", "theta2", "eta1", "eta2"],
              prob.profiles_rows(state))
    prof = descale(state, prob.ripple(state.a), p, prob.grid)
    J = cfg.chain_length()
    sm = SiteSampler(prof, J)
    j = np.arange(J) - J // 2
    write_csv(out / "lattice_profile.csv", ["j", "p", "velocity"],
              zip(j, sm.sample(0.0), -prof.c * sm.sample(0.0, deriv=1)))


def cmd_solve(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    p, state, rep, prob, checks = _solve(cfg)
    _write_solution(out, cfg, p, state, rep, prob, checks)
    return EXIT_OK if all(checks.values()) else EXIT_CHECK_FAILED


def cmd_simulate(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    p, state, rep, prob, checks = _solve(cfg)
    s = cfg.simulate
    sim = SimConfig(dt=s.dt, T=s.T, J=cfg.chain_length(), sample_every=s.sample_every)
    full = descale(state, prob.ripple(state.a), p, prob.grid)
    lo = descale(None, None, p, prob.grid)
    runs = {"nanopteron": full, "leading-order": lo}
    order = [s.initial] + ([k for k in runs if k != s.initial] if s.compare else [])
    summary = {"solve": {"residual": rep.theta_residual["total"], "a": rep.a_value},
               "sim": sim.to_dict()}
    for name in order:
        res = simulate(runs[name], sim)
        write_csv(out / f"simulation_{name}.csv", ["t", "shape_error", "fitted_shift", "energy"],
                  res.rows())
        summary[name] = res.summary()
    write_json(out / "report.json", summary)
    return EXIT_OK if all(checks.values()) else EXIT_CHECK_FAILED


def _sweep_member(args) -> dict:
    cfg, eps, root = args
    sub = Path(root) / f"eps_{eps:.6g}"
    sub.mkdir(parents=True, exist_ok=True)
    try:
        p, state, rep, prob, checks = _solve(cfg, eps)
    except Exception as exc:  # recorded per member; the sweep continues
        write_json(sub / "error.json", {"error": type(exc).__name__, "message": str(exc)})
        return {"eps": eps, "error": f"{type(exc).__name__}: {exc}"}
    _write_solution(sub, cfg, p, state, rep, prob, checks)
    return {
        "eps": eps,
        "eta_sup": rep.eta_norms["sup"],
        "eta_h1": rep.eta_norms["h1"],
        "eta_weighted_r1": rep.eta_norms["r1"],
        "q": rep.eta_norms["q"],
        "abs_a": abs(rep.a_value),
        "kappa": rep.kappa_eps,
        "kappa_rel_gap": rep.extra["kappa_rel_gap"],
        "residual": rep.theta_residual["total"],
        "consistency": rep.extra["consistency"],
        "checks": checks,
    }


def sweep_fits(rows: list[dict]) -> dict:
    """Log-log slopes of the eta norms and the sequences ``|a|/eps^r``."""
    good = [r for r in rows if "error" not in r]
    fits: dict = {}
    if len(good) >= 2:
        le = np.log([r["eps"] for r in good])
        for key in ("eta_sup", "eta_h1", "eta_weighted_r1"):
            fits[f"slope_{key}"] = float(np.polyfit(le, np.log([r[key] for r in good]), 1)[0])
        for r_ in (1, 2, 3):
            fits[f"a_over_eps{r_}"] = [r["abs_a"] / r["eps"] ** r_ for r in good]
    return fits


def cmd_sweep(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    eps_list = sorted(cfg.sweep.eps, reverse=True)
    jobs = [(cfg, e, str(out)) for e in eps_list]
    if cfg.sweep.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as ex:
            rows = list(ex.map(_sweep_member, jobs))
    else:
        rows = [_sweep_member(j) for j in jobs]
    write_csv(out / "sweep.csv", ["eps", "eta_sup", "eta_h1", "abs_a", "kappa", "residual"],
              [(r["eps"], r["eta_sup"], r["eta_h1"], r["abs_a"], r["kappa"], r["residual"])
               for r in rows if "error" not in r])
    write_json(out / "sweep.json", {"members": rows, "fits": sweep_fits(rows)})
    ok = all("error" not in r for r in rows)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {
    "dispersion": cmd_dispersion,
    "ripple": cmd_ripple,
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nanopteron",
                                 description="Nanopteron traveling waves in diatomic FPUT lattices.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--w", type=float)
        sp.add_argument("--grid-n", type=int)
        sp.add_argument("--grid-l", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--max-iter", type=int)
        sp.add_argument("--workers", type=int)
    return ap


def _overrides(ns: argparse.Namespace) -> dict:
    tol_key = "ripple" if ns.command == "ripple" else "solver"
    return {
        "out": ns.out,
        "params.eps": ns.eps,
        "params.w": ns.w,
        "grid.N": ns.grid_n,
        "grid.L": ns.grid_l,
        f"{tol_key}.tol": ns.tol,
        f"{tol_key}.max_iter": ns.max_iter,
        "sweep.workers": ns.workers,
    }


def _error(out: Path | None, exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", payload)
        except OSError:
            pass
    print(f"error: {payload['error']}: {payload['message']}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    out = None
    try:
        cfg = load_config(ns.config, ns.command, _overrides(ns))
        out = output_dir(cfg)
        code = COMMANDS[ns.command](cfg)
    except (ConfigError, ParameterError) as exc:
        if out is None:
            root = os.environ.get(OUT_ENV) or DEFAULT_OUT
            out = Path(ns.out) if ns.out else Path(root) / ns.command
        _error(out, exc)
        return EXIT_ERROR
    except (RuntimeError, ValueError, ArithmeticError, RippleError) as exc:
        _error(out, exc)
        if "NANOPTERON_DEBUG" in os.environ:
            traceback.print_exc()
        return EXIT_ERROR
    print(f"{ns.command}: wrote {out} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
