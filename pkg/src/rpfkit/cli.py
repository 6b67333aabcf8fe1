"""``rpfcli``: run experiments from a JSON config and write CSV tables plus a JSON summary."""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .certify import ConeScale, certify, contraction_profile, xi_growth_check
from .ensemble import BUILTINS, ConfigError, builtin_config, load_config, parse_config
from .escape import HoleFamily, escape_rate, lambda_vs_epsilon
from .interval_fn import PiecewiseFn
from .oracle import oracle_lyapunov
from .random_map import AssumptionError, NumericalError
from .rpf import RpfSolver, fit_rate

COMMANDS = ("certify", "density", "conformal", "invariant", "lyapunov", "correlations", "residual",
            "escape", "oracle")

EXIT_SCHEMA, EXIT_ASSUMPTION, EXIT_NUMERICAL = 2, 3, 4


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


class Writer:
    """Collects result tables and writes them with a manifest; only the manifest carries a timestamp."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []

    def table(self, name: str, header, rows) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.files.append(path.name)

    def json(self, name: str, data) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"{name}.json"
        path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
        self.files.append(path.name)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _observable(name: str, base) -> PiecewiseFn:
    A, B = base
    if name == "x":
        return PiecewiseFn.affine(1.0, 0.0, base)
    if name == "x+1":
        return PiecewiseFn.affine(1.0, 1.0, base)
    if name == "x^2":
        return PiecewiseFn.from_callable(lambda t: t * t, base)
    if name == "left-half":
        return PiecewiseFn.indicator(A, 0.5 * (A + B), base)
    raise ConfigError(f"unknown observable {name!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_certify(E, cfg, opt, W: Writer) -> dict:
    n_max = opt.n or opt.run.get("n_max", 8)
    K = opt.base_points or opt.run.get("base_points", 64)
    cert = certify(E, n_max=n_max, K=K)
    W.table("n_star_search", ["n", "mean_log_c", "stderr", "K"],
            [(r.n, r.mean_log_c, r.stderr, K) for r in cert.search_table])
    W.table("kingman_profile", ["n", "beta_f", "beta_f_se", "minus_phi_minus", "minus_phi_minus_se", "max_xi", "K"],
            [(r.n, r.beta_f, r.beta_f_se, r.minus_phi_minus, r.minus_phi_minus_se, r.max_xi, K)
             for r in cert.profile.rows])
    c = cert.conditions
    W.table("conditions", ["condition", "margin", "stderr", "holds", "K"], [
        ("one_step", c.one_step.value, c.one_step.stderr, c.one_step.holds, K),
        ("branch_count", c.branch_count.value, c.branch_count.stderr, c.branch_count.holds, K),
        ("branch_count_limit", c.branch_count_limit, "", c.branch_count_limit < 0, K),
        ("xi_bounded", c.xi_bounded.value, c.xi_bounded.stderr, c.xi_bounded.holds, K),
    ])
    W.table("cone_scale", ["base_index", "a", "terms", "tail_bound", "n_star", "gamma"],
            [(k, a, t, tb, cert.n_star, cert.gamma) for k, a, t, tb in cert.a_values])
    contraction = None
    if cert.n_star is not None:
        k0 = opt.run.get("base_index", 0)
        prof = contraction_profile(ConeScale(E, cert.n_star, cert.gamma), k0, 8,
                                   np.random.default_rng(opt.seed if opt.seed is not None else 0))
        W.table("contraction_profile", ["block", "ratio", "tanh_bound", "n_star", "fiber"],
                [(j, r, b, cert.n_star, k0) for j, (r, b) in enumerate(zip(prof.ratios, prof.bounds))])
        contraction = prof.geometric_mean
    xi = xi_growth_check(E, min(n_max, 8), K)
    return {
        "strongly_contracting": cert.strongly_contracting,
        "n_star": cert.n_star, "estimate": cert.estimate, "stderr": cert.stderr, "gamma": cert.gamma,
        "condition_margins": {"one_step": c.one_step.value, "branch_count": c.branch_count.value,
                              "xi_bounded": c.xi_bounded.value},
        "xi_bound": {"K": c.xi_K, "xi": c.xi, "source": c.xi_source},
        "xi_growth": {"checked": xi.checked, "violations": xi.violations, "worst_ratio": xi.worst_ratio},
        "contraction_geometric_mean": contraction,
        "n_max": n_max, "K": K,
    }


def _fibers(opt) -> list[int]:
    k0 = opt.run.get("base_index", 0)
    return list(range(k0, k0 + opt.run.get("fibers", 1)))


def cmd_density(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or opt.run.get("n", 30)
    S = RpfSolver(E, tol=opt.run.get("tolerance", 1e-9))
    A, B = E.base
    x = np.linspace(A, B, 1025)
    rows, summ, cols = [], [], []
    for k in _fibers(opt):
        d = S.density(k, n)
        cols.append(d.q.evaluate(x))
        lam = d.lam_minus[-1]
        summ.append((k, d.n_used, d.increments[-1] if d.increments else math.nan, lam, d.converged, E.resolution))
    for i, xi in enumerate(x):
        rows.append([xi] + [c[i] for c in cols])
    W.table("density", ["x"] + [f"q_{k}" for k in _fibers(opt)], rows)
    W.table("density_fibers", ["fiber", "n_used", "last_increment", "lambda_minus", "converged", "grid"], summ)
    return {"fibers": _fibers(opt), "n_cap": n, "grid": E.resolution,
            "converged": all(r[4] for r in summ)}


def cmd_conformal(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or opt.run.get("n", 30)
    cells = cfg.get("resolution", {}).get("nu_cells", 1024)
    S = RpfSolver(E, nu_depth=n)
    grid, cols, lams = None, [], []
    for k in _fibers(opt):
        grid, cdf = S.cdf_table(k, cells, n)
        cols.append(cdf)
        lams.append((k, S.lambda_plus(k, n), n, E.resolution))
    W.table("conformal_cdf", ["x"] + [f"nu_{k}" for k in _fibers(opt)],
            [[g] + [c[i] for c in cols] for i, g in enumerate(grid)])
    W.table("lambda_plus", ["fiber", "lambda_plus", "n", "grid"], lams)
    return {"fibers": _fibers(opt), "n": n, "cells": cells, "grid": E.resolution}


PANEL = ("x", "x^2", "left-half", "x+1")


def cmd_invariant(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or opt.run.get("n", 30)
    S = RpfSolver(E)
    rows = []
    for k in _fibers(opt):
        q = S.density_at_depth(k, n)
        for name in PANEL:
            f = _observable(name, E.base)
            rows.append((k, name, S.mu(k, f, q), S.invariance_residual(k, f, n), n, E.resolution))
    W.table("invariant", ["fiber", "observable", "mu", "invariance_residual", "n", "grid"], rows)
    return {"max_invariance_residual": max(r[3] for r in rows), "n": n, "grid": E.resolution}


def cmd_lyapunov(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or opt.run.get("n", 30)
    K = opt.base_points or opt.run.get("base_points", 64)
    ly = RpfSolver(E).lyapunov(K, n, warmup=opt.warmup)
    W.table("lyapunov_points", ["base_point", "log_growth_rate", "n", "K"],
            [(i, v, n, K) for i, v in enumerate(ly["per_point"])])
    return {k: v for k, v in ly.items() if k != "per_point"}


def cmd_correlations(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or 20
    f = _observable(opt.f, E.base)
    h = _observable(opt.h, E.base)
    k = opt.run.get("base_index", 0)
    vals = RpfSolver(E).correlations(k, f, h, range(1, n + 1), opt.run.get("n", 30))
    r, C, corr = fit_rate(*zip(*vals))
    W.table("correlations", ["n", "correlation", "fiber", "grid"], [(m, v, k, E.resolution) for m, v in vals])
    return {"rate": r, "prefactor": C, "log_fit_correlation": corr, "f": opt.f, "h": opt.h, "n_range": [1, n],
            "fiber": k, "grid": E.resolution}


def cmd_residual(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or 20
    f = _observable(opt.f, E.base)
    k = opt.run.get("base_index", 0)
    vals = RpfSolver(E).residual(k, f, n, opt.run.get("n", 30))
    r, C, corr = fit_rate(*zip(*vals))
    W.table("residual", ["n", "sup_norm", "fiber", "grid"], [(m, v, k, E.resolution) for m, v in vals])
    return {"rate": r, "log_rate": math.log(r) if r > 0 else None, "prefactor": C, "f": opt.f, "n_max": n,
            "fiber": k, "grid": E.resolution}


def cmd_escape(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or opt.run.get("n", 30)
    K = opt.base_points or opt.run.get("base_points", 64)
    fam = HoleFamily.from_config(cfg)
    k = opt.run.get("base_index", 0)
    tab = lambda_vs_epsilon(E, fam, n, K, warmup=opt.warmup, base_index=k)
    W.table("lambda_vs_epsilon", ["eps", "lyapunov", "stderr", "n", "K"],
            [(r.eps, r.lyapunov, r.stderr, n, K) for r in tab.rows])
    W.table("escape_pairs", ["eps_small", "eps_big", "pressure_gap", "fitted_rate", "residual", "n", "fiber"],
            [(p.eps_small, p.eps_big, p.pressure_gap, p.fitted_rate, p.residual, n, k) for p in tab.pairs])
    masses = []
    for i in range(len(fam.eps) - 1):
        fit = escape_rate(fam.ensemble(E, i), fam.ensemble(E, i + 1), k, n)
        masses += [(fam.eps[i], fam.eps[i + 1], m, v, k) for m, v in zip(fit.ns, fit.masses)]
    W.table("survivor_mass", ["eps_small", "eps_big", "n", "mass", "fiber"], masses)
    return {"monotone": tab.monotone, "n": n, "K": K, "epsilons": list(fam.eps)}


def cmd_oracle(E, cfg, opt, W: Writer) -> dict:
    n = opt.n or 40
    K = opt.base_points or 8
    N = opt.grid or cfg.get("resolution", {}).get("ulam_n", 4096)
    o = oracle_lyapunov(E, N, n, K, warmup=opt.warmup)
    m = RpfSolver(E).lyapunov(K, n, warmup=opt.warmup)
    W.table("oracle_points", ["base_point", "oracle", "main", "N", "n", "K"],
            [(i, a, b, N, n, K) for i, (a, b) in enumerate(zip(o["per_point"], m["per_point"]))])
    return {"oracle_lyapunov": o["lyapunov"], "main_lyapunov": m["lyapunov"],
            "difference": abs(o["lyapunov"] - m["lyapunov"]), "N": N, "n": n, "K": K}


HANDLERS = {
    "certify": cmd_certify, "density": cmd_density, "conformal": cmd_conformal, "invariant": cmd_invariant,
    "lyapunov": cmd_lyapunov, "correlations": cmd_correlations, "residual": cmd_residual,
    "escape": cmd_escape, "oracle": cmd_oracle,
}


# ---------------------------------------------------------------------------
# plumbing


def _apply_overrides(cfg: dict, opt) -> dict:
    cfg = json.loads(json.dumps(cfg))
    if opt.t is not None:
        cfg["potential"] = {"type": "geometric", "t": opt.t}
    return cfg


def execute(command: str, cfg: dict, opt, out: Path) -> dict:
    cfg = _apply_overrides(cfg, opt)
    grid = opt.grid if command != "oracle" else None
    E = parse_config(cfg, seed=opt.seed, resolution=grid)
    opt.run = cfg.get("run", {})
    W = Writer(out)
    summary = HANDLERS[command](E, cfg, opt, W)
    W.json("summary", summary)
    manifest = {
        "command": command,
        "config": cfg,
        "seed": opt.seed if opt.seed is not None else cfg["driver"].get("seed", 0),
        "overrides": {"n": opt.n, "grid": opt.grid, "base_points": opt.base_points, "t": opt.t},
        "versions": {"rpfkit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "files": W.files,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(_plain(manifest), indent=2, sort_keys=True) + "\n")
    return summary


def _common(p: argparse.ArgumentParser, with_config: bool) -> None:
    if with_config:
        p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default rpfcli-out/<command>)")
    p.add_argument("--seed", type=_u64, default=None, help="driver seed override")
    p.add_argument("--n", type=_positive, default=None, help="depth / horizon override")
    p.add_argument("--grid", type=_positive, default=None, help="function nodes (Ulam cells for 'oracle')")
    p.add_argument("--base-points", dest="base_points", type=_positive, default=None)
    p.add_argument("--t", type=float, default=None, help="replace the potential by the geometric one with this t")
    p.add_argument("--warmup", type=int, default=20, help="warm-up depth for Lyapunov averages")
    p.add_argument("--f", default="x", help="observable f: x, x+1, x^2, left-half")
    p.add_argument("--h", default="x", help="observable h (correlations)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rpfcli", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        _common(sub.add_parser(c, help=f"run '{c}' on a config"), True)
    b = sub.add_parser("builtin", help="shipped example ensembles")
    bsub = b.add_subparsers(dest="action", required=True)
    bsub.add_parser("list", help="list the shipped ensembles")
    r = bsub.add_parser("run", help="run a command on a shipped ensemble")
    r.add_argument("name", choices=BUILTINS)
    r.add_argument("run_command", choices=COMMANDS)
    _common(r, False)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        opt = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_SCHEMA
    try:
        if opt.command == "builtin":
            if opt.action == "list":
                for name in BUILTINS:
                    print(f"{name}\t{builtin_config(name).get('description', '')}")
                return 0
            cfg, command = builtin_config(opt.name), opt.run_command
        else:
            cfg, command = load_config(opt.config), opt.command
        out = Path(opt.out or Path("rpfcli-out") / command)
        summary = execute(command, cfg, opt, out)
    except ConfigError as exc:
        print(f"rpfcli: config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"rpfcli: cannot read or write: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except AssumptionError as exc:
        print(f"rpfcli: standing assumption failed: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (NumericalError, FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        print(f"rpfcli: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(_plain(summary), indent=2, sort_keys=True))
    print(f"results written to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
