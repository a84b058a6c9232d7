"""Command-line front-end emitting machine-readable tables and plot data.

Every subcommand resolves its full flag set (defaults included) into a
RunConfig that is embedded in JSON outputs and reconstructible from them,
so a result file always names the exact invocation that produced it.  CSV
uses '.' decimals and 12 significant digits; rows follow a fixed (k, ell)
sort.  Exit code 2 flags input validation failures, 3 a solver that did
not converge.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .balayage import bdp_table, discretize_model, reduce_instance, support_bound
from .bvp import solve_partition
from .crsolver import prophet_worst, solve_cr_ell, solve_cr_mixture
from .errors import ConvergenceError, ValidationError
from .multibvp import solve_grid, solve_ode_system
from .simkit import (
    DEFAULT_SEED,
    PolicySpec,
    dist_from_json,
    simulate_policy,
    worstcase_ratio,
)
from .staticthresh import (
    build_static_worstcase,
    expected_demand_policy,
    static_cr,
)

__all__ = ["RunConfig", "main"]

_DEFAULTS = {"tol": 1e-10, "mesh": 200_000, "trials": 100_000, "seed": DEFAULT_SEED}
_UNIFORM_JSON = '{"kind": "uniform", "lo": 0, "hi": 1}'


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: command, parameters, and output routing."""

    command: str
    params: dict
    format: str = "csv"
    out: str = None

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "params": dict(self.params),
            "format": self.format,
            "out": self.out,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        try:
            return cls(
                command=doc["command"],
                params=dict(doc["params"]),
                format=doc.get("format", "csv"),
                out=doc.get("out"),
            )
        except (KeyError, TypeError) as err:
            raise ValidationError("malformed RunConfig document: %s" % (err,)) from err


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % float(v)
    return str(v)


def _emit(cfg: RunConfig, header, rows, result=None) -> str:
    """Render rows (CSV) or a config-stamped document (JSON)."""
    if cfg.format == "csv":
        lines = [",".join(header)]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        doc = {"config": cfg.to_json()}
        if result is not None:
            doc["result"] = result
        else:
            doc["rows"] = [dict(zip(header, row)) for row in rows]
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _config(args, command: str, keys) -> RunConfig:
    params = {k: getattr(args, k) for k in keys}
    return RunConfig(
        command=command, params=params, format=args.format, out=args.out
    )


def _parse_dist(spec: str):
    if spec.startswith("@"):
        with open(spec[1:]) as fh:
            spec = fh.read()
    try:
        doc = json.loads(spec)
    except json.JSONDecodeError as err:
        raise ValidationError("--dist is not valid JSON: %s" % (err,)) from err
    return dist_from_json(doc)


# ---------------------------------------------------------------------------
# subcommands


def cmd_table1(args) -> int:
    cfg = _config(args, "table1", ["tol"])
    rows = []
    for ell in range(1, 6):
        res = solve_cr_ell(ell, args.tol)
        rows.append((ell, res.cr))
    _emit(cfg, ("ell", "cr"), rows)
    return 0


def cmd_table2(args) -> int:
    cfg = _config(args, "table2", ["tol", "mesh"])
    rows = []
    failures = []
    for ell in range(1, 6):
        schedule = None
        top = 5
        while top >= 1 and schedule is None:
            try:
                schedule = solve_ode_system(ell=ell, k=top, mesh_size=args.mesh, tol=args.tol)
            except ConvergenceError as err:
                failures.append("ell=%d k=%d: %s" % (ell, top, err))
                top -= 1
        for k in range(1, 6):
            if schedule is not None and k <= schedule.k:
                rows.append((k, ell, schedule.prefix_bound(k)))
            else:
                rows.append((k, ell, None))
    rows.sort(key=lambda r: (r[0], r[1]))
    _emit(cfg, ("k", "ell", "bound"), rows)
    for msg in failures:
        print("warning: %s" % msg, file=sys.stderr)
    return 0


def cmd_figure_data(args) -> int:
    which = args.which
    if which == "cr_lb":
        cfg = _config(args, "figure-data", ["which", "tol"])
        rows = [(ell, 1.0 - solve_cr_ell(ell, args.tol).cr) for ell in range(1, 11)]
        _emit(cfg, ("ell", "gap"), rows)
    elif which == "static_heatmap":
        cfg = _config(args, "figure-data", ["which"])
        rows = [
            (k, ell, static_cr(k, ell).value)
            for k in range(1, 16)
            for ell in range(1, 16)
        ]
        rows.sort(key=lambda r: (r[0], r[1]))
        _emit(cfg, ("k", "ell", "value"), rows)
    elif which == "ode_traj":
        cfg = _config(args, "figure-data", ["which", "k", "ell", "mesh", "tol"])
        schedule = solve_ode_system(ell=args.ell, k=args.k, mesh_size=args.mesh, tol=args.tol)
        grid = schedule.ode_grid
        mesh = grid.shape[1] - 1
        step = max(mesh // 2000, 1)
        t = np.linspace(0.0, 1.0, mesh + 1)
        rows = []
        for j in range(args.k):
            for i in range(0, mesh + 1, step):
                rows.append((j + 1, t[i], grid[j, i]))
        _emit(cfg, ("layer", "t", "b"), rows)
    else:  # cr_alpha
        cfg = _config(args, "figure-data", ["which", "tol"])
        # Weights (1-alpha, alpha) stay non-increasing only up to 1/2, and
        # alpha = 1/2 already collapses onto the pure depth-2 guarantee.
        rows = []
        for i in range(11):
            alpha = i / 20.0
            weights = (1.0,) if alpha == 0.0 else (1.0 - alpha, alpha)
            res = solve_cr_mixture(weights, args.tol)
            rows.append((alpha, res.cr))
        _emit(cfg, ("alpha", "cr"), rows)
    return 0


def cmd_cr(args) -> int:
    cfg = _config(args, "cr", ["ell", "tol"])
    res = solve_cr_ell(args.ell, args.tol)
    record = {"ell": args.ell, "c_ell": res.c_ell, "cr": res.cr, "residual": res.residual}
    _emit(cfg, ("ell", "c_ell", "cr", "residual"),
          [(args.ell, res.c_ell, res.cr, res.residual)], result=record)
    return 0


def cmd_cr_mixture(args) -> int:
    if args.p is not None:
        weights = tuple(json.loads(args.p))
    else:
        alpha = args.alpha
        if not 0.0 <= alpha <= 0.5:
            raise ValidationError("--alpha must lie in [0, 0.5]")
        weights = (1.0,) if alpha == 0.0 else (1.0 - alpha, alpha)
    cfg = RunConfig(
        command="cr-mixture",
        params={"p": list(weights), "alpha": args.alpha, "tol": args.tol},
        format=args.format,
        out=args.out,
    )
    res = solve_cr_mixture(weights, args.tol)
    record = {
        "p": list(weights),
        "c": res.c,
        "cr": res.cr,
        "residual": res.residual,
    }
    _emit(cfg, ("c", "cr", "residual"), [(res.c, res.cr, res.residual)], result=record)
    return 0


def cmd_bvp(args) -> int:
    cfg = _config(args, "bvp", ["n", "ell", "tol"])
    sol = solve_partition(args.n, args.ell, args.tol)
    record = {
        "n": sol.n,
        "ell": sol.ell,
        "c_ell_n": sol.c_ell_n,
        "cr_n": sol.ell / sol.c_ell_n,
        "residual": sol.residual,
    }
    _emit(cfg, ("n", "ell", "c_ell_n", "cr_n", "residual"),
          [tuple(record.values())], result=record)
    return 0


def cmd_grid(args) -> int:
    cfg = _config(args, "grid", ["n", "k", "ell", "tol"])
    sol = solve_grid(args.n, args.k, args.ell, args.tol)
    # theta_n starts at layer 2, so layer 1's gain column is blank.
    rows = [
        (
            j + 1,
            float(sol.theta_n[j - 1]) if j >= 1 else None,
            float(sol.c_n[j]),
            float(sol.rho_diag[j]),
        )
        for j in range(args.k)
    ]
    record = {
        "n": sol.n,
        "k": sol.k,
        "ell": sol.ell,
        "theta_n": list(map(float, sol.theta_n)),
        "c_n": list(map(float, sol.c_n)),
        "rho_diag": list(map(float, sol.rho_diag)),
    }
    _emit(cfg, ("j", "theta", "c", "rho"), rows, result=record)
    return 0


def cmd_ode(args) -> int:
    cfg = _config(args, "ode", ["k", "ell", "mesh", "tol"])
    schedule = solve_ode_system(ell=args.ell, k=args.k, mesh_size=args.mesh, tol=args.tol)
    rows = [
        (j + 1, float(schedule.theta[j]), schedule.prefix_bound(j + 1))
        for j in range(args.k)
    ]
    record = {
        "k": schedule.k,
        "ell": schedule.ell,
        "theta": [float(x) for x in schedule.theta],
        "cr_bound": schedule.cr_bound,
        "cr_limit": schedule.cr_limit,
        "mesh_err": schedule.mesh_err,
        "residuals": [float(x) for x in schedule.residuals],
    }
    _emit(cfg, ("j", "theta", "bound"), rows, result=record)
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(
        args, "simulate",
        ["dist", "n", "k", "ell", "policy", "trials", "seed", "tol"],
    )
    dist = _parse_dist(args.dist)
    if args.policy == "alg1":
        policy = PolicySpec.quantile_alg1(solve_partition(args.n, args.ell, args.tol))
    elif args.policy == "alg2":
        policy = PolicySpec.quantile_alg2(solve_grid(args.n, args.k, args.ell, args.tol))
    elif args.policy == "static":
        policy = expected_demand_policy(dist, args.n, args.ell)
    else:
        policy = PolicySpec.bdp_optimal(args.k)
    rep = simulate_policy(dist, args.n, args.k, args.ell, policy, args.trials, args.seed)
    record = {
        "n": args.n,
        "k": args.k,
        "ell": args.ell,
        "policy": args.policy,
        "trials": rep.trials,
        "seed": rep.seed,
        "mean_alg": rep.mean_alg,
        "se_alg": rep.se_alg,
        "mean_benchmark": rep.mean_benchmark,
        "se_benchmark": rep.se_benchmark,
        "ratio": rep.ratio,
        "ratio_se": rep.ratio_se,
    }
    header = tuple(record)
    _emit(cfg, header, [tuple(record.values())], result=record)
    return 0


def cmd_static(args) -> int:
    cfg = _config(args, "static", ["k", "ell", "n"])
    res = static_cr(args.k, args.ell)
    wc = build_static_worstcase(args.k, args.ell, args.n)
    record = {
        "k": args.k,
        "ell": args.ell,
        "n": args.n,
        "value": res.value,
        "W": wc.W,
        "jackpot": wc.n * wc.W,
    }
    _emit(cfg, tuple(record), [tuple(record.values())], result=record)
    return 0


def cmd_worstcase(args) -> int:
    cfg = _config(args, "worstcase", ["ell", "q", "n", "mesh"])
    rec = worstcase_ratio(args.ell, args.q, args.n, args.mesh)
    header = ("ell", "q", "n", "mesh", "value", "benchmark", "ratio", "p", "H")
    _emit(cfg, header, [tuple(rec[h] for h in header)], result=rec)
    return 0


def cmd_reduce(args) -> int:
    cfg = _config(args, "reduce", ["dist", "n", "k"])
    model = _parse_dist(args.dist)
    d = discretize_model(model)
    before = bdp_table(d, args.n, args.k).value
    red = reduce_instance(d, args.n, args.k)
    after = bdp_table(red, args.n, args.k).value
    record = {
        "n": args.n,
        "k": args.k,
        "support_before": len(d.values),
        "support_after": len(red.values),
        "support_bound": support_bound(args.n, args.k),
        "value_before": before,
        "value_after": after,
        "values": list(red.values),
        "probs": list(red.probs),
    }
    rows = list(zip(red.values, red.probs))
    _emit(cfg, ("value", "prob"), rows, result=record)
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="output format")
    p.add_argument("--out", default=None, help="write output to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topl",
        description="Solvers and simulators for online selection against "
        "top-l benchmarks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, **kw):
        p = sub.add_parser(
            name, formatter_class=argparse.ArgumentDefaultsHelpFormatter, **kw
        )
        _add_common(p)
        p.set_defaults(func=func)
        return p

    p = add("table1", cmd_table1, help="limit guarantees for budget one, ell = 1..5")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="solver tolerance")

    p = add("table2", cmd_table2, help="k-choice guarantee grid, k and ell in 1..5")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="solver tolerance")
    p.add_argument("--mesh", type=int, default=_DEFAULTS["mesh"], help="flow mesh size")

    p = add("figure-data", cmd_figure_data, help="plot-ready data grids")
    p.add_argument("--which", required=True,
                   choices=("cr_lb", "static_heatmap", "ode_traj", "cr_alpha"))
    p.add_argument("--k", type=int, default=1, help="layers for ode_traj")
    p.add_argument("--ell", type=int, default=1, help="benchmark depth for ode_traj")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="solver tolerance")
    p.add_argument("--mesh", type=int, default=_DEFAULTS["mesh"], help="flow mesh size")

    p = add("cr", cmd_cr, help="single limit guarantee")
    p.add_argument("--ell", type=int, required=True, help="benchmark depth")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="solver tolerance")

    p = add("cr-mixture", cmd_cr_mixture, help="guarantee for a random benchmark depth")
    p.add_argument("--alpha", type=float, default=0.0,
                   help="weight on depth 2 in the (1, 2) mixture")
    p.add_argument("--p", default=None,
                   help="explicit JSON weight list over depths 1..m (overrides --alpha)")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="solver tolerance")

    p = add("bvp", cmd_bvp, help="finite-n partition solve")
    p.add_argument("--n", type=int, required=True, help="number of items")
    p.add_argument("--ell", type=int, required=True, help="benchmark depth")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="endpoint tolerance")

    p = add("grid", cmd_grid, help="finite-n layered grid solve")
    p.add_argument("--n", type=int, required=True, help="number of items")
    p.add_argument("--k", type=int, required=True, help="selection budget")
    p.add_argument("--ell", type=int, required=True, help="benchmark depth")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="endpoint tolerance")

    p = add("ode", cmd_ode, help="limit gain schedule via the continuous flow")
    p.add_argument("--k", type=int, required=True, help="selection budget")
    p.add_argument("--ell", type=int, required=True, help="benchmark depth")
    p.add_argument("--mesh", type=int, default=_DEFAULTS["mesh"], help="flow mesh size")
    p.add_argument("--tol", type=float, default=1e-6, help="endpoint defect tolerance")

    p = add("simulate", cmd_simulate, help="seeded Monte Carlo policy evaluation")
    p.add_argument("--dist", default=_UNIFORM_JSON, help="distribution JSON or @file")
    p.add_argument("--n", type=int, required=True, help="number of items")
    p.add_argument("--k", type=int, default=1, help="selection budget")
    p.add_argument("--ell", type=int, default=1, help="benchmark depth")
    p.add_argument("--policy", choices=("alg1", "alg2", "static", "bdp"),
                   default="alg1", help="policy family")
    p.add_argument("--trials", type=int, default=_DEFAULTS["trials"], help="trial count")
    p.add_argument("--seed", type=int, default=_DEFAULTS["seed"], help="Philox key")
    p.add_argument("--tol", type=float, default=_DEFAULTS["tol"], help="solver tolerance")

    p = add("static", cmd_static, help="closed-form static guarantee and worst case")
    p.add_argument("--k", type=int, required=True, help="selection budget")
    p.add_argument("--ell", type=int, required=True, help="benchmark depth")
    p.add_argument("--n", type=int, default=1000, help="jackpot instance scale")

    p = add("worstcase", cmd_worstcase, help="tight single-choice instance evaluation")
    p.add_argument("--ell", type=int, required=True, help="benchmark depth")
    p.add_argument("--q", type=float, required=True, help="flat-segment start")
    p.add_argument("--n", type=int, required=True, help="evaluation scale")
    p.add_argument("--mesh", type=int, default=_DEFAULTS["mesh"], help="flow mesh size")

    p = add("reduce", cmd_reduce, help="balayage support reduction")
    p.add_argument("--dist", default=_UNIFORM_JSON, help="distribution JSON or @file")
    p.add_argument("--n", type=int, required=True, help="number of items")
    p.add_argument("--k", type=int, required=True, help="selection budget")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except ConvergenceError as err:
        print("error: %s" % err, file=sys.stderr)
        return 3
    except BrokenPipeError:
        # Downstream reader (e.g. head) closed the pipe; silence the
        # interpreter's shutdown flush as well.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
