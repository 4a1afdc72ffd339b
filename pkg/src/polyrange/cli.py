"""Command-line interface.

Subcommands: phase-scan, env-dump, simulate, limits, variational,
verify-bounds.  Exit codes: 0 success, 2 validation error, 3 budget refusal.
POLYRANGE_THREADS caps compiled-kernel worker threads.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .environment import DisorderField, ball_sites, omega_array
from .errors import BudgetExceeded, ValidationError
from .params import InvalidParams, ModelParams, classify_region


def _apply_thread_cap() -> None:
    cap = os.environ.get("POLYRANGE_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        return
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except (ImportError, ValueError):
        pass


def _range_pair(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO:HI")
    return float(parts[0]), float(parts[1])


def _out_stream(path):
    return open(path, "w", newline="") if path else sys.stdout


# ---------------------------------------------------------------------------
# subcommands


def _cmd_phase_scan(args) -> int:
    z_lo, z_hi = args.zeta_range
    g_lo, g_hi = args.gamma_range
    fh = _out_stream(args.out)
    w = csv.writer(fh)
    w.writerow(["zeta", "gamma", "region", "xi", "theorem_tag"])
    for z in np.linspace(z_lo, z_hi, args.grid):
        for g in np.linspace(g_lo, g_hi, args.grid):
            rep = classify_region(ModelParams(
                d=args.d, alpha=args.alpha, p=0.5, q=0.5, beta_hat=1.0,
                gamma=float(g), h_hat=1.0, zeta=float(z)))
            w.writerow([f"{z:.6g}", f"{g:.6g}", rep.region,
                        "" if rep.xi is None else f"{rep.xi:.6g}",
                        rep.applicable_theorem])
    if fh is not sys.stdout:
        fh.close()
    return 0


def _cmd_env_dump(args) -> int:
    field = DisorderField(seed=args.seed, alpha=args.alpha, p=args.p,
                          q=args.q)
    sites = ball_sites(args.d, args.r)
    vals = omega_array(field, sites)
    fh = _out_stream(args.out)
    w = csv.writer(fh)
    w.writerow([f"x{i + 1}" for i in range(args.d)] + ["omega"])
    for pt, v in zip(sites, vals):
        w.writerow([*map(int, pt), repr(float(v))])
    if fh is not sys.stdout:
        fh.close()
    return 0


def _cmd_simulate_impl(args) -> int:
    from .partition import partition_exact, partition_mc
    try:
        cfg = tomllib.loads(open(args.config, "rb").read().decode())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"config: {exc}") from exc
    from .exper import _parse_model
    problems: list[str] = []
    params = _parse_model(cfg, problems)
    if problems:
        raise ValidationError("invalid config: " + "; ".join(problems))
    method = cfg.get("method", {})
    budgets = cfg.get("budgets", {})
    seed = int(method.get("seed", 0))
    N = int(method.get("N", 8))
    how = method.get("estimator", "exact")
    field = DisorderField(seed=seed, alpha=params.alpha, p=params.p,
                          q=params.q)
    if how == "exact":
        est = partition_exact(field, params, N,
                              budget=int(budgets.get("enum_budget", 10 ** 9)))
    elif how == "mc":
        rng = np.random.default_rng(seed)
        est = partition_mc(field, params, N,
                           int(budgets.get("n_samples", 10 ** 5)), rng)
    else:
        raise ValidationError("method.estimator must be 'exact' or 'mc'")
    json.dump({"log_value": est.log_value, "std_err": est.std_err,
               "method": est.method, "seed": seed,
               "n_samples": est.n_samples,
               "truncation_bound": est.truncation_bound},
              sys.stdout, indent=1)
    sys.stdout.write("\n")
    return 0


def _cmd_limits(args) -> int:
    from . import limits
    obj = args.object
    if obj == "cd":
        if args.d is None or args.h_hat is None:
            raise ValidationError("cd needs --d and --h-hat")
        value = limits.c_d_constant(args.d, args.h_hat)
        fd = limits.c_d_constant_fd(args.d, args.h_hat)
        out = {"object": "cd", "value": value, "method": "bessel",
               "cross_check_fd": fd,
               "sensitivity": {"fd_rel_gap": abs(fd - value) /
                               abs(value)}}
    elif obj == "gamma_d":
        if args.d is None:
            raise ValidationError("gamma_d needs --d")
        out = limits.gamma_d_estimate(args.d, args.horizon, args.n_samples,
                                      seed=args.seed)
        out = {"object": "gamma_d", "value": out["nonreturn"],
               "method": "nonreturn_mc",
               "error": out["nonreturn_se"] + out["nonreturn_bias_bound"],
               "cross_check_range_density": out["range_density"],
               "sensitivity": {"range_density_se": out["range_density_se"]}}
    elif obj == "W":
        rng = np.random.default_rng(args.seed)
        pp = limits.sample_ppp(args.box, args.w_min, args.alpha, args.p,
                               args.q, rng, d=args.d or 2)
        rep = limits.estimate_W(pp, args.d or 2)
        out = {"object": "W", "value": rep["value"],
               "method": "compensated_atom_sum",
               "sensitivity": {"cutoff_shift": rep["cutoff_shift"]},
               "n_atoms": len(pp.atoms)}
    elif obj == "X":
        if args.d is None:
            raise ValidationError("X needs --d (>= 3)")
        field = DisorderField(seed=args.seed, alpha=args.alpha, p=args.p,
                              q=args.q)
        rep = limits.estimate_X(field, args.d, args.cutoff)
        out = {"object": "X", "value": rep["value"],
               "method": "green_weighted_partial_sum",
               "sensitivity": {"tail_change": rep["tail_change"]}}
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown object {obj}")
    json.dump(out, sys.stdout, indent=1, default=float)
    sys.stdout.write("\n")
    return 0


def _cmd_variational(args) -> int:
    from .limits import WeightedPointProcess
    from .variational import solve_T_beta, solve_T_hat_inf
    rows = np.loadtxt(args.atoms, delimiter=",", ndmin=2)
    if rows.shape[1] != args.d + 1:
        raise ValidationError(f"atoms file must have d+1 = {args.d + 1} "
                              f"columns (coordinates then weight)")
    atoms = tuple((tuple(float(c) for c in row[:args.d]), float(row[args.d]))
                  for row in rows)
    box = max((max(abs(c) for c in pt) for pt, _ in atoms), default=1.0)
    wmin = min((abs(w) for _, w in atoms if w != 0), default=1.0)
    pp = WeightedPointProcess(atoms=atoms, box=box, w_min=wmin,
                              alpha=1.5, p=0.5, q=0.5)
    if args.object == "Tbeta":
        if args.beta is None:
            raise ValidationError("Tbeta needs --beta")
        value, path, info = solve_T_beta(pp, args.beta, args.d)
    else:
        value, path, info = solve_T_hat_inf(pp, args.d)
    json.dump({"object": args.object, "value": value,
               "path_vertices": [list(v) for v in path.vertices],
               "exact": info["exact"], "atoms_used": info["atoms"]},
              sys.stdout, indent=1, default=float)
    sys.stdout.write("\n")
    return 0


def _cmd_verify_bounds(args) -> int:
    from . import lpp
    try:
        cfg = tomllib.loads(open(args.config, "rb").read().decode())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"config: {exc}") from exc
    b = cfg.get("bounds", {})
    fh = _out_stream(args.out)
    w = csv.writer(fh)
    if args.which == "Ltail":
        rng = np.random.default_rng(int(b.get("seed", 0)))
        rep = lpp.check_L_tail(int(b.get("d", 2)), float(b.get("p", 1.5)),
                               float(b.get("r", 6.0)), float(b.get("s", 2.0)),
                               int(b.get("m", 8)), int(b.get("trials", 1000)),
                               rng, c_d=float(b.get("c_d", 2.0)))
        w.writerow(["k", "empirical_tail", "bound_shape"])
        c, s, m, d = rep["c_fit"], float(b.get("s", 2.0)), \
            int(b.get("m", 8)), int(b.get("d", 2))
        for k, t in zip(rep["k"], rep["tail"]):
            shape = ""
            if k >= 1 and c == c:
                shape = f"{min((c * s * m ** (1 / d) / k) ** (d * k), 1.0):.6g}"
            w.writerow([int(k), f"{t:.6g}", shape])
    elif args.which == "energy":
        tmpl = DisorderField(seed=int(b.get("seed", 0)),
                             alpha=float(b.get("alpha", 1.5)),
                             p=float(b.get("p_sign", 0.7)),
                             q=float(b.get("q_sign", 0.3)))
        rep = lpp.check_energy_bound(
            tmpl, int(b.get("d", 2)), float(b.get("alpha", 1.5)),
            float(b.get("r", 4.0)), float(b.get("s", 1.5)),
            float(b.get("p", 1.5)),
            np.asarray(b.get("t_grid", list(np.geomspace(0.5, 16, 9)))),
            int(b.get("trials", 100)), N=int(b.get("N", 10)))
        w.writerow(["t", "empirical_prob", "theoretical_slope",
                    "fitted_slope"])
        for t, pr in zip(rep["t_grid"], rep["probs"]):
            w.writerow([f"{t:.6g}", f"{pr:.6g}",
                        f"{rep['theoretical_slope']:.6g}",
                        f"{rep['slope']:.6g}"])
    else:  # lemmaG
        params = ModelParams(d=int(b.get("d", 2)),
                             alpha=float(b.get("alpha", 1.5)),
                             p=float(b.get("p_sign", 0.7)),
                             q=float(b.get("q_sign", 0.3)),
                             beta_hat=float(b.get("beta_hat", 1.0)),
                             gamma=float(b.get("gamma", 1.0)),
                             h_hat=float(b.get("h_hat", 1.0)),
                             zeta=float(b.get("zeta", -1.5)))
        rep = lpp.check_lemma_g(params, b.get("N_grid", [8, 12]),
                                p=float(b.get("p", 1.5)),
                                eps=float(b.get("eps", 0.2)),
                                n_seeds=int(b.get("n_seeds", 20)))
        w.writerow(["N", "union_bound_total", "rate_exponent",
                    "fitted_slope"])
        for N, tot in zip(rep["N_grid"], rep["totals"]):
            w.writerow([N, f"{tot:.6g}", f"{rep['rate_exponent']:.6g}",
                        f"{rep['slope']:.6g}"])
    if fh is not sys.stdout:
        fh.close()
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyrange")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("phase-scan", help="classify a (zeta, gamma) grid")
    ps.add_argument("--d", type=int, required=True)
    ps.add_argument("--alpha", type=float, required=True)
    ps.add_argument("--zeta-range", type=_range_pair, required=True,
                    metavar="LO:HI")
    ps.add_argument("--gamma-range", type=_range_pair, required=True,
                    metavar="LO:HI")
    ps.add_argument("--grid", type=int, default=50)
    ps.add_argument("--out")
    ps.set_defaults(func=_cmd_phase_scan)

    ed = sub.add_parser("env-dump", help="dump the disorder field on a ball")
    ed.add_argument("--seed", type=int, required=True)
    ed.add_argument("--alpha", type=float, required=True)
    ed.add_argument("--p", type=float, required=True)
    ed.add_argument("--q", type=float, default=None)
    ed.add_argument("--r", type=float, required=True)
    ed.add_argument("--d", type=int, default=2)
    ed.add_argument("--out")
    ed.set_defaults(func=lambda a: (_fill_q(a), _cmd_env_dump(a))[1])

    si = sub.add_parser("simulate", help="partition-function estimate from "
                                         "a TOML config")
    si.add_argument("--config", required=True)
    si.set_defaults(func=_cmd_simulate_impl)

    li = sub.add_parser("limits", help="limiting objects and constants")
    li.add_argument("--object", choices=["W", "X", "cd", "gamma_d"],
                    required=True)
    li.add_argument("--d", type=int)
    li.add_argument("--h-hat", dest="h_hat", type=float)
    li.add_argument("--alpha", type=float, default=1.5)
    li.add_argument("--p", type=float, default=0.7)
    li.add_argument("--q", type=float, default=0.3)
    li.add_argument("--seed", type=int, default=0)
    li.add_argument("--horizon", type=int, default=20000)
    li.add_argument("--n-samples", dest="n_samples", type=int, default=20000)
    li.add_argument("--w-min", dest="w_min", type=float, default=0.5)
    li.add_argument("--box", type=float, default=5.0)
    li.add_argument("--cutoff", type=float, default=20.0)
    li.set_defaults(func=_cmd_limits)

    va = sub.add_parser("variational", help="tilted polyline optimizers")
    va.add_argument("--object", choices=["Tbeta", "That"], required=True)
    va.add_argument("--atoms", required=True,
                    help="CSV of coordinates then weight, one atom per row")
    va.add_argument("--beta", type=float)
    va.add_argument("--d", type=int, required=True)
    va.set_defaults(func=_cmd_variational)

    vb = sub.add_parser("verify-bounds", help="empirical bound shape checks")
    vb.add_argument("--which", choices=["Ltail", "energy", "lemmaG"],
                    required=True)
    vb.add_argument("--config", required=True)
    vb.add_argument("--out")
    vb.set_defaults(func=_cmd_verify_bounds)
    return ap


def _fill_q(args) -> None:
    if args.q is None:
        args.q = 1.0 - args.p


def main(argv=None) -> int:
    _apply_thread_cap()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget refused: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, InvalidParams, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
