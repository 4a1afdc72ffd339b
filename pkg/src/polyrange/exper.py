"""Experiment harness: N-grid sweeps, exponent regression, theorem-targeted
scenario presets, and config-driven runs with reproducibility manifests.

Config files are TOML with sections [model], [method], [budgets], [output];
outputs are CSV (one row per (N, seed, statistic)) plus a JSON summary and a
manifest recording seeds, config, and output digests so a rerun with the
same config is bit-identical.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .environment import DisorderField
from .errors import BudgetExceeded, ValidationError
from .limits import c_d_constant, green_function
from .params import ModelParams, classify_region
from .partition import (default_strata, partition_exact,
                        partition_homogeneous_strata, partition_mc,
                        polymer_expectation)
from .walk import simulate_walk_batch

__all__ = [
    "ExperimentManifest",
    "ExponentFit",
    "fit_exponent",
    "gamma_d_green",
    "scenario_R4",
    "scenario_R5",
    "scenario_R6",
    "run_experiment",
    "thread_cap",
]


def thread_cap() -> int:
    """Worker cap from POLYRANGE_THREADS (defaults to 1; all reductions are
    deterministic regardless of the cap)."""
    try:
        return max(1, int(os.environ.get("POLYRANGE_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# exponent regression


@dataclass(frozen=True)
class ExponentFit:
    """Weighted least-squares fit of log(statistic) against log N."""

    exponent: float
    intercept: float
    stderr: float
    N_grid: tuple[int, ...]
    statistic: str
    residuals: tuple[float, ...] = ()


def fit_exponent(N_grid: Sequence[int], values: Sequence[float],
                 errors: Optional[Sequence[float]] = None,
                 statistic: str = "statistic") -> ExponentFit:
    """Slope of log(values) vs log(N_grid), weighted by per-point error bars
    (interpreted as one-sigma absolute errors on the values)."""
    N_grid = [int(n) for n in N_grid]
    values = np.asarray(values, dtype=float)
    if len(N_grid) < 4:
        raise ValidationError("fit_exponent needs at least 4 grid points")
    if len(N_grid) != len(values):
        raise ValidationError("N_grid and values must have equal length")
    bad = [N_grid[i] for i in range(len(values)) if not values[i] > 0]
    if bad:
        raise ValidationError(f"nonpositive statistic '{statistic}' at "
                              f"N = {bad}")
    x = np.log(np.asarray(N_grid, dtype=float))
    y = np.log(values)
    if errors is None:
        sig = np.ones_like(y)
    else:
        errors = np.asarray(errors, dtype=float)
        # absolute error on v maps to error err/v on log v
        sig = np.maximum(errors / values, 1e-12)
    w = 1.0 / sig ** 2
    W = w.sum()
    xb = (w * x).sum() / W
    yb = (w * y).sum() / W
    sxx = (w * (x - xb) ** 2).sum()
    slope = float((w * (x - xb) * (y - yb)).sum() / sxx)
    intercept = float(yb - slope * xb)
    resid = y - (intercept + slope * x)
    dof = max(len(values) - 2, 1)
    chi2 = float((w * resid ** 2).sum())
    # scale the formal stderr by sqrt(chi2/dof) when the residuals exceed the
    # stated error bars (standard heteroskedastic practice); exact power laws
    # with uniform weights report stderr 0
    stderr = float(math.sqrt(max(chi2 / dof, 0.0) / sxx))
    return ExponentFit(exponent=slope, intercept=intercept, stderr=stderr,
                       N_grid=tuple(N_grid), statistic=statistic,
                       residuals=tuple(float(r) for r in resid))


# ---------------------------------------------------------------------------
# scenario presets


def gamma_d_green(d: int) -> float:
    """Escape probability of the walk (the a.s. limit of |R_N|/N): 0 in
    d <= 2, reciprocal of the on-diagonal Green function otherwise."""
    if d <= 2:
        return 0.0
    return 1.0 / green_function(d, (0,) * d)


def _require_region(params: ModelParams, want: str, scenario: str):
    rep = classify_region(params)
    base = rep.region
    if not base.startswith(want):
        raise ValidationError(
            f"{scenario} requires region {want}, but the classifier puts "
            f"(zeta={params.zeta}, gamma={params.gamma}) in {base} "
            f"(theorem tag {rep.applicable_theorem})")
    return rep


def scenario_R4(params: ModelParams, N_grid: Sequence[int],
                budgets: Optional[dict] = None, seed: int = 0) -> dict:
    """Range-dominated regime report: scaled log Z trend toward minus h_hat
    times the escape probability, polymer concentration of |R_N|/N, and the
    lower-tail large-deviation event frequency for the plain walk range."""
    budgets = dict(budgets or {})
    rep = _require_region(params, "R4", "scenario_R4")
    enum_budget = int(budgets.get("enum_budget", 10 ** 7))
    n_mc = int(budgets.get("n_samples", 10 ** 4))
    delta = float(budgets.get("delta", 0.1))
    gamma_d = gamma_d_green(params.d)
    target = -params.h_hat * gamma_d
    ldp_grid = [int(n) for n in budgets.get("ldp_N_grid", N_grid)]
    rows = []
    for N in sorted(int(n) for n in N_grid):
        fld = DisorderField(seed=seed + N, alpha=params.alpha,
                            p=params.p, q=params.q)
        enumerable = (2 * params.d) ** N <= enum_budget
        if enumerable:
            est = partition_exact(fld, params, N)
        else:
            rng = np.random.default_rng((seed, N))
            est = partition_mc(fld, params, N, n_mc, rng)
        scaled = est.log_value / N ** (1.0 - params.zeta)
        # |R_N|/N concentration under the polymer measure
        conc = None
        if enumerable:
            conc, _ = polymer_expectation(
                fld, params, N,
                lambda rs, md: np.abs(rs / N - gamma_d), method="exact")
        rows.append({"N": N, "log_z": est.log_value, "scaled_log_z": scaled,
                     "method": est.method, "std_err": est.std_err,
                     "range_concentration": conc, "enumerable": enumerable})
    # plain-walk lower-tail event {|R_N| - E|R_N| <= -delta N}; disorder-free,
    # so it runs on its own (typically much larger) N grid
    ldp_rows = []
    for N in sorted(ldp_grid):
        rs, _, _ = simulate_walk_batch(seed + 7 * N + 1, n_mc, N, params.d)
        mean_rs = rs.mean()
        freq = float((rs - mean_rs <= -delta * N).mean())
        ldp_rows.append({"N": N, "ldp_freq": freq,
                         "mean_range": float(mean_rs)})
    return {"scenario": "R4", "region": rep.region,
            "theorem_tag": rep.applicable_theorem, "gamma_d": gamma_d,
            "target": target, "delta": delta, "rows": rows,
            "ldp_rows": ldp_rows}


def scenario_R6(params: ModelParams, N: int, seeds: Sequence[int]) -> dict:
    """Collapsed-range regime report: per-seed exact N^zeta log Z, its
    two-site restriction, the two-site polymer probability, and the relative
    weight of ranges of size >= 3 against its exponential bound."""
    rep = _require_region(params, "R6", "scenario_R6")
    two_site = lambda rs, md: rs == 2
    big = lambda rs, md: rs >= 3
    bound = math.exp(-0.25 * params.h_hat * N ** (-params.zeta))
    rows = []
    for s in seeds:
        fld = DisorderField(seed=int(s), alpha=params.alpha,
                            p=params.p, q=params.q)
        z = partition_exact(fld, params, N)
        z2 = partition_exact(fld, params, N, event=two_site)
        z3 = partition_exact(fld, params, N, event=big)
        scale = N ** params.zeta
        ratio_big = math.exp(z3.log_value - z.log_value)
        rows.append({
            "seed": int(s),
            "scaled_log_z": scale * z.log_value,
            "scaled_log_z_two_site": scale * z2.log_value,
            "p_two_site": math.exp(z2.log_value - z.log_value),
            "ratio_range_ge_3": ratio_big,
            "ratio_bound_ok": ratio_big <= bound,
        })
    # leading finite-size correction on N^zeta log Z: the path-entropy term
    correction = N ** params.zeta * N * math.log(2 * params.d)
    return {"scenario": "R6", "region": rep.region,
            "theorem_tag": rep.applicable_theorem, "N": N,
            "target": -2.0 * params.h_hat, "entropy_correction": correction,
            "range_ge_3_bound": bound, "rows": rows}


def scenario_R5(params: ModelParams, N_grid: Sequence[int],
                budgets: Optional[dict] = None, seed: int = 0) -> dict:
    """Stretched-exponential regime report: stratified homogeneous
    -log Z_N / N^{1-2xi} against the variational constant, plus the
    disordered-vs-homogeneous gap at enumerable N."""
    budgets = dict(budgets or {})
    rep = _require_region(params, "R5", "scenario_R5")
    if rep.region == "R5Unsolved" or rep.xi is None:
        raise ValidationError(
            "scenario_R5 refused: these parameters fall in the unsolved "
            "pocket (no proven log Z scaling); pick gamma above the "
            "solved thresholds")
    xi = rep.xi
    c_ref = c_d_constant(params.d, params.h_hat)
    n_per = int(budgets.get("n_per_stratum", 2000))
    enum_budget = int(budgets.get("enum_budget", 10 ** 7))
    n_gap_seeds = int(budgets.get("n_gap_seeds", 20))
    rows = []
    for N in sorted(int(n) for n in N_grid):
        rng = np.random.default_rng((seed, N, 1))
        strata = default_strata(N, params.d)
        est = partition_homogeneous_strata(N, params.d, params.h_n(N),
                                           R_max=strata[-1], strata=strata,
                                           n_per_stratum=n_per, rng=rng)
        scaled = -est.log_value / N ** (1.0 - 2.0 * xi)
        rows.append({"N": N, "neg_log_z": -est.log_value,
                     "scaled_neg_log_z": scaled, "std_err": est.std_err,
                     "truncation_bound": est.truncation_bound})
    fit = None
    if len(rows) >= 4:
        fit = fit_exponent([r["N"] for r in rows],
                           [r["neg_log_z"] for r in rows],
                           statistic="-log Z_N (homogeneous)")
    gaps = []
    N_small = min(int(n) for n in N_grid)
    while (2 * params.d) ** N_small > enum_budget and N_small > 4:
        N_small -= 1
    if (2 * params.d) ** N_small <= enum_budget:
        hom = partition_exact(None, params, N_small)
        for s in range(n_gap_seeds):
            fld = DisorderField(seed=seed + s, alpha=params.alpha,
                                p=params.p, q=params.q)
            dis = partition_exact(fld, params, N_small)
            gaps.append({"seed": seed + s,
                         "rel_gap": abs(dis.log_value - hom.log_value) /
                         max(abs(hom.log_value), 1e-300)})
    return {"scenario": "R5", "region": rep.region,
            "theorem_tag": rep.applicable_theorem, "xi": xi,
            "c_d_reference": c_ref, "rows": rows,
            "fit": dataclasses.asdict(fit) if fit else None,
            "gap_N": N_small, "gaps": gaps}


# ---------------------------------------------------------------------------
# config-driven runs


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything needed to reproduce a run bit-identically: the full config
    snapshot, every generator seed used, the code version, and content
    digests of all written outputs."""

    config: dict
    seeds: tuple[int, ...]
    code_version: str
    outputs: tuple[dict, ...] = dc_field(default_factory=tuple)
    wall_time: float = 0.0

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=1,
                                         sort_keys=True))


_MODEL_FIELDS = ("d", "alpha", "p", "q", "beta_hat", "gamma", "h_hat", "zeta")


def _parse_model(cfg: dict, problems: list) -> Optional[ModelParams]:
    model = cfg.get("model")
    if not isinstance(model, dict):
        problems.append("model: section missing")
        return None
    missing = [f for f in _MODEL_FIELDS if f not in model]
    for f in missing:
        problems.append(f"model.{f}: missing")
    bad_type = [f for f in _MODEL_FIELDS if f in model and
                (isinstance(model[f], bool) or
                 not isinstance(model[f], (int, float)))]
    for f in bad_type:
        problems.append(f"model.{f}: must be a number")
    if missing or bad_type:
        return None
    try:
        return ModelParams(d=int(model["d"]), alpha=float(model["alpha"]),
                           p=float(model["p"]), q=float(model["q"]),
                           beta_hat=float(model["beta_hat"]),
                           gamma=float(model["gamma"]),
                           h_hat=float(model["h_hat"]),
                           zeta=float(model["zeta"]))
    except (ValidationError, ValueError) as exc:
        problems.append(f"model: {exc}")
        return None


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fieldnames))
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k) for k in fieldnames})


def _scan_rows(method: dict, budgets: dict) -> list[dict]:
    d = int(method.get("d", 2))
    alpha = float(method.get("alpha", 1.5))
    grid = int(method.get("grid", 50))
    z_lo, z_hi = method.get("zeta_range", (-2.0, 2.0))
    g_lo, g_hi = method.get("gamma_range", (-1.0, 2.0))
    rows = []
    for z in np.linspace(z_lo, z_hi, grid):
        for g in np.linspace(g_lo, g_hi, grid):
            rep = classify_region(ModelParams(
                d=d, alpha=alpha, p=0.5, q=0.5, beta_hat=1.0,
                gamma=float(g), h_hat=1.0, zeta=float(z)))
            rows.append({"zeta": float(z), "gamma": float(g),
                         "region": rep.region, "xi": rep.xi,
                         "theorem_tag": rep.applicable_theorem})
    return rows


def run_experiment(config_path, out_dir=None) -> ExperimentManifest:
    """Parse and validate a TOML config, dispatch the requested scenario or
    estimator, and write CSV + JSON outputs plus a reproducibility manifest.

    Validation failures report every bad field at once.  Dispatch kinds:
    scenario_R4, scenario_R5, scenario_R6, simulate, phase_scan.
    """
    config_path = Path(config_path)
    t0 = time.time()
    try:
        cfg = tomllib.loads(config_path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"config: {exc}") from exc
    problems: list[str] = []
    method = cfg.get("method")
    if not isinstance(method, dict):
        problems.append("method: section missing")
        method = {}
    kind = method.get("kind")
    kinds = ("scenario_R4", "scenario_R5", "scenario_R6", "simulate",
             "phase_scan")
    if kind not in kinds:
        problems.append(f"method.kind: must be one of {kinds}")
    budgets = cfg.get("budgets", {})
    if not isinstance(budgets, dict):
        problems.append("budgets: must be a table")
        budgets = {}
    output = cfg.get("output", {})
    if not isinstance(output, dict):
        problems.append("output: must be a table")
        output = {}
    params = None
    if kind != "phase_scan":
        params = _parse_model(cfg, problems)
    seed = int(method.get("seed", 0))
    if problems:
        raise ValidationError("invalid config: " + "; ".join(problems))

    out = Path(out_dir) if out_dir is not None else \
        Path(output.get("dir", config_path.parent))
    out.mkdir(parents=True, exist_ok=True)
    prefix = str(output.get("prefix", kind))
    seeds_used: list[int] = [seed]
    rows: list[dict] = []
    fields: list[str] = []
    summary: dict = {"kind": kind}

    if kind == "phase_scan":
        rows = _scan_rows(method, budgets)
        fields = ["zeta", "gamma", "region", "xi", "theorem_tag"]
        summary["n_rows"] = len(rows)
    elif kind == "simulate":
        N = int(method.get("N", 8))
        how = method.get("estimator", "exact")
        fld = DisorderField(seed=seed, alpha=params.alpha, p=params.p,
                            q=params.q)
        if how == "exact":
            est = partition_exact(fld, params, N,
                                  budget=int(budgets.get("enum_budget", 10 ** 9)))
        elif how == "mc":
            rng = np.random.default_rng(seed)
            est = partition_mc(fld, params, N,
                               int(budgets.get("n_samples", 10 ** 5)), rng)
        else:
            raise ValidationError("method.estimator: must be 'exact' or 'mc'")
        summary.update({"log_value": est.log_value, "std_err": est.std_err,
                        "method": est.method, "seed": seed,
                        "n_samples": est.n_samples,
                        "truncation_bound": est.truncation_bound})
        rows = [{"N": N, "seed": seed, "statistic": "log_z",
                 "value": est.log_value}]
        fields = ["N", "seed", "statistic", "value"]
    elif kind == "scenario_R6":
        N = int(method.get("N", 12))
        n_seeds = int(method.get("n_seeds", 20))
        seed_list = [seed + i for i in range(n_seeds)]
        seeds_used = seed_list
        report = scenario_R6(params, N, seed_list)
        for r in report["rows"]:
            rows.append({"N": N, "seed": r["seed"],
                         "statistic": "scaled_log_z",
                         "value": r["scaled_log_z"]})
            rows.append({"N": N, "seed": r["seed"],
                         "statistic": "p_two_site", "value": r["p_two_site"]})
        fields = ["N", "seed", "statistic", "value"]
        summary.update({k: v for k, v in report.items() if k != "rows"})
    elif kind == "scenario_R4":
        N_grid = [int(n) for n in method.get("N_grid", [6, 8, 10])]
        report = scenario_R4(params, N_grid, budgets, seed=seed)
        for r in report["rows"]:
            rows.append({"N": r["N"], "seed": seed,
                         "statistic": "scaled_log_z",
                         "value": r["scaled_log_z"]})
        for r in report["ldp_rows"]:
            rows.append({"N": r["N"], "seed": seed, "statistic": "ldp_freq",
                         "value": r["ldp_freq"]})
        fields = ["N", "seed", "statistic", "value"]
        summary.update({k: v for k, v in report.items()
                        if k not in ("rows", "ldp_rows")})
    elif kind == "scenario_R5":
        N_grid = [int(n) for n in method.get("N_grid", [256, 512, 1024, 2048])]
        report = scenario_R5(params, N_grid, budgets, seed=seed)
        for r in report["rows"]:
            rows.append({"N": r["N"], "seed": seed,
                         "statistic": "scaled_neg_log_z",
                         "value": r["scaled_neg_log_z"]})
        fields = ["N", "seed", "statistic", "value"]
        summary.update({k: v for k, v in report.items()
                        if k not in ("rows", "gaps")})
        summary["max_rel_gap"] = max((g["rel_gap"] for g in report["gaps"]),
                                     default=None)

    csv_path = out / f"{prefix}.csv"
    json_path = out / f"{prefix}.json"
    _write_csv(csv_path, fields, rows)
    json_path.write_text(json.dumps(summary, indent=1, sort_keys=True,
                                    default=float))
    manifest = ExperimentManifest(
        config=cfg, seeds=tuple(seeds_used), code_version=__version__,
        outputs=tuple({"path": str(p), "sha256": _digest(p)}
                      for p in (csv_path, json_path)),
        wall_time=time.time() - t0)
    manifest.save(out / f"{prefix}_manifest.json")
    return manifest
