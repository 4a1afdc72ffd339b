"""Ordered-set entropy, budget-constrained site collection, and empirical
shape checks for the tail/energy bounds that control heavy-tailed polymer
localization.

The central object is an origin-anchored ordered set of lattice sites with
entropy (d/2) * (total Euclidean tour length)^2.  ``L_B`` is the largest
subset of a given point cloud that admits a visiting order with entropy
within a budget B; the ``check_*`` routines measure empirical tails of the
related walk-class quantities and compare their decay shapes against the
predicted exponents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .environment import DisorderField, ball_sites
from .errors import BudgetExceeded, ValidationError
from .params import ModelParams
from .partition import _batch_path_stats, omega_grid
from .variational import _held_karp_lengths
from .walk import DEFAULT_ENUM_BUDGET, enumerate_cells

__all__ = [
    "OrderedSiteSet",
    "ent_ordered",
    "best_order_ent",
    "L_B",
    "sample_uniform_sites",
    "max_class_intersection",
    "check_L_tail",
    "check_energy_bound",
    "check_lemma_g",
]

#: Largest point count for which the subset dynamic program is run exactly.
EXACT_POINT_CAP = 15


# ---------------------------------------------------------------------------
# ordered sets and entropy


@dataclass(frozen=True)
class OrderedSiteSet:
    """Distinct lattice sites with a visiting order, anchored at the origin
    (the origin is implicit and prepended, not stored in ``points``)."""

    points: tuple[tuple[int, ...], ...]
    order: tuple[int, ...] = dc_field(default=())

    def __post_init__(self):
        if len(set(self.points)) != len(self.points):
            raise ValidationError("points must be distinct")
        order = self.order if self.order else tuple(range(len(self.points)))
        if sorted(order) != list(range(len(self.points))):
            raise ValidationError("order must be a permutation of the points")
        object.__setattr__(self, "order", order)

    @property
    def d(self) -> int:
        return len(self.points[0]) if self.points else 0

    def entropy(self, d: Optional[int] = None) -> float:
        return ent_ordered(np.asarray(self.points, dtype=float).reshape(
            len(self.points), -1), self.order, d if d is not None else self.d)


def ent_ordered(pts, order: Sequence[int], d: int) -> float:
    """(d/2) * (sum of Euclidean leg lengths)^2 for the tour that starts at
    the origin and visits ``pts`` in the given order."""
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0:
        return 0.0
    pts = pts.reshape(-1, d)
    tour = np.vstack([np.zeros(d), pts[list(order)]])
    length = float(np.sqrt((np.diff(tour, axis=0) ** 2).sum(axis=1)).sum())
    return 0.5 * d * length * length


def best_order_ent(pts, d: int) -> float:
    """Minimal ``ent_ordered`` over all visiting orders (subset dynamic
    program over the full set)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, d)
    m = pts.shape[0]
    if m == 0:
        return 0.0
    if m > EXACT_POINT_CAP:
        raise BudgetExceeded(f"exact order optimization capped at "
                             f"{EXACT_POINT_CAP} points, got {m}")
    best = _held_karp_lengths(pts, "l2")
    length = float(best[(1 << m) - 1])
    return 0.5 * d * length * length


def L_B(pts, B: float, d: int, budget: int = EXACT_POINT_CAP) -> int:
    """Largest subset of ``pts`` admitting an origin-anchored visiting order
    with entropy <= B.  Exact (subset dynamic program); refuses point sets
    beyond ``budget`` rather than falling back to a heuristic."""
    pts = np.asarray(pts, dtype=float).reshape(-1, d) if np.size(pts) else \
        np.zeros((0, d))
    m = pts.shape[0]
    if m > budget or m > EXACT_POINT_CAP:
        raise BudgetExceeded(f"exact subset dynamic program capped at "
                             f"{min(budget, EXACT_POINT_CAP)} points, got {m}")
    if B < 0:
        raise ValidationError("entropy budget must be >= 0")
    if m == 0:
        return 0
    best = _held_karp_lengths(pts, "l2")
    # ent <= B  <=>  tour length <= sqrt(2B/d)
    max_len = math.sqrt(2.0 * B / d)
    sizes = np.array([bin(mask).count("1") for mask in range(1 << m)])
    feasible = best <= max_len + 1e-12
    feasible[0] = True
    return int(sizes[feasible].max())


# ---------------------------------------------------------------------------
# walk classes


def _class_windows(r: float, s: float, p: float):
    """Closed index windows for the walk class with max displacement in
    [r, pr] and range size in [rs, p^2 rs]."""
    msq_lo, msq_hi = r * r, (p * r) ** 2
    rs_lo, rs_hi = r * s, p * p * r * s
    return (rs_lo, rs_hi), (msq_lo, msq_hi)


def _cell_mask(N: int, rs_win, msq_win) -> np.ndarray:
    """Boolean mask over the (range_size, max_disp_sq) cell grid selecting
    cells inside the closed windows."""
    rs = np.arange(N + 2, dtype=float)
    msq = np.arange(N * N + 1, dtype=float)
    tol = 1e-9
    in_rs = (rs >= rs_win[0] - tol) & (rs <= rs_win[1] + tol)
    in_m = (msq >= msq_win[0] - tol) & (msq <= msq_win[1] + tol)
    return in_rs[:, None] & in_m[None, :]


def max_class_intersection(N: int, d: int, r: float, s: float, p: float,
                           sites) -> int:
    """Max over enumerated N-step walks with M_N in [r, pr] and |R_N| in
    [rs, p^2 rs] of the number of ``sites`` the walk range visits.

    Exact via cell enumeration with an indicator field: the disorder grid is
    replaced by 1 on ``sites`` and 0 elsewhere, so the per-cell max energy is
    the max intersection count."""
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, d)
    side = 2 * N + 1
    grid = np.zeros((side,) * d)
    for pt in sites:
        if np.any(np.abs(pt) > N):
            continue
        grid[tuple(pt + N)] = 1.0
    _, cnt, emax = enumerate_cells(N, d, grid, beta=1.0)
    rs_win, msq_win = _class_windows(r, s, p)
    mask = _cell_mask(N, rs_win, msq_win) & (cnt > 0)
    if not mask.any():
        raise ValidationError(
            f"walk class M in [{r}, {p * r}], |R| in [{r * s}, {p * p * r * s}]"
            f" is empty at N={N}")
    return int(round(emax[mask].max()))


# ---------------------------------------------------------------------------
# tail of the constrained collection count


def sample_uniform_sites(d: int, radius: float, m: int,
                         rng: np.random.Generator,
                         exclude_origin: bool = True) -> np.ndarray:
    """m distinct sites drawn uniformly from the radius-``radius`` lattice
    ball (fresh draw, independent of any disorder field)."""
    sites = ball_sites(d, radius)
    if exclude_origin:
        sites = sites[np.any(sites != 0, axis=1)]
    if m > sites.shape[0]:
        raise ValidationError(f"m={m} exceeds the {sites.shape[0]} available "
                              f"sites in the radius-{radius} ball")
    idx = rng.choice(sites.shape[0], size=m, replace=False)
    return sites[idx]


def check_L_tail(d: int, p: float, r: float, s: float, m: int, trials: int,
                 rng: np.random.Generator, c_d: float = 2.0) -> dict:
    """Empirical tail of the budget-constrained collection count over fresh
    uniform m-site draws from the radius-pr ball.

    Budget B = (d/2) (c_d p^2 r s)^2, the entropy available to a walk whose
    range size is at most p^2 r s and whose tour length is at most c_d times
    its range size.  Returns the tail P(L >= k), a concavity verdict for its
    log where positive, and the best-fitting constant for the predicted
    (c s m^{1/d} / k)^{dk} shape.
    """
    if p <= 1 or r <= 0 or s <= 0 or m < 1 or trials < 1:
        raise ValidationError("need p > 1, r, s > 0, m >= 1, trials >= 1")
    B = 0.5 * d * (c_d * p * p * r * s) ** 2
    values = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        pts = sample_uniform_sites(d, p * r, m, rng)
        values[t] = L_B(pts, B, d)
    ks = np.arange(m + 2)
    tail = np.array([(values >= k).mean() for k in ks])
    pos = tail > 0
    log_tail = np.where(pos, np.log(np.maximum(tail, 1e-300)), -np.inf)
    # concavity of the log-tail on its positive support
    kp = ks[pos]
    lp = log_tail[pos]
    second = np.diff(lp, 2) if lp.size >= 3 else np.array([])
    concave = bool(np.all(second <= 1e-9))
    # fit c in the predicted shape log P(L>=k) ~ d k (log c + log(s m^{1/d}/k))
    fit_mask = pos & (ks >= 1) & (tail < 1)
    c_fit = float("nan")
    if fit_mask.sum() >= 1:
        kf = ks[fit_mask].astype(float)
        lf = log_tail[fit_mask]
        base = d * kf * (math.log(s) + math.log(m) / d - np.log(kf))
        # least squares in log c with weights d*k
        w = d * kf
        c_fit = float(math.exp(((lf - base) * w).sum() / (w * w).sum()))
    return {
        "B": B,
        "k": ks,
        "tail": tail,
        "log_tail": log_tail,
        "concave": concave,
        "c_fit": c_fit,
        "trials": trials,
        "values": values,
    }


# ---------------------------------------------------------------------------
# energy-on-a-range tail


def _masked_grid(field: DisorderField, N: int, d: int,
                 radius: float) -> np.ndarray:
    """Disorder grid on [-N, N]^d with sites outside the Euclidean
    radius-``radius`` ball zeroed, so path energies equal the energy
    restricted to that ball."""
    grid = omega_grid(field, N, d)
    axes = np.meshgrid(*[np.arange(-N, N + 1)] * d, indexing="ij")
    dist_sq = sum(a.astype(float) ** 2 for a in axes)
    grid[dist_sq > radius * radius + 1e-9] = 0.0
    return grid


def check_energy_bound(field_template: DisorderField, d: int, alpha: float,
                       r: float, s: float, p: float, t_grid,
                       trials: int, N: int = 10,
                       slack: float = 0.25) -> dict:
    """Tail of the class-maximal restricted energy over fresh disorder seeds.

    For each seed, exhaustively enumerates N-step walks and takes the max
    over walks with M_N in [r, pr], |R_N| in [rs, p^2 rs] of the energy
    collected inside the radius-r ball; estimates P(max > r^{d/alpha} s t)
    on ``t_grid`` and fits the log-log slope, asserting it is at most
    -alpha*d/(alpha+d) + ``slack``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or trials < 2:
        raise ValidationError("need positive t_grid and trials >= 2")
    if (2 * d) ** N > DEFAULT_ENUM_BUDGET:
        raise BudgetExceeded(f"(2d)^N = {(2 * d) ** N} exceeds the "
                             f"enumeration budget")
    rs_win, msq_win = _class_windows(r, s, p)
    mask = None
    maxima = np.empty(trials)
    for i in range(trials):
        fld = DisorderField(seed=field_template.seed + i, alpha=alpha,
                            p=field_template.p, q=field_template.q)
        grid = _masked_grid(fld, N, d, r)
        _, cnt, emax = enumerate_cells(N, d, grid, beta=1.0)
        if mask is None:
            mask = _cell_mask(N, rs_win, msq_win) & (cnt > 0)
            if not mask.any():
                raise ValidationError(
                    f"walk class M in [{r}, {p * r}], |R| in "
                    f"[{r * s}, {p * p * r * s}] is empty at N={N}")
        maxima[i] = emax[mask].max()
    scale = r ** (d / alpha) * s
    probs = np.array([(maxima > scale * t).mean() for t in t_grid])
    theoretical = -alpha * d / (alpha + d)
    fit_mask = (probs > 0) & (probs < 1)
    slope = float("nan")
    if fit_mask.sum() >= 2:
        coef = np.polyfit(np.log(t_grid[fit_mask]),
                          np.log(probs[fit_mask]), 1)
        slope = float(coef[0])
    return {
        "t_grid": t_grid,
        "probs": probs,
        "slope": slope,
        "theoretical_slope": theoretical,
        "slope_ok": bool(slope == slope and slope <= theoretical + slack),
        "threshold_scale": scale,
        "trials": trials,
        "N": N,
        "maxima": maxima,
    }


# ---------------------------------------------------------------------------
# high-energy event union bound


def _cell_grid_for(N: int, d: int, alpha: float, p: float):
    """(k, j) cell layout: shell radii p^k A_N for k = 0..log_p(N/A_N) and,
    per shell, range windows indexed by j = 0..B_{N,k} with
    B_{N,k} = log_p(min(|ball(p^k A_N)| / A_N, N / (p^k A_N)))."""
    A_N = N ** (1.0 - alpha / d)
    k_max = int(math.floor(math.log(N / A_N, p) + 1e-12))
    cells = []
    for k in range(k_max + 1):
        radius = p ** k * A_N
        n_ball = ball_sites(d, radius).shape[0]
        b_nk = math.log(min(n_ball / A_N, N / radius), p)
        j_max = int(math.floor(b_nk + 1e-12))
        for j in range(max(j_max, 0) + 1):
            cells.append((k, j))
    return A_N, cells


def check_lemma_g(params: ModelParams, N_grid, p: float, eps: float,
                  n_seeds: int, base_seed: int = 0,
                  n_walks: int = 200_000, slack: float = 0.25,
                  enum_budget: float = DEFAULT_ENUM_BUDGET) -> dict:
    """Union-bound probability that some displacement/range cell carries an
    atypically high energy, evaluated empirically across an N-grid.

    Cells are indexed by (k, j): walks with M_N in [p^k A_N, p^{k+1} A_N]
    and |R_N| in [p^{k+j} A_N, p^{k+j+2} A_N], with A_N = N^{1-alpha/d}.
    The per-cell event is max over class walks of the range energy exceeding
    eps^2 p^{k+j} (h_N / beta_N) A_N.  Requires gamma > zeta +
    (d-alpha)/alpha; the per-N empirical cell probabilities are summed and
    their decay compared with the predicted power
    -alpha*d/(alpha+d) * (gamma - zeta - (d-alpha)/alpha).
    """
    d, alpha = params.d, params.alpha
    hypothesis = params.gamma - params.zeta - (d - alpha) / alpha
    if hypothesis <= 0:
        raise ValidationError(
            "requires gamma > zeta + (d-alpha)/alpha (the high-energy union "
            f"bound hypothesis); got gamma - zeta - (d-alpha)/alpha = "
            f"{hypothesis}")
    if not (0 < eps < 1) or p <= 1:
        raise ValidationError("need eps in (0,1) and p > 1")
    N_grid = sorted(int(N) for N in N_grid)
    totals = []
    details = []
    for N in N_grid:
        A_N, cells = _cell_grid_for(N, d, alpha, p)
        h_over_beta = params.h_n(N) / params.beta_n(N)
        exact = (2 * d) ** N <= enum_budget
        hits = np.zeros(len(cells))
        for i in range(n_seeds):
            fld = DisorderField(seed=base_seed + i, alpha=alpha,
                                p=params.p, q=params.q)
            if exact:
                grid = omega_grid(fld, N, d)
                _, cnt, emax = enumerate_cells(N, d, grid, beta=1.0)
                for ci, (k, j) in enumerate(cells):
                    rs_win = (p ** (k + j) * A_N, p ** (k + j + 2) * A_N)
                    msq_win = ((p ** k * A_N) ** 2, (p ** (k + 1) * A_N) ** 2)
                    mask = _cell_mask(N, rs_win, msq_win) & (cnt > 0)
                    if not mask.any():
                        continue
                    thr = eps * eps * p ** (k + j) * h_over_beta * A_N
                    if emax[mask].max() > thr:
                        hits[ci] += 1
            else:
                rng = np.random.default_rng((base_seed + i, N, 0xC0FFEE))
                steps = rng.integers(0, 2 * d, size=(n_walks, N)).astype(np.int8)
                energy, rs, md = _batch_path_stats(fld, d, steps)
                for ci, (k, j) in enumerate(cells):
                    lo_m, hi_m = p ** k * A_N, p ** (k + 1) * A_N
                    lo_r, hi_r = p ** (k + j) * A_N, p ** (k + j + 2) * A_N
                    sel = ((md >= lo_m - 1e-9) & (md <= hi_m + 1e-9) &
                           (rs >= lo_r - 1e-9) & (rs <= hi_r + 1e-9))
                    if not sel.any():
                        continue
                    thr = eps * eps * p ** (k + j) * h_over_beta * A_N
                    if energy[sel].max() > thr:
                        hits[ci] += 1
        cell_probs = hits / n_seeds
        totals.append(float(cell_probs.sum()))
        details.append({"N": N, "A_N": A_N, "cells": cells,
                        "cell_probs": cell_probs, "exact": exact})
    totals = np.array(totals)
    rate = -alpha * d / (alpha + d) * hypothesis
    fit_mask = totals > 0
    slope = float("nan")
    if fit_mask.sum() >= 2:
        coef = np.polyfit(np.log(np.array(N_grid, dtype=float)[fit_mask]),
                          np.log(totals[fit_mask]), 1)
        slope = float(coef[0])
    decreasing = bool(np.all(np.diff(totals) <= 1e-12))
    return {
        "N_grid": N_grid,
        "totals": totals,
        "rate_exponent": rate,
        "slope": slope,
        "slope_ok": bool(slope == slope and slope <= rate + slack),
        "decreasing": decreasing,
        "details": details,
        "eps": eps,
        "p": p,
    }
