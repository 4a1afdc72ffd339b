"""Solvers for the continuum variational problems: the quadratic arclength
entropy Ent, the collected-weight functional pi, the endpoint rate function
J_d, the reparametrization-optimized entropy Ent-hat, and the two atom
collection problems (quadratic-entropy tradeoff and unit-l1-budget
orienteering).

Both collection problems are solved exactly by Held-Karp subset dynamic
programming over atom subsets (the supremum over continuum paths is attained
on polylines whose vertices are atoms, since the objective only sees the
atom-incidence set and a length minimized by straight segments).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from polyrange.errors import BudgetExceeded, ValidationError
from polyrange.limits import WeightedPointProcess

__all__ = [
    "PolyPath",
    "ent",
    "pi_collect",
    "rate_J",
    "log_step_mgf",
    "log_step_mgf_grad",
    "ent_hat",
    "solve_T_beta",
    "solve_T_hat_inf",
    "EXACT_ATOM_CAP",
]

EXACT_ATOM_CAP = 14


@dataclass(frozen=True)
class PolyPath:
    """Polyline from the origin; optional per-segment time allocation."""

    vertices: tuple  # of d-tuples, first = origin
    times: Optional[tuple] = None

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise ValidationError("need at least the origin vertex")
        if any(abs(c) > 1e-300 for c in self.vertices[0]):
            raise ValidationError("path must start at the origin")
        if self.times is not None:
            if len(self.times) != len(self.vertices) - 1:
                raise ValidationError("need one time per segment")
            if any(t <= 0 for t in self.times):
                raise ValidationError("segment times must be positive")
            if abs(sum(self.times) - 1.0) > 1e-9:
                raise ValidationError("segment times must sum to 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    def segment_vectors(self) -> np.ndarray:
        v = self.as_array()
        return v[1:] - v[:-1]


def ent(path: PolyPath, d: int) -> float:
    """(d/2) * (total Euclidean arclength)^2."""
    segs = path.segment_vectors()
    if segs.size == 0:
        return 0.0
    length = float(np.sqrt((segs ** 2).sum(axis=1)).sum())
    return 0.5 * d * length * length


def _point_polyline_dist(x: np.ndarray, verts: np.ndarray) -> float:
    if verts.shape[0] == 1:
        return float(np.linalg.norm(x - verts[0]))
    a, b = verts[:-1], verts[1:]
    ab = b - a
    denom = (ab ** 2).sum(axis=1)
    denom = np.where(denom == 0, 1.0, denom)
    t = np.clip(((x - a) * ab).sum(axis=1) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.sqrt(((x - proj) ** 2).sum(axis=1)).min())


def pi_collect(path: PolyPath, pp: WeightedPointProcess, tol: float = 0.0) -> float:
    """Sum of atom weights within distance tol of the polyline (tol = 0 is
    exact incidence up to floating-point round-off)."""
    if tol < 0:
        raise ValidationError("tol must be >= 0")
    verts = path.as_array()
    eff = max(tol, 1e-12)
    return sum(w for x, w in pp.atoms
               if _point_polyline_dist(np.asarray(x, dtype=np.float64), verts) <= eff)


# -- endpoint rate function ---------------------------------------------------

def log_step_mgf(d: int, lam: np.ndarray) -> float:
    """log of the step moment generating function, log((1/d) sum_i cosh(lam_i)).
    Computed through logaddexp so large lam does not overflow."""
    lam = np.asarray(lam, dtype=np.float64)
    terms = np.logaddexp(lam, -lam)  # log(2 cosh lam_i)
    return float(np.logaddexp.reduce(terms) - math.log(2 * d))


def log_step_mgf_grad(d: int, lam: np.ndarray) -> np.ndarray:
    """Gradient of log_step_mgf: sinh(lam_i) / sum_j cosh(lam_j)."""
    lam = np.asarray(lam, dtype=np.float64)
    m = np.abs(lam).max() if lam.size else 0.0
    # scale by exp(-m) to avoid overflow: cosh/sinh ratios are shift-invariant
    sh_s = 0.5 * (np.exp(lam - m) - np.exp(-lam - m))
    ch_s = 0.5 * (np.exp(lam - m) + np.exp(-lam - m))
    return sh_s / ch_s.sum()


def rate_J(d: int, v) -> float:
    """Endpoint large-deviation rate: sup_lam <lam, v> - log M(lam).

    +inf outside the closed l1 unit ball; on the boundary the limit value
    log(2d) + sum |v_i| log |v_i|; 0 at v = 0.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (d,):
        raise ValidationError(f"v must be a length-{d} vector")
    l1 = float(np.abs(v).sum())
    if l1 > 1.0 + 1e-12:
        return math.inf
    if l1 < 1e-14:
        return 0.0
    if l1 > 1.0 - 1e-9:
        vv = np.abs(v)
        vv = vv / l1  # project exactly onto the boundary
        nz = vv[vv > 0]
        return float(math.log(2 * d) + (nz * np.log(nz)).sum())

    def neg_obj(lam):
        return -(float(lam @ v) - log_step_mgf(d, lam))

    def neg_grad(lam):
        return -(v - log_step_mgf_grad(d, lam))

    def neg_hess(lam):
        m = np.abs(lam).max() if lam.size else 0.0
        sh = 0.5 * (np.exp(lam - m) - np.exp(-lam - m))
        ch = 0.5 * (np.exp(lam - m) + np.exp(-lam - m))
        s = ch.sum()
        return np.diag(ch) / s - np.outer(sh, sh) / (s * s)

    x0 = np.arctanh(np.clip(v, -0.999, 0.999))
    res = minimize(neg_obj, x0, jac=neg_grad, hess=neg_hess,
                   method="trust-exact", options={"gtol": 1e-12, "maxiter": 500})
    return float(-res.fun)


# -- reparametrization-optimized entropy --------------------------------------

def ent_hat(path: PolyPath, d: int) -> float:
    """inf over time allocations of sum_k t_k * J_d(l_k u_k / t_k).

    Finite iff the total l1-arclength is <= 1 (the closed feasible set
    includes unit-l1-speed segments).  Solved as a convex program in the
    allocation t (simplex with per-segment lower bounds l1_k).
    """
    segs = path.segment_vectors()
    segs = segs[(segs ** 2).sum(axis=1) > 0]
    m = segs.shape[0]
    if m == 0:
        return 0.0
    l1 = np.abs(segs).sum(axis=1)
    total = float(l1.sum())
    if total > 1.0 + 1e-12:
        return math.inf
    if total > 1.0 - 1e-10:
        # only the boundary allocation t_k = l1_k is feasible
        return float(sum(l1[k] * rate_J(d, segs[k] / l1[k]) for k in range(m)))
    if m == 1:
        return rate_J(d, segs[0])

    def obj(t):
        return float(sum(t[k] * rate_J(d, segs[k] / t[k]) for k in range(m)))

    t0 = l1 + (1.0 - total) / m
    res = minimize(obj, t0, method="SLSQP",
                   bounds=[(float(l1[k]) + 1e-12, 1.0) for k in range(m)],
                   constraints=[{"type": "eq", "fun": lambda t: t.sum() - 1.0}],
                   options={"maxiter": 300, "ftol": 1e-12})
    return float(res.fun)


# -- atom-collection problems -------------------------------------------------

def _positive_atoms(pp: WeightedPointProcess):
    pts, ws = [], []
    for x, w in pp.atoms:
        if w > 0:
            pts.append(x)
            ws.append(w)
    return np.asarray(pts, dtype=np.float64).reshape(len(ws), -1), np.asarray(ws)


def _held_karp_lengths(pts: np.ndarray, metric: str) -> np.ndarray:
    """min_path_len[mask] = length of the shortest origin-anchored path
    visiting exactly the atoms in mask (any end atom)."""
    m = pts.shape[0]
    if metric == "l2":
        from_origin = np.sqrt((pts ** 2).sum(axis=1))
        pair = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    elif metric == "l1":
        from_origin = np.abs(pts).sum(axis=1)
        pair = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    else:
        raise ValidationError("metric must be 'l2' or 'l1'")
    size = 1 << m
    dp = np.full((size, max(m, 1)), np.inf)
    for i in range(m):
        dp[1 << i, i] = from_origin[i]
    for mask in range(1, size):
        for last in range(m):
            cur = dp[mask, last]
            if not np.isfinite(cur):
                continue
            rest = (~mask) & (size - 1)
            j = 0
            rr = rest
            while rr:
                if rr & 1:
                    nmask = mask | (1 << j)
                    nd = cur + pair[last, j]
                    if nd < dp[nmask, j]:
                        dp[nmask, j] = nd
                rr >>= 1
                j += 1
    best = np.full(size, 0.0)
    if m:
        best[1:] = dp[1:].min(axis=1)
    return best


def _beam_collect(pts, ws, d, beta, metric, beam_width=2000):
    """Greedy beam over (visited set, last, length): heuristic lower bound
    used beyond the exact-DP atom cap."""
    m = pts.shape[0]
    if metric == "l2":
        from_origin = np.sqrt((pts ** 2).sum(axis=1))
        pair = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    else:
        from_origin = np.abs(pts).sum(axis=1)
        pair = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    states = {(frozenset(), -1): 0.0}  # -> min length
    best_per_set: dict = {frozenset(): 0.0}
    for _ in range(m):
        new: dict = {}
        for (visited, last), length in states.items():
            for j in range(m):
                if j in visited:
                    continue
                step = from_origin[j] if last < 0 else pair[last, j]
                key = (visited | {j}, j)
                nl = length + step
                if nl < new.get(key, math.inf):
                    new[key] = nl
        if not new:
            break
        pruned = sorted(new.items(), key=lambda kv: kv[1])[:beam_width]
        states = dict(pruned)
        for (visited, _), length in states.items():
            if length < best_per_set.get(visited, math.inf):
                best_per_set[visited] = length
    return best_per_set


def _collection_report(pts, ws, d, lengths_by_set, value_fn):
    best_val, best_set, best_len = 0.0, frozenset(), 0.0
    for subset, length in lengths_by_set.items():
        w = float(sum(ws[j] for j in subset))
        val = value_fn(w, length)
        if val > best_val:
            best_val, best_set, best_len = val, subset, length
    return best_val, best_set, best_len


def _order_vertices(pts, subset, metric):
    """Recover an optimal visiting order for the reported subset by brute
    force (subsets at the cap are small enough for permutations <= 8; for
    larger subsets a nearest-neighbor order is returned, value-irrelevant)."""
    idx = sorted(subset)
    if not idx:
        return (np.zeros((1, pts.shape[1]) if pts.size else (1, 1)), ())
    sub = pts[idx]

    def plen(order):
        seq = np.vstack([np.zeros(sub.shape[1]), sub[list(order)]])
        diff = seq[1:] - seq[:-1]
        if metric == "l2":
            return float(np.sqrt((diff ** 2).sum(axis=1)).sum())
        return float(np.abs(diff).sum())

    k = len(idx)
    if k <= 8:
        order = min(itertools.permutations(range(k)), key=plen)
    else:
        order = list(range(k))
        order.sort(key=lambda j: np.abs(sub[j]).sum())
        order = tuple(order)
    verts = np.vstack([np.zeros(sub.shape[1]), sub[list(order)]])
    return verts, tuple(idx[j] for j in order)


def solve_T_beta(pp: WeightedPointProcess, beta: float, d: int,
                 budget: int = EXACT_ATOM_CAP):
    """sup over paths of beta*pi(s) - Ent(s) = max over atom subsets of
    beta*w(subset) - (d/2)*L(subset)^2, L the shortest origin-anchored path
    length through the subset.

    Returns (value, PolyPath, info); info['exact'] is False when the atom
    count forced the beam-search fallback (value then a lower bound).
    """
    if beta < 0:
        raise ValidationError("beta must be >= 0")
    pts, ws = _positive_atoms(pp)
    m = pts.shape[0]
    exact = m <= budget
    if not exact and m > 26:
        raise BudgetExceeded(f"{m} positive atoms exceed even the beam cap")
    if exact:
        lengths = _held_karp_lengths(pts, "l2")
        by_set = {frozenset(j for j in range(m) if mask >> j & 1): lengths[mask]
                  for mask in range(1 << m)}
    else:
        by_set = _beam_collect(pts, ws, d, beta, "l2")
    val, subset, length = _collection_report(
        pts, ws, d, by_set, lambda w, L: beta * w - 0.5 * d * L * L)
    verts, order = _order_vertices(pts, subset, "l2")
    path = PolyPath(vertices=tuple(tuple(map(float, r)) for r in verts))
    return val, path, {"exact": exact, "atoms": order, "path_length": length}


def solve_T_hat_inf(pp: WeightedPointProcess, d: int,
                    budget: int = EXACT_ATOM_CAP):
    """Max total positive weight on a polyline from the origin with
    l1-arclength <= 1 (the finiteness domain of the reparametrized entropy);
    orienteering by the same subset DP with the l1 metric."""
    pts, ws = _positive_atoms(pp)
    m = pts.shape[0]
    exact = m <= budget
    if not exact and m > 26:
        raise BudgetExceeded(f"{m} positive atoms exceed even the beam cap")
    if exact:
        lengths = _held_karp_lengths(pts, "l1")
        by_set = {frozenset(j for j in range(m) if mask >> j & 1): lengths[mask]
                  for mask in range(1 << m)}
    else:
        by_set = _beam_collect(pts, ws, d, 0.0, "l1")
    val, subset, length = _collection_report(
        pts, ws, d, by_set,
        lambda w, L: w if L <= 1.0 + 1e-12 else 0.0)
    verts, order = _order_vertices(pts, subset, "l1")
    path = PolyPath(vertices=tuple(tuple(map(float, r)) for r in verts))
    return val, path, {"exact": exact, "atoms": order, "path_length": length}
