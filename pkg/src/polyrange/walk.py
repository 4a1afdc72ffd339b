"""Simple symmetric random walk on Z^d: sampling, exact enumeration, range
and displacement bookkeeping, and confined (conditioned) sampling.

Steps are encoded as integers in [0, 2d): axis = step >> 1, sign = +1 when
the low bit is set.  All samplers share this encoding with the compiled
kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from polyrange import _kernels
from polyrange.environment import ball_sites
from polyrange.errors import BudgetExceeded

__all__ = [
    "PathSample",
    "PathClass",
    "simulate_walk",
    "simulate_walk_batch",
    "enumerate_paths",
    "enumerate_cells",
    "ConfinedWalkTable",
    "confined_walk_sampler",
    "class_membership",
    "steps_to_positions",
]

DEFAULT_ENUM_BUDGET = 10 ** 9


def steps_to_positions(steps: np.ndarray, d: int) -> np.ndarray:
    """Positions S_0..S_N (shape (N+1, d)) from encoded steps."""
    steps = np.asarray(steps)
    n = steps.shape[0]
    moves = np.zeros((n, d), dtype=np.int64)
    axis = steps >> 1
    sign = np.where(steps & 1, 1, -1)
    moves[np.arange(n), axis] = sign
    out = np.zeros((n + 1, d), dtype=np.int64)
    np.cumsum(moves, axis=0, out=out[1:])
    return out


@dataclass
class PathSample:
    """A walk trajectory with range/displacement summaries.

    ``log_weight`` is 0 for plain sampling and log P(conditioning event) for
    importance samplers, so weight-corrected averages reproduce unconditioned
    expectations restricted to the event.
    """

    steps: np.ndarray
    d: int
    range_size: int
    max_disp: float
    log_weight: float = 0.0
    _positions: Optional[np.ndarray] = dc_field(default=None, repr=False)

    @property
    def n_steps(self) -> int:
        return int(self.steps.shape[0])

    def positions(self) -> np.ndarray:
        if self._positions is None:
            self._positions = steps_to_positions(self.steps, self.d)
        return self._positions

    def range_set(self) -> set:
        return {tuple(int(c) for c in row) for row in self.positions()}


@dataclass(frozen=True)
class PathClass:
    """Shell class of paths with M_N in [r, p*r] and |R_N| in [r*s, p^2*r*s]."""

    r: float
    s: float
    p: float

    def __post_init__(self):
        if self.r <= 0 or self.s < 1 or self.p <= 1:
            raise ValueError("need r > 0, s >= 1, p > 1")


def class_membership(sample: PathSample, cls: PathClass) -> bool:
    """Closed-interval membership test on (M_N, |R_N|)."""
    m_ok = cls.r <= sample.max_disp <= cls.p * cls.r
    r_ok = cls.r * cls.s <= sample.range_size <= cls.p ** 2 * cls.r * cls.s
    return bool(m_ok and r_ok)


def _summarize(steps: np.ndarray, d: int, log_weight: float = 0.0) -> PathSample:
    pos = steps_to_positions(steps, d)
    packed = _pack(pos)
    range_size = int(np.unique(packed).size)
    max_disp = float(np.sqrt((pos.astype(np.float64) ** 2).sum(axis=1).max()))
    return PathSample(steps=steps, d=d, range_size=range_size,
                      max_disp=max_disp, log_weight=log_weight,
                      _positions=pos)


def _pack(pos: np.ndarray) -> np.ndarray:
    """Pack integer coordinate rows into single int64 keys (21 bits/axis)."""
    key = np.zeros(pos.shape[0], dtype=np.int64)
    for j in range(pos.shape[1]):
        key = (key << 21) | ((pos[:, j] + (1 << 20)) & 0x1FFFFF)
    return key


def simulate_walk(rng: np.random.Generator, N: int, d: int) -> PathSample:
    """One uniform N-step walk with incremental range bookkeeping."""
    if N < 1:
        raise ValueError("N must be >= 1")
    steps = rng.integers(0, 2 * d, size=N).astype(np.int8)
    return _summarize(steps, d)


def simulate_walk_batch(seed: int, n_walks: int, N: int, d: int):
    """Range sizes, max displacements and endpoints for n_walks independent
    walks (compiled kernel; deterministic in the seed).

    Returns (range_size, max_disp, endpoints) arrays.
    """
    rs, msq, ends = _kernels.walk_range_stats(int(seed), int(n_walks), int(N), int(d))
    return rs, np.sqrt(msq.astype(np.float64)), ends


def enumerate_paths(N: int, d: int, visitor: Callable,
                    budget: int = DEFAULT_ENUM_BUDGET) -> int:
    """Visit every step sequence of length N exactly once.

    ``visitor(steps, prob, range_counts, max_disp_sq)`` receives the step
    tuple, the path probability (2d)^-N, a dict mapping visited sites to
    visit counts (do not mutate), and the squared max displacement.  Returns
    the number of leaves visited.  Refuses (without partial work) when
    (2d)^N exceeds the budget.
    """
    total = (2 * d) ** N
    if total > budget:
        raise BudgetExceeded(f"(2d)^N = {total} exceeds enumeration budget {budget}")
    prob = (2 * d) ** (-float(N))
    steps = [0] * N
    pos = [0] * d
    counts: dict = {tuple(pos): 1}
    msq_stack = [0] * (N + 1)
    n_leaves = 0

    def rec(t: int):
        nonlocal n_leaves
        if t == N:
            visitor(tuple(steps), prob, counts, msq_stack[N])
            n_leaves += 1
            return
        for c in range(2 * d):
            axis, sign = c >> 1, 1 if c & 1 else -1
            pos[axis] += sign
            site = tuple(pos)
            counts[site] = counts.get(site, 0) + 1
            msq_stack[t + 1] = max(msq_stack[t], sum(x * x for x in pos))
            steps[t] = c
            rec(t + 1)
            if counts[site] == 1:
                del counts[site]
            else:
                counts[site] -= 1
            pos[axis] -= sign
        return

    rec(0)
    return n_leaves


def enumerate_cells(N: int, d: int, omega_grid: Optional[np.ndarray], beta: float,
                    budget: int = DEFAULT_ENUM_BUDGET):
    """Exact enumeration aggregated per (range_size, max_disp_sq) cell.

    ``omega_grid`` is the disorder on the box [-N, N]^d (shape (2N+1,)*d) or
    None for the homogeneous model.  Returns (lse, cnt, emax) as in the
    compiled kernel; path probabilities are not included.
    """
    total = (2 * d) ** N
    if total > budget:
        raise BudgetExceeded(f"(2d)^N = {total} exceeds enumeration budget {budget}")
    side = 2 * N + 1
    if omega_grid is None:
        flat = np.zeros(side ** d)
    else:
        if omega_grid.shape != (side,) * d:
            raise ValueError(f"omega_grid must have shape {(side,) * d}")
        flat = np.ascontiguousarray(omega_grid, dtype=np.float64).ravel()
    return _kernels.enum_cells(int(N), int(d), flat, float(beta))


class ConfinedWalkTable:
    """Backward survival table for walks confined to the Euclidean ball of
    radius R, with per-step renormalization so N*log survival rates never
    underflow.

    u_n(x) = P(stay in the ball for n more steps | currently at x); stored as
    u_n = exp(log_norm[n]) * u_hat[n] with max(u_hat[n]) = 1.
    """

    MAX_TABLE_ENTRIES = 200_000_000

    def __init__(self, N: int, d: int, radius: float):
        if radius < 1:
            raise ValueError("radius must be >= 1")
        self.N, self.d, self.radius = N, d, float(radius)
        sites = ball_sites(d, radius)
        n_sites = sites.shape[0]
        if n_sites * (N + 1) > self.MAX_TABLE_ENTRIES:
            raise BudgetExceeded(
                f"survival table needs {n_sites * (N + 1)} entries "
                f"(cap {self.MAX_TABLE_ENTRIES})")
        self.sites = sites
        key_to_idx = {tuple(int(c) for c in row): i for i, row in enumerate(sites)}
        self.origin_idx = key_to_idx[(0,) * d]
        # neighbor index table, -1 when the neighbor leaves the ball
        nbr = np.full((n_sites, 2 * d), -1, dtype=np.int64)
        for i, row in enumerate(sites):
            for c in range(2 * d):
                axis, sign = c >> 1, 1 if c & 1 else -1
                other = list(row)
                other[axis] += sign
                j = key_to_idx.get(tuple(other))
                if j is not None:
                    nbr[i, c] = j
        self.nbr = nbr

        u_hat = np.zeros((N + 1, n_sites))
        log_norm = np.zeros(N + 1)
        u_hat[0] = 1.0
        inv2d = 1.0 / (2 * d)
        padded = np.zeros(n_sites + 1)
        for n in range(1, N + 1):
            padded[:n_sites] = u_hat[n - 1]
            padded[n_sites] = 0.0  # out-of-ball neighbors contribute nothing
            u = inv2d * padded[nbr].sum(axis=1)
            m = u.max()
            u_hat[n] = u / m
            log_norm[n] = log_norm[n - 1] + np.log(m)
        self.u_hat = u_hat
        self.log_norm = log_norm

    def log_survival(self, n: Optional[int] = None, site_idx: Optional[int] = None) -> float:
        """log P(stay in the ball for n steps starting from site_idx)."""
        n = self.N if n is None else n
        i = self.origin_idx if site_idx is None else site_idx
        val = self.u_hat[n, i]
        if val == 0.0:
            return -np.inf
        return float(np.log(val) + self.log_norm[n])

    def sample_paths(self, rng: np.random.Generator, n_paths: int):
        """Site-index trajectories (n_paths, N+1) of walks conditioned to
        stay in the ball, drawn by the exact backward-forward method."""
        N = self.N
        idx = np.full(n_paths, self.origin_idx, dtype=np.int64)
        out = np.empty((n_paths, N + 1), dtype=np.int64)
        out[:, 0] = idx
        padded = np.zeros(self.u_hat.shape[1] + 1)
        for t in range(N):
            rem = N - t - 1
            padded[:-1] = self.u_hat[rem]
            padded[-1] = 0.0
            w = padded[self.nbr[idx]]           # (n_paths, 2d)
            cdf = np.cumsum(w, axis=1)
            tot = cdf[:, -1]
            u = rng.random(n_paths) * tot
            choice = np.minimum((u[:, None] >= cdf).sum(axis=1), 2 * self.d - 1)
            idx = self.nbr[idx, choice]
            out[:, t + 1] = idx
        return out


def confined_walk_sampler(N: int, d: int, radius: float,
                          rng: np.random.Generator,
                          table: Optional[ConfinedWalkTable] = None) -> PathSample:
    """One walk conditioned to stay in the radius-R ball for N steps;
    log_weight = log P(confinement event)."""
    if table is None:
        table = ConfinedWalkTable(N, d, radius)
    traj = table.sample_paths(rng, 1)[0]
    pos = table.sites[traj]
    # recover the step encoding from consecutive positions
    diff = pos[1:] - pos[:-1]
    axis = np.abs(diff).argmax(axis=1)
    sign = diff[np.arange(N), axis]
    steps = (2 * axis + (sign > 0)).astype(np.int8)
    packed = _pack(pos)
    range_size = int(np.unique(packed).size)
    max_disp = float(np.sqrt((pos.astype(np.float64) ** 2).sum(axis=1).max()))
    return PathSample(steps=steps, d=d, range_size=range_size, max_disp=max_disp,
                      log_weight=table.log_survival(), _positions=pos)
