"""Numba kernels for the hot loops: batched walk statistics, non-return
counting, and exhaustive path enumeration aggregated into
(range size, squared max displacement) cells.

All kernels use an inline xorshift64* generator seeded per task, so results
are deterministic and independent of threading or batch order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "walk_range_stats",
    "nonreturn_count",
    "enum_cells",
    "splitmix64_scalar",
]

_U64 = np.uint64


@njit(cache=True, inline="always")
def _splitmix64(z):
    z = (z + _U64(0x9E3779B97F4A7C15)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)) & _U64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> _U64(31))


@njit(cache=True)
def splitmix64_scalar(z):
    """Scrambles a uint64; used to derive independent sub-seeds."""
    return _splitmix64(_U64(z))


@njit(cache=True, inline="always")
def _xorshift(s):
    s ^= s << _U64(13)
    s &= _U64(0xFFFFFFFFFFFFFFFF)
    s ^= s >> _U64(7)
    s ^= s << _U64(17)
    s &= _U64(0xFFFFFFFFFFFFFFFF)
    return s


@njit(cache=True)
def walk_range_stats(seed, n_walks, N, d):
    """Simulate n_walks independent N-step walks on Z^d.

    Returns (range_size, max_disp_sq, endpoints): the number of distinct
    visited sites (origin included), the max squared Euclidean norm along
    each path, and the final position.
    """
    range_size = np.empty(n_walks, dtype=np.int64)
    max_disp_sq = np.empty(n_walks, dtype=np.int64)
    endpoints = np.empty((n_walks, d), dtype=np.int64)

    # Open-addressing hash set of packed coordinates (21 signed bits/axis).
    cap = 1
    while cap < 4 * (N + 1):
        cap <<= 1
    mask = cap - 1
    table = np.empty(cap, dtype=np.int64)
    pos = np.empty(d, dtype=np.int64)
    two_d = 2 * d

    for w in range(n_walks):
        state = _splitmix64(_U64(seed) + _U64(w) * _U64(0x9E3779B97F4A7C15))
        if state == _U64(0):
            state = _U64(0xDEADBEEF)
        table[:] = -1
        for j in range(d):
            pos[j] = 0
        # insert origin
        size = 0
        key = np.int64(0)
        for j in range(d):
            key = (key << 21) | np.int64((0 + (1 << 20)) & 0x1FFFFF)
        idx = np.int64(_splitmix64(_U64(key)) & _U64(mask))
        table[idx] = key
        size = 1
        msq = np.int64(0)
        for _ in range(N):
            state = _xorshift(state)
            r = state * _U64(0x2545F4914F6CDD1D)
            step = np.int64(r % _U64(two_d))
            axis = step >> 1
            if step & 1:
                pos[axis] += 1
            else:
                pos[axis] -= 1
            nsq = np.int64(0)
            key = np.int64(0)
            for j in range(d):
                nsq += pos[j] * pos[j]
                key = (key << 21) | np.int64((pos[j] + (1 << 20)) & 0x1FFFFF)
            if nsq > msq:
                msq = nsq
            idx = np.int64(_splitmix64(_U64(key)) & _U64(mask))
            while table[idx] != -1 and table[idx] != key:
                idx = (idx + 1) & mask
            if table[idx] == -1:
                table[idx] = key
                size += 1
        range_size[w] = size
        max_disp_sq[w] = msq
        for j in range(d):
            endpoints[w, j] = pos[j]
    return range_size, max_disp_sq, endpoints


@njit(cache=True)
def nonreturn_count(seed, n_walks, horizon, d):
    """Number of walks (out of n_walks) that do not revisit the origin
    within the horizon."""
    count = 0
    pos = np.empty(d, dtype=np.int64)
    two_d = 2 * d
    for w in range(n_walks):
        state = _splitmix64(_U64(seed) + _U64(w) * _U64(0x9E3779B97F4A7C15))
        if state == _U64(0):
            state = _U64(0xDEADBEEF)
        for j in range(d):
            pos[j] = 0
        returned = False
        for _ in range(horizon):
            state = _xorshift(state)
            r = state * _U64(0x2545F4914F6CDD1D)
            step = np.int64(r % _U64(two_d))
            axis = step >> 1
            if step & 1:
                pos[axis] += 1
            else:
                pos[axis] -= 1
            at_origin = True
            for j in range(d):
                if pos[j] != 0:
                    at_origin = False
                    break
            if at_origin:
                returned = True
                break
        if not returned:
            count += 1
    return count


@njit(cache=True)
def enum_cells(N, d, omega_flat, beta):
    """Exhaustively enumerate all (2d)^N step sequences and aggregate per
    (range_size, max_disp_sq) cell.

    omega_flat is the disorder on the box [-N, N]^d flattened in C order
    (side 2N+1 per axis).  Per cell the kernel accumulates:
      lse[rs, msq]  = log sum over cell paths of exp(beta * energy(path)),
      cnt[rs, msq]  = number of paths in the cell,
      emax[rs, msq] = max over cell paths of the raw energy sum.
    energy(path) = sum of omega over the distinct visited sites.
    Path probabilities (2d)^{-N} are NOT included; callers add -N*log(2d).
    """
    side = 2 * N + 1
    n_cells_rs = N + 2
    n_cells_m = N * N + 1
    run_max = np.full((n_cells_rs, n_cells_m), -np.inf)
    run_sum = np.zeros((n_cells_rs, n_cells_m))
    cnt = np.zeros((n_cells_rs, n_cells_m), dtype=np.int64)
    emax = np.full((n_cells_rs, n_cells_m), -np.inf)

    visit = np.zeros(side ** d, dtype=np.int16)
    pos = np.zeros(d, dtype=np.int64)
    choice = np.zeros(N + 1, dtype=np.int64)
    msq_stack = np.zeros(N + 1, dtype=np.int64)
    # Per-depth energy / range-size stacks: restoring from the stack on
    # backtrack avoids floating-point drift from += / -= pairs.
    e_stack = np.zeros(N + 1)
    rs_stack = np.zeros(N + 1, dtype=np.int64)
    # flat index of the current position; strides in C order
    strides = np.empty(d, dtype=np.int64)
    s = 1
    for j in range(d - 1, -1, -1):
        strides[j] = s
        s *= side
    origin_flat = 0
    for j in range(d):
        origin_flat += N * strides[j]

    visit[origin_flat] = 1
    e_stack[0] = omega_flat[origin_flat]
    rs_stack[0] = 1
    two_d = 2 * d
    t = 0
    choice[0] = 0
    # Invariant: on arrival at depth t with choice[t] = c, the walk state
    # reflects moves chosen at depths 0..t-1 plus, when c > 0, move c-1 at
    # depth t (whose subtree has just been fully explored and must be undone
    # before trying move c).
    while t >= 0:
        if t == N:
            # leaf: record current (rs, msq, energy)
            m = msq_stack[N]
            rs = rs_stack[N]
            energy = e_stack[N]
            v = beta * energy
            if v <= run_max[rs, m]:
                run_sum[rs, m] += np.exp(v - run_max[rs, m])
            else:
                if run_max[rs, m] == -np.inf:
                    run_sum[rs, m] = 1.0
                else:
                    run_sum[rs, m] = run_sum[rs, m] * np.exp(run_max[rs, m] - v) + 1.0
                run_max[rs, m] = v
            cnt[rs, m] += 1
            if energy > emax[rs, m]:
                emax[rs, m] = energy
            t -= 1
            continue
        c = choice[t]
        if c > 0:
            # undo move c-1 taken at this depth
            pc = c - 1
            axis = pc >> 1
            flat = 0
            for j in range(d):
                flat += (pos[j] + N) * strides[j]
            visit[flat] -= 1
            if pc & 1:
                pos[axis] -= 1
            else:
                pos[axis] += 1
        if c == two_d:
            choice[t] = 0
            t -= 1
            continue
        choice[t] = c + 1
        axis = c >> 1
        if c & 1:
            pos[axis] += 1
        else:
            pos[axis] -= 1
        flat = 0
        nsq = np.int64(0)
        for j in range(d):
            flat += (pos[j] + N) * strides[j]
            nsq += pos[j] * pos[j]
        if visit[flat] == 0:
            e_stack[t + 1] = e_stack[t] + omega_flat[flat]
            rs_stack[t + 1] = rs_stack[t] + 1
        else:
            e_stack[t + 1] = e_stack[t]
            rs_stack[t + 1] = rs_stack[t]
        visit[flat] += 1
        msq_stack[t + 1] = msq_stack[t] if msq_stack[t] > nsq else nsq
        t += 1

    lse = np.where(cnt > 0, run_max + np.log(np.where(run_sum > 0, run_sum, 1.0)),
                   -np.inf)
    return lse, cnt, emax
