"""Deterministic heavy-tailed disorder field on Z^d.

The field assigns to every lattice site x an i.i.d.-looking value with exact
Pareto tails: with probability p the uncentered draw is U**(-1/alpha) >= 1,
with probability q = 1-p it is -U**(-1/alpha), and for alpha > 1 the exact
mean (p-q)*alpha/(alpha-1) is subtracted so the field is centered.  Values
are pure functions of (seed, x) via a counter-based integer hash, so the
field is lazily evaluated, O(1) in memory, and platform independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

__all__ = [
    "DisorderField",
    "OrderStat",
    "ball_sites",
    "omega_at",
    "omega_array",
    "order_stats",
    "energy_on",
]

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
# Domain-separation constants for the two uniform output streams.
_STREAM_SIGN = np.uint64(0x6A09E667F3BCC908)
_STREAM_MAG = np.uint64(0xBB67AE8584CAA73B)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    """One splitmix64 scrambling round on uint64 data (vectorized)."""
    z = (z + _GOLDEN).astype(np.uint64)
    z = ((z ^ (z >> np.uint64(30))) * _MIX1).astype(np.uint64)
    z = ((z ^ (z >> np.uint64(27))) * _MIX2).astype(np.uint64)
    return z ^ (z >> np.uint64(31))


def _to_uniform(h: np.ndarray) -> np.ndarray:
    """Map uint64 hashes to uniforms in the open interval (0, 1)."""
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54


@dataclass(frozen=True)
class DisorderField:
    """Seeded heavy-tailed field omega on Z^d.

    ``centering`` is derived: the exact mean of the uncentered draw for
    alpha > 1, zero otherwise.
    """

    seed: int
    alpha: float
    p: float
    q: float
    centering: float = dc_field(init=False)

    def __post_init__(self):
        if not (0.0 < self.alpha):
            raise ValueError("alpha must be positive")
        if abs(self.alpha - 1.0) < 1e-12:
            raise ValueError("alpha = 1 is unsupported (divergent centering)")
        if self.p <= 0 or self.q <= 0 or abs(self.p + self.q - 1.0) > 1e-12:
            raise ValueError("need p, q > 0 with p + q = 1")
        if self.alpha > 1:
            c = (self.p - self.q) * self.alpha / (self.alpha - 1.0)
        else:
            c = 0.0
        object.__setattr__(self, "centering", c)

    # -- evaluation ---------------------------------------------------------

    def values(self, coords: np.ndarray) -> np.ndarray:
        """omega at each row of an integer coordinate array (n, d)."""
        return omega_array(self, coords)

    def __call__(self, x) -> float:
        return omega_at(self, x)


@dataclass(frozen=True)
class OrderStat:
    """The rank-th largest field value inside a ball, with its site."""

    rank: int
    value: float
    position: tuple


def _hash_coords(seed: int, coords: np.ndarray) -> np.ndarray:
    """Counter-based hash of each coordinate row, keyed by the seed."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[None, :]
    h = np.full(coords.shape[0], np.uint64(seed) & _MASK, dtype=np.uint64)
    h = _splitmix64(h)
    for j in range(coords.shape[1]):
        h = _splitmix64(h ^ coords[:, j].astype(np.uint64))
    return h


def omega_array(field: DisorderField, coords: np.ndarray) -> np.ndarray:
    """Vectorized field evaluation at an (n, d) array of lattice sites."""
    coords = np.asarray(coords, dtype=np.int64)
    squeeze = coords.ndim == 1
    if squeeze:
        coords = coords[None, :]
    h = _hash_coords(field.seed, coords)
    u_sign = _to_uniform(_splitmix64(h ^ _STREAM_SIGN))
    u_mag = _to_uniform(_splitmix64(h ^ _STREAM_MAG))
    mag = u_mag ** (-1.0 / field.alpha)
    raw = np.where(u_sign < field.p, mag, -mag)
    out = raw - field.centering
    return out[0] if squeeze else out


def omega_at(field: DisorderField, x) -> float:
    """Field value at a single lattice site."""
    return float(omega_array(field, np.asarray(x, dtype=np.int64)))


@lru_cache(maxsize=64)
def _ball_sites_cached(d: int, r_key: float) -> np.ndarray:
    r = float(r_key)
    m = int(np.floor(r))
    axes = [np.arange(-m, m + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    keep = (grid.astype(np.float64) ** 2).sum(axis=1) <= r * r + 1e-9
    sites = grid[keep]
    # Lexicographic order for reproducible downstream tie-breaking.
    order = np.lexsort(tuple(sites[:, j] for j in reversed(range(d))))
    return np.ascontiguousarray(sites[order], dtype=np.int64)


def ball_sites(d: int, r: float) -> np.ndarray:
    """All lattice points of the closed Euclidean ball of radius r (sorted
    lexicographically); returns a copy safe to mutate."""
    if d < 1 or r < 0:
        raise ValueError("need d >= 1 and r >= 0")
    return _ball_sites_cached(d, float(r)).copy()


def order_stats(field: DisorderField, d: int, r: float, k: int) -> list[OrderStat]:
    """Top-k field values in the ball of radius r, sorted descending.

    Ties are broken by lexicographic position so output is deterministic.
    """
    sites = _ball_sites_cached(d, float(r))
    n = sites.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    vals = omega_array(field, sites)
    # Sites are already lexicographically sorted; a stable sort on -value
    # therefore breaks ties lexicographically.
    idx = np.argsort(-vals, kind="stable")[:k]
    return [
        OrderStat(rank=i + 1, value=float(vals[j]), position=tuple(int(c) for c in sites[j]))
        for i, j in enumerate(idx)
    ]


def energy_on(field: DisorderField, d: int, r: float, delta) -> float:
    """Total field value collected on a subset of the radius-r ball."""
    pts = np.asarray(list(delta) if not isinstance(delta, np.ndarray) else delta,
                     dtype=np.int64)
    if pts.size == 0:
        return 0.0
    pts = pts.reshape(-1, d)
    if np.any((pts.astype(np.float64) ** 2).sum(axis=1) > r * r + 1e-9):
        raise ValueError("delta contains points outside the ball of radius r")
    return float(omega_array(field, pts).sum())
