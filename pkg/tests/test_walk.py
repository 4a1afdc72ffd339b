import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyrange.environment import DisorderField, omega_at
from polyrange.errors import BudgetExceeded
from polyrange.partition import omega_grid
from polyrange.walk import (ConfinedWalkTable, PathClass, PathSample,
                            class_membership, confined_walk_sampler,
                            enumerate_cells, enumerate_paths, simulate_walk,
                            simulate_walk_batch, steps_to_positions)

from _oracles import enum_walk_stats


def test_steps_to_positions_round_trip():
    steps = np.array([0, 1, 2, 3, 0], dtype=np.int8)  # -x +x -y +y -x
    pos = steps_to_positions(steps, 2)
    assert pos[0].tolist() == [0, 0]
    assert pos[-1].tolist() == [-1, 0]
    assert len(pos) == 6


def test_simulate_walk_statistics(rng):
    s = simulate_walk(rng, 20, 2)
    assert isinstance(s, PathSample)
    assert 2 <= s.range_size <= 21
    assert s.max_disp <= 20.0
    assert len(s.range_set()) == s.range_size


def test_batch_matches_enumeration_distribution():
    # P(|R_N| = 2) at N=10, d=2 equals the enumeration value
    stats = enum_walk_stats(6, 2, None)
    p_exact = sum(1 for rs, _, _ in stats if rs == 2) / len(stats)
    rs, md, ends = simulate_walk_batch(7, 200_000, 6, 2)
    p_mc = (rs == 2).mean()
    assert p_mc == pytest.approx(p_exact, abs=4 * math.sqrt(p_exact / 2e5))
    # endpoint variance is N per coordinate-sum (simple walk)
    assert (ends.astype(float) ** 2).sum(axis=1).mean() == \
        pytest.approx(6.0, rel=0.05)


def test_enumerate_cells_matches_python_oracle():
    N, d = 5, 2
    f = DisorderField(seed=9, alpha=1.5, p=0.7, q=0.3)
    og = omega_grid(f, N, d)
    beta = 0.8
    lse, cnt, emax = enumerate_cells(N, d, og, beta)
    oracle = {}
    for rs, msq, en in enum_walk_stats(N, d, lambda q: omega_at(f, q)):
        key = (rs, msq)
        c, terms, mx = oracle.get(key, (0, [], -math.inf))
        oracle[key] = (c + 1, terms + [beta * en], max(mx, en))
    for (rs, msq), (c, terms, mx) in oracle.items():
        assert cnt[rs, msq] == c
        m0 = max(terms)
        want = m0 + math.log(sum(math.exp(t - m0) for t in terms))
        assert lse[rs, msq] == pytest.approx(want, abs=1e-10)
        assert emax[rs, msq] == pytest.approx(mx, abs=1e-12)
    assert cnt.sum() == (2 * d) ** N


def test_enumerate_paths_budget_refusal():
    with pytest.raises(BudgetExceeded):
        enumerate_paths(30, 2, lambda *a: None, budget=1000)


def test_enumerate_paths_visits_all_leaves():
    count = enumerate_paths(4, 2, lambda *a: None)
    assert count == 4 ** 4


def test_path_class_membership():
    cls = PathClass(r=2.0, s=1.5, p=2.0)
    steps = np.array([1, 1, 1, 3], dtype=np.int8)  # +x +x +x +y
    pos = steps_to_positions(steps, 2)
    sample = PathSample(steps=steps, d=2, range_size=5,
                        max_disp=float(np.sqrt(10)), log_weight=0.0)
    assert class_membership(sample, cls)  # M in [2,4], |R| in [3,12]
    small = PathSample(steps=steps[:1], d=2, range_size=2, max_disp=1.0,
                       log_weight=0.0)
    assert not class_membership(small, cls)


def test_confined_table_matches_enumeration():
    # P(M_N <= 2) by dynamic programming vs direct enumeration
    N, d, radius = 8, 2, 2.0
    table = ConfinedWalkTable(N, d, radius)
    log_p = table.log_survival(N, table.origin_idx)
    stats = enum_walk_stats(N, d, None)
    p_exact = sum(1 for _, msq, _ in stats if msq <= 4) / len(stats)
    assert math.exp(log_p) == pytest.approx(p_exact, rel=1e-12)


def test_confined_sampler_respects_radius(rng):
    N, d, radius = 12, 2, 2.0
    from polyrange.walk import ConfinedWalkTable
    table = ConfinedWalkTable(N, d, radius)
    samples = [confined_walk_sampler(N, d, radius, rng, table=table)
               for _ in range(50)]
    for s in samples:
        assert s.max_disp <= radius + 1e-9
        # log_weight is the survival log-probability, shared across samples
        assert s.log_weight <= 0.0


@given(seed=st.integers(0, 10 ** 6))
@settings(max_examples=20, deadline=None)
def test_batch_is_deterministic_in_seed(seed):
    a = simulate_walk_batch(seed, 100, 10, 2)
    b = simulate_walk_batch(seed, 100, 10, 2)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
