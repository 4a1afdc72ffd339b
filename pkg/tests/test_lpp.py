import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyrange.environment import DisorderField, ball_sites
from polyrange.errors import BudgetExceeded, ValidationError
from polyrange.lpp import (L_B, OrderedSiteSet, best_order_ent,
                           check_energy_bound, check_L_tail, check_lemma_g,
                           _cell_grid_for, ent_ordered,
                           max_class_intersection, sample_uniform_sites)
from polyrange.params import ModelParams

from _oracles import brute_L_B


# ---------------------------------------------------------------------------
# ordered-set entropy


def test_ent_ordered_trivials():
    assert ent_ordered([], [], 2) == 0.0
    assert ent_ordered([[3, 4]], [0], 2) == pytest.approx(25.0)


def test_ent_ordered_depends_on_order():
    pts = np.array([[1, 0], [2, 0]])
    fast = ent_ordered(pts, [0, 1], 2)  # 0 -> (1,0) -> (2,0): length 2
    slow = ent_ordered(pts, [1, 0], 2)  # 0 -> (2,0) -> (1,0): length 3
    assert fast == pytest.approx(4.0)
    assert slow == pytest.approx(9.0)


def test_best_order_matches_permutation_search():
    rng = np.random.default_rng(3)
    for _ in range(10):
        pts = rng.integers(-4, 5, size=(6, 2)).astype(float)
        best = best_order_ent(pts, 2)
        brute = min(ent_ordered(pts, list(perm), 2)
                    for perm in itertools.permutations(range(6)))
        assert best == pytest.approx(brute, abs=1e-9)


def test_best_order_beats_random_orders(rng):
    pts = rng.integers(-5, 6, size=(8, 2)).astype(float)
    best = best_order_ent(pts, 2)
    for _ in range(1000):
        order = rng.permutation(8)
        assert best <= ent_ordered(pts, order, 2) + 1e-9


def test_ordered_site_set_validation():
    with pytest.raises(ValidationError):
        OrderedSiteSet(points=((1, 0), (1, 0)))
    with pytest.raises(ValidationError):
        OrderedSiteSet(points=((1, 0), (0, 1)), order=(0, 0))
    s = OrderedSiteSet(points=((1, 0), (0, 1)))
    assert s.order == (0, 1)
    assert s.entropy() == pytest.approx(ent_ordered(s.points, s.order, 2))


# ---------------------------------------------------------------------------
# budget-constrained collection


def test_l_b_trivial_budgets():
    pts = np.array([[1, 0], [0, 2], [-1, -1]])
    assert L_B(pts, 0.0, 2) == 0
    crude = 1.0 * (2 * sum(math.hypot(*p) for p in pts)) ** 2
    assert L_B(pts, crude, 2) == 3


def test_l_b_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(10):
        pts = rng.integers(-6, 7, size=(14, 2))
        pts = np.unique(pts, axis=0)
        pts = pts[np.any(pts != 0, axis=1)][:10]
        B = float(rng.uniform(20, 400))
        assert L_B(pts, B, 2) == brute_L_B(pts, B, 2)


def test_l_b_cap_refusal():
    pts = np.ones((16, 2))
    pts[:, 0] = np.arange(16)
    with pytest.raises(BudgetExceeded):
        L_B(pts, 10.0, 2)


@given(b1=st.floats(0.0, 200.0), b2=st.floats(0.0, 200.0),
       seed=st.integers(0, 100))
@settings(max_examples=40, deadline=None)
def test_l_b_monotone_in_budget_and_points(b1, b2, seed):
    rng = np.random.default_rng(seed)
    pts = rng.integers(-4, 5, size=(9, 2))
    pts = np.unique(pts, axis=0)
    pts = pts[np.any(pts != 0, axis=1)][:7]
    lo, hi = sorted((b1, b2))
    assert L_B(pts, lo, 2) <= L_B(pts, hi, 2)
    if len(pts) > 1:
        assert L_B(pts[:-1], hi, 2) <= L_B(pts, hi, 2)


# ---------------------------------------------------------------------------
# walk-class surrogate relationship


def test_realized_collection_never_exceeds_budget_relaxation(rng):
    # max |sites ∩ R_N| over the walk class is bounded by the entropy-budget
    # relaxation with the class's budget
    d, r, s, p, N = 2, 2.0, 1.5, 1.5, 8
    c_d = 2.0
    B = 0.5 * d * (c_d * p * p * r * s) ** 2
    for _ in range(5):
        sites = sample_uniform_sites(d, p * r, 6, rng)
        realized = max_class_intersection(N, d, r, s, p, sites)
        assert realized <= L_B(sites, B, d)


def test_cell_grid_count_polylogarithmic():
    # k ranges over ~log_p N scales and j over ~log_p of the cell budget,
    # so the grid is at most quadratic in log N
    for N in (16, 64, 256, 1024):
        _, cells = _cell_grid_for(N, 2, 1.5, 1.5)
        assert len(cells) <= 3 * math.log(N) ** 2


# ---------------------------------------------------------------------------
# empirical bound shape checks (small budgets; the acceptance suite runs the
# full-size versions)


def test_check_l_tail_small(rng):
    rep = check_L_tail(2, 1.5, 4.0, 1.5, 6, 100, rng)
    assert rep["tail"][0] == 1.0
    assert np.all(np.diff(rep["tail"]) <= 1e-12)  # nonincreasing
    assert rep["concave"]


def test_check_l_tail_validation(rng):
    with pytest.raises(ValidationError):
        check_L_tail(2, 1.0, 4.0, 1.5, 6, 100, rng)  # p must exceed 1
    with pytest.raises(ValidationError):
        check_L_tail(2, 1.5, 1.0, 1.0, 10 ** 6, 10, rng)  # m too large


def test_check_energy_bound_small():
    tmpl = DisorderField(seed=50, alpha=1.5, p=0.7, q=0.3)
    rep = check_energy_bound(tmpl, 2, 1.5, 3.0, 1.5, 1.5,
                             np.geomspace(0.5, 8, 6), trials=60, N=8)
    assert np.all(np.diff(rep["probs"]) <= 1e-12)
    assert rep["theoretical_slope"] == pytest.approx(-6 / 7)


def test_check_energy_bound_empty_class():
    tmpl = DisorderField(seed=0, alpha=1.5, p=0.7, q=0.3)
    with pytest.raises(ValidationError):
        # M_N in [7, 10.5] is unreachable in 6 steps
        check_energy_bound(tmpl, 2, 1.5, 7.0, 1.5, 1.5, [1.0], trials=2, N=6)


def test_check_lemma_g_requires_hypothesis():
    params = ModelParams(d=2, alpha=1.5, p=0.7, q=0.3, beta_hat=1.0,
                         gamma=0.0, h_hat=1.0, zeta=0.0)
    with pytest.raises(ValidationError):
        check_lemma_g(params, [8, 12], p=1.5, eps=0.2, n_seeds=2)


def test_check_lemma_g_small_grid():
    params = ModelParams(d=2, alpha=1.5, p=0.7, q=0.3, beta_hat=1.0,
                         gamma=1.0, h_hat=1.0, zeta=-1.5)
    rep = check_lemma_g(params, [6, 10], p=1.5, eps=0.2, n_seeds=8)
    assert len(rep["totals"]) == 2
    n_cells = len(rep["details"][0]["cells"])
    assert 0.0 <= rep["totals"][0] <= n_cells  # union-bound accounting
    assert all(d["exact"] for d in rep["details"])


def test_sample_uniform_sites_distinct_and_in_ball(rng):
    sites = sample_uniform_sites(2, 3.0, 12, rng)
    as_tuples = {tuple(p) for p in sites}
    assert len(as_tuples) == 12
    assert (0, 0) not in as_tuples
    assert all(x * x + y * y <= 9.0 + 1e-9 for x, y in sites)
