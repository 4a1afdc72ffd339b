import math

import numpy as np
import pytest
from scipy.integrate import quad

from polyrange.environment import DisorderField
from polyrange.errors import ValidationError
from polyrange.limits import (DEFAULT_LAMBDA_3, LAMBDA_3_PROVENANCE,
                              WeightedPointProcess, c_d_constant,
                              c_d_constant_fd, estimate_W, estimate_X,
                              f_kernel, gamma_d_estimate, green_function,
                              hit_prob_infty, principal_eigenvalue,
                              sample_ppp, unit_ball_radius)


def test_unit_ball_radius_values():
    # area pi r^2 = 1 in d=2; volume (4/3) pi r^3 = 1 in d=3
    assert unit_ball_radius(2) == pytest.approx(1 / math.sqrt(math.pi))
    assert unit_ball_radius(3) == pytest.approx((3 / (4 * math.pi)) ** (1 / 3))


def test_principal_eigenvalue_closed_form_d2():
    # j_{0,1}^2 / (4 r_2^2) with r_2 = 1/sqrt(pi)
    lam = principal_eigenvalue(2)
    j01 = 2.404825557695773
    assert lam == pytest.approx(j01 ** 2 * math.pi / 4, rel=1e-12)


def test_half_integer_bessel_zero_is_pi():
    # the d=3 route uses j_{1/2,1} = pi
    lam3 = principal_eigenvalue(3)
    r3 = unit_ball_radius(3)
    assert lam3 == pytest.approx((math.pi / r3) ** 2 / 6, rel=1e-12)


def test_c2_reference_value():
    assert c_d_constant(2, 1.0) == pytest.approx(4.262442320493871, rel=1e-12)
    # scaling in h_hat is h^{2/(d+2)}
    assert c_d_constant(2, 16.0) == pytest.approx(
        4.262442320493871 * 16 ** 0.5, rel=1e-12)


def test_fd_route_agrees_with_bessel_route():
    for d in (2, 3):
        a = c_d_constant(d, 1.0)
        b = c_d_constant_fd(d, 1.0)
        assert abs(a - b) / a < 0.01


def test_green_function_reference_values():
    g0 = green_function(3, (0, 0, 0))
    assert g0 == pytest.approx(1.5163860591284044, rel=1e-9)
    # symmetry under coordinate permutation and sign flips
    assert green_function(3, (1, -2, 0)) == \
        pytest.approx(green_function(3, (0, 2, 1)), rel=1e-12)


def test_hit_probability_routes_agree():
    p_green = hit_prob_infty(3, (1, 0, 0))
    assert p_green == pytest.approx(0.3405, abs=2e-3)
    p_mc = hit_prob_infty(3, (1, 0, 0), method="mc", horizon=4000,
                          n_samples=4000, seed=1)
    assert p_mc == pytest.approx(p_green, abs=0.03)


def test_escape_constant_routes_and_recorded_default():
    rep = gamma_d_estimate(3, horizon=20_000, n_samples=20_000, seed=4)
    lam_green = 1.0 / green_function(3, (0, 0, 0))
    err = 3 * rep["nonreturn_se"] + rep["nonreturn_bias_bound"]
    assert abs(rep["nonreturn"] - lam_green) <= err + 0.005
    assert abs(rep["range_density"] - lam_green) <= 0.01
    # the embedded default matches its recorded provenance cross-check
    assert abs(DEFAULT_LAMBDA_3 - lam_green) < 0.005
    assert LAMBDA_3_PROVENANCE["d"] == 3


def test_f_kernel_closed_forms():
    # d=3: radially symmetric, matches an independent 1D quadrature of the
    # Brownian occupation identity 2*lam*int_0^1 (3/(2 pi t))^{3/2}
    # exp(-3 r^2 /(2 t)) dt at a few radii
    lam = 1.0 / green_function(3, (0, 0, 0))
    for r in (0.5, 1.0, 2.0):
        direct = 2 * lam * quad(
            lambda t: (3 / (2 * math.pi * t)) ** 1.5 *
            math.exp(-3 * r * r / (2 * t)), 0, 1, limit=200)[0]
        got = f_kernel(3, (r, 0, 0), lambda_d=lam)
        assert got == pytest.approx(direct, rel=1e-6)
    with pytest.raises(ValidationError):
        f_kernel(2, (0.0, 0.0))


def test_sample_ppp_intensity(rng):
    L, w_min, alpha = 4.0, 0.5, 1.5
    counts = [len(sample_ppp(L, w_min, alpha, 0.7, 0.3, rng).atoms)
              for _ in range(200)]
    want = (2 * L) ** 2 * w_min ** -alpha
    assert np.mean(counts) == pytest.approx(want, rel=0.05)
    pp = sample_ppp(L, w_min, alpha, 0.7, 0.3, rng)
    for (x, w) in pp.atoms:
        assert abs(w) >= w_min
        assert all(abs(c) <= L for c in x)


def test_estimate_w_compensation_direction(rng):
    pp = sample_ppp(4.0, 0.4, 1.5, 0.7, 0.3, rng)
    rep = estimate_W(pp, 2)
    # compensated value = atom sum minus a positive drift for p > q
    atom_sum = sum(w * f_kernel(2, x) for x, w in pp.atoms if x != (0.0, 0.0))
    assert rep["value"] < atom_sum + 1e-12
    assert "cutoff_shift" in rep


def test_estimate_w_rejects_alpha_one():
    pp = WeightedPointProcess(atoms=(((1.0, 1.0), 2.0),), box=2.0,
                              w_min=1.0, alpha=1.0, p=0.5, q=0.5)
    with pytest.raises(ValidationError):
        estimate_W(pp, 2)


def test_estimate_x_diagnostics():
    f = DisorderField(seed=6, alpha=1.5, p=0.7, q=0.3)
    rep = estimate_X(f, 3, cutoff_radius=8.0)
    assert math.isfinite(rep["value"])
    assert "tail_change" in rep
    with pytest.raises(ValidationError):
        estimate_X(f, 2, cutoff_radius=8.0)
