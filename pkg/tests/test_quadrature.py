import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nlvc.quadrature import (DEFAULT_CONFIG, QuadratureConfig, QuadratureError,
                             graded_edges, integrate_interval, mc_integrate,
                             power_tail, pv_integrate, sphere_integrate,
                             sphere_rule)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(eps=2.0, r_max=1.0)
    with pytest.raises(ValueError):
        QuadratureConfig(richardson_levels=1)
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0.0)


def test_power_tail_closed_form():
    # exterior integral of |y|^(-(n+t)) outside B_radius
    assert_allclose(power_tail(1, 1.0, 1.0), 2.0, rtol=1e-14)
    assert_allclose(power_tail(2, 1.0, 1.0), 2.0 * math.pi, rtol=1e-14)
    assert_allclose(power_tail(1, 2.0, 2.0), 1.0 / 4.0, rtol=1e-14)


def test_graded_edges_monotone_and_clustered():
    e = graded_edges(0.0, 1.0, "left", panels=20, ratio=0.5)
    assert np.all(np.diff(e) > 0)
    assert e[1] - e[0] < 1e-5
    e2 = graded_edges(0.0, 1.0, "both", panels=20, ratio=0.5)
    assert e2[1] - e2[0] < 1e-5 and e2[-1] - e2[-2] < 1e-5


def test_interval_smooth_and_kinked():
    v, err = integrate_interval(np.cos, 0.0, 1.0)
    assert_allclose(v, math.sin(1.0), rtol=1e-13)
    v2, _ = integrate_interval(lambda x: np.sqrt(np.abs(x - 0.3)), 0.0, 1.0,
                               sing=(0.3,))
    exact = (0.3 ** 1.5 + 0.7 ** 1.5) / 1.5
    assert_allclose(v2, exact, rtol=1e-10)


def test_interval_endpoint_singularity():
    v, err = integrate_interval(lambda x: x ** -0.5, 0.0, 1.0, sing=(0.0,),
                                depth=60)
    assert_allclose(v, 2.0, rtol=1e-8)
    assert abs(v - 2.0) < 10 * err + 1e-12


def test_sphere_rules_exact_on_low_moments():
    assert_allclose(sphere_integrate(lambda t: np.ones(len(t)), 2), 2 * math.pi,
                    rtol=1e-12)
    assert_allclose(sphere_integrate(lambda t: np.ones(len(t)), 1), 2.0)
    assert_allclose(sphere_integrate(lambda t: t[:, 0] ** 2, 2), math.pi,
                    rtol=1e-12)
    assert_allclose(sphere_integrate(lambda t: np.ones(len(t)), 3),
                    4 * math.pi, rtol=1e-12)
    assert_allclose(sphere_integrate(lambda t: t[:, 2] ** 2, 3),
                    4 * math.pi / 3, rtol=1e-12)
    pts, w = sphere_rule(3)
    assert_allclose(np.linalg.norm(pts, axis=1), 1.0, rtol=1e-13)
    assert_allclose(w.sum(), 4 * math.pi, rtol=1e-12)


def test_pv_odd_integrand_vanishes():
    v, err = pv_integrate(lambda y: np.sign(y) * np.abs(y) ** -0.5, 0.0, 1.0)
    assert abs(v) < 1e-12


def test_pv_known_singular_radial_power():
    # integral over B_1 of |y|^(-1/2) in 1d equals 4
    v, err = pv_integrate(lambda y: np.abs(y) ** -0.5, 0.0, 1.0,
                          orders=(0.5,))
    assert_allclose(v, 4.0, rtol=1e-12)
    assert err < 1e-8


def test_pv_exterior_power_with_break():
    # f = |y|^(-2) outside B_1, zero inside; integral over R = 2
    def f(y):
        r = np.abs(y)
        return np.where(r >= 1.0, r ** -2.0, 0.0)

    v, err = pv_integrate(f, 0.0, math.inf, DEFAULT_CONFIG, decay=1.0,
                          breaks=(1.0,))
    assert_allclose(v, 2.0, rtol=1e-10)


def test_pv_oscillatory_tail_fit():
    # integral of (1 - cos y)/y^2 over R equals pi
    cfg = QuadratureConfig(r_max=400.0)
    v, err = pv_integrate(lambda y: (1.0 - np.cos(y)) * y ** -2.0, 0.0,
                          math.inf, cfg, orders=(1.0, 3.0), decay=1.0,
                          max_width=2.0)
    assert_allclose(v, math.pi, rtol=1e-5)
    assert abs(v - math.pi) < 10 * max(err, 1e-7)


def test_pv_vector_center_2d():
    # radial profile integral over B_1 in 2d: int r^(-1/2) = 2 pi int_0^1 r^(1/2) dr
    # shell-integrated cutoff correction scales like eps^(n - q) = eps^1.5
    v, err = pv_integrate(
        lambda y: np.linalg.norm(y, axis=1) ** -0.5, np.zeros(2), 1.0,
        orders=(1.5,))
    assert_allclose(v, 2.0 * math.pi * (2.0 / 3.0), rtol=1e-10)


def test_pv_vector_valued_integrand():
    def f(y):
        r = np.abs(y)
        return np.column_stack((r ** -0.5, np.full(len(np.atleast_1d(y)), 1.0)))

    v, err = pv_integrate(f, 0.0, 1.0, orders=(0.5, 1.0))
    assert v.shape == (2,)
    assert_allclose(v[0], 4.0, rtol=1e-10)
    assert_allclose(v[1], 2.0, rtol=1e-10)


def test_pv_non_contracting_raises():
    # |y|^(-1.2) in 1d is even with a non-integrable origin: no pv exists
    with pytest.raises(QuadratureError):
        pv_integrate(lambda y: np.abs(y) ** -1.2, 0.0, 1.0)


def test_pv_budget_enforced():
    cfg = QuadratureConfig(max_evals=1000)
    with pytest.raises(QuadratureError) as exc:
        pv_integrate(lambda y: np.abs(y) ** -0.5, 0.0, 1.0, cfg)
    assert "evaluation budget" in str(exc.value)


def test_mc_deterministic_and_accurate():
    f = lambda y: np.abs(y) ** -2.0
    v1, se1 = mc_integrate(f, ("ball-complement", 1, 1.0), DEFAULT_CONFIG)
    v2, se2 = mc_integrate(f, ("ball-complement", 1, 1.0), DEFAULT_CONFIG)
    assert v1 == v2 and se1 == se2
    assert abs(v1 - 2.0) < 4 * se1 + 1e-3
    v3, _ = mc_integrate(f, ("ball-complement", 1, 1.0),
                         QuadratureConfig(mc_seed=7))
    assert v3 != v1


def test_mc_ball_region():
    v, se = mc_integrate(lambda y: np.linalg.norm(y, axis=1) ** 2,
                         ("ball", 2, 1.0), DEFAULT_CONFIG)
    assert abs(v - math.pi / 2.0) < 5 * se


def test_mc_sphere_product_constant():
    v, se = mc_integrate(lambda a, b: np.ones(len(a)), ("sphere-product", 2),
                         DEFAULT_CONFIG, samples=1000)
    assert_allclose(v, (2 * math.pi) ** 2, rtol=1e-12)
