import math

import numpy as np
import pytest
from scipy import special
from scipy.integrate import quad as scipy_quad, simpson

from nlvc import kernels as K
from nlvc import operators as O
from nlvc.constants import dns_constant, frac_laplacian_constant, grad_scale, upsilon
from nlvc.quadrature import QuadratureError


def sine_transform(k, s):
    # int_0^inf sin(kr) r^(-1-s) dr
    return k ** s * math.gamma(1.0 - s) * math.sin(math.pi * s / 2.0) / s


def frac_spec(s, delta=math.inf):
    return K.KernelSpec(family="fractional", n=1, s=s, delta=delta)


# ---------------------------------------------------------------------------
# fields


def test_periodic_samples_must_match_eval():
    grid = O.PeriodicGrid(16, np.ones(16))
    with pytest.raises(ValueError):
        O.ScalarField(lambda x: np.zeros_like(np.asarray(x, float)),
                      periodic_grid=grid)


def test_builtin_trig_field():
    u = O.builtin_field("trig:2")
    x = np.array([0.0, 0.3, 1.7])
    assert np.allclose(u.eval(x), np.cos(2 * x), atol=1e-15)
    assert u.periodic_grid.resolution == 64


def test_builtin_bump_field():
    u = O.builtin_field("bump:0.5")
    assert u.support_radius == 0.5
    assert u.eval(np.array([0.0]))[0] == pytest.approx(1.0)
    assert u.eval(np.array([0.5, -0.7, 3.0])) == pytest.approx([0.0, 0.0, 0.0])
    # C-infinity decay toward the support edge, no overflow warnings
    vals = u.eval(np.linspace(-0.499999, 0.499999, 41))
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0.0)


def test_builtin_gauss_field():
    u = O.builtin_field("gauss-like")
    assert u.decay_exponent == math.inf
    assert u.eval(np.array([1.0]))[0] == pytest.approx(math.exp(-0.5))
    with pytest.raises(ValueError):
        O.builtin_field("nope")


def test_trig_interpolant_is_exact_off_grid():
    rng = np.random.default_rng(7)
    xs = 2 * np.pi * np.arange(32) / 32
    coef = rng.standard_normal(5)
    f = lambda x: sum(c * np.cos((j + 1) * x) for j, c in enumerate(coef))
    ev = O.trig_interpolant(f(xs))
    xq = np.array([0.123, 2.71, 5.5])
    assert np.allclose(ev(xq), f(xq), atol=1e-12)


def test_vector_field_shapes():
    u = O.builtin_field("bump:0.5")
    v = O.VectorField([u])
    assert v.n == 1
    assert v.eval(np.array([0.0, 0.2])).shape == (2,)
    with pytest.raises(ValueError):
        O.VectorField([])


# ---------------------------------------------------------------------------
# unweighted operators


def test_unweighted_gradient_two_point_value():
    lin = O.ScalarField(lambda x: np.asarray(x, float))
    spec = K.riesz_kernel(1, 0.5)
    val = O.unweighted_gradient(lin, spec, 0.0, 1.0)
    assert val == pytest.approx([1.0], rel=1e-14)
    # both factors flip sign under swap, so the value is swap symmetric
    assert O.unweighted_gradient(lin, spec, 1.0, 0.0) == pytest.approx(val)
    const = O.ScalarField(lambda x: np.full(np.shape(x), 3.0))
    assert O.unweighted_gradient(const, spec, 0.0, 1.0) == pytest.approx([0.0])


def test_unweighted_divergence_antisymmetric_field_vanishes():
    spec = K.riesz_kernel(1, 0.5, delta=1.0)

    def fn(x, y):
        d = np.asarray(y, float) - np.asarray(x, float)
        return np.sign(d) * np.sqrt(np.abs(d))

    v = O.TwoPointVectorField(lambda x, y: fn(x, y))
    assert O.unweighted_divergence(v, spec, 0.4, orders=(1.0,)) == 0.0


def test_unweighted_divergence_constant_two_point():
    # built-in alpha is odd, so a constant two-point vector integrates to zero
    spec = frac_spec(0.5, delta=0.8)
    v = O.TwoPointVectorField(
        lambda x, y: np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape,
                             0.7))
    assert abs(O.unweighted_divergence(v, spec, 0.1, orders=(1.0,))) < 1e-10


def test_unweighted_divergence_of_gradient_is_laplacian():
    u = O.builtin_field("trig:1")
    spec = K.riesz_kernel(1, 0.5, delta=2.0)
    v = O.two_point_gradient(u, spec)
    a = O.unweighted_divergence(v, spec, 0.4, orders=(1.0, 3.0))
    b = O.unweighted_laplacian(u, spec, 0.4)
    assert a == pytest.approx(b, rel=1e-10)


def test_unweighted_laplacian_riesz_golden():
    # kernel r^{-(n/2+s)} composed with itself gives the fractional symbol
    # scaled by -2/C_{1,1/2}; at x=0, k=1 the value is -2 pi
    u = O.builtin_field("trig:1")
    spec = K.riesz_kernel(1, 0.5)
    val, err = O.unweighted_laplacian(u, spec, 0.0, with_error=True)
    assert val == pytest.approx(-2.0 * math.pi, rel=1e-8)
    assert abs(val + 2.0 * math.pi) <= 10.0 * err + 1e-9
    assert val == pytest.approx(-2.0 / frac_laplacian_constant(1, 0.5),
                                rel=1e-8)


def test_unweighted_laplacian_quadratic_truncated_closed_form():
    # for gamma = r^{-2} and u = y^2 the even part integrates to 4 delta
    quadf = O.ScalarField(lambda x: np.asarray(x, float) ** 2)
    spec = K.riesz_kernel(1, 0.5, delta=0.5)
    val = O.unweighted_laplacian(quadf, spec, 0.3)
    assert val == pytest.approx(2.0, rel=1e-10)


def test_unweighted_laplacian_2d_matches_bessel_reduction():
    u2 = O.ScalarField(lambda p: np.cos(np.asarray(p, float)[..., 0]))
    spec = K.riesz_kernel(2, 0.5, delta=1.0)
    val = O.unweighted_laplacian(u2, spec, np.zeros(2))
    ref, _ = scipy_quad(lambda r: (special.j0(r) - 1.0) / r ** 2, 0.0, 1.0)
    assert val == pytest.approx(4.0 * math.pi * ref, rel=1e-7)


def test_unweighted_laplacian_3d_matches_radial_reduction():
    u3 = O.ScalarField(lambda p: np.cos(np.asarray(p, float)[..., 0]))
    spec = K.riesz_kernel(3, 0.5, delta=1.0)
    val = O.unweighted_laplacian(u3, spec, np.zeros(3))
    ref, _ = scipy_quad(lambda r: (np.sinc(r / math.pi) - 1.0) / r ** 2,
                        0.0, 1.0)
    assert val == pytest.approx(8.0 * math.pi * ref, rel=1e-7)


# ---------------------------------------------------------------------------
# weighted operators


def test_weighted_gradient_matches_frac_gradient():
    # Cartesian fractional operators live on their own code path; the
    # weighted form with the fractional family must reproduce them
    u = O.builtin_field("trig:1")
    for x in (0.3, 2.0):
        a = O.weighted_gradient(u, frac_spec(0.4), x)[0]
        b = O.frac_gradient(u, 0.4, x)[0]
        assert a == pytest.approx(b, rel=1e-10)


def test_weighted_gradient_even_function_odd_kernel():
    u = O.builtin_field("trig:1")
    assert abs(O.weighted_gradient(u, frac_spec(0.5), 0.0)[0]) < 1e-12


def test_weighted_divergence_primal_vs_equivalent():
    bump = O.builtin_field("bump:0.5")
    v = O.VectorField([bump])
    cases = [
        K.KernelSpec(family="fractional", n=1, s=0.5, delta=1.0),
        K.KernelSpec(family="power-law", n=1, beta=2.2, delta=0.25),
        K.KernelSpec(family="tempered", n=1, s=0.3, lam=2.0, delta=1.0),
    ]
    for spec in cases:
        eq, ee = O.weighted_divergence(v, spec, 0.15, with_error=True)
        pr, pe = O.weighted_divergence_primal(v, spec, 0.15, with_error=True)
        assert pr == pytest.approx(eq, abs=1e-9 + 1e-9 * abs(eq))
        assert abs(pr - eq) <= 10.0 * (ee + pe) + 1e-12


def test_weighted_laplacian_periodic_composition_constant():
    u = O.builtin_field("trig:1")
    for s in (0.25, 0.5, 0.75):
        got = O.weighted_laplacian(u, frac_spec(s), 0.7)
        want = dns_constant(1, s) / grad_scale(s) ** 2 * math.cos(0.7)
        assert got == pytest.approx(want, rel=1e-9)


def test_weighted_laplacian_grid_and_nested_routes_agree():
    spec = frac_spec(0.5, delta=1.0)
    with_grid = O.builtin_field("trig:1")
    bare = O.ScalarField(lambda x: np.cos(np.asarray(x, float)))
    a = O.weighted_laplacian(with_grid, spec, 0.7)
    b = O.weighted_laplacian(bare, spec, 0.7)
    assert a == pytest.approx(b, rel=1e-8)


def test_weighted_adjointness_discrete():
    # <D_omega v, u> + <v, G_omega u> = 0; grid nodes are aligned with the
    # horizon-crossing kinks of the integrands so Simpson stays clean
    u = O.builtin_field("bump:0.5")
    vshift = O.ScalarField(lambda y: u.eval(np.asarray(y, float) - 0.2),
                           support_radius=0.7)
    v = O.VectorField([vshift])
    spec = frac_spec(0.5, delta=0.5)
    xs = np.linspace(-0.85, 0.85, 171)
    dv = np.array([O.weighted_divergence(v, spec, float(x)) for x in xs])
    gu = np.array([O.weighted_gradient(u, spec, float(x))[0] for x in xs])
    t1 = simpson(dv * u.eval(xs), x=xs)
    t2 = simpson(vshift.eval(xs) * gu, x=xs)
    assert abs(t1 + t2) < 1e-6 * (abs(t1) + abs(t2))


def test_weighted_operators_annihilate_constants():
    one = O.periodic_field(lambda x: np.ones_like(np.asarray(x, float)))
    spec = frac_spec(0.5, delta=1.0)
    assert abs(O.weighted_gradient(one, spec, 0.3)[0]) < 1e-12
    assert abs(O.weighted_divergence(O.VectorField([one]), spec, 0.3)) < 1e-12
    assert abs(O.weighted_laplacian(one, spec, 0.3)) < 1e-10
    assert abs(O.unweighted_laplacian(one, K.riesz_kernel(1, 0.5, delta=1.0),
                                      0.3)) < 1e-12
    assert abs(O.frac_gradient(one, 0.5, 0.3)[0]) < 1e-12
    assert abs(O.fractional_laplacian(one, 0.5, 0.3)) < 1e-10


# ---------------------------------------------------------------------------
# Cartesian fractional operators


def test_frac_gradient_trig_sine_transform():
    u = O.builtin_field("trig:1")
    for s in (0.25, 0.5, 0.75):
        for x in (0.3, 1.2):
            got = O.frac_gradient(u, s, x)[0]
            want = -2.0 * sine_transform(1.0, s) * math.sin(x)
            assert got == pytest.approx(want, rel=1e-9)


def test_frac_gradient_decaying_field_vs_direct_quadrature():
    u = O.builtin_field("gauss-like")
    s, x = 0.4, 0.6
    got = O.frac_gradient(u, s, x)[0]

    def f(h):
        return (math.exp(-0.5 * (x + h) ** 2)
                - math.exp(-0.5 * (x - h) ** 2)) * h ** -(1.0 + s)

    ref, _ = scipy_quad(f, 0.0, 60.0, points=[1e-6, 1.0, 5.0], limit=400)
    assert got == pytest.approx(ref, rel=1e-8)


def test_composition_chain_matches_symbol():
    u = O.builtin_field("trig:1", resolution=32)
    for s in (0.25, 0.5, 0.75):
        w = O.frac_gradient_field(u, s)
        got = O.frac_divergence(w, s, 0.7)
        want = dns_constant(1, s) / grad_scale(s) ** 2 * math.cos(0.7)
        assert got == pytest.approx(want, rel=1e-6)


def test_directional_operators_are_scaled_cartesian():
    u = O.builtin_field("trig:1")
    s, x = 0.5, 0.3
    cart = O.frac_gradient(u, s, x)
    direc = O.directional_gradient(u, s, x)
    assert direc == pytest.approx(grad_scale(s) * cart, rel=1e-14)
    # Fourier oracle for the directional form
    want = -2.0 * grad_scale(s) * sine_transform(1.0, s) * math.sin(x)
    assert direc[0] == pytest.approx(want, rel=1e-9)


def test_truncated_gradient_gap_respects_pointwise_bound():
    u = O.builtin_field("gauss-like")
    s, x = 0.5, 0.6
    full = O.frac_gradient(u, s, x)[0]
    ux = abs(u.eval(np.array([x]))[0])
    l2 = math.sqrt(scipy_quad(lambda t: math.exp(-t * t), -20, 20)[0])
    prev_gap = math.inf
    for delta in (2.0, 4.0, 8.0, 16.0):
        trunc = O.frac_gradient_truncated(u, s, delta, x)[0]
        gap = abs(trunc - full)
        bound = ux * upsilon(1, s) / delta ** s \
            + l2 * math.sqrt(upsilon(1, 1 + 2 * s) / delta ** (1 + 2 * s))
        assert gap <= bound
        assert gap <= prev_gap + 1e-12
        prev_gap = gap


def test_tempered_operators_damp_and_reduce():
    u = O.builtin_field("gauss-like")
    for x in (0.4, 1.1):
        plain = O.frac_gradient(u, 0.5, x)[0]
        damped = O.tempered_gradient(u, 0.5, 1.0, x)[0]
        assert abs(damped) <= abs(plain) + 1e-12
        zero_lam = O.tempered_gradient(u, 0.5, 0.0, x)[0]
        assert zero_lam == pytest.approx(plain, rel=1e-13)


def test_fractional_parameter_validation():
    u = O.builtin_field("trig:1")
    with pytest.raises(ValueError):
        O.frac_gradient_truncated(u, 0.5, math.inf, 0.0)
    with pytest.raises(ValueError):
        O.tempered_gradient(u, 0.5, -1.0, 0.0)
    bare = O.ScalarField(lambda x: np.cos(np.asarray(x, float)))
    with pytest.raises(QuadratureError):
        O.frac_gradient(bare, 0.5, 0.3)


# ---------------------------------------------------------------------------
# fractional Laplacian and traces


def test_fractional_laplacian_symbol_on_cos():
    u = O.builtin_field("trig:1")
    for s in (0.25, 0.5, 0.75):
        got = O.fractional_laplacian(u, s, 0.5)
        assert got == pytest.approx(math.cos(0.5), rel=1e-7)


def test_fractional_laplacian_vs_spectral_random_trig():
    rng = np.random.default_rng(12342026)
    coef = rng.standard_normal((5, 2))

    def f(x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        for j in range(5):
            out = out + coef[j, 0] * np.cos((j + 1) * x) \
                + coef[j, 1] * np.sin((j + 1) * x)
        return out

    u = O.periodic_field(f, resolution=64)
    s = 0.6
    grid = O.spectral_fractional_laplacian(u, s)
    node = 7
    x = 2 * math.pi * node / 64
    got = O.fractional_laplacian(u, s, x)
    assert got == pytest.approx(grid[node], rel=1e-6)


def test_spectral_laplacian_2d_symbol():
    m = 32
    ax = 2 * np.pi * np.arange(m) / m
    samples = np.cos(ax)[:, None] * np.ones(m)[None, :]
    fn = lambda p: np.cos(np.asarray(p, float)[..., 0])
    u2 = O.ScalarField(fn, periodic_grid=O.PeriodicGrid(m, samples))
    out = O.spectral_fractional_laplacian(u2, 0.5)
    assert np.max(np.abs(out - samples)) < 1e-12


def test_spectral_route_requires_grid():
    bare = O.ScalarField(lambda x: np.cos(np.asarray(x, float)))
    with pytest.raises(ValueError):
        O.spectral_fractional_laplacian(bare, 0.5)


def test_fractional_neumann_sign_and_domain_check():
    bump = O.builtin_field("bump:0.5")
    val = O.fractional_neumann(bump, 0.4, 1.5, (-1.0, 1.0))
    assert val < 0.0
    zero = O.ScalarField(lambda x: np.zeros(np.shape(x)))
    assert O.fractional_neumann(zero, 0.4, 1.5, (-1.0, 1.0)) == 0.0
    with pytest.raises(ValueError):
        O.fractional_neumann(bump, 0.4, 0.2, (-1.0, 1.0))


def test_flux_is_negated_laplacian():
    bump = O.builtin_field("bump:0.5")
    spec = K.riesz_kernel(1, 0.4, delta=1.0)
    a = O.nonlocal_flux(bump, spec, 0.2)
    b = O.unweighted_laplacian(bump, spec, 0.2)
    assert a == pytest.approx(-b, rel=1e-12)


def test_flux_equals_twice_neumann_for_interior_support():
    # u supported inside Omega and u(x) = 0 outside collapses the exterior
    # remainder, leaving N[G u](x) = 2 N_s u(x)
    bump = O.builtin_field("bump:0.5")
    s, x = 0.4, 1.5
    flux = O.nonlocal_flux(bump, K.riesz_kernel(1, s), x)
    neu = O.fractional_neumann(bump, s, x, (-1.0, 1.0))
    assert flux == pytest.approx(2.0 * neu, rel=1e-6)
