import math
from functools import lru_cache

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nlvc import constants as C
from nlvc import equivalence as E
from nlvc import kernels as K
from nlvc import operators as O
from nlvc.quadrature import DEFAULT_CONFIG, QuadratureError

ROOT2 = math.sqrt(2.0)


def frac_spec(s=0.5, delta=math.inf):
    return K.KernelSpec(family="fractional", n=1, s=s, delta=delta)


@lru_cache(maxsize=None)
def truncated_kernel():
    ek = E.EquivalenceKernel(frac_spec(delta=1.0))
    ek.tabulate(DEFAULT_CONFIG)
    return ek


@lru_cache(maxsize=None)
def custom_kernel():
    # x-dependent modulation, so only the general mode applies
    def rho_fn(x, y):
        d = y - x
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        return d / r

    def omega_fn(x, y):
        r = np.linalg.norm(y - x, axis=-1)
        return (1.0 + 0.3 * np.sin(x[..., 0] + y[..., 0])) * r ** -1.5

    spec = K.KernelSpec("custom", n=1, delta=1.0, rho_fn=rho_fn,
                        omega_fn=omega_fn, antisymmetric=True, symmetric=True,
                        translation_invariant=False)
    return E.EquivalenceKernel(spec)


# ---------------------------------------------------------------------------
# closed form and untruncated convolution route


def test_closed_form_profile_values():
    # the amplitude gamma_bar is itself a quadrature, so only close to 1e-5
    vals = E.closed_form_two_gamma(frac_spec(), np.array([0.5, 1.0, 2.0]))
    assert_allclose(vals, [32.0, 8.0, 2.0], rtol=1e-5)
    assert E.closed_form_two_gamma(frac_spec(delta=1.0), 1.0) is None


def test_mode_selection_follows_spec():
    assert E.EquivalenceKernel(frac_spec()).mode == "translation-invariant"
    assert truncated_kernel().mode == "truncated-translation-invariant"
    assert custom_kernel().mode == "general-three-term"
    ek = E.EquivalenceKernel(frac_spec(), "closed-form-power-law")
    assert ek.mode == "closed-form-power-law"


def test_convolution_route_matches_closed_form():
    ek = E.EquivalenceKernel(frac_spec())
    for d in (0.5, 1.0):
        v = E.equivalence_kernel_eval(ek, 0.0, d)
        assert v == pytest.approx(8.0 / d ** 2, rel=1e-5)


def test_pair_value_is_symmetric():
    ek = E.EquivalenceKernel(frac_spec(), "closed-form-power-law")
    rng = np.random.default_rng(7)
    for _ in range(5):
        x, y = rng.uniform(-2.0, 2.0, size=2)
        if x == y:
            continue
        assert E.equivalence_kernel_eval(ek, x, y) == \
            E.equivalence_kernel_eval(ek, y, x)


def test_coincident_points_rejected():
    ek = E.EquivalenceKernel(frac_spec())
    with pytest.raises(ValueError):
        E.equivalence_kernel_eval(ek, 0.5, 0.5)


# ---------------------------------------------------------------------------
# truncated kernels: exact reference values
#
# For s = 1/2, delta = 1 the lens integral has elementary antiderivatives:
# 24 sqrt(2) at separation 1/2 and 8 sqrt(2) / 9 at separation 3/2.


def test_truncated_pair_values_against_elementary_integrals():
    ek = truncated_kernel()
    v, err = E.equivalence_kernel_eval(ek, 0.0, 0.5, with_error=True)
    assert v == pytest.approx(24.0 * ROOT2, rel=1e-9)
    assert err < 1e-6
    v, err = E.equivalence_kernel_eval(ek, 0.0, 1.5, with_error=True)
    assert v == pytest.approx(8.0 * ROOT2 / 9.0, rel=1e-12)


def test_truncated_profile_interpolation_quality():
    ek = truncated_kernel()
    assert ek.table["probe_rel"] < 2e-4
    for d, exact in ((0.5, 24.0 * ROOT2), (1.5, 8.0 * ROOT2 / 9.0)):
        assert float(ek.profile_eval(d)) == pytest.approx(exact, rel=1e-8)
    # off-knot radii against direct quadrature
    for d in (0.137, 0.62, 0.93, 1.21, 1.83):
        direct = E.equivalence_kernel_eval(ek, 0.0, d)
        assert float(ek.profile_eval(d)) == pytest.approx(direct, rel=2e-4)


def test_truncated_profile_seams_are_continuous():
    ek = truncated_kernel()
    for seam in (0.5, 1.5):
        lo = float(ek.profile_eval(seam * (1.0 - 1e-9)))
        hi = float(ek.profile_eval(seam * (1.0 + 1e-9)))
        assert hi == pytest.approx(lo, rel=1e-5)


def test_truncated_support_and_horizon():
    ek = truncated_kernel()
    assert E.equivalence_kernel_eval(ek, 0.0, 2.1, with_error=True) == (0.0, 0.0)
    assert float(ek.profile_eval(2.1)) == 0.0
    assert math.isinf(float(ek.profile_eval(1.0)))
    with pytest.raises(QuadratureError):
        E.equivalence_kernel_eval(ek, 0.0, 1.0)
    # strictly positive between horizon and the support edge
    vals = ek.profile_eval(np.linspace(1.05, 1.95, 10))
    assert np.all(vals > 0.0)
    assert ek.sign_summary() == "positive on the sampled profile"


def test_profile_eval_needs_tabulate_first():
    ek = E.EquivalenceKernel(frac_spec(delta=1.0))
    with pytest.raises(RuntimeError):
        ek.profile_eval(0.5)


def test_untruncated_profile_table_tracks_closed_form():
    ek = E.EquivalenceKernel(frac_spec())
    ek.tabulate(DEFAULT_CONFIG)
    for d in (0.021, 0.4, 3.7, 29.0):
        assert float(ek.profile_eval(d)) == pytest.approx(8.0 / d ** 2,
                                                          rel=1e-5)


# ---------------------------------------------------------------------------
# general three-term route
#
# Reference values are 30-digit quadratures of the three-term integral with
# the odd local parts of each principal value removed analytically.


def test_general_route_reproduces_truncated_values():
    ek = E.EquivalenceKernel(frac_spec(delta=1.0), "general-three-term")
    v = E.equivalence_kernel_eval(ek, 0.0, 0.5)
    assert v == pytest.approx(24.0 * ROOT2, rel=5e-5)
    v = E.equivalence_kernel_eval(ek, 0.0, 1.5)
    assert v == pytest.approx(8.0 * ROOT2 / 9.0, rel=1e-12)


def test_general_route_on_modulated_kernel():
    ek = custom_kernel()
    v = E.equivalence_kernel_eval(ek, 0.1, 0.6)
    assert v == pytest.approx(50.924903121669717, rel=5e-5)
    v = E.equivalence_kernel_eval(ek, 0.2, 1.5)
    assert v == pytest.approx(4.580643204037028, rel=1e-12)


def test_general_mode_guards():
    with pytest.raises(ValueError):
        E.EquivalenceKernel(frac_spec(), "general-three-term")
    with pytest.raises(ValueError):
        custom_kernel().tabulate()
    with pytest.raises(ValueError):
        E.EquivalenceKernel(custom_kernel().spec, "translation-invariant")
    with pytest.raises(ValueError):
        E.EquivalenceKernel(frac_spec(delta=1.0), "closed-form-power-law")


# ---------------------------------------------------------------------------
# composition against the nested operator


def test_composition_trig_field_matches_spectral_law():
    u = O.periodic_field(lambda x: np.cos(x) + 0.5 * np.sin(2.0 * x), 64)
    rep = E.verify_composition(u, frac_spec(), [0.3, 1.1])
    assert rep.passed
    assert rep.kernel_sign == "positive on the sampled profile"
    for x, lhs, rhs in zip(rep.points, rep.lhs, rep.rhs):
        exact = -8.0 * math.pi * (math.cos(x) + math.sin(2.0 * x))
        assert lhs == pytest.approx(exact, rel=1e-9)
        assert rhs == pytest.approx(exact, rel=1e-4)


def test_composition_constant_field_is_annihilated():
    u = O.periodic_field(lambda x: np.full_like(np.asarray(x, float), 2.5), 16)
    rep = E.verify_composition(u, frac_spec(), [0.7])
    assert rep.passed
    assert rep.lhs[0] == 0.0 and rep.rhs[0] == 0.0


def test_composition_bump_with_logarithmic_blowup():
    # beta = 2 puts the profile blow-up in the logarithmic class; the
    # reference value is a 25-digit quadrature of the nested form
    u = O.builtin_field("bump:0.5")
    spec = K.KernelSpec("power-law", n=1, beta=2.0, delta=1.0)
    rep = E.verify_composition(u, spec, [0.1])
    assert rep.passed
    golden = -8.122210944972004
    assert rep.lhs[0] == pytest.approx(golden, rel=1e-7)
    assert rep.rhs[0] == pytest.approx(golden, rel=5e-6)


def test_composition_bump_truncated_fractional():
    u = O.builtin_field("bump:0.5")
    rep = E.verify_composition(u, frac_spec(delta=1.0), [0.1])
    assert rep.passed
    assert rep.max_residual < rep.tolerance


# ---------------------------------------------------------------------------
# scaling and consistency checks


def test_power_law_scaling_recovers_exponent_and_amplitude():
    rep = E.power_law_scaling_check(1, 2.5, [0.5, 1.0, 2.0])
    assert rep.passed
    assert rep.slope == pytest.approx(-2.0, abs=1e-3)
    assert rep.gamma_bar_fit == pytest.approx(4.0, rel=1e-3)
    assert rep.gamma_bar_ref == pytest.approx(4.0, rel=1e-3)
    assert not rep.degenerate


def test_power_law_scaling_degenerate_kernel():
    # beta = 2 in one dimension makes the kernel vanish identically, so
    # there is no slope to fit; the check must recognize that instead of
    # failing on noise
    rep = E.power_law_scaling_check(1, 2.0, [0.5, 1.0, 2.0])
    assert rep.degenerate
    assert rep.passed
    assert math.isnan(rep.slope)
    assert np.all(np.abs(rep.values) <= 30.0 * np.max(rep.errors) + 1e-9)


def test_fractional_consistency_half():
    rep = E.fractional_consistency_check(1, 0.5)
    assert rep.passed
    assert rep.reference == pytest.approx(8.0, rel=1e-10)
    assert rep.rel_discrepancy < 1e-5


def test_fractional_consistency_other_orders():
    assert E.fractional_consistency_check(1, 0.25).rel_discrepancy < 1e-4
    assert E.fractional_consistency_check(2, 0.5).rel_discrepancy < 1e-6


# ---------------------------------------------------------------------------
# tempered kernels


def test_tempered_pair_weight_reference_value():
    # 30-digit quadrature of the tempered pair integral at lambda r = 1
    v = E.tempered_kernel_eval(1, 0.5, 1.0, 1.0)
    assert v == pytest.approx(4.815257841577877, rel=1e-9)


def test_tempered_reduces_to_fractional_at_zero_rate():
    v = E.tempered_kernel_eval(1, 0.5, 0.0, 1.0)
    assert v == pytest.approx(8.0, rel=1e-5)
    v = E.tempered_kernel_eval(1, 0.5, 0.0, 2.0)
    assert v == pytest.approx(2.0, rel=1e-5)


def test_tempered_decay_is_monotone_in_rate():
    vals = [E.tempered_kernel_eval(1, 0.5, lam, 1.0)
            for lam in (0.0, 0.5, 1.0, 2.0)]
    assert all(a > b > 0.0 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# planar lens cubature


def test_lens_integral_is_rotation_invariant():
    spec = K.KernelSpec("power-law", n=2, beta=2.5, delta=0.6)
    prof, q_exact = E._eta_profile(spec)
    radial, _ = C.pair_weight_integral(2, prof, 1.0, 0.6, DEFAULT_CONFIG,
                                       local_exponent=q_exact)
    for ang in (0.0, 2.3):
        y = np.array([math.cos(ang), math.sin(ang)])
        v = E.lens_pair_integral(spec, np.zeros(2), y)
        assert v == pytest.approx(radial, rel=1e-6)
