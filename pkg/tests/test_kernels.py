import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nlvc.kernels import (KernelSpec, alpha_omega, gamma_unweighted,
                          kernel_from_json, kernel_to_json, omega, rho,
                          riesz_kernel)


def test_fractional_omega_profile_value():
    spec = KernelSpec("fractional", n=1, s=0.5)
    assert_allclose(omega(spec, 0.0, 2.0), 2.0 ** -1.5, rtol=1e-14)


def test_fractional_alpha_omega_is_odd_and_decays():
    spec = KernelSpec("fractional", n=1, s=0.5)
    v = alpha_omega(spec, 0.0, 4.0)
    assert_allclose(v, 4.0 ** -1.5, rtol=1e-14)
    assert_allclose(alpha_omega(spec, 4.0, 0.0), -v, rtol=1e-14)


def test_tempered_adds_exponential_factor():
    spec = KernelSpec("tempered", n=1, s=0.5, lam=0.5)
    assert_allclose(omega(spec, 0.0, 2.0), math.exp(-1.0) * 2.0 ** -1.5,
                    rtol=1e-14)


def test_power_law_scaling():
    beta = 1.75
    spec = KernelSpec("power-law", n=1, beta=beta)
    for c in (0.5, 2.0, 3.0):
        assert_allclose(omega(spec, 0.0, c), c ** (1.0 - beta), rtol=1e-13)


def test_horizon_truncates_support():
    spec = KernelSpec("fractional", n=1, s=0.5, delta=1.0)
    assert spec.truncated
    assert alpha_omega(spec, 0.0, 0.5) != 0.0
    assert alpha_omega(spec, 0.0, 1.5) == 0.0


def test_riesz_kernel_gamma_value():
    spec = riesz_kernel(1, 0.5)
    # gamma = |rho|^2 = r^(-(n+2s)) so gamma(0, 2) = 2^-2
    assert_allclose(gamma_unweighted(spec, 0.0, 2.0), 0.25, rtol=1e-14)


def test_riesz_rho_antisymmetric():
    spec = riesz_kernel(2, 0.25)
    x = np.array([0.1, -0.2])
    y = np.array([0.7, 0.5])
    assert_allclose(rho(spec, x, y), -rho(spec, y, x), rtol=1e-13)


def test_coincident_points_rejected():
    spec = KernelSpec("fractional", n=1, s=0.5)
    with pytest.raises(ValueError):
        omega(spec, 1.0, 1.0)


def test_validation_errors():
    with pytest.raises(ValueError):
        KernelSpec("fractional", n=1, s=1.5)
    with pytest.raises(ValueError):
        KernelSpec("power-law", n=2, beta=0.9)
    with pytest.raises(ValueError):
        KernelSpec("fractional", n=1, s=0.5, delta=-1.0)
    with pytest.raises(ValueError):
        KernelSpec("nonsense", n=1, s=0.5)


def test_batch_evaluation_shapes():
    spec = KernelSpec("fractional", n=1, s=0.5)
    ys = np.linspace(1.0, 5.0, 7)
    vals = omega(spec, np.zeros(7), ys)
    assert vals.shape == (7,)
    assert_allclose(vals, ys ** -1.5, rtol=1e-13)
    vec = alpha_omega(spec, np.zeros(7), ys)
    assert vec.shape == (7, 1)


def test_json_round_trip():
    spec = KernelSpec("tempered", n=2, s=0.3, lam=1.2, delta=0.25)
    blob = kernel_to_json(spec)
    data = json.loads(blob)
    assert data["family"] == "tempered"
    assert data["delta"] == 0.25
    again = kernel_from_json(blob)
    assert again == spec


def test_json_rejects_unknown_keys_and_custom():
    with pytest.raises(ValueError):
        kernel_from_json(json.dumps({"family": "fractional", "n": 1,
                                     "s": 0.5, "wild": 1}))
    with pytest.raises(ValueError):
        kernel_to_json(riesz_kernel(1, 0.5))


def test_infinite_horizon_serializes_as_inf_string():
    spec = KernelSpec("fractional", n=1, s=0.5)
    data = json.loads(kernel_to_json(spec))
    assert data["delta"] == "inf"
    assert kernel_from_json(kernel_to_json(spec)) == spec


@given(st.floats(0.05, 0.95), st.floats(0.1, 8.0))
@settings(max_examples=40, deadline=None)
def test_fractional_omega_scaling_property(s, r):
    spec = KernelSpec("fractional", n=1, s=s)
    assert_allclose(omega(spec, 0.0, r), r ** -(1.0 + s), rtol=1e-12)


@given(st.floats(0.05, 0.95), st.floats(-3.0, 3.0), st.floats(0.05, 4.0))
@settings(max_examples=40, deadline=None)
def test_alpha_omega_antisymmetric_property(s, x, h):
    spec = KernelSpec("fractional", n=1, s=s)
    y = x + h
    assert_allclose(alpha_omega(spec, x, y), -alpha_omega(spec, y, x),
                    rtol=1e-12)


@given(st.floats(0.05, 0.95), st.floats(0.05, 4.0))
@settings(max_examples=40, deadline=None)
def test_gamma_nonnegative_property(s, r):
    spec = riesz_kernel(1, s)
    assert gamma_unweighted(spec, 0.0, r) >= 0.0
