import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from voldens.kernels import (
    KERNELS, KernelSpec, default_kernel, finite_difference_second_moment, get_kernel,
    kernel_w, measured_tail_exponent, tail_ratios, validate_condition_w,
)


@pytest.fixture(scope="module")
def poly3():
    return default_kernel()


def w_by_quad(phi, x):
    """Inverse Fourier transform by adaptive quadrature: (1/pi) int_0^1 phi(s) cos(sx) ds."""
    val, _ = integrate.quad(lambda s: float(phi(s)), 0, 1, weight="cos", wvar=x,
                            epsabs=1e-14, epsrel=1e-13)
    return val / np.pi


def test_default_kernel_properties(poly3):
    assert poly3.name == "poly3"
    assert poly3.phi_w(0.0) == 1.0
    assert (poly3.tail_A, poly3.tail_alpha, poly3.second_moment) == (8.0, 3.0, 6.0)
    assert poly3.phi_w(1.5) == 0.0 and poly3.phi_w(-1.0) == 0.0


def test_w_at_zero(poly3):
    assert kernel_w(poly3, 0.0) == pytest.approx(16 / (35 * np.pi), rel=1e-14)
    assert kernel_w(poly3, 0.0) == pytest.approx(0.14551, abs=5e-6)


@pytest.mark.parametrize("x", [0.0, 0.4, 1.0, 3.7, 7.99, 8.0, 8.01, 12.5, 40.0, 300.0])
def test_w_against_adaptive_quadrature(poly3, x):
    ref = w_by_quad(lambda s: (1 - s * s) ** 3, x)
    assert kernel_w(poly3, x) == pytest.approx(ref, abs=1e-13)


@given(st.floats(-500, 500))
@settings(max_examples=80, deadline=None)
def test_w_even(x):
    k = default_kernel()
    assert kernel_w(k, x) == pytest.approx(kernel_w(k, -x), abs=1e-16)


def test_w_tail_decay(poly3):
    # alpha = 3 gives |w(x)| <= C |x|**-4 with C from integrating by parts four times
    x = np.array([50.0, 100.0, 200.0, 400.0])
    assert np.all(np.abs(kernel_w(poly3, x)) * x**4 < 48 / np.pi + 1)


def test_second_moment_by_quadrature(poly3):
    u, wts = np.polynomial.legendre.leggauss(64)
    total = 0.0
    for a in range(-400, 400):
        x = a + 0.5 * (u + 1)
        total += np.dot(x * x * kernel_w(poly3, x), 0.5 * wts)
    # truncation error of int u^2 w beyond 400 is O(1/400)
    assert total == pytest.approx(6.0, abs=0.05)


def test_finite_difference_second_moment(poly3):
    assert finite_difference_second_moment(poly3) == pytest.approx(6.0, rel=1e-6)


def test_tail_ratios_monotone(poly3):
    r = tail_ratios(poly3)
    dist = np.abs(r - poly3.tail_A)
    assert np.all(np.diff(dist) < 0)
    assert dist[-1] / poly3.tail_A <= 0.02
    assert measured_tail_exponent(poly3) == pytest.approx(3.0, rel=0.02)


def test_validator_default_passes(poly3):
    report = validate_condition_w(poly3)
    assert report.passed, str(report)
    assert abs(report["normalized"].value - 1) <= 1e-8
    assert set(report.to_dict()["checks"]) == {
        "support", "abs_integrable", "normalized", "second_abs_moment",
        "tail_expansion", "second_moment",
    }


def test_validator_flat_kernel_fails_tail():
    report = validate_condition_w(KernelSpec.from_polynomial([1.0], name="flat"))
    assert not report.passed
    assert not report["tail_expansion"].passed


def test_validator_bad_normalisation():
    report = validate_condition_w(KernelSpec.from_polynomial([0.9, 0, -0.9], name="low"))
    assert not report["normalized"].passed
    assert report["normalized"].value == pytest.approx(0.9, abs=1e-6)


def test_validator_asymmetric_kernel():
    spec = KernelSpec("skew", lambda s: np.where(np.abs(s) <= 1, (1 - s * s) ** 3 * (1 + 0.1 * s), 0.0),
                      8.0, 3.0, 6.0)
    assert not validate_condition_w(spec, r_max=200.0)["support"].passed


def test_poly2_kernel_has_infinite_second_abs_moment():
    # alpha = 2: w decays like |x|**-3, so int u^2 |w| diverges logarithmically
    k = get_kernel("poly2")
    assert (k.tail_A, k.tail_alpha, k.second_moment) == (4.0, 2.0, 4.0)
    report = validate_condition_w(k)
    assert report["normalized"].passed and report["tail_expansion"].passed
    assert not report["second_abs_moment"].passed


def test_from_polynomial_rejects_odd():
    with pytest.raises(ValueError):
        KernelSpec.from_polynomial([1, 0.5, -1.5])


def test_unknown_kernel():
    with pytest.raises(ValueError):
        get_kernel("nope")
    assert "poly3" in KERNELS
