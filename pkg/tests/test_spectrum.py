import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import spherical_jn

from singweyl import Spectrum, eigenvalues, fit_tail, load_problem, moment_test, norming_constants, trace_identity
from singweyl.spectrum import (eigen_count, green_trace, model_tail_sum, smallest_summable_moment,
                               wprime_crosscheck, characteristic)


def P(**kw):
    return load_problem(json.dumps(kw))


def test_empty_range_gives_empty_spectrum():
    s = eigenvalues(P(l=0, b=math.pi), lmax=0.5)
    assert s.N == 0 and s.eigenvalues.size == 0


def test_lmax_cut(free_spectrum):
    s = eigenvalues(P(l=0, b=math.pi), lmax=30.0)
    np.testing.assert_allclose(s.eigenvalues, np.arange(1, 6) ** 2, rtol=1e-10)


def test_free_gamma_and_multipliers(free_spectrum):
    k = np.arange(1, 11)
    np.testing.assert_allclose(free_spectrum.gammas[:10], 2 * k**2 / math.pi, rtol=1e-9)
    # chi = c phi with chi(b) = 0, chi'(b) = 1 and phi'(k^2, pi) = cos(k pi)
    np.testing.assert_allclose(free_spectrum.c[:10], (-1.0) ** k, rtol=1e-9)
    assert free_spectrum.gammas[0] == pytest.approx(0.63662, abs=1e-5)


@pytest.mark.parametrize("k", [1, 5])
def test_wprime_crosscheck(free_problem, free_spectrum, k):
    assert wprime_crosscheck(free_problem, free_spectrum, k) <= 1e-6
    # W = -sin(pi sqrt z)/sqrt z gives W'(1) = pi/2, and c_1/gamma_1 = -1/(2/pi) = -W'(1)
    if k == 1:
        assert free_spectrum.wprime[0] == pytest.approx(math.pi / 2, rel=1e-9)
        assert free_spectrum.c[0] / free_spectrum.gammas[0] == pytest.approx(-math.pi / 2, rel=1e-9)


def test_characteristic_closed_form():
    z = np.array([2.0 + 1j, -4.0])
    w = characteristic(P(l=0, b=math.pi), z, 0)[:, 0]
    r = np.sqrt(z.astype(complex))
    np.testing.assert_allclose(w, -np.sin(r * math.pi) / r, rtol=1e-9)


def test_oscillation_count():
    p = P(l=0, b=math.pi)
    np.testing.assert_array_equal(eigen_count(p, np.array([0.5, 1.5, 4.5, 99.0, 101.0])), [0, 1, 2, 9, 10])


def test_neumann_spectrum(neumann_spectrum):
    k = np.arange(1, 21)
    np.testing.assert_allclose(neumann_spectrum.eigenvalues[:20], (k - 0.5) ** 2, rtol=1e-9)


def test_bessel_l2_against_spherical_zeros():
    s = eigenvalues(P(l=2, b=1), count=6)
    zeros = [brentq(lambda x: spherical_jn(2, x), (k + 0.5) * np.pi + 1e-9, (k + 1.5) * np.pi - 1e-9)
             for k in range(1, 7)]
    np.testing.assert_allclose(s.eigenvalues, np.array(zeros) ** 2, rtol=1e-9)


def test_negative_ground_state():
    p = P(l=0, b=1, potential={"family": "polynomial", "coefficients": [-30.0]})
    s = eigenvalues(p, count=3)
    np.testing.assert_allclose(s.eigenvalues, (np.pi * np.arange(1, 4)) ** 2 - 30, rtol=1e-9)
    assert s.eigenvalues[0] < 0


def test_gamma_rescales_under_gauge():
    lam = np.arange(1, 9, dtype=float) ** 2
    gam = 2 * lam / math.pi
    g = 0.1 * lam
    a = Spectrum.from_values(lam, gam)
    b = Spectrum.from_values(lam, gam * np.exp(-2 * g))
    np.testing.assert_allclose(b.gammas / a.gammas, np.exp(-2 * g))


def test_tail_fit_exact_data():
    k = np.arange(1, 101, dtype=float)
    fit = fit_tail(Spectrum.from_values(4 * (k + 0.5) ** 2, 3 * (k + 0.5) ** 4))
    assert fit.A == pytest.approx(4) and fit.delta == pytest.approx(0.5)
    assert fit.p == pytest.approx(2) and fit.r == pytest.approx(4) and fit.B == pytest.approx(3)


def test_model_tail_sum_matches_zeta():
    k = np.arange(1, 51, dtype=float)
    fit = fit_tail(Spectrum.from_values(k**2, np.ones(50)))
    val = model_tail_sum(fit, lambda L, G: 1 / L, 51)
    exact = math.pi**2 / 6 - np.sum(1 / k**2)
    assert val == pytest.approx(exact, rel=1e-9)


def test_trace_identity_real_for_real_z(free_problem, free_spectrum_200):
    r = trace_identity(free_problem, free_spectrum_200, -2.0)
    assert abs(r.integral.imag) < 1e-14 and abs(r.series.imag) < 1e-14
    assert r.abs_error < 1e-6
    assert green_trace(free_problem, -2.0) == pytest.approx(r.integral)


@pytest.mark.slow
def test_trace_identity_bessel_l2():
    p = P(l=2, b=1)
    s = eigenvalues(p, count=200, norming=False)
    zeros = np.array([brentq(lambda x: spherical_jn(2, x), (k + 0.5) * np.pi + 1e-9, (k + 1.5) * np.pi - 1e-9)
                      for k in range(1, 20001)])
    brute = np.sum(1 / (zeros**2 + 1))
    r = trace_identity(p, s, -1.0)
    assert r.residual <= 1e-4
    assert abs(r.integral - brute) < 1e-4


def test_moment_tests_free(free_spectrum):
    assert moment_test(free_spectrum, 0).verdict == "divergent"
    m1 = moment_test(free_spectrum, 1)
    assert m1.verdict == "summable" and m1.exponent == pytest.approx(-2, abs=1e-3)
    assert smallest_summable_moment(free_spectrum) == 1


def test_moment_inconclusive_without_fit():
    s = Spectrum.from_values([1.0, 4.0, 9.0], [1.0, 1.0, 1.0], fit=False)
    assert moment_test(s, 1).verdict == "inconclusive"


def test_norming_constants_recomputed(free_problem):
    s = eigenvalues(free_problem, count=4, norming=False)
    assert s.gammas is None
    s = norming_constants(free_problem, s)
    np.testing.assert_allclose(s.gammas, 2 * np.arange(1, 5) ** 2 / math.pi, rtol=1e-9)
