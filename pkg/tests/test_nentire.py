import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singweyl import (Spectrum, bessel_threshold, build_weyl, eigenvalues, h_beta, h_beta_prime, load_problem,
                      minimal_n_estimate, parseval_check, psi_jet, verify_mf1, verify_mf2, verify_mf3)
from singweyl.nentire import (ExtensionPair, InterlacingError, LadderError, c_conditions, classify_ladder,
                              corollary_reading, h_beta_prime_exact, l2_classification, mf3_vector,
                              route_agreement)
from singweyl.config import DEFAULT


def _ladder(a, levels=40):
    """I(eps) = int_eps^1 x^a dx and its dyadic increments."""
    eps = 2.0 ** -np.arange(1, levels + 1)
    if abs(a + 1) < 1e-12:
        I = -np.log(eps)
        return eps, I, np.diff(I)
    I = (1 - eps ** (a + 1)) / (a + 1)
    inc = (eps[:-1] ** (a + 1) - eps[1:] ** (a + 1)) / (a + 1)
    return eps, I, inc


@settings(max_examples=30, deadline=None)
@given(st.floats(-3.0, -1.3))
def test_ladder_divergent_powers(a):
    eps, I, inc = _ladder(a)
    verdict, s = classify_ladder(eps, I, increments=inc)
    assert verdict == "divergent"
    assert s == pytest.approx(-(a + 1), abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.4, 3.0))
def test_ladder_integrable_powers(a):
    # closer to -1 the remainder eps^(a+1) is still above the stability band at 40 levels
    eps, I, inc = _ladder(a)
    verdict, s = classify_ladder(eps, I, increments=inc)
    assert verdict == "integrable"


def test_ladder_log_divergence_is_marginal():
    eps, I, inc = _ladder(-1.0)
    assert classify_ladder(eps, I, increments=inc)[0] == "marginal"


def test_ladder_rejects_non_monotone():
    eps = 2.0 ** -np.arange(1, 11)
    I = np.array([1, 2, 3, 2.5, 4, 5, 6, 7, 8, 9], dtype=float)
    with pytest.raises(LadderError):
        classify_ladder(eps, I)


def test_threshold_tables():
    assert [bessel_threshold(l) for l in (0, 1, 2, 3, 0.5, -0.5)] == [1, 2, 2, 3, 2, 1]
    assert [corollary_reading(l) for l in (0, 1, 2, 3)] == [2, 3, 4, 5]


def test_psi_routes_and_finite_difference(free_weyl):
    assert route_agreement(free_weyl, -1.0 + 0.5j, 2) < 1e-7
    z, h = -1.0, 1e-4
    a = psi_jet(free_weyl, z, 1)
    pp = psi_jet(free_weyl, z + h, 0, a.grid).u[0]
    pm = psi_jet(free_weyl, z - h, 0, a.grid).u[0]
    err = np.max(np.abs((pp - pm) / (2 * h) - a.u[1])) / np.max(np.abs(a.u[1]))
    assert err < 1e-6


def test_psi_is_chi_over_w(free_weyl):
    # free case: psi(z, x) = chi/W = sin(sqrt z (pi - x)) / sin(sqrt z pi) * (-1) * ... up to the
    # normalisation chi(b) = 0, chi'(b) = 1, W = -sin(pi sqrt z)/sqrt z
    z = 2.5 + 1j
    r = np.sqrt(z)
    ps = psi_jet(free_weyl, z, 0)
    x = ps.grid.x
    chi = -np.sin(r * (math.pi - x)) / r
    W = -np.sin(r * math.pi) / r
    m = x > 1e-3
    np.testing.assert_allclose(ps.u[0][m], (chi / W)[m], rtol=1e-8)


def test_identities_free(free_weyl):
    assert verify_mf1(free_weyl, -1.0 + 0.2j, 3.0 - 1j).residual < 1e-8
    for j in range(3):
        assert verify_mf2(free_weyl, 0.5 + 1j, -2.0 + 0.3j, j).residual < 1e-8
    assert verify_mf3(free_weyl, 1, -1.0, 0).lhs == pytest.approx(0.5, abs=1e-10)
    assert verify_mf3(free_weyl, 1, -1.0, 1).lhs == pytest.approx(0.25, abs=1e-10)
    assert np.max(mf3_vector(free_weyl, -1.0 + 0.3j, 2, kmax=8)) < 1e-8


def test_identity_applicable_despite_singular_psi(bessel_cases):
    # psi ~ x^-2 is not square integrable for l = 2, but phi psi ~ x is
    _, _, w = bessel_cases[(2, False)]
    r = verify_mf3(w, 1, -1.0, 0)
    assert r.applicable and r.residual < 1e-8
    assert l2_classification(w, -1.0, 0).verdict == "divergent"


def test_product_integrability_gate():
    from singweyl.nentire import _product_integrable
    from singweyl import make_grid
    p = load_problem('{"l": 2, "b": 1}')
    g = make_grid(p, [1.0])
    assert _product_integrable(g, g.x**-0.5, DEFAULT)
    assert not _product_integrable(g, g.x**-1.5, DEFAULT)


def test_l2_classification_exponents(bessel_cases):
    _, _, w = bessel_cases[(3, False)]
    res = [l2_classification(w, -1 + 1j, j) for j in range(4)]
    assert [r.verdict for r in res] == ["divergent", "divergent", "integrable", "integrable"]
    # |psi^(j)| ~ x^(2j - l) near 0
    for r in res[:3]:
        assert r.exponent == pytest.approx(2 * r.j - 3, abs=0.05)


def test_minimal_n_report(bessel_cases):
    _, s, w = bessel_cases[(2, True)]
    rep = minimal_n_estimate(w, spectrum=s)
    assert rep.minimal_n == 2 == rep.threshold_n and rep.corollary_n == 4
    assert rep.moment_n == 2 and rep.monotone and rep.consistent
    d = rep.to_dict()
    assert d["minimal_n"] == 2 and len(d["classifications"]) == 3


def test_parseval_free(free_weyl):
    for j in range(3):
        r = parseval_check(free_weyl, -1.0, j)
        assert r.applicable and r.residual < 1e-6


def test_h_beta_free_closed_form(free_spectrum):
    # h(x) = prod (1 - x/k^2) = sin(pi sqrt x) / (pi sqrt x)
    x = np.array([0.25, 2.0, -3.0])
    r = np.sqrt(x.astype(complex))
    exact = np.real(np.sin(math.pi * r) / (math.pi * r))
    np.testing.assert_allclose(h_beta(free_spectrum, x), exact, rtol=1e-8)
    assert h_beta(free_spectrum, 0.0) == pytest.approx(1.0)


def test_h_beta_prime_routes(free_spectrum):
    k = 3
    exact = math.cos(math.pi * k) / (2 * k**2)  # d/dx sin(pi sqrt x)/(pi sqrt x) at x = k^2
    assert h_beta_prime_exact(free_spectrum, k) == pytest.approx(exact, rel=1e-8)
    assert h_beta_prime(free_spectrum, np.array([9.0]))[0] == pytest.approx(exact, rel=1e-7)


def test_interlacing(free_spectrum, neumann_spectrum):
    assert ExtensionPair(free_spectrum, neumann_spectrum).interlacing()
    bad = Spectrum.from_values([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], fit=False)
    assert not ExtensionPair(free_spectrum, bad).interlacing()
    with pytest.raises(InterlacingError):
        c_conditions(ExtensionPair(free_spectrum, bad), 1)


def test_c3_terms_and_divergence(free_problem, neumann_spectrum):
    s1 = eigenvalues(free_problem, count=50)
    pair = ExtensionPair(s1, neumann_spectrum)
    rep = c_conditions(pair, 1)
    terms = np.diff(rep.c3_partial, prepend=0.0)
    k = np.arange(1, terms.size + 1)
    np.testing.assert_allclose(terms, 2.0 * k**-2.0, rtol=1e-5)
    assert c_conditions(pair, 0).c3_verdict == "divergent"
    exact = c_conditions(pair, 1, use_exact_derivative=True)
    assert exact.c3_verdict == "convergent"
