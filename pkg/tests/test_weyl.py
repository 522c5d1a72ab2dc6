import json
import math

import numpy as np
import pytest

from singweyl import WeylGauge, build_weyl, herglotz_gauge, integral_representation_check, load_problem, weyl_eval
from singweyl.weyl import GaugeError, PoleError, herglotz_partial_sums, residue, residue_check, stieltjes_recovery


def free_M(z):
    r = np.sqrt(np.asarray(z, dtype=complex))
    return -r * np.cos(math.pi * r) / np.sin(math.pi * r)


def test_sign_convention_is_determined(free_weyl):
    assert free_weyl.sigma == 1
    assert free_weyl.defects["+1"] < 1e-9 < free_weyl.defects["-1"]
    assert free_weyl.psi_defect(np.array([0.3 + 2j])) < 1e-9


def test_free_weyl_closed_form(free_weyl):
    z = np.array([-1.3 + 0.7j, 5.5 + 0.01j, 30.0 - 4j])
    np.testing.assert_allclose(free_weyl(z), free_M(z), rtol=1e-9)


def test_conjugation_symmetry(free_weyl):
    z = 2.2 + 1.3j
    assert free_weyl(np.conj(z)) == pytest.approx(np.conj(free_weyl(z)), rel=1e-12)
    assert abs(free_weyl(-3.0).imag) < 1e-15


def test_pole_exclusion(free_weyl):
    with pytest.raises(PoleError):
        free_weyl(4.0 + 1e-6)
    assert np.isfinite(free_weyl(4.0 + 1e-6, check=False))


@pytest.mark.parametrize("k", [1, 2, 7])
def test_residues_are_minus_gamma(free_weyl, free_spectrum, k):
    assert residue(free_weyl, k).real == pytest.approx(-free_spectrum.gammas[k - 1], rel=1e-8)
    assert residue_check(free_weyl, k) < 1e-8


def test_gauge_shift_by_f(free_weyl):
    z = -0.4 + 2j
    g = WeylGauge([0.0], [1.5, -0.25])
    assert weyl_eval(free_weyl, z, g) == pytest.approx(free_weyl(z) + 1.5 - 0.25 * z, rel=1e-12)


def test_gauged_residue_scales(free_weyl, free_spectrum):
    g = WeylGauge([0.2, 0.05], [0.0])
    assert residue_check(free_weyl, 2, g) < 1e-8


def test_gauge_dict_roundtrip():
    g = WeylGauge([0.1, 0.2], [1.0])
    h = WeylGauge.from_dict(g.to_dict())
    assert np.allclose(h.g.coef, g.g.coef) and np.allclose(h.f.coef, g.f.coef)
    assert WeylGauge().trivial and not g.trivial and g.degree == 1


def test_contour_derivatives_match_jet(free_weyl):
    d = free_weyl.derivatives_contour(-1.0, 3)
    jet = free_weyl.jet(-1.0, 3)[0] * np.array([1, 1, 2, 6])
    np.testing.assert_allclose(d, jet, rtol=1e-8)


def test_herglotz_gauge(free_weyl, free_spectrum):
    H = herglotz_gauge(free_spectrum, free_weyl)
    assert H.degree == 1
    z = np.array([0.5 + 1j, 3 + 2j, -2 + 0.1j, 40 + 0.5j])
    assert np.all(weyl_eval(free_weyl, z, H).imag > 0)
    assert integral_representation_check(free_weyl, free_spectrum, H) < 1e-6
    ps = herglotz_partial_sums(free_spectrum, H)
    assert np.all(np.diff(ps) >= 0)


def test_herglotz_trivial_when_summable():
    from singweyl import Spectrum
    k = np.arange(1, 60, dtype=float)
    s = Spectrum.from_values(k**2, 1 / k**3)
    assert herglotz_gauge(s).trivial
    with pytest.raises(GaugeError):
        herglotz_gauge(Spectrum.from_values([1.0], [1.0]))


def test_stieltjes_recovery_second_atom(free_weyl):
    r = stieltjes_recovery(free_weyl, 2)
    assert r["relative_error"] < 1e-4


def test_bessel_weyl_is_meromorphic_with_residues():
    p = load_problem(json.dumps({"l": 2, "b": 1, "potential": {"family": "polynomial", "coefficients": [0, 1]}}))
    from singweyl import eigenvalues
    s = eigenvalues(p, count=6)
    w = build_weyl(p, s)
    assert w.sigma == 1
    assert max(residue_check(w, k) for k in (1, 2, 3)) < 1e-7
