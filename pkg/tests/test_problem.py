import json
import math

import pytest
import sympy as sp

from singweyl import (BUILTIN_PROBLEMS, ProblemDomainError, ProblemParseError, Tolerances, builtin_problem,
                      load_problem, load_tolerances, validate_potential)
from singweyl.config import DEFAULT
from singweyl.problem import parse_real


def test_pi_expressions():
    assert parse_real("pi/2") == pytest.approx(math.pi / 2)
    assert parse_real("2*pi - 1") == pytest.approx(2 * math.pi - 1)
    assert parse_real(3) == 3.0
    with pytest.raises(ProblemParseError):
        parse_real("__import__('os')")


def test_load_minimal_problem():
    p = load_problem('{"l": 2, "b": 1}')
    assert p.l == 2 and p.b == 1 and p.beta == 0 and p.potential.is_zero
    assert not p.friedrichs and not p.log_branch


@pytest.mark.parametrize("text, exc", [
    ("{not json", ProblemParseError),
    ('{"b": 1}', ProblemParseError),
    ('{"l": 0, "b": 1, "colour": "red"}', ProblemParseError),
    ('{"l": -1, "b": 1}', ProblemDomainError),
    ('{"l": 0, "b": 0}', ProblemDomainError),
    ('{"l": 0, "b": 1, "potential": {"family": "cubic"}}', ProblemDomainError),
    ('{"l": 0, "b": 1, "potential": {"family": "tabulated", "x": [-0.1, 0.5], "q": [0, 1]}}', ProblemDomainError),
    ('{"l": 0, "b": 1, "potential": {"family": "tabulated", "x": [0.5, 0.2], "q": [0, 1]}}', ProblemDomainError),
    ('{"l": 0, "b": 1, "potential": {"family": "polynomial", "coefficients": [1], "min_power": 0.5}}',
     ProblemParseError),
])
def test_rejects_bad_problems(text, exc):
    with pytest.raises(exc):
        load_problem(text)


def test_beta_and_flags():
    p = load_problem(json.dumps({"l": -0.5, "b": "pi", "beta": "pi/2"}))
    assert p.log_branch and p.friedrichs
    assert p.beta == pytest.approx(math.pi / 2)
    assert p.with_beta(0.0).beta == 0.0


def test_digest_is_stable_and_distinguishing():
    a = load_problem('{"l": 1, "b": 1}')
    b = load_problem('{"l": 1, "b": 1.0, "beta": 0}')
    c = load_problem('{"l": 1, "b": 1, "beta": 0.1}')
    assert a.digest() == b.digest() != c.digest()


def test_builtins_all_validate():
    for name in BUILTIN_PROBLEMS:
        assert validate_potential(builtin_problem(name)).passed, name
    with pytest.raises(ProblemDomainError):
        builtin_problem("nope")


def test_weighted_norm_against_symbolic_antiderivative():
    # q = 3x - 1/x on (0, 1]; weighted norm int x |q| dx = int |3x^2 - 1| dx
    p = load_problem(json.dumps({"l": 1, "b": 1, "potential": {"family": "polynomial",
                                                               "coefficients": [-1, 0, 3], "min_power": -1}}))
    x = sp.symbols("x", positive=True)
    r = 1 / sp.sqrt(3)
    exact = sp.integrate(1 - 3 * x**2, (x, 0, r)) + sp.integrate(3 * x**2 - 1, (x, r, 1))
    rep = validate_potential(p)
    assert rep.converged and rep.passed
    assert rep.weighted_norm == pytest.approx(float(exact), rel=1e-10)


def test_log_weight_at_half_integer_resonance():
    p = load_problem(json.dumps({"l": -0.5, "b": 1, "potential": {"family": "polynomial", "coefficients": [2]}}))
    x = sp.symbols("x", positive=True)
    exact = sp.integrate(2 * x * (1 - sp.log(x)), (x, 0, 1))
    rep = validate_potential(p)
    assert rep.weight.startswith("x(1-log")
    assert rep.weighted_norm == pytest.approx(float(exact), rel=1e-10)


def test_non_integrable_potential_fails():
    p = load_problem(json.dumps({"l": 1, "b": 1, "potential": {"family": "polynomial", "coefficients": [1],
                                                               "min_power": -2}}))
    rep = validate_potential(p)
    assert not rep.passed and not rep.converged


def test_tolerances_roundtrip(tmp_path):
    f = tmp_path / "tol.json"
    f.write_text(json.dumps({"ode_rtol": 1e-10, "ladder_levels": 30}))
    t = load_tolerances(f)
    assert isinstance(t, Tolerances) and t.ode_rtol == 1e-10 and t.ladder_levels == 30
    assert t.gl_nodes == DEFAULT.gl_nodes
    assert load_tolerances(None) is DEFAULT
    f.write_text(json.dumps({"no_such_knob": 1}))
    with pytest.raises(KeyError):
        load_tolerances(f)
    f.write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_tolerances(f)
