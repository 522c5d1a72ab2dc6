import json
import math

import pytest

from singweyl import build_weyl, eigenvalues, load_problem

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def make_problem(**kw):
    return load_problem(json.dumps(kw))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")


@pytest.fixture(scope="session")
def free_problem():
    return make_problem(l=0, b=math.pi, beta=0)


@pytest.fixture(scope="session")
def free_spectrum_200(free_problem):
    return eigenvalues(free_problem, count=200)


@pytest.fixture(scope="session")
def free_spectrum(free_spectrum_200):
    return free_spectrum_200


@pytest.fixture(scope="session")
def neumann_spectrum(free_problem):
    return eigenvalues(free_problem.with_beta(math.pi / 2), count=50)


@pytest.fixture(scope="session")
def free_weyl(free_problem, free_spectrum_200):
    return build_weyl(free_problem, free_spectrum_200)


BESSEL_CASES = [(l, q) for l in (0, 1, 2, 3) for q in (False, True)]


@pytest.fixture(scope="session")
def bessel_cases():
    """Weyl functions and spectra for l = 0..3, with q = 0 and q = x, on (0, 1]."""
    out = {}
    for l, q in BESSEL_CASES:
        kw = dict(l=l, b=1.0, beta=0)
        if q:
            kw["potential"] = {"family": "polynomial", "coefficients": [0, 1]}
        p = make_problem(**kw)
        s = eigenvalues(p, count=40)
        out[(l, q)] = (p, s, build_weyl(p, s))
    return out
