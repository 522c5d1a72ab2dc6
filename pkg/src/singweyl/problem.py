"""Problem definition for perturbed Bessel operators on (0, b].

The differential expression is

    tau = -d^2/dx^2 + l(l+1)/x^2 + q(x),   0 < x <= b,

with a separated real boundary condition cos(beta) f(b) + sin(beta) f'(b) = 0
at the regular right endpoint. The origin is the (possibly) singular endpoint;
for l in [-1/2, 1/2) the Friedrichs condition is the one realised by the
regular solution.

Problem files are JSON objects::

    {"l": 2, "b": 1, "beta": 0,
     "potential": {"family": "polynomial", "coefficients": [0, 1]}}

``b`` and ``beta`` also accept simple expressions in ``pi`` ("pi", "pi/2").
Potential families:

* ``free``: q = 0
* ``polynomial``: q(x) = sum_i c_i x^(i + min_power); ``min_power`` defaults
  to 0 and may be negative (validation then decides integrability)
* ``tabulated``: samples ``x`` (strictly increasing, inside [0, b]) and ``q``,
  interpolated by a monotone piecewise cubic (PCHIP), extrapolated by its end
  pieces.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import PchipInterpolator

from .config import DEFAULT, Tolerances
from .quadrature import gauss_legendre


class ProblemError(ValueError):
    """Base class for problem ingestion failures."""


class ProblemParseError(ProblemError):
    """The problem text is malformed."""


class ProblemDomainError(ProblemError):
    """A field parses but lies outside its admissible range."""


class QuadratureError(RuntimeError):
    """Non-finite values met while integrating the potential."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def parse_real(value) -> float:
    """Accept a number or a small arithmetic expression in ``pi``."""
    if isinstance(value, bool):
        raise ProblemParseError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ProblemParseError(f"expected a number, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ProblemParseError(f"unsupported expression {value!r}")

    try:
        tree = ast.parse(value.strip(), mode="eval")
    except SyntaxError as exc:
        raise ProblemParseError(f"cannot parse {value!r}") from exc
    return ev(tree)


@dataclass(frozen=True)
class PotentialSpec:
    family: str = "free"
    coefficients: tuple[float, ...] = ()
    min_power: int = 0
    x: tuple[float, ...] = ()
    q: tuple[float, ...] = ()
    _pchip: PchipInterpolator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in ("free", "polynomial", "tabulated"):
            raise ProblemDomainError(f"unknown potential family {self.family!r}")
        if self.family == "tabulated":
            xs = np.asarray(self.x, dtype=float)
            qs = np.asarray(self.q, dtype=float)
            if xs.size < 2 or xs.size != qs.size:
                raise ProblemDomainError("tabulated potential needs >= 2 matching (x, q) samples")
            if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(qs)):
                raise ProblemDomainError("tabulated samples must be finite")
            if np.any(np.diff(xs) <= 0):
                raise ProblemDomainError("tabulated x samples must be strictly increasing")
            object.__setattr__(self, "_pchip", PchipInterpolator(xs, qs, extrapolate=True))
        if self.family == "polynomial":
            if not all(math.isfinite(c) for c in self.coefficients):
                raise ProblemDomainError("polynomial coefficients must be finite")

    @property
    def is_zero(self) -> bool:
        if self.family == "free":
            return True
        if self.family == "polynomial":
            return not any(self.coefficients)
        return False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "free":
            return np.zeros_like(x)
        if self.family == "polynomial":
            if not self.coefficients:
                return np.zeros_like(x)
            return npoly.polyval(x, self.coefficients) * x ** float(self.min_power)
        return self._pchip(x)

    def series_coefficients(self) -> np.ndarray:
        """Coefficients e_k of x^2 q(x) = sum_k e_k x^k near the origin."""
        if self.family == "free":
            return np.zeros(1)
        if self.family == "polynomial":
            shift = self.min_power + 2
            if shift < 0 or (shift == 0 and any(self.coefficients[:1])):
                raise ProblemDomainError(
                    "potential too singular at 0 for a Frobenius start (need min_power >= -1)")
            e = np.zeros(len(self.coefficients) + max(shift, 0))
            e[max(shift, 0):] = self.coefficients
            return e
        # first PCHIP piece in powers of (x - x_0), re-expanded in powers of x
        c = self._pchip.c[:, 0][::-1]  # ascending powers of (x - x_0)
        x_first = self.x[0]
        poly = np.zeros(1)
        shifted = np.array([1.0])
        for ck in c:
            poly = npoly.polyadd(poly, ck * shifted)
            shifted = npoly.polymul(shifted, [-x_first, 1.0])
        return np.concatenate([[0.0, 0.0], poly])

    def series_radius(self) -> float:
        """Largest x for which ``series_coefficients`` describes q exactly."""
        if self.family == "tabulated":
            return float(self.x[1])
        return math.inf

    def breakpoints(self, b: float) -> np.ndarray:
        """Points in (0, b) where |q| may fail to be smooth."""
        if self.family == "tabulated":
            xs = np.asarray(self.x)
            return xs[(xs > 0) & (xs < b)]
        if self.family == "polynomial" and len(self.coefficients) > 1:
            roots = npoly.polyroots(self.coefficients)
            real = roots[np.abs(roots.imag) < 1e-12].real
            return np.sort(real[(real > 0) & (real < b)])
        return np.empty(0)

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.family == "polynomial":
            d["coefficients"] = list(self.coefficients)
            if self.min_power:
                d["min_power"] = self.min_power
        elif self.family == "tabulated":
            d["x"] = list(self.x)
            d["q"] = list(self.q)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        if not isinstance(d, dict) or "family" not in d:
            raise ProblemParseError("potential must be an object with a 'family' key")
        fam = d["family"]
        try:
            if fam == "free":
                return cls("free")
            if fam == "polynomial":
                coeffs = tuple(parse_real(c) for c in d.get("coefficients", []))
                mp = d.get("min_power", 0)
                if not isinstance(mp, int) or isinstance(mp, bool):
                    raise ProblemParseError("min_power must be an integer")
                return cls("polynomial", coefficients=coeffs, min_power=mp)
            if fam == "tabulated":
                xs = tuple(parse_real(v) for v in d["x"])
                qs = tuple(parse_real(v) for v in d["q"])
                return cls("tabulated", x=xs, q=qs)
        except (KeyError, TypeError) as exc:
            raise ProblemParseError(f"bad potential entry: {exc}") from exc
        raise ProblemDomainError(f"unknown potential family {fam!r}")


@dataclass(frozen=True)
class BoundaryCondition:
    """cos(beta) f(b) + sin(beta) f'(b) = 0, beta in [0, pi)."""

    beta: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.beta < math.pi):
            raise ProblemDomainError(f"beta must lie in [0, pi), got {self.beta}")

    @property
    def endpoint_data(self) -> tuple[float, float]:
        """(f(b), f'(b)) of the solution satisfying the condition."""
        return -math.sin(self.beta), math.cos(self.beta)


@dataclass(frozen=True)
class SturmLiouvilleProblem:
    l: float
    b: float
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    bc_right: BoundaryCondition = field(default_factory=BoundaryCondition)
    a: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.b):
            raise ProblemDomainError("right endpoint must be finite (limit-circle endpoint)")
        if not self.b > self.a:
            raise ProblemDomainError(f"need b > a = {self.a}, got b = {self.b}")
        if not self.l >= -0.5:
            raise ProblemDomainError(f"need l >= -1/2, got {self.l}")
        if self.potential.family == "tabulated":
            xs = np.asarray(self.potential.x)
            if xs[0] < self.a or xs[-1] > self.b:
                raise ProblemDomainError("tabulated samples must lie inside [0, b]")

    @property
    def beta(self) -> float:
        return self.bc_right.beta

    @property
    def friedrichs(self) -> bool:
        """The origin is limit circle and the Friedrichs condition is imposed."""
        return self.l < 0.5

    @property
    def log_branch(self) -> bool:
        """Coinciding Frobenius indices; the second solution carries sqrt(x) log x."""
        return abs(self.l + 0.5) < 1e-14

    @property
    def centrifugal(self) -> float:
        return self.l * (self.l + 1.0)

    def q_total(self, x):
        x = np.asarray(x, dtype=float)
        return self.centrifugal / x**2 + self.potential(x)

    def potential_envelope(self, samples: int = 2001) -> float:
        xs = np.linspace(self.b * 1e-3, self.b, samples)
        return float(np.max(np.abs(self.potential(xs))))

    def potential_minimum(self, samples: int = 2001) -> float:
        xs = np.linspace(self.b * 1e-3, self.b, samples)
        return float(np.min(self.potential(xs)))

    def to_dict(self) -> dict:
        return {"l": self.l, "b": self.b, "beta": self.beta, "potential": self.potential.to_dict()}

    def digest(self) -> str:
        import hashlib
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_beta(self, beta: float) -> "SturmLiouvilleProblem":
        return SturmLiouvilleProblem(self.l, self.b, self.potential, BoundaryCondition(beta), self.a)


def problem_from_dict(d: dict) -> SturmLiouvilleProblem:
    if not isinstance(d, dict):
        raise ProblemParseError("problem must be a JSON object")
    missing = {"l", "b"} - set(d)
    if missing:
        raise ProblemParseError(f"missing keys: {sorted(missing)}")
    unknown = set(d) - {"l", "b", "beta", "potential", "name"}
    if unknown:
        raise ProblemParseError(f"unknown keys: {sorted(unknown)}")
    l = parse_real(d["l"])
    b = parse_real(d["b"])
    beta = parse_real(d.get("beta", 0.0))
    pot = PotentialSpec.from_dict(d.get("potential", {"family": "free"}))
    return SturmLiouvilleProblem(l=l, b=b, potential=pot, bc_right=BoundaryCondition(beta))


def load_problem(config_text: str) -> SturmLiouvilleProblem:
    """Parse and validate a JSON problem description."""
    try:
        data = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"malformed problem text: {exc}") from exc
    return problem_from_dict(data)


@dataclass
class ValidationReport:
    weighted_norm: float
    passed: bool
    ceiling: float
    converged: bool
    weight: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def validate_potential(problem: SturmLiouvilleProblem, tol: Tolerances = DEFAULT,
                       levels: int = 60) -> ValidationReport:
    """Weighted L1 norm of the perturbation near the Bessel origin.

    The weight is x for l > -1/2 and x (1 - log(x/b)) for l = -1/2. The norm is
    accumulated over dyadic panels [b 2^-(m+1), b 2^-m]; non-decaying panel
    contributions near 0 mark divergence.
    """
    b = problem.b
    pot = problem.potential
    if problem.log_branch:
        weight = lambda x: x * (1.0 - np.log(x / b))
        wname = "x(1-log(x/b))"
    else:
        weight = lambda x: x
        wname = "x"
    if pot.is_zero:
        return ValidationReport(0.0, True, tol.weighted_l1_ceiling, True, wname)

    nodes, wts = gauss_legendre(20)
    breaks = pot.breakpoints(b)
    contrib = np.zeros(levels)
    for m in range(levels):
        lo, hi = b * 2.0 ** (-m - 1), b * 2.0 ** (-m)
        cuts = np.concatenate([[lo], breaks[(breaks > lo) & (breaks < hi)], [hi]])
        total = 0.0
        for a0, a1 in zip(cuts[:-1], cuts[1:]):
            xs = 0.5 * (a1 - a0) * nodes + 0.5 * (a1 + a0)
            vals = weight(xs) * np.abs(pot(xs))
            if not np.all(np.isfinite(vals)):
                raise QuadratureError(f"non-finite potential values on [{a0}, {a1}]")
            total += 0.5 * (a1 - a0) * np.dot(wts, vals)
        contrib[m] = total

    norm = float(contrib.sum())
    tail = contrib[-4:]
    stalled = tail[-1] > 1e-12 * max(norm, 1e-300) and tail[-1] >= 0.75 * tail[-2]
    if stalled:
        return ValidationReport(math.inf, False, tol.weighted_l1_ceiling, False, wname)
    return ValidationReport(norm, norm <= tol.weighted_l1_ceiling, tol.weighted_l1_ceiling, True, wname)


BUILTIN_PROBLEMS: dict[str, dict] = {
    "free": {"l": 0, "b": "pi", "beta": 0, "potential": {"family": "free"}},
    "free-neumann": {"l": 0, "b": "pi", "beta": "pi/2", "potential": {"family": "free"}},
    "bessel-l1": {"l": 1, "b": 1, "beta": 0, "potential": {"family": "free"}},
    "bessel-l2": {"l": 2, "b": 1, "beta": 0, "potential": {"family": "free"}},
    "bessel-l3-linear": {"l": 3, "b": 1, "beta": 0, "potential": {"family": "polynomial", "coefficients": [0, 1]}},
    "half-integer": {"l": 0.5, "b": 1, "beta": 0.3, "potential": {"family": "polynomial", "coefficients": [1, -2, 0.5]}},
    "log-branch": {"l": -0.5, "b": 1, "beta": 0, "potential": {"family": "free"}},
    "coulomb": {"l": 1, "b": 2, "beta": 0, "potential": {"family": "polynomial", "coefficients": [-1.0], "min_power": -1}},
    "tabulated": {"l": 2, "b": 1, "beta": 0, "potential": {"family": "tabulated", "x": [0, 0.25, 0.5, 0.75, 1.0],
                                                           "q": [0, 0.3, 0.2, -0.4, 0.1]}},
}


def builtin_problem(name: str) -> SturmLiouvilleProblem:
    try:
        d = dict(BUILTIN_PROBLEMS[name], name=name)
    except KeyError:
        raise ProblemDomainError(f"unknown built-in problem {name!r}") from None
    return problem_from_dict(d)
