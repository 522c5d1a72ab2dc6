"""Eigenvalues, norming constants and sums over the atomic spectral measure.

Conventions used throughout the package:

* W(z) = W(chi(z), phi(z)) = chi phi' - chi' phi evaluated at b, i.e.
  W(z) = -sin(beta) phi'(z, b) - cos(beta) phi(z, b). With this orientation
  int phi chi dx = -W'(z) and W(z) = W(lambda) prod-type behaviour gives
  -W'/W = sum 1/(lambda_k - z).
* gamma_k = 1 / int phi(lambda_k)^2, and chi(lambda_k) = c_k phi(lambda_k).

Eigenvalues are bracketed by the Prufer phase of phi at b and polished by a
safeguarded Newton iteration on W using the exact z-derivative jet.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .config import DEFAULT, Tolerances
from .ode import endpoint_solution, endpoint_values, make_grid, regular_solution
from .problem import SturmLiouvilleProblem


class BracketError(RuntimeError):
    """An eigenvalue could not be isolated."""


class BudgetError(RuntimeError):
    """Search exceeded its iteration or size budget."""


# --------------------------------------------------------------------------
# characteristic function


def characteristic(problem: SturmLiouvilleProblem, z, J: int = 0, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Taylor jet of W(z) = W(chi, phi); shape (nz, J+1)."""
    u, du = endpoint_values(problem, "phi", z, J, tol)
    sb, cb = math.sin(problem.beta), math.cos(problem.beta)
    return -sb * du - cb * u


def prufer_angle(problem: SturmLiouvilleProblem, lam, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Continuous phase of (phi', phi) at b; increases by pi per zero of phi."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    jet = regular_solution(problem, lam, 0, make_grid(problem, lam, 0, tol), tol)
    u = jet.taylor_u[:, 0, :]
    du = jet.taylor_du[:, 0, -1]
    interior = u[:, 1:]
    s = np.sign(interior)
    # zeros strictly inside (0, b]; exact zeros at b belong to the phase below
    changes = np.sum(s[:, 1:-1] * s[:, 2:] < 0, axis=1) + np.sum(
        (s[:, 1:-1] == 0) & (np.arange(s.shape[1] - 2) > 0), axis=1)
    changes = changes + (s[:, 0] * s[:, 1] < 0)
    ub = u[:, -1]
    frac = np.mod(np.arctan2(ub, du), math.pi)
    lastsign = s[:, -2]
    # when phi(b) sits exactly on a zero the mod puts the phase at 0; count it as a full turn
    frac = np.where((ub == 0) & (lastsign != 0), math.pi, frac)
    return changes * math.pi + frac


def _count_from_angle(th, beta):
    return np.floor((th + beta) / math.pi + 1e-13).astype(int)


def eigen_count(problem: SturmLiouvilleProblem, lam, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Number of eigenvalues strictly below each lambda (oscillation theorem)."""
    return _count_from_angle(prufer_angle(problem, lam, tol), problem.beta)


# --------------------------------------------------------------------------
# data containers


@dataclass
class TailFit:
    """lambda_k ~ A (k + delta)^2 and gamma_k ~ B (k + delta)^r for large k."""

    A: float
    delta: float
    p: float
    B: float
    r: float
    k_from: int
    k_to: int
    lam_rms: float
    gamma_rms: float
    ok: bool

    def lam(self, k):
        return self.A * (np.asarray(k, dtype=float) + self.delta) ** 2

    def gamma(self, k):
        return self.B * (np.asarray(k, dtype=float) + self.delta) ** self.r

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    gammas: np.ndarray | None = None
    c: np.ndarray | None = None
    wprime: np.ndarray | None = None
    residuals: np.ndarray | None = None
    beta: float = 0.0
    tail: TailFit | None = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def k(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    @classmethod
    def from_values(cls, eigenvalues, gammas=None, beta: float = 0.0, fit: bool = True) -> "Spectrum":
        lam = np.asarray(eigenvalues, dtype=float)
        gam = None if gammas is None else np.asarray(gammas, dtype=float)
        s = cls(lam, gam, beta=beta)
        if fit and lam.size >= 8:
            s.tail = fit_tail(s)
        return s

    def rows(self):
        for i in range(self.N):
            yield {
                "k": i + 1,
                "lambda": float(self.eigenvalues[i]),
                "gamma": None if self.gammas is None else float(self.gammas[i]),
                "c": None if self.c is None else float(self.c[i]),
                "wprime_residual": None if self.residuals is None else float(self.residuals[i]),
            }


# --------------------------------------------------------------------------
# eigenvalue search


def _lower_bound(problem, tol):
    env = 0.0 if problem.potential.is_zero else max(0.0, -problem.potential_minimum())
    lo = -env - 10.0
    for _ in range(60):
        if eigen_count(problem, lo, tol)[0] == 0:
            return lo
        lo = 2.0 * lo
    raise BudgetError("no lower spectral bound found")


def _newton_polish(problem, lo, hi, tol, start=None, noise_rel: float = 1e-9):
    """Safeguarded Newton on W inside brackets [lo, hi] (one root each).

    Converged when the step is below root_tol (1 + |x|). Near large eigenvalues
    the ODE error in W can exceed that; a correction that has stopped shrinking
    and is below ``noise_rel`` (1 + |x|) is then accepted as the noise floor.
    Returns the roots and the last step size of each.
    """
    lo, hi = lo.copy(), hi.copy()
    wlo = characteristic(problem, lo, 0, tol)[:, 0]
    x = 0.5 * (lo + hi) if start is None else start.copy()
    done = np.zeros(x.size, bool)
    prev = np.full(x.size, np.inf)
    last = np.full(x.size, np.inf)
    for _ in range(tol.root_maxiter):
        act = ~done
        if not act.any():
            break
        jet = characteristic(problem, x[act], 1, tol)
        w, dw = jet[:, 0], jet[:, 1]
        xa, la, ha, wla = x[act], lo[act], hi[act], wlo[act]
        same = np.sign(w) == np.sign(wla)
        la = np.where(same, xa, la)
        wla = np.where(same, w, wla)
        ha = np.where(same, ha, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - w / dw
        step = np.abs(xn - xa)
        scale = 1.0 + np.abs(xa)
        tiny = step <= noise_rel * scale
        conv = (step <= tol.root_tol * scale) | (w == 0) | (tiny & (step >= 0.5 * prev[act]))
        bad = ~np.isfinite(xn) | (((xn < la) | (xn > ha)) & ~tiny)
        xn = np.where(bad & ~conv, 0.5 * (la + ha), xn)
        lo[act], hi[act], wlo[act] = la, ha, wla
        x[act] = np.where(w == 0, xa, xn)
        idx = np.flatnonzero(act)
        prev[idx] = np.where(bad, np.inf, step)
        last[idx] = step
        done[idx[conv]] = True
    if not done.all():
        raise BudgetError(f"Newton polish did not converge for {np.sum(~done)} eigenvalues")
    return x, last


def eigenvalues(problem: SturmLiouvilleProblem, lmax: float | None = None, count: int | None = None,
                tol: Tolerances = DEFAULT, norming: bool = True, budget: int = 5000) -> Spectrum:
    """Eigenvalues in (-inf, lmax], at most ``count`` of them.

    Every eigenvalue is isolated between two points whose Prufer counts differ
    by exactly one, which also certifies that none were skipped.
    """
    if lmax is None and count is None:
        raise ValueError("give lmax, count or both")
    lo = _lower_bound(problem, tol)
    if lmax is not None and lmax <= lo:
        return Spectrum(np.empty(0), np.empty(0), np.empty(0), np.empty(0), np.empty(0), beta=problem.beta)
    if lmax is not None:
        hi = float(lmax)
        n_hi = int(eigen_count(problem, hi, tol)[0])
        # an eigenvalue sitting exactly at lmax counts
        n_hi = int(eigen_count(problem, hi * (1 + 1e-14) + 1e-14, tol)[0])
        target = n_hi if count is None else min(n_hi, count)
    else:
        hi = max(10.0, 2.0 * abs(lo))
        for _ in range(80):
            n_hi = int(eigen_count(problem, hi, tol)[0])
            if n_hi >= count:
                break
            hi *= 2.0
        else:
            raise BudgetError("upper search window did not reach the requested count")
        target = count
    if target > budget:
        raise BudgetError(f"{target} eigenvalues requested, budget is {budget}")
    if target == 0:
        return Spectrum(np.empty(0), np.empty(0), np.empty(0), np.empty(0), np.empty(0), beta=problem.beta)
    npts = 2 * n_hi + 8
    s = np.linspace(0.0, math.sqrt(hi - lo), npts)
    pts = lo + s**2
    ang = prufer_angle(problem, pts, tol)
    cnt = _count_from_angle(ang, problem.beta)
    if cnt[0] != 0:
        raise BracketError("lower scan point already has eigenvalues below it")
    for _ in range(60):
        jumps = np.diff(cnt)
        if np.any(jumps < 0):
            raise BracketError("oscillation count decreased along the scan")
        wide = np.flatnonzero(jumps > 1)
        if wide.size == 0:
            break
        mids = 0.5 * (pts[wide] + pts[wide + 1])
        if np.any(mids - pts[wide] <= 1e-13 * (1 + np.abs(mids))):
            raise BracketError(f"cannot separate eigenvalues near {mids[0]}")
        ang_m = prufer_angle(problem, mids, tol)
        pts = np.concatenate([pts, mids])
        ang = np.concatenate([ang, ang_m])
        cnt = np.concatenate([cnt, _count_from_angle(ang_m, problem.beta)])
        order = np.argsort(pts)
        pts, ang, cnt = pts[order], ang[order], cnt[order]
    else:
        raise BracketError("bracket refinement budget exhausted")
    jumps = np.diff(cnt)
    idx = np.flatnonzero(jumps == 1)
    keep = cnt[idx] < target  # cnt[idx] is the eigenvalue number minus one
    idx = idx[keep]
    if idx.size != target:
        raise BracketError(f"isolated {idx.size} of {target} eigenvalues")
    lo_b, hi_b = pts[idx], pts[idx + 1]
    # the phase is smooth and monotone, so linear interpolation is a good seed
    goal = (cnt[idx] + 1) * math.pi - problem.beta
    frac = np.clip((goal - ang[idx]) / (ang[idx + 1] - ang[idx]), 0.02, 0.98)
    lam, steps = _newton_polish(problem, lo_b, hi_b, tol, start=lo_b + frac * (hi_b - lo_b))
    if np.any(np.diff(lam) <= 0):
        raise BracketError("eigenvalues not strictly increasing")
    sp = Spectrum(lam, beta=problem.beta, meta={"lower_bound": lo, "upper": hi,
                                                  "max_relative_step": float(np.max(steps / (1 + np.abs(lam))))})
    if norming:
        norming_constants(problem, sp, tol)
    return sp


def norming_constants(problem: SturmLiouvilleProblem, spectrum: Spectrum, tol: Tolerances = DEFAULT) -> Spectrum:
    """Fill gamma_k, c_k, W'(lambda_k) and the -W' = c/gamma residual."""
    lam = spectrum.eigenvalues
    if lam.size == 0:
        spectrum.gammas = spectrum.c = spectrum.wprime = spectrum.residuals = np.empty(0)
        return spectrum
    grid = make_grid(problem, lam, 0, tol)
    jet = regular_solution(problem, lam, 0, grid, tol)
    u = jet.taylor_u[:, 0, :]
    norm2 = grid.integrate(u * u)
    gam = 1.0 / norm2
    if np.any(gam <= 0) or not np.all(np.isfinite(gam)):
        raise ArithmeticError("non-positive norming constant")
    ub, dub = u[:, -1], jet.taylor_du[:, 0, -1]
    sb, cb = math.sin(problem.beta), math.cos(problem.beta)
    c = (-sb * ub + cb * dub) / (ub * ub + dub * dub)
    wp = characteristic(problem, lam, 1, tol)[:, 1]
    spectrum.gammas, spectrum.c, spectrum.wprime = gam, c, wp
    spectrum.residuals = np.abs(-wp - c / gam) / np.abs(wp)
    if lam.size >= 8:
        spectrum.tail = fit_tail(spectrum)
    return spectrum


def wprime_crosscheck(problem: SturmLiouvilleProblem, spectrum: Spectrum, k: int,
                      tol: Tolerances = DEFAULT) -> float:
    """|-W'(lambda_k) - c_k/gamma_k| / |W'(lambda_k)| for 1-based k."""
    if spectrum.residuals is None:
        norming_constants(problem, spectrum, tol)
    return float(spectrum.residuals[k - 1])


# --------------------------------------------------------------------------
# tail asymptotics


def fit_tail(spectrum: Spectrum, first: int | None = None) -> TailFit:
    """Regression over the upper half of the computed atoms."""
    N = spectrum.N
    if N < 4:
        raise ValueError("need at least four atoms for a tail fit")
    k0 = first if first is not None else max(1, N // 2)
    k = np.arange(k0, N + 1, dtype=float)
    lam = spectrum.eigenvalues[k0 - 1:]
    ok = bool(np.all(lam > 0))
    root = np.sqrt(np.maximum(lam, 0.0))
    slope, icpt = np.polyfit(k, root, 1)
    A = slope**2
    delta = icpt / slope
    lam_rms = float(np.sqrt(np.mean((A * (k + delta) ** 2 / lam - 1.0) ** 2))) if ok else math.inf
    kd = k + delta
    ok = ok and bool(np.all(kd > 0))
    # exponents are measured against k + delta so p and r share one variable
    p = float(np.polyfit(np.log(kd), np.log(np.abs(lam)), 1)[0]) if ok else math.nan
    B, r, g_rms = math.nan, math.nan, math.inf
    if spectrum.gammas is not None:
        g = spectrum.gammas[k0 - 1:]
        if ok and np.all(g > 0):
            r, lb = np.polyfit(np.log(kd), np.log(g), 1)
            B = math.exp(lb)
            g_rms = float(np.sqrt(np.mean((B * kd**r / g - 1.0) ** 2)))
        else:
            ok = False
    return TailFit(float(A), float(delta), p, float(B), float(r), int(k0), int(N), lam_rms, g_rms, ok)


def model_tail_sum(fit: TailFit, term, start: int, explicit: int | None = None,
                   tol: Tolerances = DEFAULT) -> float | complex:
    """sum_{k >= start} term(lambda(k), gamma(k)) under the fitted model.

    The first ``explicit`` terms are summed directly; the remainder is the
    midpoint Euler-Maclaurin integral from start + explicit - 1/2 to infinity.
    """
    n = tol.tail_explicit_terms if explicit is None else explicit
    k = np.arange(start, start + n, dtype=float)
    s = np.sum(term(fit.lam(k), fit.gamma(k)))
    a = start + n - 0.5

    def f(t):
        return term(fit.lam(t), fit.gamma(t))

    def g(u):
        # t = a / u maps [a, inf) onto (0, 1]; quad copes badly with the raw infinite range
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = f(np.array([a / u]))[0] * a / u**2
        return v if np.isfinite(v) else np.zeros_like(v)[()]

    probe = g(1.0)
    if np.iscomplexobj(probe):
        re = integrate.quad(lambda u: np.real(g(u)), 0.0, 1.0, limit=200)[0]
        im = integrate.quad(lambda u: np.imag(g(u)), 0.0, 1.0, limit=200)[0]
        return s + re + 1j * im
    return s + integrate.quad(g, 0.0, 1.0, limit=200)[0]


# --------------------------------------------------------------------------
# identities over the spectrum


@dataclass
class TraceResult:
    series: complex
    integral: complex
    tail: complex
    residual: float
    abs_error: float
    tail_ok: bool

    def to_dict(self) -> dict:
        return {k: (complex(v).real if np.isreal(v) else str(v)) if isinstance(v, complex) else v
                for k, v in asdict(self).items()}


def green_trace(problem: SturmLiouvilleProblem, z, tol: Tolerances = DEFAULT) -> complex:
    """int_0^b phi(z,x) chi(z,x) dx / W(z), the trace of the resolvent."""
    z = np.atleast_1d(np.asarray(z))
    grid = make_grid(problem, z, 0, tol)
    phi = regular_solution(problem, z, 0, grid, tol)
    chi = endpoint_solution(problem, z, 0, grid, tol)
    integral = grid.integrate(phi.taylor_u[:, 0] * chi.taylor_u[:, 0])
    w = -math.sin(problem.beta) * phi.taylor_du[:, 0, -1] - math.cos(problem.beta) * phi.taylor_u[:, 0, -1]
    out = integral / w
    return out[0] if out.size == 1 else out


def trace_identity(problem: SturmLiouvilleProblem, spectrum: Spectrum, z: complex,
                   tol: Tolerances = DEFAULT) -> TraceResult:
    """Compare sum 1/(lambda_k - z) (+ model tail) with int phi chi / W."""
    lam = spectrum.eigenvalues
    series = np.sum(1.0 / (lam - z))
    fit = spectrum.tail or fit_tail(spectrum)
    tail = model_tail_sum(fit, lambda L, G: 1.0 / (L - z), spectrum.N + 1, tol=tol)
    integral = green_trace(problem, z, tol)
    total = series + tail
    err = abs(total - integral)
    return TraceResult(complex(total), complex(integral), complex(tail), float(err / abs(integral)),
                       float(err), bool(fit.ok and fit.lam_rms < 1e-2))


@dataclass
class MomentResult:
    n: int
    verdict: str
    exponent: float
    partial_sums: np.ndarray

    def to_dict(self) -> dict:
        return {"n": self.n, "verdict": self.verdict, "exponent": self.exponent,
                "partial_sum": float(self.partial_sums[-1]) if self.partial_sums.size else 0.0}


def moment_test(spectrum: Spectrum, n: int, tol: Tolerances = DEFAULT) -> MomentResult:
    """Classify sum gamma_k (1 + lambda_k^2)^(-n) by the fitted exponent r - 2 p n."""
    if spectrum.gammas is None:
        raise ValueError("moment test needs norming constants")
    terms = spectrum.gammas * (1.0 + spectrum.eigenvalues**2) ** (-n)
    partial = np.cumsum(terms)
    try:
        fit = spectrum.tail or fit_tail(spectrum)
    except ValueError:
        return MomentResult(n, "inconclusive", math.nan, partial)
    if not fit.ok or not math.isfinite(fit.r) or not math.isfinite(fit.p):
        return MomentResult(n, "inconclusive", math.nan, partial)
    e = fit.r - 2.0 * fit.p * n
    if e < -1.0 - tol.moment_margin:
        verdict = "summable"
    elif e > -1.0 + tol.moment_margin:
        verdict = "divergent"
    else:
        verdict = "inconclusive"
    return MomentResult(n, verdict, float(e), partial)


def smallest_summable_moment(spectrum: Spectrum, nmax: int = 8, tol: Tolerances = DEFAULT) -> int | None:
    for n in range(nmax + 1):
        if moment_test(spectrum, n, tol).verdict == "summable":
            return n
    return None
