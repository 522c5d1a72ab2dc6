"""z-derivatives of the Weyl solution and the n-entire diagnostics built on them.

psi(z, x) = chi(z, x) / W(z). Its Taylor jet in z is chi_T * (1/W)_T on the
integrated part of the grid. Below the Frobenius start the same function is
theta + M phi with M = W(theta, chi)/W(chi, phi), both read off at x0; writing
it that way avoids multiplying roundoff in chi by the x^-l growth of theta.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .frobenius import taylor_to_derivs, tinv, tmul
from .ode import endpoint_solution, make_grid, regular_solution, second_solution
from .problem import SturmLiouvilleProblem
from .quadrature import Grid
from .spectrum import Spectrum, fit_tail, model_tail_sum, moment_test, smallest_summable_moment
from .weyl import PoleError, WeylFunction


class LadderError(RuntimeError):
    """I(eps) decreased as eps decreased, so the quadrature cannot be trusted."""


class InterlacingError(ValueError):
    """Spectra of the two extensions do not interlace."""


# --------------------------------------------------------------------------
# psi jets


@dataclass
class PsiJet:
    z: complex
    J: int
    grid: Grid
    taylor_u: np.ndarray   # (J+1, nx)
    taylor_du: np.ndarray
    route: str

    @property
    def u(self) -> np.ndarray:
        return taylor_to_derivs(self.taylor_u, axis=0)

    @property
    def du(self) -> np.ndarray:
        return taylor_to_derivs(self.taylor_du, axis=0)


def _taylor_product_x(a: np.ndarray, f: np.ndarray) -> np.ndarray:
    """a (J+1,) Taylor in z times f (J+1, nx) Taylor in z."""
    out = np.zeros(f.shape, dtype=np.result_type(a, f))
    for t in range(f.shape[0]):
        for i in range(t + 1):
            out[t] += a[i] * f[t - i]
    return out


def psi_jet(weyl: WeylFunction, z: complex, J: int = 0, grid: Grid | None = None,
            route: str = "leibniz", min_abs_w: float = 1e-300) -> PsiJet:
    """Jet of psi = chi / W at a single z.

    route="leibniz" uses the exact Taylor reciprocal of W; route="m" builds
    theta^(j) + sum binom(j,i) M^(i) phi^(j-i) with M-derivatives from contour
    averages (only sensible away from poles; kept as a cross-check).
    """
    problem, tol = weyl.problem, weyl.tol
    zz = np.atleast_1d(np.asarray(z))
    if zz.size != 1:
        raise ValueError("psi_jet takes a single z")
    weyl._check_poles(zz)
    if grid is None:
        grid = make_grid(problem, zz, J, tol)
    if route == "m":
        return _psi_jet_m(weyl, complex(zz[0]), J, grid)
    if route != "leibniz":
        raise ValueError(f"unknown route {route!r}")
    chi = endpoint_solution(problem, zz, J, grid, tol)
    series = chi.series
    i0 = grid.i0
    pu, pdu = series.phi(grid.x0)
    tu, tdu = series.theta(grid.x0)
    cu, cdu = chi.taylor_u[:, :, i0], chi.taylor_du[:, :, i0]
    w = tmul(cu, pdu[:, :, 0]) - tmul(cdu, pu[:, :, 0])           # W(chi, phi)
    num = tmul(tu[:, :, 0], cdu) - tmul(tdu[:, :, 0], cu)         # W(theta, chi)
    if abs(w[0, 0]) < min_abs_w:
        raise PoleError("W(z) vanishes to working precision")
    inv_w = tinv(w)[0]
    m = tmul(num, tinv(w))[0]
    U = np.empty((J + 1, grid.x.size), dtype=np.result_type(chi.taylor_u, inv_w))
    dU = np.empty_like(U)
    ode = grid.ode_mask
    U[:, ode] = _taylor_product_x(inv_w, chi.taylor_u[0][:, ode])
    dU[:, ode] = _taylor_product_x(inv_w, chi.taylor_du[0][:, ode])
    ser = grid.series_mask
    xs = grid.x[ser]
    su, sdu = series.phi(xs)
    st, sdt = series.theta(xs)
    U[:, ser] = st[0] + _taylor_product_x(m, su[0])
    dU[:, ser] = sdt[0] + _taylor_product_x(m, sdu[0])
    return PsiJet(complex(zz[0]), J, grid, U, dU, "leibniz")


def _psi_jet_m(weyl: WeylFunction, z: complex, J: int, grid: Grid) -> PsiJet:
    problem, tol = weyl.problem, weyl.tol
    phi = regular_solution(problem, z, J, grid, tol)
    th = second_solution(problem, z, J, grid, tol)
    dm = weyl.derivatives_contour(z, J)
    mt = dm / np.array([math.factorial(j) for j in range(J + 1)])
    if weyl.sigma != 1:
        raise ValueError("M-route assumes the +1 convention")
    U = th.taylor_u[0] + _taylor_product_x(mt, phi.taylor_u[0])
    dU = th.taylor_du[0] + _taylor_product_x(mt, phi.taylor_du[0])
    return PsiJet(complex(z), J, grid, U, dU, "m")


def route_agreement(weyl: WeylFunction, z: complex, J: int, npts: int = 40, seed: int = 0) -> float:
    """max over j and sampled x of |psi_j(leibniz) - psi_j(m)| / |psi_j| (relative)."""
    grid = make_grid(weyl.problem, [z], J, weyl.tol)
    a = psi_jet(weyl, z, J, grid, "leibniz").u
    b = psi_jet(weyl, z, J, grid, "m").u
    rng = np.random.default_rng(seed)
    cand = np.flatnonzero(grid.x >= grid.x0 * 2.0**-10)
    idx = rng.choice(cand, size=min(npts, cand.size), replace=False)
    worst = 0.0
    for j in range(J + 1):
        scale = np.max(np.abs(a[j, idx]))
        worst = max(worst, float(np.max(np.abs(a[j, idx] - b[j, idx])) / scale))
    return worst


# --------------------------------------------------------------------------
# L2 classification near the singular endpoint


@dataclass
class L2Result:
    j: int
    verdict: str
    s: float
    exponent: float
    eps: np.ndarray
    I: np.ndarray

    def to_dict(self) -> dict:
        return {"j": self.j, "verdict": self.verdict, "s": self.s, "exponent": self.exponent,
                "I_last": float(self.I[-1])}


def ladder_integrals(grid: Grid, values: np.ndarray, levels: int, increments: bool = False):
    """I(eps_m) = int_{eps_m}^b values dx for eps_m = b 2^-m, m = 1..levels.

    With ``increments`` also return the panel integrals over [eps_(m+1), eps_m],
    summed directly so they keep full relative precision when tiny.
    """
    eps = grid.ladder(levels)
    contrib = values * grid.w
    tail = np.cumsum(contrib[::-1])[::-1]  # tail[i] = sum_{k >= i}
    idx = np.array([grid.index(e) for e in eps])
    if not increments:
        return eps, tail[idx]
    inc = np.array([np.sum(contrib[idx[m + 1]:idx[m]]) for m in range(levels - 1)])
    return eps, tail[idx], inc


def classify_ladder(eps: np.ndarray, I: np.ndarray, tol: Tolerances = DEFAULT, nfit: int = 5,
                    increments: np.ndarray | None = None):
    d = np.diff(I) if increments is None else increments
    if np.any(d < -1e-12 * np.abs(I[1:])):
        raise LadderError("I(eps) is not monotone along the ladder")
    d = np.maximum(d, np.finfo(float).tiny)
    ratios = np.log2(d[1:] / d[:-1])
    s = float(np.mean(ratios[-nfit:]))
    stable = np.all(np.abs(I[-3:] - I[-1]) <= tol.l2_stable_rel * abs(I[-1]))
    if s > tol.l2_divergent_s:
        verdict = "divergent"
    elif s <= 0 and stable:
        verdict = "integrable"
    else:
        verdict = "marginal"
    return verdict, s


def l2_classification(weyl: WeylFunction, z: complex, j: int, psi: PsiJet | None = None,
                      levels: int | None = None) -> L2Result:
    """Classify psi^(j)(z, .) as square integrable near 0 or not."""
    tol = weyl.tol
    levels = levels or tol.ladder_levels
    if psi is None or psi.J < j:
        psi = psi_jet(weyl, z, j)
    grid = psi.grid
    pj = psi.u[j]
    eps, I, inc = ladder_integrals(grid, np.abs(pj) ** 2, levels, increments=True)
    verdict, s = classify_ladder(eps, I, tol, increments=inc)
    idx = np.array([grid.index(e) for e in eps[-10:]])
    with np.errstate(divide="ignore"):
        ly = np.log(np.abs(pj[idx]))
    good = np.isfinite(ly)
    expo = float(np.polyfit(np.log(eps[-10:][good]), ly[good], 1)[0]) if good.sum() >= 2 else math.nan
    return L2Result(j, verdict, s, expo, eps, I)


# --------------------------------------------------------------------------
# integral identities


@dataclass
class IdentityResult:
    name: str
    lhs: complex
    rhs: complex
    residual: float
    applicable: bool = True
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": [self.lhs.real, self.lhs.imag], "rhs": [self.rhs.real, self.rhs.imag],
                "residual": self.residual, "applicable": self.applicable, "note": self.note}


def _product_integrable(grid: Grid, f: np.ndarray, tol: Tolerances) -> bool:
    eps, I, inc = ladder_integrals(grid, np.abs(f), tol.ladder_levels, increments=True)
    try:
        verdict, _ = classify_ladder(eps, I, tol, increments=inc)
    except LadderError:
        return False
    return verdict == "integrable"


def verify_mf1(weyl: WeylFunction, w: complex, z: complex) -> IdentityResult:
    """int phi(w) chi(z) = -(W(z) - W(w)) / (z - w)."""
    problem, tol = weyl.problem, weyl.tol
    grid = make_grid(problem, [w, z], 0, tol)
    phi = regular_solution(problem, w, 0, grid, tol)
    chi = endpoint_solution(problem, z, 0, grid, tol)
    lhs = complex(grid.integrate(phi.taylor_u[0, 0] * chi.taylor_u[0, 0]))
    W = weyl.char(np.array([z, w]))[:, 0]
    rhs = complex(-(W[0] - W[1]) / (z - w))
    return IdentityResult("mf1", lhs, rhs, abs(lhs - rhs) / abs(rhs))


def verify_mf2(weyl: WeylFunction, w: complex, z: complex, j: int) -> IdentityResult:
    """((w-z)^(j+1)/j!) int phi(w) psi^(j)(z) = 1 - sum_k ((w-z)^k/k!) W_b[k].

    W_b[k] is the boundary Wronskian taken as psi^(k)(z) phi'(w) - psi^(k)'(z) phi(w),
    the orientation under which the identity holds with W(theta, phi) = 1.
    """
    problem, tol = weyl.problem, weyl.tol
    grid = make_grid(problem, [w, z], j, tol)
    psi = psi_jet(weyl, z, j, grid)
    phi = regular_solution(problem, w, 0, grid, tol)
    pw, dpw = phi.taylor_u[0, 0], phi.taylor_du[0, 0]
    integrand = pw * psi.u[j]
    if not _product_integrable(grid, integrand, tol):
        return IdentityResult("mf2", complex("nan"), complex("nan"), math.nan, False, "integral not convergent")
    d = w - z
    lhs = complex(d ** (j + 1) / math.factorial(j) * grid.integrate(integrand))
    ib = grid.ib
    rhs = 1.0 + 0j
    for k in range(j + 1):
        wb = psi.u[k, ib] * dpw[ib] - psi.du[k, ib] * pw[ib]
        rhs -= d**k / math.factorial(k) * wb
    return IdentityResult("mf2", lhs, complex(rhs), abs(lhs - rhs) / max(abs(rhs), abs(lhs)))


def verify_mf3(weyl: WeylFunction, k: int, z: complex, j: int) -> IdentityResult:
    """int phi(lambda_k) psi^(j)(z) = j! / (lambda_k - z)^(j+1)."""
    problem, tol = weyl.problem, weyl.tol
    lam = float(weyl.spectrum.eigenvalues[k - 1])
    grid = make_grid(problem, [lam, z], j, tol)
    psi = psi_jet(weyl, z, j, grid)
    phi = regular_solution(problem, lam, 0, grid, tol)
    integrand = phi.taylor_u[0, 0] * psi.u[j]
    if not _product_integrable(grid, integrand, tol):
        return IdentityResult("mf3", complex("nan"), complex("nan"), math.nan, False, "integral not convergent")
    lhs = complex(grid.integrate(integrand))
    rhs = complex(math.factorial(j) / (lam - z) ** (j + 1))
    return IdentityResult("mf3", lhs, rhs, abs(lhs - rhs) / abs(rhs))


def mf3_vector(weyl: WeylFunction, z: complex, j: int, kmax: int = 10) -> np.ndarray:
    """Relative residuals of the mf3 identity for the first kmax atoms at once."""
    problem, tol = weyl.problem, weyl.tol
    lam = weyl.spectrum.eigenvalues[:kmax]
    grid = make_grid(problem, np.concatenate([lam, [z]]), j, tol)
    psi = psi_jet(weyl, z, j, grid)
    phi = regular_solution(problem, lam, 0, grid, tol)
    lhs = grid.integrate(phi.taylor_u[:, 0] * psi.u[j][None, :])
    rhs = math.factorial(j) / (lam - z) ** (j + 1)
    return np.abs(lhs - rhs) / np.abs(rhs)


@dataclass
class ParsevalResult:
    j: int
    norm2: float
    spectral: float
    tail: float
    residual: float
    applicable: bool

    def to_dict(self) -> dict:
        return asdict(self)


def parseval_check(weyl: WeylFunction, z: complex, j: int, tol: Tolerances | None = None) -> ParsevalResult:
    """int |psi^(j)|^2 against sum gamma_k (j!)^2 |lambda_k - z|^(-2(j+1)) + tail."""
    tol = tol or weyl.tol
    sp = weyl.spectrum
    psi = psi_jet(weyl, z, j)
    cls = l2_classification(weyl, z, j, psi)
    fj = math.factorial(j) ** 2
    terms = sp.gammas * fj / np.abs(sp.eigenvalues - z) ** (2 * (j + 1))
    if cls.verdict != "integrable":
        # the spectral series diverges with the norm; report the partial sum only
        return ParsevalResult(j, math.inf, float(np.sum(terms)), math.nan, math.nan, False)
    fit = sp.tail or fit_tail(sp)
    tail = float(model_tail_sum(fit, lambda L, G: G * fj / np.abs(L - z) ** (2 * (j + 1)), sp.N + 1, tol=tol))
    total = float(np.sum(terms)) + tail
    norm2 = float(psi.grid.integrate(np.abs(psi.u[j]) ** 2))
    return ParsevalResult(j, norm2, total, tail, abs(norm2 - total) / norm2, True)


# --------------------------------------------------------------------------
# canonical products and conditions (C1)-(C3)


def _split_zero(lam: np.ndarray, zero_tol: float = 1e-12):
    zero = np.abs(lam) <= zero_tol * (1.0 + np.max(np.abs(lam)))
    return lam[~zero], bool(zero.any())


def _clog1p(x):
    # numpy's complex log1p is just log(1 + x) and returns 0 for tiny x
    x = np.asarray(x, dtype=complex)
    re = 0.5 * np.log1p(2.0 * x.real + np.abs(x) ** 2)
    return re + 1j * np.arctan2(x.imag, 1.0 + x.real)


def h_beta(spectrum: Spectrum, z, tol: Tolerances = DEFAULT, tail: bool = True):
    """Canonical product over the atoms with a model tail exp(sum_{k>N} log(1 - z/lambda_k))."""
    zz = np.atleast_1d(np.asarray(z))
    lam, has_zero = _split_zero(spectrum.eigenvalues)
    fac = 1.0 - zz[:, None] / lam[None, :]
    val = np.prod(fac, axis=1).astype(complex)
    if has_zero:
        val = zz * val
    if tail:
        fit = spectrum.tail or fit_tail(spectrum)
        for i, zi in enumerate(zz):
            if val[i] == 0:
                continue
            lt = model_tail_sum(fit, lambda L, G, zi=zi: _clog1p(-zi / L), spectrum.N + 1,
                                tol=tol)
            val[i] = val[i] * np.exp(lt)
    if not np.iscomplexobj(zz):
        val = np.real(val)
    return val[0] if np.ndim(z) == 0 else val


def h_beta_prime(spectrum: Spectrum, x: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Centered differences of h_beta with one Richardson step.

    h oscillates on the scale of the local atom gap, so the base step is a
    small fraction (1/200) of that gap.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lam = spectrum.eigenvalues
    out = np.empty(x.size)
    for i, xi in enumerate(x):
        j = int(np.argmin(np.abs(lam - xi)))
        gaps = [lam[j + 1] - lam[j]] if j + 1 < lam.size else []
        if j > 0:
            gaps.append(lam[j] - lam[j - 1])
        h = min(gaps) / 200.0
        v = h_beta(spectrum, np.array([xi + h, xi - h, xi + 0.5 * h, xi - 0.5 * h]), tol)
        d1 = (v[0] - v[1]) / (2.0 * h)
        d2 = (v[2] - v[3]) / h
        out[i] = (4.0 * d2 - d1) / 3.0
    return out


def h_beta_prime_exact(spectrum: Spectrum, k: int, tol: Tolerances = DEFAULT) -> float:
    """h'(lambda_k) = -(1/lambda_k) prod_{i != k}(1 - lambda_k/lambda_i) with the model tail."""
    lam = spectrum.eigenvalues
    x = lam[k - 1]
    others = np.delete(lam, k - 1)
    val = -np.prod(1.0 - x / others) / x
    fit = spectrum.tail or fit_tail(spectrum)
    lt = model_tail_sum(fit, lambda L, G: np.log1p(-x / L), spectrum.N + 1, tol=tol)
    return float(val * math.exp(lt))


@dataclass
class ExtensionPair:
    first: Spectrum
    second: Spectrum

    def interlacing(self) -> bool:
        a, b = self.first.eigenvalues, self.second.eigenvalues
        n = min(a.size, b.size)
        if n == 0:
            return True
        lab = np.concatenate([np.zeros(n), np.ones(n)])
        vals = np.concatenate([a[:n], b[:n]])
        order = np.argsort(vals, kind="stable")
        seq = lab[order]
        if np.any(np.diff(vals[order]) <= 0):
            return False
        return bool(np.all(seq[1:] != seq[:-1]))


@dataclass
class CReport:
    n: int
    c1_partial: float
    c1_tail: float
    c1_limit: float
    c2_plus: float
    c2_minus: float
    c2_note: str
    c3_partial: np.ndarray
    c3_decay: float
    c3_raabe: float
    c3_verdict: str
    interlacing: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c3_partial"] = float(self.c3_partial[-1]) if self.c3_partial.size else 0.0
        return d


def c_conditions(pair: ExtensionPair, n: int, tol: Tolerances = DEFAULT, use_exact_derivative: bool = False) -> CReport:
    if not pair.interlacing():
        raise InterlacingError("the two spectra do not interlace")
    s1, s2 = pair.first, pair.second
    x = s1.eigenvalues
    nz = x[np.abs(x) > 0]
    fit1 = s1.tail or fit_tail(s1)
    # (C1)
    c1_partial = float(np.sum(1.0 / nz))
    c1_tail = float(model_tail_sum(fit1, lambda L, G: 1.0 / L, s1.N + 1, tol=tol))
    # (C2)
    pos = x[x > 0]
    neg = x[x <= 0]
    j = np.arange(1, pos.size + 1)
    c2_plus = 0.0 if fit1.p > 1.0 else float(j[-1] / pos[-1])
    c2_minus = 0.0
    note = "nonpositive branch finite; limit taken as 0" if neg.size else "no nonpositive atoms"
    # (C3)
    m = nz.size - 1  # the last atom lacks a right neighbour for differencing
    xs = nz[:m]
    h2 = h_beta(s2, xs, tol)
    if use_exact_derivative:
        idx = np.flatnonzero(np.abs(x) > 0)[:m] + 1
        h1p = np.array([h_beta_prime_exact(s1, int(k), tol) for k in idx])
    else:
        h1p = h_beta_prime(s1, xs, tol)
    terms = np.abs(1.0 / (xs ** (2 * n) * h2 * h1p))
    partial = np.cumsum(terms)
    half = max(2, terms.size // 2)
    kk = np.arange(1, terms.size + 1)
    decay = float(-np.polyfit(np.log(kk[half:]), np.log(terms[half:]), 1)[0])
    raabe = float(np.mean((kk[half:-1]) * (terms[half:-1] / terms[half + 1:] - 1.0)))
    if decay > 1.25 and raabe > 1.0:
        verdict = "convergent"
    elif decay < 0.75:
        verdict = "divergent"
    else:
        verdict = "inconclusive"
    return CReport(n, c1_partial, c1_tail, c1_partial + c1_tail, c2_plus, c2_minus, note, partial, decay, raabe,
                   verdict, True)


# --------------------------------------------------------------------------
# minimal n


def bessel_threshold(l: float) -> int:
    """Smallest n >= 1 with 2n >= floor(l + 5/2)."""
    f = math.floor(l + 2.5)
    return max(1, -(-f // 2))


def corollary_reading(l: float) -> int:
    return int(math.floor(l + 2.5))


@dataclass
class EntireIndexReport:
    l: float
    z: complex
    classifications: list = field(default_factory=list)
    j_star: int | None = None
    minimal_n: int | None = None
    threshold_n: int = 0
    corollary_n: int = 0
    moment_n: int | None = None
    monotone: bool = True
    c_report: CReport | None = None

    @property
    def consistent(self) -> bool:
        return self.minimal_n is not None and self.minimal_n == self.threshold_n

    def to_dict(self) -> dict:
        return {
            "l": self.l, "z": [self.z.real, self.z.imag],
            "classifications": [c.to_dict() for c in self.classifications],
            "j_star": self.j_star, "minimal_n": self.minimal_n, "threshold_n": self.threshold_n,
            "corollary_n": self.corollary_n, "moment_n": self.moment_n, "monotone": self.monotone,
            "c_conditions": None if self.c_report is None else self.c_report.to_dict(),
        }


def minimal_n_estimate(weyl: WeylFunction, z: complex = -1.0 + 1.0j, jmax: int = 5,
                       spectrum: Spectrum | None = None) -> EntireIndexReport:
    """Classify psi^(j) for j = 0, 1, ... until the first integrable order."""
    problem = weyl.problem
    rep = EntireIndexReport(problem.l, complex(z), threshold_n=bessel_threshold(problem.l),
                            corollary_n=corollary_reading(problem.l))
    J = min(jmax, weyl.tol.jet_cap)
    psi = None
    for j in range(J + 1):
        if psi is None or psi.J < j:
            psi = psi_jet(weyl, z, min(J, j + 2))
        res = l2_classification(weyl, z, j, psi)
        rep.classifications.append(res)
        if res.verdict == "integrable" and rep.j_star is None:
            rep.j_star = j
            rep.minimal_n = j + 1
            # one more order confirms monotonicity
            if j + 1 <= J:
                nxt = l2_classification(weyl, z, j + 1, psi if psi.J >= j + 1 else None)
                rep.classifications.append(nxt)
                rep.monotone = nxt.verdict == "integrable"
            break
    sp = spectrum or weyl.spectrum
    if sp is not None and sp.gammas is not None and sp.N >= 8:
        rep.moment_n = smallest_summable_moment(sp)
    return rep


__all__ = [
    "PsiJet", "psi_jet", "route_agreement", "L2Result", "l2_classification", "ladder_integrals",
    "classify_ladder", "verify_mf1", "verify_mf2", "verify_mf3", "mf3_vector", "parseval_check",
    "h_beta", "h_beta_prime", "h_beta_prime_exact", "ExtensionPair", "CReport", "c_conditions",
    "bessel_threshold", "corollary_reading", "EntireIndexReport", "minimal_n_estimate",
    "moment_test", "LadderError", "InterlacingError",
]
