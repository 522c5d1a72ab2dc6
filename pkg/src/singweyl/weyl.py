"""Singular Weyl function M(z), gauge changes and pole diagnostics.

M is the coefficient for which psi = theta + M phi satisfies the boundary
condition at b. With W(z) = W(chi, phi) that is M = sigma W(theta, chi) / W,
where the sign sigma is fixed when the function is built by checking which
choice actually makes psi proportional to chi.

A gauge (g, f) replaces phi -> e^g phi and theta -> e^-g theta - f phi, which
keeps W(theta, phi) = 1 and turns M into e^-2g M + e^-g f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .config import DEFAULT, Tolerances
from .frobenius import tinv, tmul
from .quadrature import graded_nodes
from .ode import endpoint_solution, endpoint_values, make_grid, regular_solution, second_solution
from .problem import SturmLiouvilleProblem
from .spectrum import Spectrum


class PoleError(ValueError):
    """z lies within the exclusion radius of an eigenvalue."""


class ContourError(RuntimeError):
    """No admissible contour radius around a pole."""


class GaugeError(ValueError):
    """A gauge could not be constructed from the available data."""


def _poly(c) -> Polynomial:
    if isinstance(c, Polynomial):
        return c
    return Polynomial(np.asarray(c if c is not None and len(c) else [0.0], dtype=float))


@dataclass
class WeylGauge:
    """Real entire gauge pair; g is a real polynomial, f a polynomial or callable.

    ``weight`` is the regularising weight ghat(lambda) = exp(2 g(lambda)) used by
    the integral representation.
    """

    g: Polynomial = field(default_factory=lambda: Polynomial([0.0]))
    f: Polynomial | Callable = field(default_factory=lambda: Polynomial([0.0]))

    def __post_init__(self):
        self.g = _poly(self.g)
        if not callable(self.f) or isinstance(self.f, (list, tuple, np.ndarray)):
            self.f = _poly(self.f)

    @property
    def trivial(self) -> bool:
        f0 = isinstance(self.f, Polynomial) and not np.any(self.f.coef)
        return f0 and not np.any(self.g.coef)

    def gval(self, z):
        return self.g(z)

    def fval(self, z):
        return self.f(z)

    def weight(self, lam):
        return np.exp(2.0 * self.g(lam))

    @property
    def degree(self) -> int:
        c = np.trim_zeros(self.g.coef, "b")
        return max(0, c.size - 1)

    def to_dict(self) -> dict:
        f = self.f.coef.tolist() if isinstance(self.f, Polynomial) else "herglotz-correction"
        return {"g": self.g.coef.tolist(), "f": f}

    @classmethod
    def from_dict(cls, d: dict) -> "WeylGauge":
        return cls(d.get("g", [0.0]), d.get("f", [0.0]))


TRIVIAL = WeylGauge()


def _endpoint_wronskians(problem, z, J, tol):
    """Taylor jets of W(theta, chi) and W(chi, phi) at b."""
    sb, cb = math.sin(problem.beta), math.cos(problem.beta)
    pu, pdu = endpoint_values(problem, "phi", z, J, tol)
    tu, tdu = endpoint_values(problem, "theta", z, J, tol)
    w_theta_chi = tu * cb + tdu * sb
    w_chi_phi = -sb * pdu - cb * pu
    return w_theta_chi, w_chi_phi, (pu, pdu, tu, tdu)


@dataclass
class WeylFunction:
    problem: SturmLiouvilleProblem
    sigma: int = 1
    tol: Tolerances = DEFAULT
    spectrum: Spectrum | None = None
    defects: dict = field(default_factory=dict)

    # -- evaluation -------------------------------------------------------

    def _check_poles(self, z):
        if self.spectrum is None or self.spectrum.N == 0:
            return
        lam = self.spectrum.eigenvalues
        d = np.abs(np.asarray(z)[:, None] - lam[None, :])
        rad = self.tol.pole_exclusion * (1.0 + np.abs(lam))
        hit = np.any(d < rad[None, :], axis=1)
        if hit.any():
            raise PoleError(f"z = {np.asarray(z)[hit][0]} is within the pole exclusion radius")

    def jet(self, z, J: int = 0, check: bool = True) -> np.ndarray:
        """Taylor jet of the untransformed M at each z; shape (nz, J+1)."""
        z = np.atleast_1d(np.asarray(z))
        if check:
            self._check_poles(z)
        num, den, _ = _endpoint_wronskians(self.problem, z, J, self.tol)
        return self.sigma * tmul(num, tinv(den))

    def __call__(self, z, gauge: WeylGauge | None = None, check: bool = True):
        return weyl_eval(self, z, gauge, check)

    def char(self, z, J: int = 0) -> np.ndarray:
        return _endpoint_wronskians(self.problem, np.atleast_1d(np.asarray(z)), J, self.tol)[1]

    def derivatives_contour(self, z: complex, J: int, radius: float | None = None,
                            points: int | None = None) -> np.ndarray:
        """d^j M / dz^j for j = 0..J from trapezoidal Cauchy integrals."""
        n = points or max(self.tol.contour_points, 4 * (J + 1))
        if radius is None:
            radius = 0.25
            if self.spectrum is not None and self.spectrum.N:
                radius = min(radius, 0.5 * float(np.min(np.abs(self.spectrum.eigenvalues - z))))
        t = np.exp(2j * np.pi * np.arange(n) / n)
        vals = self.jet(z + radius * t, 0, check=False)[:, 0]
        out = np.empty(J + 1, dtype=complex)
        for j in range(J + 1):
            out[j] = math.factorial(j) * np.mean(vals * t ** (-j)) / radius**j
        return out

    def pole_table(self) -> list[tuple[float, float]]:
        if self.spectrum is None:
            return []
        res = [residue(self, k) for k in range(1, self.spectrum.N + 1)]
        return list(zip(self.spectrum.eigenvalues.tolist(), [r.real for r in res]))

    # -- convention check -------------------------------------------------

    def psi_defect(self, z, nx: int = 20, seed: int = 0, sigma: int | None = None) -> float:
        """max relative defect of psi(x) chi(x_ref) - psi(x_ref) chi(x) over sampled x."""
        return _psi_defect(self.problem, np.atleast_1d(np.asarray(z)), self.sigma if sigma is None else sigma,
                           self.tol, nx, seed)


def _psi_defect(problem, z, sigma, tol, nx, seed):
    grid = make_grid(problem, z, 0, tol)
    phi = regular_solution(problem, z, 0, grid, tol)
    th = second_solution(problem, z, 0, grid, tol)
    chi = endpoint_solution(problem, z, 0, grid, tol)
    ib = grid.ib
    num = th.taylor_u[:, 0, ib] * chi.taylor_du[:, 0, ib] - th.taylor_du[:, 0, ib] * chi.taylor_u[:, 0, ib]
    den = chi.taylor_u[:, 0, ib] * phi.taylor_du[:, 0, ib] - chi.taylor_du[:, 0, ib] * phi.taylor_u[:, 0, ib]
    M = sigma * num / den
    psi = th.taylor_u[:, 0] + M[:, None] * phi.taylor_u[:, 0]
    c = chi.taylor_u[:, 0]
    rng = np.random.default_rng(seed)
    cand = np.flatnonzero((grid.x >= grid.x0 * 0.5 ** 8) & (grid.x < grid.b))
    idx = rng.choice(cand, size=min(nx, cand.size), replace=False)
    iref = grid.index(grid.b * 0.5) if grid.m0 >= 1 else grid.i0
    worst = 0.0
    for i in range(z.size):
        a = psi[i, idx] * c[i, iref] - psi[i, iref] * c[i, idx]
        scale = np.abs(psi[i, idx] * c[i, iref]) + np.abs(psi[i, iref] * c[i, idx])
        worst = max(worst, float(np.max(np.abs(a) / scale)))
    return worst


def build_weyl(problem: SturmLiouvilleProblem, spectrum: Spectrum | None = None, tol: Tolerances = DEFAULT,
               probe=(-1.0 + 0.5j, 2.5 + 1.0j)) -> WeylFunction:
    """Fix the sign convention by the psi-proportional-to-chi test."""
    z = np.asarray(probe, dtype=complex)
    d_plus = _psi_defect(problem, z, 1, tol, 20, 0)
    d_minus = _psi_defect(problem, z, -1, tol, 20, 0)
    sigma = 1 if d_plus <= d_minus else -1
    return WeylFunction(problem, sigma, tol, spectrum, {"+1": d_plus, "-1": d_minus})


def weyl_eval(weyl: WeylFunction, z, gauge: WeylGauge | None = None, check: bool = True):
    """M-tilde(z) computed from the gauge-transformed theta and phi."""
    zz = np.atleast_1d(np.asarray(z))
    if check:
        weyl._check_poles(zz)
    problem = weyl.problem
    sb, cb = math.sin(problem.beta), math.cos(problem.beta)
    pu, pdu = endpoint_values(problem, "phi", zz, 0, weyl.tol)
    tu, tdu = endpoint_values(problem, "theta", zz, 0, weyl.tol)
    pu, pdu, tu, tdu = pu[:, 0], pdu[:, 0], tu[:, 0], tdu[:, 0]
    if gauge is not None and not gauge.trivial:
        eg = np.exp(gauge.gval(zz))
        fz = gauge.fval(zz)
        tu, tdu = tu / eg - fz * pu, tdu / eg - fz * pdu
        pu, pdu = eg * pu, eg * pdu
    out = weyl.sigma * (tu * cb + tdu * sb) / (-sb * pdu - cb * pu)
    return out[0] if np.ndim(z) == 0 else out


# --------------------------------------------------------------------------
# poles and residues


def _contour_radius(spectrum: Spectrum, k: int, frac: float = 0.25) -> float:
    lam = spectrum.eigenvalues
    gaps = []
    if k > 1:
        gaps.append(lam[k - 1] - lam[k - 2])
    if k < spectrum.N:
        gaps.append(lam[k] - lam[k - 1])
    if not gaps:
        return 0.25 * (1.0 + abs(lam[k - 1]))
    r = frac * min(gaps)
    if r < 10 * DEFAULT.pole_exclusion * (1 + abs(lam[k - 1])):
        raise ContourError(f"eigenvalues around k = {k} too close for a contour")
    return r


def contour_residue(func, center: float, radius: float, points: int = 32) -> complex:
    t = np.exp(2j * np.pi * (np.arange(points) + 0.5) / points)
    z = center + radius * t
    return complex(np.mean(func(z) * radius * t))


def residue(weyl: WeylFunction, k: int, gauge: WeylGauge | None = None) -> complex:
    if weyl.spectrum is None:
        raise ValueError("residues need a spectrum")
    lam = float(weyl.spectrum.eigenvalues[k - 1])
    r = _contour_radius(weyl.spectrum, k)
    return contour_residue(lambda z: weyl_eval(weyl, z, gauge, check=False), lam, r, weyl.tol.contour_points)


def residue_check(weyl: WeylFunction, k: int, gauge: WeylGauge | None = None) -> float:
    """|Res_{lambda_k} M + gamma_k| / gamma_k."""
    g = float(weyl.spectrum.gammas[k - 1])
    if gauge is not None:
        g *= math.exp(-2.0 * float(gauge.gval(weyl.spectrum.eigenvalues[k - 1])))
    return abs(residue(weyl, k, gauge) + g) / g


# --------------------------------------------------------------------------
# Herglotz gauge and integral representation


class HerglotzCorrection:
    """f(z) = e^g(z) sum_k w_k/(lambda_k - z) - e^-g(z) M(z), entire by construction."""

    def __init__(self, weyl: WeylFunction, g: Polynomial, lam: np.ndarray, w: np.ndarray):
        self.weyl, self.g, self.lam, self.w = weyl, g, lam, w

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z))
        s = np.sum(self.w[None, :] / (self.lam[None, :] - z[:, None]), axis=1)
        m = weyl_eval(self.weyl, z, None, check=False)
        g = self.g(z)
        return np.exp(g) * s - np.exp(-g) * m


def herglotz_gauge(spectrum: Spectrum, weyl: WeylFunction | None = None, decay: float = 36.0) -> WeylGauge:
    """Degree-one g with exp(-2 g(lambda_k)) gamma_k summable, plus the matching f.

    If sum gamma_k already converges by the tail fit, g = 0.
    Otherwise g(lambda) = c lambda with c chosen so the last computed weight is
    exp(-decay) below the largest.
    """
    if spectrum.gammas is None or spectrum.N < 2:
        raise GaugeError("Herglotz gauge needs norming constants")
    fit = spectrum.tail
    summable = fit is not None and fit.ok and fit.r < -1.25
    lam, gam = spectrum.eigenvalues, spectrum.gammas
    if summable:
        g = Polynomial([0.0])
    else:
        if fit is not None and not fit.ok:
            raise GaugeError("tail fit inconclusive")
        span = lam[-1] - lam[0]
        if span <= 0:
            raise GaugeError("degenerate spectrum")
        c = (0.5 * decay + 0.5 * math.log(max(gam.max(), gam[-1]) / gam.min())) / span
        g = Polynomial([-c * lam[0], c])
    w = np.exp(-2.0 * g(lam)) * gam
    if weyl is None:
        return WeylGauge(g, Polynomial([0.0]))
    return WeylGauge(g, HerglotzCorrection(weyl, g, lam, w))


def herglotz_partial_sums(spectrum: Spectrum, gauge: WeylGauge) -> np.ndarray:
    lam = spectrum.eigenvalues
    return np.cumsum(np.exp(-2.0 * gauge.g(lam)) * spectrum.gammas / (1.0 + lam**2))


def representation_difference(weyl: WeylFunction, spectrum: Spectrum, weight: Callable, z):
    """D(z) = M(z) - ghat(z) sum_k [1/(lambda_k - z) - lambda_k/(1+lambda_k^2)] gamma_k/ghat(lambda_k)."""
    z = np.atleast_1d(np.asarray(z))
    lam, gam = spectrum.eigenvalues, spectrum.gammas
    coef = gam / weight(lam)
    s = np.sum(coef[None, :] * (1.0 / (lam[None, :] - z[:, None]) - (lam / (1.0 + lam**2))[None, :]), axis=1)
    return weyl_eval(weyl, z, None, check=False) - weight(z) * s


def integral_representation_check(weyl: WeylFunction, spectrum: Spectrum, gauge: WeylGauge,
                                  kmax: int = 10) -> float:
    """max_k |Res_{lambda_k} D| / gamma_k over the first kmax eigenvalues."""
    worst = 0.0
    for k in range(1, min(kmax, spectrum.N - 1) + 1):
        lam = float(spectrum.eigenvalues[k - 1])
        r = _contour_radius(spectrum, k)
        res = contour_residue(lambda z: representation_difference(weyl, spectrum, gauge.weight, z), lam, r,
                              weyl.tol.contour_points)
        worst = max(worst, abs(res) / float(spectrum.gammas[k - 1]))
    return worst


# --------------------------------------------------------------------------
# Stieltjes-Livsic inversion


def _lorentz_integral(weyl, lam, half, eps, n_gl):
    """(1/pi) int_{lam-half}^{lam+half} Im M(x + i eps) dx on a mesh graded at lam."""
    x, w = graded_nodes(lam, half, eps, n_gl)
    vals = weyl_eval(weyl, x + 1j * eps, None, check=False)
    return float(np.sum(w * vals.imag) / math.pi)


def stieltjes_recovery(weyl: WeylFunction, k: int, levels: int = 4, n_gl: int = 16) -> dict:
    """Recover gamma_k from Im M near the real axis.

    I(eps) = gamma_k + a1 eps + a3 eps^3 + ... ; a Richardson table in odd
    powers of eps removes the leading terms.
    """
    sp = weyl.spectrum
    lam = float(sp.eigenvalues[k - 1])
    gaps = []
    if k > 1:
        gaps.append(lam - sp.eigenvalues[k - 2])
    if k < sp.N:
        gaps.append(sp.eigenvalues[k] - lam)
    half = 0.5 * min(gaps) if gaps else 0.5
    eps = [half / 4.0 / 2**i for i in range(levels)]
    raw = [_lorentz_integral(weyl, lam, half, e, n_gl) for e in eps]
    table = [raw]
    powers = [1, 3, 5, 7, 9]
    for m in range(1, levels):
        prev = table[-1]
        q = 2.0 ** powers[m - 1]
        table.append([(q * prev[i + 1] - prev[i]) / (q - 1.0) for i in range(len(prev) - 1)])
    est = table[-1][-1]
    gam = float(sp.gammas[k - 1])
    return {"k": k, "eps": eps, "raw": raw, "estimate": est, "gamma": gam,
            "relative_error": abs(est - gam) / gam}
