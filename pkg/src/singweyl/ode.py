"""Entire solutions phi, theta, chi and their z-derivative jets.

Internally a jet is stored as Taylor coefficients U_t = d^t u / dz^t / t!.
They satisfy the variational system

    -U_t'' + (q_total - z) U_t = U_(t-1),

which is what j-fold z-differentiation of tau u = z u gives after dividing by
j!. Near the origin the jets come from the Frobenius series; on [x0, b] they
are propagated with DOP853. Many spectral parameters are integrated in one
batch (one state block per z) so eigenvalue scans cost one ODE solve.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .config import DEFAULT, Tolerances
from .frobenius import (FrobeniusSeries, SeriesError, choose_start, frobenius_series,
                        taylor_to_derivs, tmul)
from .problem import SturmLiouvilleProblem
from .quadrature import Grid


class IntegrationError(RuntimeError):
    """The ODE integrator failed to reach the end of the interval."""


class GridMismatchError(ValueError):
    """Two jets live on different grids."""


class NormalizationError(RuntimeError):
    """W(theta, phi) differs from 1 beyond tolerance."""


@dataclass
class SolutionJet:
    """Values of u and u' (and their z-derivatives) on a grid.

    ``taylor_u[i, t, k]`` is the t-th Taylor coefficient in z of u(z_i, x_k);
    ``u`` and ``du`` give plain derivatives d^t/dz^t.
    """

    kind: str
    z: np.ndarray
    J: int
    grid: Grid
    taylor_u: np.ndarray
    taylor_du: np.ndarray
    series: FrobeniusSeries | None = None

    @property
    def u(self) -> np.ndarray:
        return taylor_to_derivs(self.taylor_u, axis=1)

    @property
    def du(self) -> np.ndarray:
        return taylor_to_derivs(self.taylor_du, axis=1)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def taylor_at(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.taylor_u[:, :, i], self.taylor_du[:, :, i]

    def conj(self) -> "SolutionJet":
        return SolutionJet(self.kind, np.conj(self.z), self.J, self.grid,
                           np.conj(self.taylor_u), np.conj(self.taylor_du), None)


def _as_z(z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z))
    if z.ndim != 1:
        raise ValueError("z must be a scalar or a 1-d array")
    if np.iscomplexobj(z) and np.all(z.imag == 0):
        z = z.real.copy()
    return z


def _series(problem: SturmLiouvilleProblem, z: np.ndarray, J: int, tol: Tolerances) -> FrobeniusSeries:
    if J > tol.jet_cap:
        raise ValueError(f"jet order {J} exceeds the cap {tol.jet_cap}")
    return frobenius_series(problem.potential.series_coefficients(), problem.l, z, J, tol.series_terms)


def _panel_width(problem: SturmLiouvilleProblem, z: np.ndarray, tol: Tolerances) -> float:
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    env = problem.potential_envelope() if not problem.potential.is_zero else 0.0
    return min(problem.b / 8.0, tol.panel_kappa / math.sqrt(max(1.0, zmax + env)))


def make_grid(problem: SturmLiouvilleProblem, z, J: int = 0, tol: Tolerances = DEFAULT) -> Grid:
    """A grid whose Frobenius start is valid for every z given."""
    z = _as_z(z)
    series = _series(problem, z, J, tol)
    m0 = choose_start(series, problem.b, problem.potential.series_radius(),
                      tol.series_tail, tol.series_cancellation)
    return Grid.build(problem.b, m0, _panel_width(problem, z, tol), tol.gl_nodes, tol.deep_levels)


def _check_grid(series: FrobeniusSeries, grid: Grid, tol: Tolerances):
    if not series.tail_ok(grid.x0, tol.series_tail, tol.series_cancellation):
        raise SeriesError(f"grid start x0 = {grid.x0:g} too large for these spectral parameters")


def propagate(problem: SturmLiouvilleProblem, z: np.ndarray, y0: np.ndarray, xs: np.ndarray,
              tol: Tolerances = DEFAULT) -> np.ndarray:
    """Integrate the variational system from xs[0] through the points xs.

    y0 has shape (nz, J+1, 2) holding Taylor jets of (u, u') at xs[0].
    Returns an array (nz, J+1, 2, len(xs)).
    """
    nz, J1, _ = y0.shape
    dtype = np.result_type(y0, z, float)
    scale = np.max(np.abs(y0.reshape(nz, -1)), axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    yn = (y0 / scale[:, None, None]).astype(dtype)
    zc = z[:, None]

    def rhs(x, y):
        Y = y.reshape(nz, J1, 2)
        u = Y[:, :, 0]
        acc = (problem.q_total(x) - zc) * u
        acc[:, 1:] -= u[:, :-1]
        return np.stack([Y[:, :, 1], acc], axis=-1).ravel()

    sol = solve_ivp(rhs, (xs[0], xs[-1]), yn.ravel(), method="DOP853", t_eval=xs,
                    rtol=tol.ode_rtol, atol=tol.ode_atol)
    if sol.status != 0 or sol.y.shape[1] != xs.size:
        raise IntegrationError(sol.message)
    out = sol.y.reshape(nz, J1, 2, xs.size)
    return out * scale[:, None, None, None]


def _ode_points(grid: Grid) -> np.ndarray:
    return grid.x[grid.ode_mask]


def _assemble(grid: Grid, series_vals, ode_vals):
    su, sdu = series_vals
    ou, odu = ode_vals
    nz, J1 = su.shape[:2]
    dtype = np.result_type(su, ou)
    U = np.empty((nz, J1, grid.x.size), dtype=dtype)
    dU = np.empty_like(U)
    smask, omask = grid.series_mask, grid.ode_mask
    U[:, :, smask], dU[:, :, smask] = su, sdu
    U[:, :, omask], dU[:, :, omask] = ou, odu
    return U, dU


def _forward(problem, z, J, grid, tol, kind):
    z = _as_z(z)
    series = _series(problem, z, J, tol)
    if grid is None:
        m0 = choose_start(series, problem.b, problem.potential.series_radius(),
                          tol.series_tail, tol.series_cancellation)
        grid = Grid.build(problem.b, m0, _panel_width(problem, z, tol), tol.gl_nodes, tol.deep_levels)
    else:
        _check_grid(series, grid, tol)
    evalf = series.phi if kind == "phi" else series.theta
    xs_series = grid.x[grid.series_mask]
    su, sdu = evalf(xs_series)
    y0 = np.stack([su[:, :, -1], sdu[:, :, -1]], axis=-1)
    traj = propagate(problem, z, y0, _ode_points(grid), tol)
    U, dU = _assemble(grid, (su, sdu), (traj[:, :, 0], traj[:, :, 1]))
    return SolutionJet(kind, z, J, grid, U, dU, series)


def regular_solution(problem: SturmLiouvilleProblem, z, J: int = 0, grid: Grid | None = None,
                     tol: Tolerances = DEFAULT) -> SolutionJet:
    """phi(z, x) ~ x^(l+1) at the origin, with J z-derivatives."""
    return _forward(problem, z, J, grid, tol, "phi")


def second_solution(problem: SturmLiouvilleProblem, z, J: int = 0, grid: Grid | None = None,
                    tol: Tolerances = DEFAULT, wronskian_tol: float = 1e-8) -> SolutionJet:
    """theta(z, x) with W(theta, phi) = 1; leading term x^(-l)/(2l+1)."""
    jet = _forward(problem, z, J, grid, tol, "theta")
    x0 = jet.grid.x0
    pu, pdu = jet.series.phi(x0)
    tu, tdu = jet.series.theta(x0)
    w = tu[:, 0, 0] * pdu[:, 0, 0] - tdu[:, 0, 0] * pu[:, 0, 0]
    if np.any(np.abs(w - 1.0) > wronskian_tol):
        raise NormalizationError(f"W(theta, phi) = {w} at the Frobenius start")
    return jet


def endpoint_solution(problem: SturmLiouvilleProblem, z, J: int = 0, grid: Grid | None = None,
                      tol: Tolerances = DEFAULT) -> SolutionJet:
    """chi(z, x) with (chi, chi')(b) = (-sin beta, cos beta) for every z.

    Integrated backwards from b. Below x0, chi = alpha theta + beta phi with
    alpha = W(chi, phi) and beta = W(theta, chi) read off at x0.
    """
    z = _as_z(z)
    series = _series(problem, z, J, tol)
    if grid is None:
        grid = make_grid(problem, z, J, tol)
    else:
        _check_grid(series, grid, tol)
    nz = z.size
    dtype = np.result_type(z, float)
    yb = np.zeros((nz, J + 1, 2), dtype=dtype)
    yb[:, 0, 0], yb[:, 0, 1] = problem.bc_right.endpoint_data
    xs = _ode_points(grid)[::-1]
    traj = propagate(problem, z, yb, xs, tol)[..., ::-1]
    cu, cdu = traj[:, :, 0], traj[:, :, 1]
    x_series = grid.x[grid.series_mask]
    pu, pdu = series.phi(x_series)
    tu, tdu = series.theta(x_series)
    c0, cd0 = cu[:, :, 0], cdu[:, :, 0]
    p0, pd0 = pu[:, :, -1], pdu[:, :, -1]
    t0, td0 = tu[:, :, -1], tdu[:, :, -1]
    alpha = tmul(c0, pd0) - tmul(cd0, p0)
    beta = tmul(t0, cd0) - tmul(td0, c0)
    su = _combine(alpha, tu, beta, pu)
    sdu = _combine(alpha, tdu, beta, pdu)
    U, dU = _assemble(grid, (su, sdu), (cu, cdu))
    return SolutionJet("chi", z, J, grid, U, dU, series)


def _combine(alpha, t, beta, p):
    """Taylor product alpha*t + beta*p with t, p shaped (nz, J+1, nx)."""
    out = np.zeros(np.broadcast_shapes(t.shape, p.shape), dtype=np.result_type(alpha, t, beta, p))
    J1 = t.shape[1]
    for tt in range(J1):
        for i in range(tt + 1):
            out[:, tt] += alpha[:, i, None] * t[:, tt - i] + beta[:, i, None] * p[:, tt - i]
    return out


def wronskian_at(u: SolutionJet, v: SolutionJet, x: float):
    """u(x) v'(x) - u'(x) v(x) for the undifferentiated solutions."""
    if not u.grid.same_as(v.grid):
        raise GridMismatchError("jets live on different grids")
    i = u.grid.index(x)
    w = u.taylor_u[:, 0, i] * v.taylor_du[:, 0, i] - u.taylor_du[:, 0, i] * v.taylor_u[:, 0, i]
    return w[0] if w.size == 1 else w


def wronskian_profile(u: SolutionJet, v: SolutionJet) -> np.ndarray:
    """W_x(u, v) at every grid point; shape (nz, nx)."""
    if not u.grid.same_as(v.grid):
        raise GridMismatchError("jets live on different grids")
    return u.taylor_u[:, 0] * v.taylor_du[:, 0] - u.taylor_du[:, 0] * v.taylor_u[:, 0]


def wronskian_taylor(u: SolutionJet, v: SolutionJet, i: int) -> np.ndarray:
    """Taylor jet in z of W_x(u, v) at grid index i; shape (nz, J+1)."""
    if not u.grid.same_as(v.grid):
        raise GridMismatchError("jets live on different grids")
    U, dU = u.taylor_at(i)
    V, dV = v.taylor_at(i)
    J1 = min(U.shape[1], V.shape[1])
    return tmul(U[:, :J1], dV[:, :J1]) - tmul(dU[:, :J1], V[:, :J1])


def endpoint_values(problem: SturmLiouvilleProblem, kind: str, z, J: int = 0,
                    tol: Tolerances = DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Taylor jets of (u(b), u'(b)) for u = phi or theta, without a full grid."""
    z = _as_z(z)
    series = _series(problem, z, J, tol)
    m0 = choose_start(series, problem.b, problem.potential.series_radius(),
                      tol.series_tail, tol.series_cancellation)
    x0 = problem.b * 2.0 ** (-m0)
    evalf = series.phi if kind == "phi" else series.theta
    su, sdu = evalf(x0)
    y0 = np.stack([su[:, :, 0], sdu[:, :, 0]], axis=-1)
    traj = propagate(problem, z, y0, np.array([x0, problem.b]), tol)
    return traj[:, :, 0, -1], traj[:, :, 1, -1]


def dump_jet_csv(jet: SolutionJet, path: str | Path, index: int = 0) -> None:
    """Columns x, then Re/Im of u_j and u_j' for j = 0..J (plain derivatives)."""
    u, du = jet.u[index], jet.du[index]
    header = ["x"]
    for j in range(jet.J + 1):
        header += [f"re_u{j}", f"im_u{j}", f"re_du{j}", f"im_du{j}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, x in enumerate(jet.x):
            row = [repr(float(x))]
            for j in range(jet.J + 1):
                row += [repr(float(np.real(u[j, k]))), repr(float(np.imag(u[j, k]))),
                        repr(float(np.real(du[j, k]))), repr(float(np.imag(du[j, k])))]
            w.writerow(row)
