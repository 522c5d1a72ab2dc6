"""Hermite-Biehler function E(z) and the de Branges kernel of the spectral space.

Reference solutions c, s at a real z_ref have endpoint data (1, 0) and (0, 1)
at b, so W(c, s) = 1 and

    A(z) = W_b(c, phi(z)) = phi'(z, b),   B(z) = W_b(s, phi(z)) = -phi(z, b),
    E = A + i B.

The kernel (E(z) E#(w*) - E(w*) E#(z)) / (2i (w* - z)) reduces to
(B(z) A(u) - A(z) B(u)) / (u - z) with u = conj(w); on the confluent line
u = z it becomes B A' - A B', taken from the first z-derivative jet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .ode import SolutionJet, endpoint_values, make_grid, propagate, regular_solution, wronskian_profile
from .problem import SturmLiouvilleProblem
from .spectrum import Spectrum, moment_test


@dataclass
class HermiteBiehlerFunction:
    problem: SturmLiouvilleProblem
    z_ref: float
    c: SolutionJet
    s: SolutionJet
    tol: Tolerances = DEFAULT

    def AB(self, z, J: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Taylor jets of A and B at each z; shape (nz, J+1)."""
        u, du = endpoint_values(self.problem, "phi", z, J, self.tol)
        cb, dcb = self.c.taylor_u[0, 0, -1], self.c.taylor_du[0, 0, -1]
        sb, dsb = self.s.taylor_u[0, 0, -1], self.s.taylor_du[0, 0, -1]
        return cb * du - dcb * u, sb * du - dsb * u

    def __call__(self, z):
        A, B = self.AB(np.atleast_1d(np.asarray(z)))
        out = A[:, 0] + 1j * B[:, 0]
        return out[0] if np.ndim(z) == 0 else out

    def sharp(self, z):
        """E#(z) = conj(E(conj z))."""
        return np.conj(self(np.conj(z)))

    def reference_wronskian_defect(self) -> float:
        w = wronskian_profile(self.c, self.s)
        return float(np.max(np.abs(w - 1.0)))


def _backward(problem, z_ref, data, grid, tol):
    y = np.zeros((1, 1, 2))
    y[0, 0] = data
    xs = grid.x[grid.ode_mask][::-1]
    traj = propagate(problem, np.array([z_ref]), y, xs, tol)[..., ::-1]
    sub = grid.x[grid.ode_mask]
    # reference solutions only live on [x0, b]; use a grid view restricted there
    return SolutionJet("ref", np.array([z_ref]), 0, grid, traj[:, :, 0], traj[:, :, 1]), sub


def build_E(problem: SturmLiouvilleProblem, z_ref: float = 0.0, tol: Tolerances = DEFAULT) -> HermiteBiehlerFunction:
    if np.iscomplexobj(z_ref) and np.imag(z_ref) != 0:
        raise ValueError("z_ref must be real")
    grid = make_grid(problem, [z_ref], 0, tol)
    c, _ = _backward(problem, float(z_ref), (1.0, 0.0), grid, tol)
    s, _ = _backward(problem, float(z_ref), (0.0, 1.0), grid, tol)
    return HermiteBiehlerFunction(problem, float(z_ref), c, s, tol)


def hb_check(E: HermiteBiehlerFunction, samples) -> float:
    """min over samples in the upper half plane of |E(z)| - |E(conj z)|."""
    z = np.atleast_1d(np.asarray(samples, dtype=complex))
    if np.any(z.imag <= 0):
        raise ValueError("samples must lie strictly in the upper half plane")
    return float(np.min(np.abs(E(z)) - np.abs(E(np.conj(z)))))


def real_zero_margin(E: HermiteBiehlerFunction, lam) -> float:
    """min |E| over real points, relative to the largest |E| there."""
    v = np.abs(E(np.asarray(lam, dtype=float)))
    return float(np.min(v) / np.max(v))


def kernel_formula(E: HermiteBiehlerFunction, w, z, confluent_tol: float = 1e-7) -> np.ndarray:
    """K(w, z) from A and B; pairs with conj(w) close to z use the confluent limit."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    u = np.conj(w)
    Az, Bz = E.AB(z, 1)
    Au, Bu = E.AB(u, 0)
    out = (Bz[:, 0] * Au[:, 0] - Az[:, 0] * Bu[:, 0]) / np.where(u == z, 1.0, u - z)
    conf = np.abs(u - z) <= confluent_tol * (1.0 + np.abs(z))
    if conf.any():
        out[conf] = Bz[conf, 0] * Az[conf, 1] - Az[conf, 0] * Bz[conf, 1]
    return out


def kernel_integral(problem: SturmLiouvilleProblem, w, z, tol: Tolerances = DEFAULT) -> np.ndarray:
    """K(w, z) = int_0^b conj(phi(w, x)) phi(z, x) dx."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    pts = np.concatenate([w, z])
    grid = make_grid(problem, pts, 0, tol)
    phi = regular_solution(problem, pts, 0, grid, tol).taylor_u[:, 0]
    n = w.size
    return grid.integrate(np.conj(phi[:n]) * phi[n:])


def kernel(problem: SturmLiouvilleProblem, w, z, route: str = "formula", E: HermiteBiehlerFunction | None = None,
           tol: Tolerances = DEFAULT):
    if route == "integral":
        out = kernel_integral(problem, w, z, tol)
    elif route == "formula":
        out = kernel_formula(E or build_E(problem, 0.0, tol), w, z)
    else:
        raise ValueError(f"unknown kernel route {route!r}")
    return out[0] if np.ndim(w) == 0 and np.ndim(z) == 0 else out


def gram_matrix(problem: SturmLiouvilleProblem, points, tol: Tolerances = DEFAULT) -> np.ndarray:
    p = np.asarray(points, dtype=complex)
    n = p.size
    W, Z = np.meshgrid(p, p, indexing="ij")
    return kernel_integral(problem, W.ravel(), Z.ravel(), tol).reshape(n, n)


def psd_margin(G: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part divided by the trace."""
    H = 0.5 * (G + G.conj().T)
    return float(np.min(np.linalg.eigvalsh(H)) / np.real(np.trace(H)))


@dataclass
class ReproducingResult:
    value: complex
    target: complex
    residual: float

    def to_dict(self) -> dict:
        return {"value": [self.value.real, self.value.imag], "target": [self.target.real, self.target.imag],
                "residual": self.residual}


def reproducing_check(E: HermiteBiehlerFunction, spectrum: Spectrum, coeffs: dict[int, complex], w: complex) -> ReproducingResult:
    """<F, K(w, .)> through the spectral sum against F(w), F = sum a_k K(lambda_k, .).

    The residual is normalised by ||F|| ||K(w, .)|| so it stays meaningful when
    F(w) itself vanishes (e.g. F = K(lambda_1, .), w = lambda_2).
    """
    lam, gam = spectrum.eigenvalues, spectrum.gammas
    if not coeffs:
        return ReproducingResult(0j, 0j, 0.0)
    ks = np.array(sorted(coeffs))
    a = np.array([coeffs[k] for k in ks], dtype=complex)

    def F(z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        Wk = np.repeat(lam[ks - 1], z.size)
        Zk = np.tile(z, ks.size)
        K = kernel_formula(E, Wk, Zk).reshape(ks.size, z.size)
        return a @ K

    F_atoms = F(lam)
    K_w_atoms = kernel_formula(E, np.full(lam.size, w, dtype=complex), lam)
    value = complex(np.sum(gam * np.conj(K_w_atoms) * F_atoms))
    target = complex(F(w)[0])
    norm_f = np.sqrt(np.sum(gam * np.abs(F_atoms) ** 2))
    norm_k = np.sqrt(abs(kernel_formula(E, np.array([w]), np.array([w]))[0]))
    scale = max(abs(target), norm_f * norm_k)
    return ReproducingResult(value, target, abs(value - target) / scale if scale > 0 else 0.0)


def assoc_membership(spectrum: Spectrum, n: int, tol: Tolerances = DEFAULT) -> str:
    """Is the constant 1 in assoc_n of the space? Decided by the moment series."""
    verdict = moment_test(spectrum, n, tol).verdict
    return {"summable": "member", "divergent": "non-member"}.get(verdict, "inconclusive")
