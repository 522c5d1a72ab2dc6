"""Frobenius solutions at the Bessel origin, carried as Taylor jets in z.

Near x = 0 write x^2 (q(x) - z') = sum_k d_k x^k with z' = z + delta. Every
coefficient below is a truncated Taylor series in delta (last axis, length
J + 1), so z-derivatives of the solutions come out of the recursion exactly.

With N = 2l + 1 the two Frobenius indices are l + 1 and -l:

* regular solution   phi = sum_n a_n x^(n+l+1),            a_0 = 1,
  a_n n (n + N) = sum_k d_k a_(n-k);
* second solution    theta = C phi log x + sum_n b_n x^(n-l),
  b_n n (n - N) = sum_k d_k b_(n-k) - C a_(n-N) (2(n-N) + N).

For N not an integer C = 0. For integer N >= 1 the resonance at n = N fixes
C and b_N = 0 is chosen. For N = 0 (l = -1/2) C = -1 and b_0 = 0. In all cases
b_0 = 1/N (N > 0) normalises W(theta, phi) = theta phi' - theta' phi = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SeriesError(RuntimeError):
    """No start abscissa meets the truncation criterion."""


def tmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated Cauchy product along the last axis."""
    a, b = np.broadcast_arrays(a, b)
    out = np.zeros(a.shape, dtype=np.result_type(a, b))
    n = a.shape[-1]
    for t in range(n):
        out[..., t] = np.sum(a[..., : t + 1] * b[..., t::-1], axis=-1)
    return out


def tinv(a: np.ndarray) -> np.ndarray:
    """Reciprocal of a truncated Taylor series (last axis)."""
    out = np.zeros(a.shape, dtype=np.result_type(a, 1.0))
    out[..., 0] = 1.0 / a[..., 0]
    for m in range(1, a.shape[-1]):
        out[..., m] = -np.sum(a[..., 1 : m + 1] * out[..., m - 1 :: -1][..., :m], axis=-1) / a[..., 0]
    return out


def tshift(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[..., 1:] = a[..., :-1]
    return out


def taylor_to_derivs(a: np.ndarray, axis: int = -1) -> np.ndarray:
    n = a.shape[axis]
    f = np.array([math.factorial(t) for t in range(n)], dtype=float)
    shape = [1] * a.ndim
    shape[axis] = n
    return a * f.reshape(shape)


def derivs_to_taylor(a: np.ndarray, axis: int = -1) -> np.ndarray:
    n = a.shape[axis]
    f = np.array([math.factorial(t) for t in range(n)], dtype=float)
    shape = [1] * a.ndim
    shape[axis] = n
    return a / f.reshape(shape)


def _integer_index(N: float) -> int | None:
    r = round(N)
    return int(r) if abs(N - r) < 1e-12 else None


@dataclass
class FrobeniusSeries:
    l: float
    z: np.ndarray
    J: int
    a: np.ndarray          # (nterms, nz, J+1), powers x^(n+l+1)
    b: np.ndarray          # (nterms, nz, J+1), powers x^(n-l)
    logc: np.ndarray       # (nterms, nz, J+1), coefficients of x^(n+l+1) log x
    branch: str            # "power" or "logarithmic"

    @property
    def nterms(self) -> int:
        return self.a.shape[0]

    def _powers(self, x: np.ndarray, s: float):
        n = np.arange(self.nterms)[:, None]
        ex = n + s
        p = x[None, :] ** ex
        dp = ex * x[None, :] ** (ex - 1.0)
        return p, dp

    def phi(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Taylor jets of (phi, phi') at x; arrays (nz, J+1, nx)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p, dp = self._powers(x, self.l + 1.0)
        return np.einsum("nzt,nx->ztx", self.a, p), np.einsum("nzt,nx->ztx", self.a, dp)

    def theta(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p, dp = self._powers(x, -self.l)
        u = np.einsum("nzt,nx->ztx", self.b, p)
        du = np.einsum("nzt,nx->ztx", self.b, dp)
        if self.branch == "logarithmic":
            q, dq = self._powers(x, self.l + 1.0)
            lg = np.log(x)[None, :]
            u = u + np.einsum("nzt,nx->ztx", self.logc, q * lg)
            du = du + np.einsum("nzt,nx->ztx", self.logc, dq * lg + q / x[None, :])
        return u, du

    def tail_ok(self, x0: float, tail_tol: float, cancel_tol: float) -> bool:
        """Last three terms small against the largest, and mild cancellation."""
        checks = [(self.a, self.l + 1.0, 1.0), (self.b, -self.l, 1.0)]
        if self.branch == "logarithmic":
            checks.append((self.logc, self.l + 1.0, max(1.0, abs(math.log(x0)))))
        for coef, s, fac in checks:
            n = np.arange(self.nterms)
            terms = np.abs(coef) * (fac * x0 ** (n + s))[:, None, None]
            big = terms.max(axis=0)
            tail = terms[-3:].sum(axis=0)
            if np.any(tail > tail_tol * np.where(big > 0, big, np.inf)):
                return False
        u, du = self.phi(x0)
        mag = np.maximum(np.abs(u[:, 0, 0]), x0 * np.abs(du[:, 0, 0]))
        terms = np.abs(self.a[:, :, 0]) * (x0 ** (np.arange(self.nterms) + self.l + 1.0))[:, None]
        if np.any(terms.max(axis=0) > cancel_tol * mag):
            return False
        return True


def frobenius_series(e: np.ndarray, l: float, z, J: int, nterms: int = 40) -> FrobeniusSeries:
    """Coefficients of phi and theta for x^2 q(x) = sum_k e_k x^k (e_0 = 0)."""
    z = np.atleast_1d(np.asarray(z))
    dtype = np.result_type(z, float)
    nz = z.size
    if abs(e[0]) > 0:
        raise ValueError("x^2 q(x) must vanish at 0")
    ek = np.zeros(nterms + 1)
    m = min(e.size, nterms + 1)
    ek[:m] = e[:m]
    d2 = (ek[2] - z)[:, None]
    N = 2.0 * l + 1.0

    def conv(c, n):
        s = np.zeros((nz, J + 1), dtype=dtype)
        for k in range(1, n + 1):
            if k == 2:
                s += d2 * c[n - 2] - tshift(c[n - 2])
            elif ek[k] != 0.0:
                s += ek[k] * c[n - k]
        return s

    a = np.zeros((nterms, nz, J + 1), dtype=dtype)
    a[0, :, 0] = 1.0
    for n in range(1, nterms):
        a[n] = conv(a, n) / (n * (n + N))

    b = np.zeros_like(a)
    C = np.zeros((nz, J + 1), dtype=dtype)
    Ni = _integer_index(N)
    branch = "power"
    if Ni == 0:
        branch = "logarithmic"
        C[:, 0] = -1.0
        for n in range(1, nterms):
            b[n] = (conv(b, n) - tmul(C, a[n]) * (2.0 * n)) / (n * n)
    else:
        b[0, :, 0] = 1.0 / N
        for n in range(1, nterms):
            if Ni is not None and n == Ni:
                C = conv(b, n) / N
                if np.any(C != 0.0):
                    branch = "logarithmic"
                continue  # b_N = 0
            rhs = conv(b, n)
            if Ni is not None and n > Ni:
                rhs = rhs - tmul(C, a[n - Ni]) * (2.0 * (n - Ni) + N)
            b[n] = rhs / (n * (n - N))
    logc = np.stack([tmul(C, a[n]) for n in range(nterms)]) if branch == "logarithmic" else np.zeros_like(a)
    return FrobeniusSeries(l=l, z=z, J=J, a=a, b=b, logc=logc, branch=branch)


def choose_start(series: FrobeniusSeries, b: float, radius: float, tail_tol: float,
                 cancel_tol: float, max_level: int = 60) -> int:
    """Smallest m >= 1 with x0 = b 2^-m inside the series radius and converged."""
    for m in range(1, max_level + 1):
        x0 = b * 2.0 ** (-m)
        if x0 > radius:
            continue
        if series.tail_ok(x0, tail_tol, cancel_tol):
            return m
    raise SeriesError("Frobenius series did not converge at any start abscissa")
