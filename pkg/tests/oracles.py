"""Reference values computed without the package's own assembly or solver."""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq


def dirichlet_tridiagonal(m: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the 1D Dirichlet Laplacian on ``m`` interior nodes."""
    return np.full(m, 2.0 / h**2), np.full(m - 1, -1.0 / h**2)


def smallest_1d(m: int, h: float) -> float:
    d, e = dirichlet_tridiagonal(m, h)
    return float(eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)[0])


def smallest_box_kron(ms: list[int], hs: list[float]) -> float:
    """Smallest eigenvalue of the Kronecker-sum Laplacian on a box, by shift-invert Lanczos."""
    ops = []
    for m, h in zip(ms, hs):
        d, e = dirichlet_tridiagonal(m, h)
        ops.append(sp.diags([e, d, e], [-1, 0, 1], format="csr"))
    total = None
    for j, op in enumerate(ops):
        left = sp.identity(int(np.prod(ms[:j], dtype=int)), format="csr")
        right = sp.identity(int(np.prod(ms[j + 1 :], dtype=int)), format="csr")
        term = sp.kron(sp.kron(left, op), right, format="csr")
        total = term if total is None else total + term
    val = spla.eigsh(total.tocsc(), k=1, sigma=0.0, which="LM", return_eigenvectors=False, tol=1e-14)
    return float(val[0])


def pi_p(p: float) -> float:
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def plaplace_closed_form(p: float, length: float = 1.0) -> float:
    """``(p - 1) (pi_p / length)^p`` for the 1D Dirichlet p-Laplacian."""
    return (p - 1.0) * (pi_p(p) / length) ** p


def _first_zero(lam: float, p: float) -> float:
    """First positive zero of ``u`` solving ``(|u'|^{p-2}u')' + lam |u|^{p-2}u = 0``, ``u(0)=0``."""

    def rhs(_, y):
        u, w = y
        return [np.sign(w) * abs(w) ** (1.0 / (p - 1.0)), -lam * np.sign(u) * abs(u) ** (p - 1.0)]

    def hit(x, y):
        return y[0]

    hit.terminal = True
    hit.direction = -1
    sol = solve_ivp(rhs, (0.0, 50.0), [0.0, 1.0], events=hit, rtol=1e-12, atol=1e-14, max_step=1e-2)
    if not sol.t_events[0].size:
        return math.inf
    return float(sol.t_events[0][0])


def plaplace_shooting(p: float, length: float = 1.0) -> float:
    """Principal eigenvalue on ``(0, length)`` by shooting on ``lam``."""
    return brentq(lambda lam: _first_zero(lam, p) - length, 0.5, 200.0, xtol=1e-13, rtol=1e-13)
