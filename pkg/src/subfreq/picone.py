"""Pointwise Picone functionals L(u, v) and R(u, v) for vector-field gradients.

Both are evaluated at interior nodes from forward-difference horizontal
gradients.  ``R`` comes in two flavours: ``algebraic`` expands the gradient
of ``|u|^p / v^{p-1}`` by the chain rule, so ``L = R`` up to rounding;
``discrete`` differentiates the nodal quotient with the stencil, so the two
agree only up to discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain_grid import DomainError, GridFunction
from .p_sub_laplacian import gradient_vectors, signed_power
from .vector_fields import VectorFieldFamily

MODES = ("algebraic", "discrete")


@dataclass(frozen=True)
class PiconeReport:
    min_L: float
    max_abs_L_minus_R: float
    argmin_index: tuple[int, ...]
    equality_case_defect: float | None
    proportionality_constant: float
    proportionality_residual: float
    scale: float
    mode: str
    p: float
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "min_L": self.min_L,
            "max_abs_L_minus_R": self.max_abs_L_minus_R,
            "argmin_index": list(self.argmin_index),
            "equality_case_defect": self.equality_case_defect,
            "proportionality_constant": self.proportionality_constant,
            "proportionality_residual": self.proportionality_residual,
            "scale": self.scale,
            "mode": self.mode,
            "p": self.p,
            "tol": self.tol,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class _Pieces:
    grad_u: np.ndarray  # (N, m) at interior nodes
    grad_v: np.ndarray
    u: np.ndarray
    v: np.ndarray


def _pieces(family: VectorFieldFamily, u: GridFunction, v: GridFunction, p: float) -> _Pieces:
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if not u.domain.same_lattice(v.domain):
        raise DomainError("u and v live on different lattices")
    mask = v.domain.interior_mask
    vv = v.interior
    if not np.all(vv > 0):
        raise ValueError("v must be strictly positive at every interior node")
    u_int = u.values[mask]
    u_on = GridFunction.from_interior(v.domain, u_int)
    gu = gradient_vectors(family, u_on.interior, v.domain)[:, mask.ravel()]
    gv = gradient_vectors(family, vv, v.domain)[:, mask.ravel()]
    # guard mirroring the (v + eps) device; inactive for v bounded away from 0
    floor = 1e-14 * vv.max()
    return _Pieces(gu, gv, u_int, np.maximum(vv, floor))


def _terms(pc: _Pieces, p: float):
    nu = np.sqrt(np.sum(pc.grad_u**2, axis=0))
    nv = np.sqrt(np.sum(pc.grad_v**2, axis=0))
    ratio = pc.u / pc.v
    cross = np.sum(pc.grad_u * pc.grad_v, axis=0)
    nv_pm2 = np.zeros_like(nv)
    nz = nv > 0
    nv_pm2[nz] = nv[nz] ** (p - 2)
    first = nu**p
    second = p * signed_power(ratio, p - 1) * nv_pm2 * cross
    third = (p - 1) * np.abs(ratio) ** p * nv**p
    return first, second, third, nv_pm2


def _to_grid(domain, vals) -> GridFunction:
    return GridFunction.from_interior(domain, vals)


def picone_L(family: VectorFieldFamily, u: GridFunction, v: GridFunction, p: float) -> GridFunction:
    pc = _pieces(family, u, v, p)
    first, second, third, _ = _terms(pc, p)
    return _to_grid(v.domain, first - second + third)


def picone_R(
    family: VectorFieldFamily, u: GridFunction, v: GridFunction, p: float, mode: str = "algebraic"
) -> GridFunction:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    pc = _pieces(family, u, v, p)
    first, _, _, nv_pm2 = _terms(pc, p)
    if mode == "algebraic":
        ratio = pc.u / pc.v
        grad_w = (
            p * (signed_power(pc.u, p - 1) / pc.v ** (p - 1)) * pc.grad_u
            - (p - 1) * (np.abs(ratio) ** p) * pc.grad_v
        )
    else:
        w = np.abs(pc.u) ** p / pc.v ** (p - 1)
        mask = v.domain.interior_mask
        grad_w = gradient_vectors(family, w, v.domain)[:, mask.ravel()]
    return _to_grid(v.domain, first - nv_pm2 * np.sum(pc.grad_v * grad_w, axis=0))


def picone_scale(family: VectorFieldFamily, u: GridFunction, v: GridFunction, p: float) -> float:
    """Largest nodal magnitude among the three terms of L, for relative tolerances."""
    first, second, third, _ = _terms(_pieces(family, u, v, p), p)
    return float(np.max(np.abs(first) + np.abs(second) + np.abs(third)))


def verify_picone(
    family: VectorFieldFamily,
    u: GridFunction,
    v: GridFunction,
    p: float,
    mode: str = "algebraic",
    tol: float = 1e-10,
    identity_tol: float | None = None,
) -> PiconeReport:
    """Check ``L >= 0`` and ``L = R`` at every interior node.

    ``tol`` bounds the negativity of ``L`` relative to the nodal scale.
    ``identity_tol`` bounds ``|L - R|`` relative to the same scale and defaults
    to ``1e-12`` in algebraic mode; in discrete mode it is unbounded unless
    given.  When ``u`` is within ``tol`` of a multiple ``c v`` the report also
    records ``max |L|`` as the equality-case defect.
    """
    L = picone_L(family, u, v, p).interior
    R = picone_R(family, u, v, p, mode).interior
    scale = picone_scale(family, u, v, p)
    scale = scale if scale > 0 else 1.0
    if identity_tol is None:
        identity_tol = 1e-12 if mode == "algebraic" else np.inf
    mask = v.domain.interior_mask
    idx = int(np.argmin(L))  # ties resolve to the lowest node index
    argmin = tuple(int(i[idx]) for i in np.nonzero(mask))
    uu, vv = u.values[mask], v.interior
    c = float(np.dot(uu, vv) / np.dot(vv, vv))
    unorm = float(np.linalg.norm(uu))
    prop = float(np.linalg.norm(uu - c * vv) / unorm) if unorm > 0 else 0.0
    eq_defect = float(np.max(np.abs(L)) / scale) if prop <= tol else None
    min_L = float(L.min())
    diff = float(np.max(np.abs(L - R)))
    passed = min_L >= -tol * scale and diff <= identity_tol * scale
    return PiconeReport(
        min_L=min_L,
        max_abs_L_minus_R=diff,
        argmin_index=argmin,
        equality_case_defect=eq_defect,
        proportionality_constant=c,
        proportionality_residual=prop,
        scale=scale,
        mode=mode,
        p=p,
        tol=tol,
        passed=bool(passed),
    )
