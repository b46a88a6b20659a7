"""Discrete p-energy, Rayleigh quotient and the p-sub-Laplacian.

Everything is built on the sparse fields from :mod:`subfreq.vector_fields`,
so the operator form ``<L_p u, phi>_h`` and the gradient form of the weak
residual agree to rounding error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain_grid import DomainError, GridFunction
from .vector_fields import VectorFieldFamily


def _check_p(p: float) -> None:
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")


def gradient_vectors(family: VectorFieldFamily, vec: np.ndarray, domain) -> np.ndarray:
    """Stack ``(N, lattice nodes)`` of discrete ``X_k u`` for an interior vector."""
    return np.stack([op.apply(vec) for op in family.fields(domain)])


def flux_weight(grad_norm: np.ndarray, p: float, eps_reg: float = 0.0) -> np.ndarray:
    """``(|g|^2 + eps^2)^((p-2)/2)``, with zero weight where ``g = 0`` and ``eps = 0``."""
    if p == 2:
        return np.ones_like(grad_norm)
    if eps_reg > 0:
        return (grad_norm**2 + eps_reg**2) ** ((p - 2) / 2)
    w = np.zeros_like(grad_norm)
    nz = grad_norm > 0
    w[nz] = grad_norm[nz] ** (p - 2)
    return w


def signed_power(x: np.ndarray, e: float) -> np.ndarray:
    """``|x|^(e-1) x``, i.e. ``|x|^{p-2} x`` for ``e = p - 1``; zero at zero."""
    return np.sign(x) * np.abs(x) ** e


def energy_vec(family, domain, vec: np.ndarray, p: float) -> float:
    g = gradient_vectors(family, vec, domain)
    norm = np.sqrt(np.sum(g**2, axis=0))
    return float(np.sum(norm**p) * domain.cell_volume)


def operator_vec(family, domain, vec: np.ndarray, p: float, eps_reg: float = 0.0) -> np.ndarray:
    ops = family.fields(domain)
    g = np.stack([op.apply(vec) for op in ops])
    w = flux_weight(np.sqrt(np.sum(g**2, axis=0)), p, eps_reg)
    out = np.zeros(vec.shape)
    for op, gk in zip(ops, g):
        out += op.adjoint(w * gk)
    return out


def dirichlet_energy(family: VectorFieldFamily, u: GridFunction, p: float) -> float:
    """``sum |grad_X u|^p prod(h)``, the p-th power of the J_p functional."""
    _check_p(p)
    return energy_vec(family, u.domain, u.interior, p)


def rayleigh_quotient(family: VectorFieldFamily, u: GridFunction, p: float) -> float:
    _check_p(p)
    mass = float(np.sum(np.abs(u.interior) ** p))
    if mass == 0.0:
        raise ValueError("Rayleigh quotient of the zero function is undefined")
    return dirichlet_energy(family, u, p) / (mass * u.domain.cell_volume)


def apply_operator(family: VectorFieldFamily, u: GridFunction, p: float, eps_reg: float = 0.0) -> GridFunction:
    """``grad_X^* . ((|grad_X u|^2 + eps^2)^((p-2)/2) grad_X u)`` on the interior."""
    _check_p(p)
    if eps_reg < 0:
        raise ValueError("eps_reg must be nonnegative")
    return GridFunction.from_interior(u.domain, operator_vec(family, u.domain, u.interior, p, eps_reg))


def weak_form_residual(
    family: VectorFieldFamily, u: GridFunction, lam: float, p: float, phi: GridFunction
) -> float:
    """Weak-form defect of ``L_p u = lam |u|^{p-2} u`` tested against ``phi``.

    Computed from discrete gradients and the quadrature rule, not from the
    assembled operator.
    """
    _check_p(p)
    if not u.domain.same_lattice(phi.domain):
        raise DomainError("u and phi live on different lattices")
    gu = gradient_vectors(family, u.interior, u.domain)
    gphi = gradient_vectors(family, phi.interior, phi.domain)
    w = flux_weight(np.sqrt(np.sum(gu**2, axis=0)), p)
    flux_term = np.sum(w * np.sum(gu * gphi, axis=0))
    mass_term = np.sum(signed_power(u.interior, p - 1) * phi.interior)
    return float((flux_term - lam * mass_term) * u.domain.cell_volume)


class SolutionKind(str, enum.Enum):
    WEAK = "weak_solution"
    SUP = "sup_solution"
    SUB = "sub_solution"
    NEITHER = "neither"


@dataclass(frozen=True)
class SolutionClass:
    """Outcome of testing a candidate against a finite set of test functions.

    ``min_relative`` / ``max_relative`` are the signed residual extremes, each
    divided by its Hölder scale; ``is_sup`` and ``is_sub`` refer to the
    nonnegative test functions only.
    """

    kind: SolutionKind
    worst_violation: float
    num_test_functions: int
    min_relative: float
    max_relative: float
    is_sup: bool
    is_sub: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "worst_violation": self.worst_violation,
            "num_test_functions": self.num_test_functions,
            "min_relative": self.min_relative,
            "max_relative": self.max_relative,
            "is_sup": self.is_sup,
            "is_sub": self.is_sub,
        }


def _norm_p(arr: np.ndarray, p: float, cell: float) -> float:
    return float(np.sum(np.abs(arr) ** p) * cell) ** (1.0 / p)


def _holder_scales(family, u: GridFunction, lam: float, p: float, grad_phi_norms, phi_norms) -> np.ndarray:
    cell = u.domain.cell_volume
    gu = gradient_vectors(family, u.interior, u.domain)
    grad_u = _norm_p(np.sqrt(np.sum(gu**2, axis=0)), p, cell)
    u_norm = _norm_p(u.interior, p, cell)
    return grad_u ** (p - 1) * grad_phi_norms + abs(lam) * u_norm ** (p - 1) * phi_norms


def nodal_relative_residuals(family: VectorFieldFamily, u: GridFunction, lam: float, p: float) -> np.ndarray:
    """Relative weak residuals against every nodal hat function of the interior.

    For the hat at node ``i`` the residual is ``(L_p u - lam |u|^{p-2} u)_i prod(h)``
    and the scale is the Hölder bound
    ``|grad u|_p^{p-1} |grad phi|_p + |lam| |u|_p^{p-1} |phi|_p``.
    """
    _check_p(p)
    domain = u.domain
    cell = domain.cell_volume
    res = (operator_vec(family, domain, u.interior, p) - lam * signed_power(u.interior, p - 1)) * cell
    sq = None
    for m in family.matrices(domain):
        sq = m.multiply(m) if sq is None else sq + m.multiply(m)
    grad_hat = (np.asarray(sq.power(p / 2).sum(axis=0)).ravel() * cell) ** (1.0 / p)
    hat = np.full(domain.num_interior, cell ** (1.0 / p))
    scale = _holder_scales(family, u, lam, p, grad_hat, hat)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), 0.0)
    return rel


def _classify(rel: np.ndarray, nonneg: np.ndarray, tol: float) -> SolutionClass:
    weak = bool(np.all(np.abs(rel) <= tol))
    pos = rel[nonneg]
    is_sup = bool(pos.size and np.all(pos >= -tol))
    is_sub = bool(pos.size and np.all(pos <= tol))
    if weak:
        kind, worst = SolutionKind.WEAK, float(np.max(np.abs(rel)))
    elif is_sup:
        kind, worst = SolutionKind.SUP, float(max(0.0, -pos.min()))
    elif is_sub:
        kind, worst = SolutionKind.SUB, float(max(0.0, pos.max()))
    else:
        kind, worst = SolutionKind.NEITHER, float(np.max(np.abs(rel)))
    return SolutionClass(
        kind=kind,
        worst_violation=worst,
        num_test_functions=int(rel.size),
        min_relative=float(rel.min()),
        max_relative=float(rel.max()),
        is_sup=is_sup or weak,
        is_sub=is_sub or weak,
    )


def classify_solution(
    family: VectorFieldFamily,
    v: GridFunction,
    lam: float,
    p: float,
    test_set: Sequence[GridFunction] | None = None,
    tol: float = 1e-7,
) -> SolutionClass:
    """Classify ``v`` as weak / sup- / sub-solution of ``L_p v = lam |v|^{p-2} v``.

    With ``test_set=None`` the nodal hat functions of the interior are used.
    Signed test functions only take part in the weak-solution test.
    """
    _check_p(p)
    if test_set is None:
        rel = nodal_relative_residuals(family, v, lam, p)
        return _classify(rel, np.ones(rel.size, dtype=bool), tol)
    test_set = list(test_set)
    if not test_set:
        raise ValueError("classify_solution needs a nonempty test set")
    cell = v.domain.cell_volume
    res, grad_norms, norms, nonneg = [], [], [], []
    for phi in test_set:
        res.append(weak_form_residual(family, v, lam, p, phi))
        g = gradient_vectors(family, phi.interior, phi.domain)
        grad_norms.append(_norm_p(np.sqrt(np.sum(g**2, axis=0)), p, cell))
        norms.append(_norm_p(phi.interior, p, cell))
        nonneg.append(bool(np.all(phi.interior >= 0)))
    scale = _holder_scales(family, v, lam, p, np.array(grad_norms), np.array(norms))
    res = np.array(res)
    rel = np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), 0.0)
    return _classify(rel, np.array(nonneg), tol)
