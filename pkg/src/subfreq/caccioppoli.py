"""Both sides of the Caccioppoli energy estimate for positive sub-solutions.

For ``q > p - 1`` the estimate reads

    sum v^(q-p) phi^p |grad v|^p
        <= (p / (q-p+1))^p sum v^q |grad phi|^p + (lam p / (q-p+1)) sum v^q phi^p

with all sums taken by the lattice quadrature.  Gradients of ``v`` and
``phi`` are forward differences; the integrands are formed at interior nodes,
where ``v > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain_grid import DomainError, GridDomain, GridFunction, random_positive_function
from .p_sub_laplacian import SolutionKind, classify_solution, gradient_vectors
from .vector_fields import VectorFieldFamily


@dataclass(frozen=True)
class CaccioppoliReport:
    lhs: float
    rhs: float
    p: float
    q: float
    lam: float
    constant_used: float
    tol: float
    applicable: bool = True
    classification: str | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.applicable and self.margin >= -self.tol * max(abs(self.lhs), abs(self.rhs))

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "p": self.p,
            "q": self.q,
            "lambda": self.lam,
            "constant_used": self.constant_used,
            "tol": self.tol,
            "applicable": self.applicable,
            "classification": self.classification,
            "pass": self.passed,
            "notes": list(self.notes),
        }


def caccioppoli_constant(p: float, q: float) -> float:
    """``(p / (q - p + 1))^p``; equals ``p^p`` at ``q = p``."""
    _check_pq(p, q)
    return (p / (q - p + 1)) ** p


def _check_pq(p: float, q: float) -> None:
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if not q > p - 1:
        raise ValueError(f"q must exceed p - 1 = {p - 1}, got {q}")


@dataclass(frozen=True)
class _Integrands:
    """Per-node ingredients shared across a sweep over q."""

    v: np.ndarray
    grad_v_p: np.ndarray
    phi_p: np.ndarray
    grad_phi_p: np.ndarray
    cell: float


def _integrands(family: VectorFieldFamily, v: GridFunction, phi: GridFunction, p: float) -> _Integrands:
    if not v.domain.same_lattice(phi.domain):
        raise DomainError("v and phi live on different lattices")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    vv = v.interior
    if not np.all(vv > 0):
        raise ValueError("v must be strictly positive on the interior")
    if np.any(phi.values < 0):
        raise ValueError("phi must be nonnegative")
    mask = v.domain.interior_mask.ravel()
    phi_on = phi.values[v.domain.interior_mask]
    gv = gradient_vectors(family, vv, v.domain)[:, mask]
    gphi = gradient_vectors(family, phi_on, v.domain)[:, mask]
    return _Integrands(
        v=vv,
        grad_v_p=np.sqrt(np.sum(gv**2, axis=0)) ** p,
        phi_p=phi_on**p,
        grad_phi_p=np.sqrt(np.sum(gphi**2, axis=0)) ** p,
        cell=v.domain.cell_volume,
    )


def _sides(ing: _Integrands, p: float, q: float, lam: float) -> tuple[float, float, float]:
    const = caccioppoli_constant(p, q)
    vq = ing.v**q
    lhs = float(np.sum(ing.v ** (q - p) * ing.phi_p * ing.grad_v_p) * ing.cell)
    rhs = float(
        (const * np.sum(vq * ing.grad_phi_p) + lam * p / (q - p + 1) * np.sum(vq * ing.phi_p)) * ing.cell
    )
    return lhs, rhs, const


def caccioppoli_sides(
    family: VectorFieldFamily,
    v: GridFunction,
    phi: GridFunction,
    p: float,
    q: float,
    lam: float,
    tol: float = 1e-9,
) -> CaccioppoliReport:
    """Evaluate both sides without certifying ``v`` as a sub-solution."""
    _check_pq(p, q)
    lhs, rhs, const = _sides(_integrands(family, v, phi, p), p, q, lam)
    notes = ("rhs is negative; relative tolerance is delicate",) if rhs < 0 else ()
    return CaccioppoliReport(lhs, rhs, p, q, lam, const, tol, notes=notes)


def verify_caccioppoli(
    family: VectorFieldFamily,
    v: GridFunction,
    phi: GridFunction,
    p: float,
    q: float,
    lam: float,
    tol: float = 1e-9,
    class_tol: float = 1e-7,
) -> CaccioppoliReport:
    """Check the estimate for a certified positive sub-solution ``v``.

    ``v`` is classified against nodal hat functions at ``class_tol``; weak
    solutions count as sub-solutions.  Anything else yields an inapplicable
    report.
    """
    report = caccioppoli_sides(family, v, phi, p, q, lam, tol)
    cls = classify_solution(family, v, lam, p, tol=class_tol)
    applicable = cls.kind in (SolutionKind.SUB, SolutionKind.WEAK)
    notes = report.notes + (() if applicable else (f"v is {cls.kind.value}, not a sub-solution",))
    return CaccioppoliReport(
        report.lhs, report.rhs, p, q, lam, report.constant_used, tol,
        applicable=applicable, classification=cls.kind.value, notes=notes,
    )


def caccioppoli_sweep(
    family: VectorFieldFamily,
    v: GridFunction,
    phi: GridFunction,
    p: float,
    lam: float,
    q_grid: Sequence[float],
    tol: float = 1e-9,
) -> list[CaccioppoliReport]:
    """One report per ``q``; all ``q`` are validated before any evaluation."""
    q_grid = [float(q) for q in q_grid]
    for q in q_grid:
        _check_pq(p, q)
    if not q_grid:
        return []
    ing = _integrands(family, v, phi, p)
    out = []
    for q in q_grid:
        lhs, rhs, const = _sides(ing, p, q, lam)
        notes = ("rhs is negative; relative tolerance is delicate",) if rhs < 0 else ()
        out.append(CaccioppoliReport(lhs, rhs, p, q, lam, const, tol, notes=notes))
    return out


# --- cutoff corpus ---------------------------------------------------------


def bump_function(
    domain: GridDomain,
    box: Sequence[Sequence[float]] | None = None,
    power: int = 2,
) -> GridFunction:
    """Tensor-product bump ``prod ((1 - xi_j^2)_+)^power`` on a sub-box.

    ``xi`` maps the sub-box to ``[-1, 1]^n``.  The default sub-box is the
    middle half of the bounding box.
    """
    if box is None:
        box = [(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)) for lo, hi in domain.bounds]
    x = domain.coordinates()
    acc = np.ones(domain.shape)
    for j, (a, b) in enumerate(box):
        xi = (2.0 * x[j] - (a + b)) / (b - a)
        acc *= np.maximum(1.0 - xi**2, 0.0) ** power
    return GridFunction(domain, acc)


def random_cutoff(domain: GridDomain, seed: int, box: Sequence[Sequence[float]] | None = None) -> GridFunction:
    """``random_positive_function`` restricted to a sub-box (middle half by default)."""
    if box is None:
        box = [(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)) for lo, hi in domain.bounds]
    x = domain.coordinates()
    inside = np.ones(domain.shape, dtype=bool)
    for j, (a, b) in enumerate(box):
        inside &= (x[j] > a) & (x[j] < b)
    vals = random_positive_function(domain, seed).values * inside
    return GridFunction(domain, vals)


def cutoff_corpus(domain: GridDomain, seed: int = 0) -> list[GridFunction]:
    return [bump_function(domain, power=1), bump_function(domain, power=2), random_cutoff(domain, seed)]
