"""Principal frequency by constrained Rayleigh-quotient descent, plus the
property checks built on it (Barta bound, uniqueness, simplicity,
domain monotonicity, dilation scaling).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain_grid import DomainError, GridDomain, GridFunction, is_subdomain, random_positive_function
from .p_sub_laplacian import (
    SolutionKind,
    classify_solution,
    energy_vec,
    gradient_vectors,
    operator_vec,
    signed_power,
)
from .vector_fields import FamilyError, VectorFieldFamily, dilate_domain

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for :func:`solve_principal`.

    ``eps_reg=None`` selects ``1e-10 * diameter`` for ``p < 2`` and 0 otherwise.
    The preconditioner is the energy Hessian at the current iterate, with
    ``|grad u|`` floored at ``precond_floor * max|grad u|``, rebuilt every
    ``precond_refresh`` iterations.  Whenever the quotient stalls while the
    residual is still above ``tol_residual`` the floor is divided by 10, down
    to ``precond_floor_min``.
    """

    p: float = 2.0
    max_iterations: int = 500
    tol_lambda: float = 1e-9
    tol_residual: float = 1e-7
    stall_window: int = 5
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    precond_floor: float = 1e-1
    precond_floor_min: float = 1e-12
    precond_refresh: int = 1
    seed: int = 0
    eps_reg: float | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.tol_lambda > 0 and self.tol_residual > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack < 1:
            raise ValueError("armijo_c and backtrack must lie in (0, 1)")
        if self.stall_window < 1 or self.max_backtracks < 1 or self.precond_refresh < 1:
            raise ValueError("stall_window, max_backtracks and precond_refresh must be >= 1")
        if not 0 < self.precond_floor_min <= self.precond_floor:
            raise ValueError("need 0 < precond_floor_min <= precond_floor")
        if self.eps_reg is not None and self.eps_reg < 0:
            raise ValueError("eps_reg must be nonnegative")

    def resolved_eps(self, domain: GridDomain) -> float:
        if self.eps_reg is not None:
            return self.eps_reg
        return 1e-10 * domain.diameter if self.p < 2 else 0.0


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    u1: GridFunction
    iterations: int
    residual: float
    converged: bool
    p: float
    history: tuple[float, ...] = field(default=(), repr=False)
    vanishing_nodes: int = 0

    @property
    def positive(self) -> bool:
        """Whether ``u1`` is strictly positive, hence an eigenfunction and not only a constrained minimizer."""
        return self.vanishing_nodes == 0

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "vanishing_nodes": self.vanishing_nodes,
            "p": self.p,
        }


@dataclass
class VerificationReport:
    check: str
    passed: bool
    applicable: bool = True
    partial: bool = False
    metrics: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "pass": self.passed,
            "applicable": self.applicable,
            "partial": self.partial,
            "metrics": dict(self.metrics),
            "notes": list(self.notes),
        }


# --- solver ------------------------------------------------------------------


def _project(vec: np.ndarray, p: float, cell: float) -> np.ndarray | None:
    """Positive part, then unit p-norm; None if nothing positive is left."""
    pos = np.maximum(vec, 0.0)
    mass = float(np.sum(pos**p) * cell)
    if not mass > 0 or not np.isfinite(mass):
        return None
    return pos / mass ** (1.0 / p)


DIRECT_SOLVE_LIMIT = 20000


def _linear_solver(op: sp.spmatrix):
    """Solve with the SPD matrix ``op``: SuperLU when small, AMG-preconditioned CG otherwise.

    An inexact CG solve started from zero still yields a descent direction.
    """
    if op.shape[0] <= DIRECT_SOLVE_LIMIT:
        lu = spla.splu(sp.csc_matrix(op), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        return lu.solve
    import pyamg

    op = sp.csr_matrix(op)
    amg = pyamg.smoothed_aggregation_solver(op).aspreconditioner()

    def solve(b):
        x, _ = spla.cg(op, b, M=amg, rtol=1e-11, maxiter=1000)
        return x

    return solve


def _hessian(family, domain, vec, p, floor) -> sp.csr_matrix:
    """Hessian of ``E(u)/p`` at ``vec``, with a floor on ``|grad u|``.

    The weight is ``|g|^(p-2) (I + (p-2) n n^T)``, ``n = g/|g|``; at p = 2 it
    is the linear operator, cached per domain.
    """
    mats = family.matrices(domain)
    if p == 2:
        key = ("laplacian", domain.key)
        if key not in family._cache:
            family._cache[key] = sp.csr_matrix(sum(m.T @ m for m in mats))
        return family._cache[key]
    g = gradient_vectors(family, vec, domain)
    norm = np.sqrt(np.sum(g**2, axis=0))
    top = norm.max()
    cut = floor * top if top > 0 else 1.0
    w = np.maximum(norm, cut) ** (p - 2)
    active = norm >= cut
    n = np.where(active, g / np.where(active, norm, 1.0), 0.0)
    op = None
    for k, mk in enumerate(mats):
        for l, ml in enumerate(mats):
            wkl = w * ((k == l) + (p - 2) * n[k] * n[l])
            if not wkl.any():
                continue
            term = mk.T @ sp.diags(wkl) @ ml
            op = term if op is None else op + term
    return sp.csr_matrix(op)


class _Direction:
    """Two-metric projected Newton direction.

    Nodes where ``u`` vanishes get a diagonally scaled step (zero when the
    gradient pushes them downward) and the rest a Hessian solve on their own
    block.  A coupled step could push a vanishing
    node downward although the gradient asks it to rise, and the projection
    would then pin it at zero for good.
    """

    def __init__(self, hess: sp.csr_matrix, cache_key=None, cache=None):
        self.hess = hess
        self.diag = hess.diagonal()
        self._full = None
        self._cache_key, self._cache = cache_key, cache
        self._zero_key = None
        self._sub = None

    def _full_solver(self):
        if self._full is None:
            if self._cache is not None and self._cache_key in self._cache:
                self._full = self._cache[self._cache_key]
            else:
                self._full = _linear_solver(self.hess)
                if self._cache is not None:
                    self._cache[self._cache_key] = self._full
        return self._full

    def __call__(self, grad: np.ndarray, u: np.ndarray) -> np.ndarray:
        zero = u <= 0
        if not zero.any():
            return -self._full_solver()(grad)
        free = ~zero
        key = zero.tobytes()
        if key != self._zero_key:
            idx = np.flatnonzero(free)
            self._sub = _linear_solver(self.hess[idx][:, idx]) if idx.size else None
            self._zero_key = key
        d = np.empty_like(grad)
        # a vanishing node pushed downward stays put, so it must not count towards the predicted decrease
        d[zero] = -np.minimum(grad[zero], 0.0) / self.diag[zero]
        if self._sub is not None:
            d[free] = -self._sub(grad[free])
        return d


def _preconditioner(family, domain, vec, p, floor) -> _Direction:
    hess = _hessian(family, domain, vec, p, floor)
    if p == 2:
        return _Direction(hess, ("laplacian-solver", domain.key), family._cache)
    return _Direction(hess)


def nodal_ratio_residual(family: VectorFieldFamily, u: GridFunction, lam: float, p: float) -> float:
    """``max |L_p u - lam u^{p-1}| / (|lam| u^{p-1})`` over interior nodes.

    Dominates the hat-function weak residual used by ``classify_solution``, and
    bounds the gap between the Barta ratio of ``u`` and ``lam``.
    """
    vec = u.interior
    den = np.maximum(np.abs(vec), 1e-12 * np.abs(vec).max()) ** (p - 1) * abs(lam)
    res = operator_vec(family, u.domain, vec, p) - lam * signed_power(vec, p - 1)
    return float(np.max(np.abs(res) / den))


def stationarity_residual(family: VectorFieldFamily, u: GridFunction, lam: float, p: float) -> float:
    """First-order optimality defect of ``u >= 0`` for the quotient over nonnegative functions.

    Where ``u > 0`` this is :func:`nodal_ratio_residual`.  Where ``u`` vanishes
    the residual ``L_p u`` is a multiplier and must be nonnegative; its
    negative part counts, scaled by ``|lam| max(u)^(p-1)``.  With no vanishing
    node the two residuals coincide.
    """
    vec = u.interior
    zero = vec <= 0
    if not zero.any():
        return nodal_ratio_residual(family, u, lam, p)
    res = operator_vec(family, u.domain, vec, p) - lam * signed_power(vec, p - 1)
    free = ~zero
    scale = abs(lam) * float(vec.max()) ** (p - 1)
    worst = float(np.max(np.maximum(-res[zero], 0.0))) / scale
    if free.any():
        worst = max(worst, float(np.max(np.abs(res[free]) / (abs(lam) * vec[free] ** (p - 1)))))
    return worst


def solve_principal(
    family: VectorFieldFamily,
    domain: GridDomain,
    opts: SolverOptions | None = None,
    initial: GridFunction | None = None,
) -> EigenPair:
    """Minimize the Rayleigh quotient over nonnegative grid functions.

    Each step moves along the preconditioned negative gradient
    ``-P^{-1}(L_p u - lam |u|^{p-2} u)``, projects onto nonnegative functions
    of unit p-norm, and backtracks (Armijo) on the exact quotient, so the
    quotient sequence never increases.  Stops once the relative change of the
    quotient stays below ``tol_lambda`` for ``stall_window`` iterations and the
    optimality defect (:func:`stationarity_residual`) is below ``tol_residual``.
    After the first stall a step is also accepted when the quotient stays
    within rounding and the defect drops, since near a vanishing gradient with
    ``p < 2`` the quotient cannot resolve the remaining progress.

    The minimizer can vanish at interior nodes when the discrete operator has
    no positive ground state (stencils with positive off-diagonal couplings
    allow this); ``vanishing_nodes`` then reports how many, and ``u1`` is a
    constrained minimizer rather than an eigenfunction.
    """
    opts = opts or SolverOptions()
    p = opts.p
    cell = domain.cell_volume
    eps = opts.resolved_eps(domain)
    start = initial if initial is not None else random_positive_function(domain, opts.seed)
    if not start.domain.same_lattice(domain):
        raise DomainError("initial guess lives on a different lattice")
    u = _project(start.values[domain.interior_mask], p, cell)
    if u is None:
        raise ValueError("initial guess has no positive part")
    lam = energy_vec(family, domain, u, p)
    history = [lam]
    solve = None
    residual = np.inf
    converged = False
    iterations = 0
    floor = opts.precond_floor
    window_start = 0
    polishing = False
    slack = 16 * np.finfo(float).eps
    for it in range(1, opts.max_iterations + 1):
        iterations = it
        grad = operator_vec(family, domain, u, p, eps) - lam * signed_power(u, p - 1)
        if solve is None or (p != 2 and (it - 1) % opts.precond_refresh == 0):
            solve = _preconditioner(family, domain, u, p, floor)
        d = solve(grad, u)
        slope = p * float(np.dot(grad, d)) * cell
        if not slope < 0:
            d = -grad
            slope = -p * float(np.dot(grad, grad)) * cell
        alpha = 1.0
        for _ in range(opts.max_backtracks):
            trial = _project(u + alpha * d, p, cell)
            if trial is not None:
                lam_t = energy_vec(family, domain, trial, p)
                if lam_t <= lam + opts.armijo_c * alpha * slope:
                    u, lam = trial, lam_t
                    break
                if polishing and lam_t <= lam * (1 + slack):
                    # the quotient sits at rounding level; the nodal residual decides instead
                    res_t = stationarity_residual(family, GridFunction.from_interior(domain, trial), lam_t, p)
                    if res_t < residual:
                        u, lam, residual = trial, lam_t, res_t
                        break
            alpha *= opts.backtrack
        history.append(lam)
        if it - window_start >= opts.stall_window:
            recent = np.array(history[-opts.stall_window - 1:])
            changes = np.abs(np.diff(recent)) / max(abs(recent[-1]), np.finfo(float).tiny)
            if np.all(changes <= opts.tol_lambda):
                residual = stationarity_residual(family, GridFunction.from_interior(domain, u), lam, p)
                if residual <= opts.tol_residual:
                    converged = True
                    break
                polishing = True
                if floor > opts.precond_floor_min:
                    # the quotient no longer resolves progress; sharpen the Hessian model instead
                    floor = max(0.1 * floor, opts.precond_floor_min)
                    solve = None
                    window_start = it
    if not np.isfinite(residual) or not converged:
        residual = stationarity_residual(family, GridFunction.from_interior(domain, u), lam, p)
    if not converged:
        log.warning("solve_principal stopped after %d iterations (residual %.3e)", iterations, residual)
    vanishing = int(np.count_nonzero(u <= 0))
    if vanishing:
        log.warning("the minimizer vanishes at %d interior nodes; it is not a positive eigenfunction", vanishing)
    return EigenPair(
        lambda1=lam,
        u1=GridFunction.from_interior(domain, u),
        iterations=iterations,
        residual=residual,
        converged=converged,
        p=p,
        history=tuple(history),
        vanishing_nodes=vanishing,
    )


def linear_principal_oracle(family: VectorFieldFamily, domain: GridDomain) -> tuple[float, GridFunction]:
    """Smallest eigenpair of the assembled p = 2 operator by shift-invert Lanczos.

    Cross-check only; never used to produce reported results.
    """
    op = None
    for m in family.matrices(domain):
        op = m.T @ m if op is None else op + m.T @ m
    n = op.shape[0]
    if n < 16:
        vals, vecs = np.linalg.eigh(op.toarray())
        lam, vec = vals[0], vecs[:, 0]
    else:
        v0 = np.ones(n)
        vals, vecs = spla.eigsh(sp.csc_matrix(op), k=1, sigma=0.0, which="LM", v0=v0, tol=1e-14)
        lam, vec = vals[0], vecs[:, 0]
    vec = vec * np.sign(vec.sum())
    return float(lam), GridFunction.from_interior(domain, vec)


# --- property checks ----------------------------------------------------------


def _require_positive(v: GridFunction, what: str = "v") -> None:
    if not np.all(v.interior > 0):
        raise ValueError(f"{what} must be strictly positive on the interior")


def barta_profile(family: VectorFieldFamily, v: GridFunction, p: float) -> np.ndarray:
    """Nodal ratios ``L_p v / max(v, eps_den)^{p-1}`` over the interior."""
    _require_positive(v)
    vec = v.interior
    eps_den = 1e-12 * vec.max()
    return operator_vec(family, v.domain, vec, p) / np.maximum(vec, eps_den) ** (p - 1)


def barta_lower_bound(family: VectorFieldFamily, domain: GridDomain, v: GridFunction, p: float) -> float:
    """Lower bound for the discrete principal frequency from a positive ``v``."""
    if not v.domain.same_lattice(domain):
        raise DomainError("v does not live on the given lattice")
    return float(barta_profile(family, v, p).min())


def _opts_for(p: float, opts: SolverOptions | None) -> SolverOptions:
    if opts is None:
        return SolverOptions(p=p)
    return opts if opts.p == p else replace(opts, p=p)


def uniqueness_check(
    family: VectorFieldFamily,
    domain: GridDomain,
    v: GridFunction,
    lam: float,
    p: float,
    tol: float = 1e-6,
    opts: SolverOptions | None = None,
    eigenpair: EigenPair | None = None,
) -> VerificationReport:
    """A positive weak eigenpair ``(v, lam)`` must have ``lam`` equal to lambda_1."""
    report = VerificationReport("uniqueness", passed=False)
    if not np.all(v.interior > 0):
        report.applicable = False
        report.notes.append("v is not strictly positive on the interior")
        return report
    cls = classify_solution(family, v, lam, p, tol=tol)
    report.metrics["classification"] = cls.kind.value
    report.metrics["worst_violation"] = cls.worst_violation
    if cls.kind is not SolutionKind.WEAK:
        report.applicable = False
        report.notes.append(f"(v, lambda) is {cls.kind.value}, not a weak solution")
        return report
    pair = eigenpair or solve_principal(family, domain, _opts_for(p, opts))
    gap = abs(lam - pair.lambda1)
    report.metrics.update(lam=lam, lambda1=pair.lambda1, relative_gap=gap / abs(pair.lambda1))
    report.partial = not pair.converged
    report.passed = gap <= tol * abs(lam) and pair.converged
    return report


def proportionality_defect(a: GridFunction, b: GridFunction) -> float:
    """``1 - |<a, b>| / (|a| |b|)`` in the plain Euclidean sense, clipped at 0."""
    x, y = a.interior, b.interior
    denom = np.sqrt(np.dot(x, x) * np.dot(y, y))
    return max(0.0, 1.0 - abs(float(np.dot(x, y))) / float(denom))


def simplicity_check(
    family: VectorFieldFamily,
    domain: GridDomain,
    p: float,
    restarts: int = 5,
    seed: int = 0,
    opts: SolverOptions | None = None,
    tol_defect: float = 1e-6,
    tol_spread: float = 1e-6,
    seeds: list[int] | None = None,
) -> VerificationReport:
    """Solve from several random positive starts and compare the minimizers."""
    if seeds is None:
        if restarts < 2:
            raise ValueError("simplicity_check needs restarts >= 2")
        seeds = [seed + 7919 * i for i in range(restarts)]
    elif len(seeds) < 2:
        raise ValueError("simplicity_check needs at least two seeds")
    base = _opts_for(p, opts)
    pairs = [solve_principal(family, domain, replace(base, seed=s)) for s in seeds]
    defect = max(proportionality_defect(a.u1, b.u1) for a, b in itertools.combinations(pairs, 2))
    lams = np.array([e.lambda1 for e in pairs])
    spread = float((lams.max() - lams.min()) / lams.min())
    report = VerificationReport("simplicity", passed=False)
    report.metrics.update(
        defect=defect,
        lambda_spread=spread,
        lambdas=[float(x) for x in lams],
        seeds=list(seeds),
        converged=[e.converged for e in pairs],
    )
    report.partial = not all(e.converged for e in pairs)
    if report.partial:
        report.notes.append("some restarts did not converge")
    report.passed = defect <= tol_defect and spread <= tol_spread and not report.partial
    return report


def domain_monotonicity_check(
    family: VectorFieldFamily,
    inner: GridDomain,
    outer: GridDomain,
    p: float,
    tol: float = 1e-9,
    opts: SolverOptions | None = None,
) -> VerificationReport:
    """``lambda_1(inner) >= lambda_1(outer)`` on a shared lattice (not strictly)."""
    if not is_subdomain(inner, outer):
        raise DomainError("inner domain is not contained in the outer domain")
    o = _opts_for(p, opts)
    a = solve_principal(family, inner, o)
    b = solve_principal(family, outer, o)
    report = VerificationReport("monotonicity", passed=False)
    report.metrics.update(
        lambda_inner=a.lambda1,
        lambda_outer=b.lambda1,
        ratio=a.lambda1 / b.lambda1,
        margin=(a.lambda1 - b.lambda1) / b.lambda1,
        vanishing_nodes_inner=a.vanishing_nodes,
        vanishing_nodes_outer=b.vanishing_nodes,
    )
    if not (a.positive and b.positive):
        report.notes.append("a minimizer vanishes at interior nodes; values are minima over nonnegative functions")
    report.partial = not (a.converged and b.converged)
    report.passed = a.lambda1 >= b.lambda1 - tol * b.lambda1 and not report.partial
    return report


def scaling_check(
    family: VectorFieldFamily,
    domain: GridDomain,
    p: float,
    s: float,
    tol: float = 1e-2,
    opts: SolverOptions | None = None,
) -> VerificationReport:
    """``lambda_1(dilated domain) * s^p / lambda_1(domain)`` should equal 1."""
    if not family.has_dilation:
        raise FamilyError(f"family {family.name!r} has no dilation law")
    o = _opts_for(p, opts)
    base = solve_principal(family, domain, o)
    scaled = solve_principal(family, dilate_domain(family, s, domain), o)
    ratio = scaled.lambda1 * s**p / base.lambda1
    report = VerificationReport("scaling", passed=False)
    report.metrics.update(
        s=s, lambda_base=base.lambda1, lambda_scaled=scaled.lambda1, normalized_ratio=ratio
    )
    report.partial = not (base.converged and scaled.converged)
    report.passed = abs(ratio - 1.0) <= tol and not report.partial
    return report
