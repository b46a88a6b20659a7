"""Families of first-order vector fields and their discrete action.

A family ``X_k = sum_j a_kj(x) d/dx_j`` is discretized with forward
differences on the full lattice, the grid function being zero-extended off
the interior mask.  The discrete field ``D_k`` maps interior values to
lattice values, and the adjoint is its exact transpose with respect to
``<u, v>_h = sum u v prod(h)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .domain_grid import DomainError, GridDomain, GridFunction
from .expressions import compile_expression

CoefficientFn = Callable[[np.ndarray], np.ndarray]


class FamilyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VectorFieldFamily:
    """Coefficients ``a_kj`` of ``num_fields`` vector fields on R^ambient_dim.

    ``coefficient_fn(x)`` receives coordinates of shape ``(ambient_dim, ...)``
    and returns an array of shape ``(num_fields, ambient_dim, ...)``.
    ``dilation_orders`` gives the exponent of ``s`` applied to each coordinate
    by the family's anisotropic dilation, if it has one.
    """

    name: str
    ambient_dim: int
    num_fields: int
    coefficient_fn: CoefficientFn = field(repr=False)
    field_names: tuple[str, ...] = ()
    dilation_orders: tuple[float, ...] | None = None
    gradient_homogeneity: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.ambient_dim < 1 or self.num_fields < 1:
            raise FamilyError("ambient_dim and num_fields must be >= 1")
        if self.num_fields > self.ambient_dim:
            raise FamilyError(
                f"num_fields = {self.num_fields} exceeds ambient_dim = {self.ambient_dim}"
            )
        if self.dilation_orders is not None and len(self.dilation_orders) != self.ambient_dim:
            raise FamilyError("dilation_orders needs one entry per coordinate")
        if not self.field_names:
            names = tuple(f"X{k + 1}" for k in range(self.num_fields))
            object.__setattr__(self, "field_names", names)

    def coefficient_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.ambient_dim:
            raise FamilyError(f"points have {x.shape[0]} coordinates, family needs {self.ambient_dim}")
        a = np.asarray(self.coefficient_fn(x), dtype=float)
        return np.broadcast_to(a, (self.num_fields, self.ambient_dim) + x.shape[1:])

    def coefficients(self, k: int, x: Sequence[float]) -> np.ndarray:
        """The length-``ambient_dim`` coefficient vector of field ``k`` at ``x``."""
        if not 0 <= k < self.num_fields:
            raise IndexError(f"field index {k} out of range")
        return np.array(self.coefficient_array(np.asarray(x, dtype=float))[k])

    @property
    def has_dilation(self) -> bool:
        return self.dilation_orders is not None

    def dilate(self, s: float, x: np.ndarray) -> np.ndarray:
        """Apply the dilation to points of shape ``(ambient_dim, ...)``."""
        if self.dilation_orders is None:
            raise FamilyError(f"family {self.name!r} has no dilation law")
        x = np.asarray(x, dtype=float)
        factors = np.array([s**o for o in self.dilation_orders])
        return x * factors.reshape((-1,) + (1,) * (x.ndim - 1))

    def fields(self, domain: GridDomain) -> tuple["DiscreteField", ...]:
        """Discrete fields ``D_k`` (lattice nodes x interior nodes), cached per domain."""
        key = domain.key
        ops = self._cache.get(key)
        if ops is None:
            ops = _assemble(self, domain)
            self._cache[key] = ops
        return ops

    def matrices(self, domain: GridDomain) -> tuple[sp.csr_matrix, ...]:
        """The fields of :meth:`fields` as assembled sparse matrices."""
        return tuple(op.matrix for op in self.fields(domain))


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """One field ``D u = sum_j (a_j / h_j) * (u[. + e_j] - u[.])`` with zero extension.

    ``apply`` differences first and scales second, so constants are mapped to
    exactly zero wherever the forward neighbour is interior.  ``adjoint`` is
    the transpose of ``apply``; ``matrix`` is the same map assembled.
    """

    scales: tuple[np.ndarray, ...]
    diffs: tuple[sp.csr_matrix, ...]
    num_nodes: int
    num_interior: int

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.num_nodes)
        for w, d in zip(self.scales, self.diffs):
            out += w * (d @ vec)
        return out

    def adjoint(self, f: np.ndarray) -> np.ndarray:
        out = np.zeros(self.num_interior)
        for w, d in zip(self.scales, self.diffs):
            out += d.T @ (w * f)
        return out

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        mat = sp.csr_matrix((self.num_nodes, self.num_interior))
        for w, d in zip(self.scales, self.diffs):
            mat = mat + sp.diags(w) @ d
        mat = mat.tocsr()
        mat.eliminate_zeros()
        return mat


def _assemble(family: VectorFieldFamily, domain: GridDomain) -> tuple[DiscreteField, ...]:
    if domain.ndim != family.ambient_dim:
        raise DomainError(
            f"family {family.name!r} acts on R^{family.ambient_dim}, domain is {domain.ndim}-dimensional"
        )
    shape = domain.shape
    total = int(np.prod(shape))
    strides = np.array([int(np.prod(shape[j + 1:])) for j in range(len(shape))])
    cols_flat = np.flatnonzero(domain.interior_mask.ravel())
    col_ids = np.arange(cols_flat.size)
    coeff = family.coefficient_array(domain.coordinates()).reshape(
        family.num_fields, family.ambient_dim, total
    )
    if not np.isfinite(coeff).all():
        raise FamilyError(f"family {family.name!r} has non-finite coefficients on the lattice")
    diffs = []
    for j in range(domain.ndim):
        # node c enters (u[c+e_j] - u[c]) at row c with -1 and at row c - e_j with +1
        rows = np.concatenate([cols_flat, cols_flat - strides[j]])
        vals = np.concatenate([-np.ones(cols_flat.size), np.ones(cols_flat.size)])
        diffs.append(sp.coo_matrix((vals, (rows, np.concatenate([col_ids, col_ids]))), shape=(total, cols_flat.size)).tocsr())
    ops = []
    for k in range(family.num_fields):
        used = [j for j in range(domain.ndim) if coeff[k, j].any()]
        ops.append(
            DiscreteField(
                scales=tuple(coeff[k, j] / domain.spacing[j] for j in used),
                diffs=tuple(diffs[j] for j in used),
                num_nodes=total,
                num_interior=cols_flat.size,
            )
        )
    return tuple(ops)


@dataclass(frozen=True, eq=False)
class HorizontalVectorField:
    """``N`` lattice arrays ``(X_1 u, ..., X_N u)`` sharing one domain.

    Components are supported on the interior plus the one-node layer whose
    forward neighbour is interior; they are zero everywhere else.
    """

    domain: GridDomain
    components: np.ndarray = field(repr=False)

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        if comps.shape[1:] != self.domain.shape:
            raise DomainError("component arrays must match the lattice shape")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    @property
    def num_fields(self) -> int:
        return self.components.shape[0]

    def norm(self) -> np.ndarray:
        """Pointwise Euclidean length over the components."""
        return np.sqrt(np.sum(self.components**2, axis=0))

    def dot(self, other: "HorizontalVectorField") -> np.ndarray:
        return np.sum(self.components * other.components, axis=0)


def _values(domain: GridDomain, f) -> np.ndarray:
    arr = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    if arr.shape != domain.shape:
        raise DomainError(f"lattice array of shape {arr.shape} does not match {domain.shape}")
    return arr


def _check_field_index(family: VectorFieldFamily, k: int) -> None:
    if not 0 <= k < family.num_fields:
        raise IndexError(f"field index {k} out of range for {family.num_fields} fields")


def apply_field(family: VectorFieldFamily, k: int, u: GridFunction) -> np.ndarray:
    """Discrete ``X_k u`` as a lattice array (zero-indexed ``k``)."""
    _check_field_index(family, k)
    return family.fields(u.domain)[k].apply(u.interior).reshape(u.domain.shape)


def apply_adjoint_field(family: VectorFieldFamily, k: int, f, domain: GridDomain | None = None) -> GridFunction:
    """Transpose of :func:`apply_field`; ``f`` is a lattice array or GridFunction."""
    _check_field_index(family, k)
    domain = f.domain if isinstance(f, GridFunction) else domain
    if domain is None:
        raise DomainError("a domain is required when f is a plain array")
    op = family.fields(domain)[k]
    return GridFunction.from_interior(domain, op.adjoint(_values(domain, f).ravel()))


def horizontal_gradient(family: VectorFieldFamily, u: GridFunction) -> HorizontalVectorField:
    vec = u.interior
    comps = np.stack([op.apply(vec).reshape(u.domain.shape) for op in family.fields(u.domain)])
    return HorizontalVectorField(u.domain, comps)


def horizontal_adjoint_divergence(family: VectorFieldFamily, F: HorizontalVectorField) -> GridFunction:
    """Discrete ``sum_k X_k^* F_k``."""
    if F.num_fields != family.num_fields:
        raise FamilyError(f"field has {F.num_fields} components, family has {family.num_fields}")
    acc = np.zeros(F.domain.num_interior)
    for op, comp in zip(family.fields(F.domain), F.components):
        acc += op.adjoint(comp.ravel())
    return GridFunction.from_interior(F.domain, acc)


def lattice_inner(domain: GridDomain, f: np.ndarray, g: np.ndarray) -> float:
    """``<f, g>_h`` for arrays defined on every lattice node."""
    return float(np.sum(np.asarray(f) * np.asarray(g)) * domain.cell_volume)


def dilate_domain(family: VectorFieldFamily, s: float, domain: GridDomain) -> GridDomain:
    """Image of ``domain`` under the family's dilation; node count and mask unchanged."""
    if not s > 0:
        raise ValueError(f"dilation factor must be positive, got {s}")
    if domain.ndim != family.ambient_dim:
        raise DomainError("domain dimension does not match the family")
    lo = family.dilate(s, np.array([b[0] for b in domain.bounds]))
    hi = family.dilate(s, np.array([b[1] for b in domain.bounds]))
    bounds = tuple((float(a), float(b)) for a, b in zip(lo, hi))
    return GridDomain(bounds, domain.shape, domain.interior_mask)


# --- built-in families -----------------------------------------------------


def _euclidean(n: int) -> VectorFieldFamily:
    eye = np.eye(n)

    def coeff(x):
        return eye.reshape((n, n) + (1,) * (x.ndim - 1))

    return VectorFieldFamily(
        name=f"euclidean({n})",
        ambient_dim=n,
        num_fields=n,
        coefficient_fn=coeff,
        field_names=tuple(f"d/dx{j + 1}" for j in range(n)),
        dilation_orders=(1.0,) * n,
        gradient_homogeneity=-1.0,
    )


def _grushin_coeff(x):
    one, zero = np.ones_like(x[0]), np.zeros_like(x[0])
    return np.array([[one, zero], [zero, x[0]]])


def _grushin() -> VectorFieldFamily:
    return VectorFieldFamily(
        name="grushin",
        ambient_dim=2,
        num_fields=2,
        coefficient_fn=_grushin_coeff,
        field_names=("X1", "X2"),
        dilation_orders=(1.0, 2.0),
        gradient_homogeneity=-1.0,
    )


def _heisenberg(n: int) -> VectorFieldFamily:
    dim = 2 * n + 1

    def coeff(x):
        a = np.zeros((2 * n, dim) + x.shape[1:])
        for j in range(n):
            a[j, j] = 1.0
            a[j, -1] = 2.0 * x[n + j]
            a[n + j, n + j] = 1.0
            a[n + j, -1] = -2.0 * x[j]
        return a

    names = tuple(f"X{j + 1}" for j in range(n)) + tuple(f"Y{j + 1}" for j in range(n))
    return VectorFieldFamily(
        name=f"heisenberg({n})",
        ambient_dim=dim,
        num_fields=2 * n,
        coefficient_fn=coeff,
        field_names=names,
        dilation_orders=(1.0,) * (2 * n) + (2.0,),
        gradient_homogeneity=-1.0,
    )


def custom_family(spec: dict, name: str = "custom") -> VectorFieldFamily:
    """Family from ``{"ambient_dim": n, "fields": [[expr, ...], ...]}``.

    Optional keys: ``"dilation"`` (one exponent per coordinate) and
    ``"gradient_homogeneity"``.
    """
    allowed = {"ambient_dim", "fields", "dilation", "gradient_homogeneity", "name"}
    unknown = set(spec) - allowed
    if unknown:
        raise FamilyError(f"unknown keys in custom family spec: {sorted(unknown)}")
    try:
        n = int(spec["ambient_dim"])
        rows = spec["fields"]
    except KeyError as exc:
        raise FamilyError(f"custom family spec is missing {exc.args[0]!r}") from None
    if not rows:
        raise FamilyError("custom family needs at least one field")
    if len(rows) > n:
        raise FamilyError(f"{len(rows)} fields exceed ambient_dim = {n}")
    compiled = []
    for k, row in enumerate(rows):
        if len(row) != n:
            raise FamilyError(f"field {k + 1} has {len(row)} coefficients, expected {n}")
        compiled.append([compile_expression(str(e), n) for e in row])

    def coeff(x):
        return np.array([[c(x) for c in row] for row in compiled])

    dilation = spec.get("dilation")
    family = VectorFieldFamily(
        name=spec.get("name", name),
        ambient_dim=n,
        num_fields=len(rows),
        coefficient_fn=coeff,
        dilation_orders=tuple(float(o) for o in dilation) if dilation is not None else None,
        gradient_homogeneity=spec.get("gradient_homogeneity"),
    )
    probe = np.random.default_rng(0).uniform(-1.0, 1.0, size=(n, 16))
    if not np.isfinite(family.coefficient_array(probe)).all():
        raise FamilyError("custom family has non-finite coefficients at probe points")
    return family


def load_custom_family(path: str | Path) -> VectorFieldFamily:
    path = Path(path)
    return custom_family(json.loads(path.read_text()), name=path.stem)


def make_family(kind: str, n: int | None = None, spec: dict | None = None) -> VectorFieldFamily:
    """Built-in or custom family: ``euclidean`` (n), ``grushin``, ``heisenberg`` (n), ``custom`` (spec)."""
    if kind == "euclidean":
        if n is None or n < 1:
            raise FamilyError("euclidean family needs n >= 1")
        return _euclidean(int(n))
    if kind == "grushin":
        return _grushin()
    if kind == "heisenberg":
        if n is None or n < 1:
            raise FamilyError("heisenberg family needs n >= 1")
        return _heisenberg(int(n))
    if kind == "custom":
        if spec is None:
            raise FamilyError("custom family needs a spec")
        return custom_family(spec)
    raise FamilyError(f"unknown family kind {kind!r}")
