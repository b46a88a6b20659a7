"""Masked rectangular lattices and zero-extended grid functions.

A :class:`GridDomain` is a uniform lattice over a bounding box together with a
boolean mask of the nodes that lie strictly inside the open set.  Grid
functions store one value per lattice node and vanish identically off the
mask, which is the discrete stand-in for Dirichlet boundary conditions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class DomainError(ValueError):
    """Raised for invalid lattices, masks or lattice mismatches."""


@dataclass(frozen=True, eq=False)
class GridDomain:
    bounds: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]
    interior_mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        shape = tuple(int(s) for s in self.shape)
        if len(bounds) != len(shape) or not shape:
            raise DomainError("bounds and shape must have the same nonzero length")
        for j, ((lo, hi), s) in enumerate(zip(bounds, shape)):
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise DomainError(f"degenerate bounds in coordinate {j}: ({lo}, {hi})")
            if s < 3:
                raise DomainError(f"shape[{j}] = {s} < 3")
        mask = np.array(self.interior_mask, dtype=bool)
        if mask.shape != shape:
            raise DomainError(f"mask shape {mask.shape} does not match lattice shape {shape}")
        if not mask.any():
            raise DomainError("empty interior")
        if _edge_layer(shape)[mask].any():
            raise DomainError("interior mask touches the outermost lattice layer")
        mask.setflags(write=False)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "interior_mask", mask)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (s - 1) for (lo, hi), s in zip(self.bounds, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def num_interior(self) -> int:
        return int(self.interior_mask.sum())

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum((hi - lo) ** 2 for lo, hi in self.bounds)))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, s) for (lo, hi), s in zip(self.bounds, self.shape)]

    def coordinates(self) -> np.ndarray:
        """Node coordinates as an array of shape ``(ndim, *shape)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"))

    def interior_points(self) -> np.ndarray:
        """Coordinates of interior nodes, shape ``(num_interior, ndim)``, C order."""
        return self.coordinates()[:, self.interior_mask].T

    @property
    def lattice_key(self) -> tuple:
        return (self.bounds, self.shape)

    @property
    def key(self) -> tuple:
        digest = hashlib.sha1(np.packbits(self.interior_mask).tobytes()).hexdigest()
        return self.lattice_key + (digest,)

    def same_lattice(self, other: "GridDomain") -> bool:
        return self.shape == other.shape and np.allclose(
            np.asarray(self.bounds), np.asarray(other.bounds), rtol=1e-14, atol=0.0
        )

    def with_mask(self, mask: np.ndarray) -> "GridDomain":
        return GridDomain(self.bounds, self.shape, mask)


def _edge_layer(shape: tuple[int, ...]) -> np.ndarray:
    edge = np.zeros(shape, dtype=bool)
    for j in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[j] = 0
        edge[tuple(idx)] = True
        idx[j] = -1
        edge[tuple(idx)] = True
    return edge


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Scalar field on a lattice; exactly zero off the interior mask."""

    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.domain.shape:
            raise DomainError(f"values shape {values.shape} != lattice shape {self.domain.shape}")
        if not np.isfinite(values).all():
            raise DomainError("grid function has non-finite values")
        values[~self.domain.interior_mask] = 0.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_interior(cls, domain: GridDomain, vec: np.ndarray) -> "GridFunction":
        values = np.zeros(domain.shape)
        values[domain.interior_mask] = vec
        return cls(domain, values)

    @classmethod
    def from_callable(cls, domain: GridDomain, fn: Callable[..., np.ndarray]) -> "GridFunction":
        """Sample ``fn(x)`` where ``x`` has shape ``(ndim, *shape)``."""
        vals = np.broadcast_to(np.asarray(fn(domain.coordinates()), dtype=float), domain.shape)
        return cls(domain, vals)

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.domain.interior_mask]

    def _check(self, other: "GridFunction") -> None:
        if not self.domain.same_lattice(other.domain):
            raise DomainError("grid functions live on different lattices")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.domain, self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.domain, self.values - other.values)
        return NotImplemented

    def __mul__(self, c):
        if isinstance(c, GridFunction):
            self._check(c)
            return GridFunction(self.domain, self.values * c.values)
        return GridFunction(self.domain, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.domain, -self.values)


def make_box_domain(bounds: Sequence[Sequence[float]], shape: Sequence[int]) -> GridDomain:
    """Box lattice whose interior is everything except the outermost layer."""
    shape = tuple(int(s) for s in shape)
    if any(s < 3 for s in shape):
        raise DomainError(f"every shape entry must be >= 3, got {shape}")
    mask = ~_edge_layer(shape)
    return GridDomain(tuple(map(tuple, bounds)), shape, mask)


def make_mask_domain(
    bounds: Sequence[Sequence[float]],
    shape: Sequence[int],
    predicate: Callable[[np.ndarray], np.ndarray],
) -> GridDomain:
    """Lattice whose interior is ``{node : predicate(node) is true}``.

    ``predicate`` is called once with the coordinate array of shape
    ``(ndim, *shape)`` and must return a boolean array of the lattice shape.
    """
    box = make_box_domain(bounds, shape)
    mask = np.broadcast_to(np.asarray(predicate(box.coordinates()), dtype=bool), box.shape)
    if not mask.any():
        raise DomainError("predicate selects no lattice node (empty interior)")
    if (mask & _edge_layer(box.shape)).any():
        raise DomainError("predicate is true on the outermost lattice layer")
    return box.with_mask(mask)


def is_subdomain(inner: GridDomain, outer: GridDomain) -> bool:
    if not inner.same_lattice(outer):
        raise DomainError("is_subdomain needs two masks on the same lattice")
    return bool(np.all(~inner.interior_mask | outer.interior_mask))


def integrate(f: GridFunction) -> float:
    return float(f.interior.sum() * f.domain.cell_volume)


def inner(f: GridFunction, g: GridFunction) -> float:
    """Lattice inner product ``sum f g * prod(h)``."""
    f._check(g)
    return float(np.dot(f.interior, g.interior) * f.domain.cell_volume)


def lp_norm(f: GridFunction, p: float) -> float:
    if not p > 1:
        raise ValueError(f"lp_norm needs p > 1, got {p}")
    return float((np.abs(f.interior) ** p).sum() * f.domain.cell_volume) ** (1.0 / p)


def random_positive_function(domain: GridDomain, seed: int, modes: int = 3) -> GridFunction:
    """Deterministic smooth random function with interior values in [0.1, 1.1].

    Built as a sum of a few low-frequency cosines in normalized coordinates and
    affinely rescaled to the target range.
    """
    rng = np.random.default_rng(seed)
    x = domain.coordinates()
    xi = np.stack(
        [(x[j] - lo) / (hi - lo) for j, (lo, hi) in enumerate(domain.bounds)]
    )
    acc = np.zeros(domain.shape)
    for _ in range(4 * modes):
        k = rng.integers(0, modes + 1, size=domain.ndim)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.normal() / (1.0 + np.sum(k**2))
        acc += amp * np.cos(np.pi * np.tensordot(k, xi, axes=1) + phase)
    vals = acc[domain.interior_mask]
    lo, hi = vals.min(), vals.max()
    scaled = np.full_like(vals, 0.6) if hi - lo <= 1e-14 * max(1.0, abs(hi)) else 0.1 + (vals - lo) / (hi - lo)
    return GridFunction.from_interior(domain, scaled)
