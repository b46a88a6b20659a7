"""Run configuration schema for the command-line tool."""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .domain_grid import GridDomain, make_box_domain, make_mask_domain
from .eigensolver import SolverOptions
from .gridio import domain_from_pgm
from .vector_fields import VectorFieldFamily, load_custom_family, make_family

CHECK_NAMES = ("picone", "caccioppoli", "monotonicity", "simplicity", "scaling", "barta", "uniqueness")
CheckName = Literal["picone", "caccioppoli", "monotonicity", "simplicity", "scaling", "barta", "uniqueness"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FamilyConfig(_Strict):
    kind: Literal["euclidean", "grushin", "heisenberg", "custom"]
    n: Optional[int] = Field(default=None, ge=1)
    path: Optional[str] = None
    spec: Optional[dict] = None

    @model_validator(mode="after")
    def _needs(self):
        if self.kind in ("euclidean", "heisenberg") and self.n is None:
            raise ValueError(f"family kind {self.kind!r} needs 'n'")
        if self.kind == "custom" and (self.path is None) == (self.spec is None):
            raise ValueError("custom family needs exactly one of 'path' or 'spec'")
        return self

    def build(self) -> VectorFieldFamily:
        if self.kind == "custom" and self.path is not None:
            return load_custom_family(self.path)
        return make_family(self.kind, n=self.n, spec=self.spec)


class DomainConfig(_Strict):
    """``box``: all but the outer layer; ``ball``: open ball; ``subbox``:
    nodes strictly inside ``inner``; ``pgm``: mask image."""

    kind: Literal["box", "ball", "subbox", "pgm"] = "box"
    bounds: list[tuple[float, float]]
    shape: Optional[list[int]] = None
    center: Optional[list[float]] = None
    radius: Optional[float] = Field(default=None, gt=0)
    inner: Optional[list[tuple[float, float]]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _needs(self):
        if self.kind != "pgm":
            if self.shape is None:
                raise ValueError(f"domain kind {self.kind!r} needs 'shape'")
            if len(self.shape) != len(self.bounds):
                raise ValueError("'shape' and 'bounds' must have the same length")
        if self.kind == "ball" and (self.center is None or self.radius is None):
            raise ValueError("ball domain needs 'center' and 'radius'")
        if self.kind == "subbox" and self.inner is None:
            raise ValueError("subbox domain needs 'inner'")
        if self.kind == "pgm" and self.path is None:
            raise ValueError("pgm domain needs 'path'")
        return self

    def build(self) -> GridDomain:
        if self.kind == "box":
            return make_box_domain(self.bounds, self.shape)
        if self.kind == "ball":
            c = np.asarray(self.center, dtype=float)
            r = self.radius

            def ball(x):
                return np.sum((x - c.reshape((-1,) + (1,) * (x.ndim - 1))) ** 2, axis=0) < r * r

            return make_mask_domain(self.bounds, self.shape, ball)
        if self.kind == "subbox":
            inner = self.inner

            def sub(x):
                ok = np.ones(x.shape[1:], dtype=bool)
                for j, (a, b) in enumerate(inner):
                    ok &= (x[j] > a) & (x[j] < b)
                return ok

            return make_mask_domain(self.bounds, self.shape, sub)
        return domain_from_pgm(self.path, self.bounds)


class SolverConfig(_Strict):
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
    eps_reg: Optional[float] = None


class PiconeParams(_Strict):
    mode: Literal["algebraic", "discrete"] = "algebraic"
    tol: float = 1e-10
    identity_tol: Optional[float] = None
    signed_u: bool = False


class CaccioppoliParams(_Strict):
    q_grid: Optional[list[float]] = None
    lam: Optional[float] = None
    cutoff: Literal["bump1", "bump2", "random"] = "bump2"
    tol: float = 1e-9


class MonotonicityParams(_Strict):
    subdomain: Optional[DomainConfig] = None
    tol: float = 1e-9


class SimplicityParams(_Strict):
    restarts: int = Field(default=5, ge=2)
    tol_defect: float = 1e-6
    tol_spread: float = 1e-6


class ScalingParams(_Strict):
    s: float = Field(default=2.0, gt=0)
    tol: float = 1e-2


class BartaParams(_Strict):
    samples: int = Field(default=20, ge=1)
    tol: float = 1e-8


class UniquenessParams(_Strict):
    lam: Optional[float] = None
    scale: float = Field(default=1.0, gt=0)
    tol: float = 1e-6


class ChecksConfig(_Strict):
    picone: PiconeParams = PiconeParams()
    caccioppoli: CaccioppoliParams = CaccioppoliParams()
    monotonicity: MonotonicityParams = MonotonicityParams()
    simplicity: SimplicityParams = SimplicityParams()
    scaling: ScalingParams = ScalingParams()
    barta: BartaParams = BartaParams()
    uniqueness: UniquenessParams = UniquenessParams()


class RunConfig(_Strict):
    family: FamilyConfig
    domain: DomainConfig
    p: float = Field(default=2.0, gt=1)
    seed: int = Field(default=0, ge=0)
    solver: SolverConfig = SolverConfig()
    checks: ChecksConfig = ChecksConfig()
    suite: list[CheckName] = list(CHECK_NAMES)
    out: Optional[str] = None
    pgm: bool = True

    def solver_options(self) -> SolverOptions:
        return SolverOptions(p=self.p, seed=self.seed, **self.solver.model_dump())
