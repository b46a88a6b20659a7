"""``subfreq`` command-line tool.

Exit codes: 0 success, 2 configuration or precondition error, 3 solver did
not converge, 4 hypothesis of the check not met, 5 check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np
from pydantic import ValidationError

from . import __version__
from .caccioppoli import bump_function, caccioppoli_sweep, random_cutoff
from .config import CHECK_NAMES, RunConfig
from .domain_grid import DomainError, GridDomain, GridFunction, is_subdomain, random_positive_function
from .eigensolver import (
    EigenPair,
    barta_lower_bound,
    domain_monotonicity_check,
    scaling_check,
    simplicity_check,
    solve_principal,
    uniqueness_check,
)
from .expressions import ExpressionError
from .gridio import field_slice_to_pgm, field_to_csv, write_json
from .p_sub_laplacian import SolutionKind, classify_solution
from .picone import verify_picone
from .vector_fields import FamilyError, VectorFieldFamily

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_INAPPLICABLE = 4
EXIT_FAILED = 5

DEFAULT_OUT = "subfreq_out"

log = logging.getLogger("subfreq")


class ConfigError(Exception):
    """Invalid configuration or violated precondition; maps to exit code 2."""


# --- configuration -------------------------------------------------------------


def _describe_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path} at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if seed is not None:
        raw["seed"] = seed
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(_describe_validation(e)) from None


@dataclass
class Context:
    config: RunConfig
    family: VectorFieldFamily
    domain: GridDomain
    _pair: EigenPair | None = field(default=None, repr=False)

    @property
    def p(self) -> float:
        return self.config.p

    def eigenpair(self) -> EigenPair:
        if self._pair is None:
            self._pair = solve_principal(self.family, self.domain, self.config.solver_options())
        return self._pair


def build_context(config: RunConfig) -> Context:
    try:
        family = config.family.build()
        domain = config.domain.build()
        config.solver_options()
    except (FamilyError, ExpressionError, DomainError, ValueError, OSError) as e:
        raise ConfigError(str(e)) from None
    if family.ambient_dim != domain.ndim:
        raise ConfigError(
            f"family {family.name!r} acts on {family.ambient_dim} dimensions, domain has {domain.ndim}"
        )
    return Context(config, family, domain)


# --- checks --------------------------------------------------------------------


@dataclass
class CheckOutcome:
    check: str
    exit_code: int
    margin: float | None
    report: dict

    @property
    def passed(self) -> bool:
        return self.exit_code == EXIT_OK


def _default_subdomain(domain: GridDomain) -> GridDomain:
    x = domain.coordinates()
    inside = np.ones(domain.shape, dtype=bool)
    for j, (lo, hi) in enumerate(domain.bounds):
        inside &= (x[j] > lo + 0.25 * (hi - lo)) & (x[j] < hi - 0.25 * (hi - lo))
    return domain.with_mask(inside & domain.interior_mask)


def _q_grid(ctx: Context) -> list[float]:
    q = ctx.config.checks.caccioppoli.q_grid
    p = ctx.p
    return list(q) if q is not None else [p - 0.4, p, p + 1.0, 2.0 * p]


def _subdomain(ctx: Context) -> GridDomain:
    sub = ctx.config.checks.monotonicity.subdomain
    if sub is None:
        return _default_subdomain(ctx.domain)
    try:
        return sub.build()
    except (DomainError, ValueError, OSError) as e:
        raise ConfigError(f"checks.monotonicity.subdomain: {e}") from None


def precheck(name: str, ctx: Context) -> None:
    """Validate the preconditions of ``name`` without running any solver."""
    p = ctx.p
    if name == "caccioppoli":
        q = _q_grid(ctx)
        if not q:
            raise ConfigError("checks.caccioppoli.q_grid is empty")
        bad = [x for x in q if not x > p - 1]
        if bad:
            raise ConfigError(f"checks.caccioppoli.q_grid: q must exceed p - 1 = {p - 1}, got {bad}")
    elif name == "monotonicity":
        sub = _subdomain(ctx)
        if not sub.same_lattice(ctx.domain):
            raise ConfigError("checks.monotonicity.subdomain must use the same bounds and shape as domain")
        if not is_subdomain(sub, ctx.domain):
            raise ConfigError("checks.monotonicity.subdomain is not contained in domain")
    elif name == "scaling":
        if not ctx.family.has_dilation:
            raise ConfigError(f"family {ctx.family.name!r} has no dilation law; scaling check unavailable")
    elif name not in CHECK_NAMES:
        raise ConfigError(f"unknown check {name!r}")


def _outcome(name: str, report: dict, passed: bool, applicable: bool, margin: float | None) -> CheckOutcome:
    if not applicable:
        code = EXIT_INAPPLICABLE
    else:
        code = EXIT_OK if passed else EXIT_FAILED
    return CheckOutcome(name, code, margin, report)


def run_picone(ctx: Context) -> CheckOutcome:
    prm = ctx.config.checks.picone
    seed = ctx.config.seed
    u = random_positive_function(ctx.domain, seed + 1)
    if prm.signed_u:
        u = GridFunction.from_interior(ctx.domain, u.interior - u.interior.mean())
    v = random_positive_function(ctx.domain, seed + 2)
    rep = verify_picone(ctx.family, u, v, ctx.p, mode=prm.mode, tol=prm.tol, identity_tol=prm.identity_tol)
    return _outcome("picone", rep.to_dict(), rep.passed, True, rep.min_L / rep.scale)


def _cutoff(ctx: Context) -> GridFunction:
    kind = ctx.config.checks.caccioppoli.cutoff
    if kind == "random":
        return random_cutoff(ctx.domain, ctx.config.seed + 3)
    return bump_function(ctx.domain, power=1 if kind == "bump1" else 2)


def run_caccioppoli(ctx: Context) -> CheckOutcome:
    prm = ctx.config.checks.caccioppoli
    pair = ctx.eigenpair()
    lam = pair.lambda1 if prm.lam is None else prm.lam
    v = pair.u1
    cls = classify_solution(ctx.family, v, lam, ctx.p)
    applicable = cls.kind in (SolutionKind.SUB, SolutionKind.WEAK)
    reports = caccioppoli_sweep(ctx.family, v, _cutoff(ctx), ctx.p, lam, _q_grid(ctx), tol=prm.tol)
    rel = [r.margin / max(abs(r.rhs), abs(r.lhs), np.finfo(float).tiny) for r in reports]
    body = {
        "lambda": lam,
        "classification": cls.kind.value,
        "eigenpair_converged": pair.converged,
        "cutoff": prm.cutoff,
        "applicable": applicable,
        "pass": applicable and all(r.passed for r in reports),
        "results": [r.to_dict() for r in reports],
    }
    if not applicable:
        body["notes"] = [f"v is {cls.kind.value}, not a sub-solution at this lambda"]
    return _outcome("caccioppoli", body, body["pass"], applicable, min(rel))


def run_monotonicity(ctx: Context) -> CheckOutcome:
    prm = ctx.config.checks.monotonicity
    rep = domain_monotonicity_check(
        ctx.family, _subdomain(ctx), ctx.domain, ctx.p, tol=prm.tol, opts=ctx.config.solver_options()
    )
    return _outcome("monotonicity", rep.to_dict(), rep.passed, rep.applicable, rep.metrics["margin"])


def run_simplicity(ctx: Context) -> CheckOutcome:
    prm = ctx.config.checks.simplicity
    rep = simplicity_check(
        ctx.family,
        ctx.domain,
        ctx.p,
        restarts=prm.restarts,
        seed=ctx.config.seed,
        opts=ctx.config.solver_options(),
        tol_defect=prm.tol_defect,
        tol_spread=prm.tol_spread,
    )
    margin = min(prm.tol_defect - rep.metrics["defect"], prm.tol_spread - rep.metrics["lambda_spread"])
    return _outcome("simplicity", rep.to_dict(), rep.passed, rep.applicable, margin)


def run_scaling(ctx: Context) -> CheckOutcome:
    prm = ctx.config.checks.scaling
    rep = scaling_check(ctx.family, ctx.domain, ctx.p, prm.s, tol=prm.tol, opts=ctx.config.solver_options())
    margin = prm.tol - abs(rep.metrics["normalized_ratio"] - 1.0)
    return _outcome("scaling", rep.to_dict(), rep.passed, rep.applicable, margin)


def run_barta(ctx: Context) -> CheckOutcome:
    prm = ctx.config.checks.barta
    pair = ctx.eigenpair()
    lam1 = pair.lambda1
    bounds = [
        barta_lower_bound(ctx.family, ctx.domain, random_positive_function(ctx.domain, ctx.config.seed + 100 + i), ctx.p)
        for i in range(prm.samples)
    ]
    at_u1 = barta_lower_bound(ctx.family, ctx.domain, pair.u1, ctx.p) if pair.positive else None
    worst = max(bounds)
    ok = worst <= lam1 * (1.0 + prm.tol) and pair.converged
    body = {
        "check": "barta",
        "lambda1": lam1,
        "eigenpair_converged": pair.converged,
        "samples": prm.samples,
        "max_random_bound": worst,
        "random_bounds": bounds,
        "bound_at_u1": at_u1,
        "relative_gap_at_u1": None if at_u1 is None else (lam1 - at_u1) / lam1,
        "tol": prm.tol,
        "pass": ok,
    }
    return _outcome("barta", body, ok, True, (lam1 * (1.0 + prm.tol) - worst) / lam1)


def run_uniqueness(ctx: Context) -> CheckOutcome:
    prm = ctx.config.checks.uniqueness
    pair = ctx.eigenpair()
    lam = pair.lambda1 * prm.scale if prm.lam is None else prm.lam
    rep = uniqueness_check(
        ctx.family, ctx.domain, pair.u1, lam, ctx.p, tol=prm.tol, opts=ctx.config.solver_options(), eigenpair=pair
    )
    gap = rep.metrics.get("relative_gap")
    margin = None if gap is None else prm.tol - gap
    return _outcome("uniqueness", rep.to_dict(), rep.passed, rep.applicable, margin)


RUNNERS: dict[str, Callable[[Context], CheckOutcome]] = {
    "picone": run_picone,
    "caccioppoli": run_caccioppoli,
    "monotonicity": run_monotonicity,
    "simplicity": run_simplicity,
    "scaling": run_scaling,
    "barta": run_barta,
    "uniqueness": run_uniqueness,
}


def run_check(name: str, ctx: Context) -> CheckOutcome:
    try:
        precheck(name, ctx)
    except (ConfigError, DomainError) as e:
        return CheckOutcome(name, EXIT_CONFIG, None, {"check": name, "error": str(e)})
    return RUNNERS[name](ctx)


# --- output --------------------------------------------------------------------


def _envelope(ctx: Context, command: str, **payload) -> dict:
    out = {
        "command": command,
        "version": __version__,
        "config": ctx.config.model_dump(mode="json"),
    }
    out.update(payload)
    out["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return out


def resolve_out_dir(cli_out: str | None, config: RunConfig) -> Path:
    chosen = os.environ.get("SUBFREQ_OUT") or cli_out or config.out or DEFAULT_OUT
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --- commands ------------------------------------------------------------------


def cmd_solve(ctx: Context, out: Path) -> int:
    pair = ctx.eigenpair()
    write_json(out / "eigenpair.json", _envelope(ctx, "solve", **pair.to_dict()))
    field_to_csv(out / "u1.csv", pair.u1)
    if ctx.config.pgm and ctx.domain.ndim >= 2:
        field_slice_to_pgm(out / "u1.pgm", pair.u1)
    print(f"lambda1 = {pair.lambda1:.12g}  iterations = {pair.iterations}  converged = {pair.converged}")
    if not pair.positive:
        print(
            f"warning: u1 vanishes at {pair.vanishing_nodes} interior nodes; "
            "it minimizes over nonnegative functions but is not an eigenfunction"
        )
    return EXIT_OK if pair.converged else EXIT_NOT_CONVERGED


def cmd_verify(ctx: Context, check: str, out: Path) -> int:
    outcome = run_check(check, ctx)
    if outcome.exit_code == EXIT_CONFIG:
        raise ConfigError(outcome.report["error"])
    payload = {"check": check, "exit_code": outcome.exit_code, "margin": outcome.margin, "report": outcome.report}
    write_json(out / "report.json", _envelope(ctx, "verify", **payload))
    print(f"{check}: {_status(outcome.exit_code)}")
    return outcome.exit_code


def _status(code: int) -> str:
    return {EXIT_OK: "pass", EXIT_INAPPLICABLE: "inapplicable", EXIT_FAILED: "FAIL", EXIT_CONFIG: "config error"}.get(
        code, f"exit {code}"
    )


def suite_exit_code(codes: list[int]) -> int:
    for code in (EXIT_CONFIG, EXIT_FAILED, EXIT_INAPPLICABLE, EXIT_NOT_CONVERGED):
        if code in codes:
            return code
    return EXIT_OK


def cmd_suite(ctx: Context, out: Path) -> int:
    names = list(ctx.config.suite)
    if not names:
        raise ConfigError("suite: the list of checks is empty")
    outcomes = []
    for name in names:
        outcome = run_check(name, ctx)
        outcomes.append(outcome)
        print(f"{name}: {_status(outcome.exit_code)}")
    code = suite_exit_code([o.exit_code for o in outcomes])
    payload = {
        "all_pass": code == EXIT_OK,
        "exit_code": code,
        "checks": [
            {"check": o.check, "pass": o.passed, "exit_code": o.exit_code, "margin": o.margin, "report": o.report}
            for o in outcomes
        ],
    }
    write_json(out / "suite_summary.json", _envelope(ctx, "suite", **payload))
    return code


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to a JSON run configuration")
    common.add_argument("--out", default=None, help="output directory (SUBFREQ_OUT takes precedence)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--threads", type=int, default=0, help="BLAS thread cap; 0 leaves the default")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="subfreq", description="Principal frequency of p-sub-Laplacians.")
    parser.add_argument("--version", action="version", version=f"subfreq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="compute the principal eigenpair")
    verify = sub.add_parser("verify", parents=[common], help="run one verification")
    verify.add_argument("--check", required=True, choices=CHECK_NAMES)
    sub.add_parser("suite", parents=[common], help="run the verifications listed in the config")
    return parser


def _thread_limit(n: int):
    if n <= 0:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.config, seed=args.seed)
        ctx = build_context(config)
        out = resolve_out_dir(args.out, config)
        with _thread_limit(args.threads):
            if args.command == "solve":
                return cmd_solve(ctx, out)
            if args.command == "verify":
                return cmd_verify(ctx, args.check, out)
            return cmd_suite(ctx, out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
