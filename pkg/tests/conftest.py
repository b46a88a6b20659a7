from __future__ import annotations

import numpy as np
import pytest

from subfreq import SolverOptions, make_box_domain, make_family, solve_principal

# (family kind, n, bounds, default shape) for small geometries shared across tests
GEOMETRIES = {
    "euclidean1": ("euclidean", 1, [(0.0, 1.0)], (65,)),
    "euclidean2": ("euclidean", 2, [(0.0, 1.0)] * 2, (17, 17)),
    "grushin": ("grushin", None, [(-1.0, 1.0)] * 2, (17, 17)),
    "heisenberg1": ("heisenberg", 1, [(-1.0, 1.0)] * 3, (9, 9, 9)),
}

NUM_CRITERIA = 11
CRITERIA: dict[int, tuple[bool, str]] = {}
_ACCEPTANCE_SEEN: list[str] = []


def geometry(name: str, shape=None):
    kind, n, bounds, default = GEOMETRIES[name]
    return make_family(kind, n), make_box_domain(bounds, shape or default)


@pytest.fixture(params=list(GEOMETRIES), scope="session")
def geom(request):
    return geometry(request.param)


_EIG_CACHE: dict = {}


def eigenpair(name: str, p: float, shape=None):
    key = (name, p, shape)
    if key not in _EIG_CACHE:
        fam, dom = geometry(name, shape)
        _EIG_CACHE[key] = (fam, dom, solve_principal(fam, dom, SolverOptions(p=p)))
    return _EIG_CACHE[key]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion."""
    _ACCEPTANCE_SEEN.append(request.node.name)

    def record(number: int, ok: bool, detail: str) -> bool:
        CRITERIA[number] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_SEEN:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, NUM_CRITERIA + 1):
        ok, detail = CRITERIA.get(number, (False, "no verdict recorded (test errored or was skipped)"))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
