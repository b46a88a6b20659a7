import logging

import numpy as np
import pytest

from subfreq import (
    DomainError,
    GridFunction,
    SolverOptions,
    barta_lower_bound,
    domain_monotonicity_check,
    linear_principal_oracle,
    make_box_domain,
    make_family,
    nodal_ratio_residual,
    proportionality_defect,
    random_positive_function,
    scaling_check,
    simplicity_check,
    solve_principal,
    stationarity_residual,
    uniqueness_check,
)
from subfreq.vector_fields import FamilyError, custom_family

from conftest import GEOMETRIES, eigenpair, geometry

PS = (1.5, 2.0, 3.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"p": 1.0},
        {"max_iterations": 0},
        {"tol_residual": 0.0},
        {"armijo_c": 1.0},
        {"backtrack": 0.0},
        {"stall_window": 0},
        {"precond_floor": 1e-3, "precond_floor_min": 1e-2},
        {"eps_reg": -1.0},
    ],
)
def test_invalid_options(kwargs):
    with pytest.raises(ValueError):
        SolverOptions(**kwargs)


def test_eps_reg_default_depends_on_p():
    _, dom = geometry("euclidean2")
    assert SolverOptions(p=1.5).resolved_eps(dom) == pytest.approx(1e-10 * dom.diameter)
    assert SolverOptions(p=3.0).resolved_eps(dom) == 0.0
    assert SolverOptions(p=1.5, eps_reg=0.0).resolved_eps(dom) == 0.0


@pytest.mark.parametrize("name", list(GEOMETRIES))
def test_p_two_matches_shift_invert_oracle(name):
    fam, dom, pair = eigenpair(name, 2.0)
    lam, vec = linear_principal_oracle(fam, dom)
    assert pair.converged
    assert pair.lambda1 == pytest.approx(lam, rel=1e-8)
    assert proportionality_defect(pair.u1, vec) < 1e-8


@pytest.mark.parametrize("name", list(GEOMETRIES))
@pytest.mark.parametrize("p", PS)
def test_solution_is_positive_normalized_and_stationary(name, p):
    fam, dom, pair = eigenpair(name, p)
    assert pair.converged and pair.positive
    u = pair.u1.interior
    assert u.min() > 0
    assert np.sum(u**p) * dom.cell_volume == pytest.approx(1.0)
    assert nodal_ratio_residual(fam, pair.u1, pair.lambda1, p) <= SolverOptions().tol_residual
    slack = 16 * np.finfo(float).eps * pair.lambda1
    assert np.all(np.diff(pair.history) <= slack)


def test_runs_are_reproducible_and_seed_independent():
    fam, dom = geometry("grushin")
    a = solve_principal(fam, dom, SolverOptions(p=3.0, seed=1))
    b = solve_principal(fam, dom, SolverOptions(p=3.0, seed=1))
    c = solve_principal(fam, dom, SolverOptions(p=3.0, seed=2))
    assert a.lambda1 == b.lambda1 and np.array_equal(a.u1.values, b.u1.values)
    assert c.lambda1 == pytest.approx(a.lambda1, rel=1e-9)


def test_start_with_zeros_recovers_positive_minimizer():
    fam, dom = geometry("euclidean2")
    x = dom.coordinates()
    start = GridFunction(dom, np.where(x[0] < 0.5, 1.0, 0.0))
    pair = solve_principal(fam, dom, SolverOptions(p=3.0), initial=start)
    assert pair.converged and pair.positive
    assert pair.lambda1 == pytest.approx(eigenpair("euclidean2", 3.0)[2].lambda1, rel=1e-9)


def test_initial_guess_errors():
    fam, dom = geometry("euclidean1")
    other = make_box_domain([(0, 1)], (9,))
    with pytest.raises(DomainError):
        solve_principal(fam, dom, initial=random_positive_function(other, 0))
    with pytest.raises(ValueError, match="positive part"):
        solve_principal(fam, dom, initial=GridFunction.from_interior(dom, -np.ones(dom.num_interior)))


def test_iteration_cap_reports_non_convergence(caplog):
    fam, dom = geometry("euclidean2")
    with caplog.at_level(logging.WARNING):
        pair = solve_principal(fam, dom, SolverOptions(p=3.0, max_iterations=1))
    assert not pair.converged and pair.iterations == 1
    assert "stopped after" in caplog.text
    assert set(pair.to_dict()) == {"lambda1", "iterations", "residual", "converged", "vanishing_nodes", "p"}


def _heisenberg_corner():
    fam, dom = geometry("heisenberg1", (13, 13, 13))
    mask = dom.interior_mask & np.all(dom.coordinates() < 0.0, axis=0)
    return fam, dom.with_mask(mask)


def test_sign_changing_discrete_ground_state_is_reported():
    fam, dom = _heisenberg_corner()
    lam_signed, vec = linear_principal_oracle(fam, dom)
    assert vec.interior.min() < 0 < vec.interior.max()
    pair = solve_principal(fam, dom, SolverOptions(p=2.0))
    assert pair.converged and not pair.positive and pair.vanishing_nodes > 0
    assert pair.lambda1 > lam_signed
    assert stationarity_residual(fam, pair.u1, pair.lambda1, 2.0) <= SolverOptions().tol_residual
    assert nodal_ratio_residual(fam, pair.u1, pair.lambda1, 2.0) > 1.0


def test_barta_bounds():
    fam, dom, pair = eigenpair("heisenberg1", 3.0)
    for seed in range(5):
        assert barta_lower_bound(fam, dom, random_positive_function(dom, seed), 3.0) <= pair.lambda1
    assert barta_lower_bound(fam, dom, pair.u1, 3.0) == pytest.approx(pair.lambda1, rel=1e-6)
    with pytest.raises(ValueError):
        barta_lower_bound(fam, dom, -pair.u1, 3.0)


def test_uniqueness_check_verdicts():
    fam, dom, pair = eigenpair("grushin", 1.5)
    ok = uniqueness_check(fam, dom, 3.0 * pair.u1, pair.lambda1, 1.5, eigenpair=pair)
    assert ok.passed and ok.applicable
    off = uniqueness_check(fam, dom, pair.u1, 1.05 * pair.lambda1, 1.5, eigenpair=pair)
    assert not off.applicable and not off.passed
    neg = uniqueness_check(fam, dom, -pair.u1, pair.lambda1, 1.5, eigenpair=pair)
    assert not neg.applicable


def test_simplicity_check():
    fam, dom = geometry("euclidean2")
    rep = simplicity_check(fam, dom, 1.5, restarts=3, seed=4)
    assert rep.passed and rep.metrics["defect"] < 1e-6
    with pytest.raises(ValueError):
        simplicity_check(fam, dom, 1.5, restarts=1)


def test_monotonicity_check():
    fam, dom = geometry("euclidean2")
    inner = dom.with_mask(dom.interior_mask & (dom.coordinates()[0] < 0.6))
    rep = domain_monotonicity_check(fam, inner, dom, 3.0)
    assert rep.passed and rep.metrics["ratio"] > 1.0
    with pytest.raises(DomainError):
        domain_monotonicity_check(fam, dom, inner, 3.0)


@pytest.mark.parametrize("s", [0.5, 3.0])
def test_scaling_check(s):
    fam, dom = geometry("grushin")
    rep = scaling_check(fam, dom, 3.0, s)
    assert rep.passed
    assert rep.metrics["normalized_ratio"] == pytest.approx(1.0, abs=1e-9)


def test_scaling_needs_a_dilation_law():
    fam = custom_family({"ambient_dim": 1, "fields": [["1 + x1^2"]]})
    with pytest.raises(FamilyError):
        scaling_check(fam, make_box_domain([(0, 1)], (17,)), 2.0, 2.0)


def test_proportionality_defect():
    _, dom = geometry("euclidean1")
    f = random_positive_function(dom, 0)
    assert proportionality_defect(f, 4.0 * f) == pytest.approx(0.0, abs=1e-15)
    assert proportionality_defect(f, -f) == pytest.approx(0.0, abs=1e-15)
    assert proportionality_defect(f, random_positive_function(dom, 1)) > 0
