import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subfreq import (
    GridFunction,
    SolutionKind,
    apply_operator,
    classify_solution,
    dirichlet_energy,
    inner,
    rayleigh_quotient,
    weak_form_residual,
)
from subfreq.p_sub_laplacian import flux_weight, signed_power

from conftest import GEOMETRIES, eigenpair, geometry

ps = st.floats(1.2, 4.0)


def _smooth(dom, seed):
    rng = np.random.default_rng(seed)
    return GridFunction.from_interior(dom, 0.2 + rng.uniform(size=dom.num_interior))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(list(GEOMETRIES)), ps, st.integers(0, 1000))
def test_operator_is_the_derivative_of_energy_over_p(name, p, seed):
    fam, dom = geometry(name)
    u, phi = _smooth(dom, seed), _smooth(dom, seed + 1)
    t = 1e-6
    fd = (dirichlet_energy(fam, u + t * phi, p) - dirichlet_energy(fam, u - t * phi, p)) / (2 * t * p)
    assert inner(apply_operator(fam, u, p), phi) == pytest.approx(fd, rel=1e-5)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(list(GEOMETRIES)), ps, st.floats(0.1, 10.0), st.integers(0, 1000))
def test_homogeneity(name, p, c, seed):
    fam, dom = geometry(name)
    u = _smooth(dom, seed)
    assert np.allclose(apply_operator(fam, c * u, p).interior, c ** (p - 1) * apply_operator(fam, u, p).interior)
    assert rayleigh_quotient(fam, c * u, p) == pytest.approx(rayleigh_quotient(fam, u, p), rel=1e-12)


@pytest.mark.parametrize("name", list(GEOMETRIES))
def test_weak_residual_matches_operator_form(name):
    fam, dom = geometry(name)
    u, phi = _smooth(dom, 1), _smooth(dom, 2)
    p, lam = 2.7, 3.0
    direct = inner(apply_operator(fam, u, p), phi) - lam * inner(GridFunction(dom, signed_power(u.values, p - 1)), phi)
    assert weak_form_residual(fam, u, lam, p, phi) == pytest.approx(direct, rel=1e-12)


def test_p_equal_two_is_the_assembled_linear_operator():
    fam, dom = geometry("heisenberg1")
    u = _smooth(dom, 3)
    lap = sum(m.T @ m for m in fam.matrices(dom))
    assert np.allclose(apply_operator(fam, u, 2.0).interior, lap @ u.interior)


def test_flux_weight_conventions():
    g = np.array([0.0, 1.0, 4.0])
    assert np.array_equal(flux_weight(g, 1.5), [0.0, 1.0, 0.5])
    assert np.allclose(flux_weight(g, 1.5, eps_reg=1.0), (g**2 + 1) ** -0.25)
    assert np.array_equal(flux_weight(g, 2.0), [1.0, 1.0, 1.0])


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_classification_of_the_principal_pair(p):
    fam, dom, pair = eigenpair("euclidean2", p)
    u, lam = pair.u1, pair.lambda1
    assert classify_solution(fam, u, lam, p).kind is SolutionKind.WEAK
    assert classify_solution(fam, u, 1.1 * lam, p).kind is SolutionKind.SUB
    assert classify_solution(fam, u, 0.9 * lam, p).kind is SolutionKind.SUP


def test_classification_with_an_explicit_test_set():
    fam, dom, pair = eigenpair("grushin", 2.0)
    tests = [_smooth(dom, s) for s in range(4)] + [-_smooth(dom, 9)]
    cls = classify_solution(fam, pair.u1, pair.lambda1, 2.0, test_set=tests)
    assert cls.kind is SolutionKind.WEAK and cls.num_test_functions == 5
    with pytest.raises(ValueError):
        classify_solution(fam, pair.u1, pair.lambda1, 2.0, test_set=[])


def test_invalid_arguments():
    fam, dom = geometry("euclidean1")
    u = _smooth(dom, 0)
    with pytest.raises(ValueError):
        dirichlet_energy(fam, u, 1.0)
    with pytest.raises(ValueError):
        rayleigh_quotient(fam, GridFunction.from_interior(dom, np.zeros(dom.num_interior)), 2.0)
    with pytest.raises(ValueError):
        apply_operator(fam, u, 2.0, eps_reg=-1.0)
