import numpy as np
import pytest
from scipy.sparse import csr_matrix

from depotopt.lp import LpModel, LpStatus, lp_relax_solve
from depotopt.routing import build_milp
from depotopt.framework import kmeans_init
from depotopt import generate_instance

from lp_reference import OPTIMAL, solve_reference


def _model(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None):
    n = len(c)
    a_ub = csr_matrix(np.zeros((0, n))) if a_ub is None else csr_matrix(np.asarray(a_ub, dtype=float))
    a_eq = csr_matrix(np.zeros((0, n))) if a_eq is None else csr_matrix(np.asarray(a_eq, dtype=float))
    return LpModel(
        c=np.asarray(c, dtype=float),
        a_ub=a_ub,
        b_ub=np.asarray(b_ub if b_ub is not None else [], dtype=float),
        a_eq=a_eq,
        b_eq=np.asarray(b_eq if b_eq is not None else [], dtype=float),
    )


def test_known_box_lp():
    # max x + y with x <= 1, y <= 1  ->  2
    lp = _model([-1.0, -1.0])
    bounds = np.array([[0.0, 1.0], [0.0, 1.0]])
    sol = lp_relax_solve(lp, bounds)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-2.0, abs=1e-9)


def test_integer_lp_shortcut():
    # binding equality drives an integral optimum
    lp = _model([1.0, 2.0], a_eq=[[1.0, 1.0]], b_eq=[1.0])
    sol = lp_relax_solve(lp, np.array([[0.0, 1.0], [0.0, 1.0]]))
    assert sol.objective == pytest.approx(1.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-9)


def test_infeasible_detected():
    lp = _model([1.0], a_ub=[[1.0]], b_ub=[-2.0])
    sol = lp_relax_solve(lp, np.array([[0.0, 1.0]]))
    assert sol.status is LpStatus.INFEASIBLE


def test_random_models_match_reference(rng):
    # production engine versus the independent dense-tableau simplex
    for trial in range(25):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 6))
        c = rng.normal(size=n)
        a = rng.normal(size=(m, n))
        b = rng.uniform(0.5, 3.0, size=m)
        lb = np.zeros(n)
        ub = rng.uniform(0.5, 2.0, size=n)
        lp = _model(c, a_ub=a, b_ub=b)
        sol = lp_relax_solve(lp, np.column_stack((lb, ub)))
        status, obj, x = solve_reference(c, a, b, None, [], lb, ub)
        assert status == OPTIMAL
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective == pytest.approx(obj, rel=1e-7, abs=1e-7)


def test_routing_relaxation_matches_reference():
    # the actual model family, cross-checked end to end at desk scale
    inst = generate_instance(n_d=1, n_t=3, seed=5, n_v=2)
    placement = kmeans_init(inst, seed=5)
    model = build_milp(inst, placement)
    sol = lp_relax_solve(model.lp, np.column_stack((model.lb, model.ub)))
    finite_ub = np.where(np.isfinite(model.ub), model.ub, 1e7)
    status, obj, _ = solve_reference(
        model.lp.c,
        model.lp.a_ub,
        model.lp.b_ub,
        model.lp.a_eq,
        model.lp.b_eq,
        model.lb,
        finite_ub,
    )
    assert status == OPTIMAL and sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(obj, rel=1e-6, abs=1e-6)


def test_determinism():
    inst = generate_instance(n_d=2, n_t=3, seed=9, n_v=1)
    placement = kmeans_init(inst, seed=9)
    model = build_milp(inst, placement)
    bounds = np.column_stack((model.lb, model.ub))
    first = lp_relax_solve(model.lp, bounds)
    second = lp_relax_solve(model.lp, bounds)
    assert first.objective == second.objective
    assert np.array_equal(first.x, second.x)
