from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from qrinterdict.errors import InfeasibleConstraints
from qrinterdict.graph import Constraints
from qrinterdict.projection import feasible_start, project_feasible, random_feasible


@st.composite
def problems(draw):
    d = draw(st.integers(1, 8))
    kinds = np.array(draw(st.lists(st.integers(0, 1), min_size=d, max_size=d)), dtype=np.int64)
    lx = draw(st.floats(0.0, 0.3))
    ux = draw(st.floats(lx, 1.0))
    budgets = np.array([draw(st.floats(d * lx, d * ux + 1.0)) for _ in range(2)])
    x = np.array(draw(st.lists(st.floats(-2, 3), min_size=d, max_size=d)))
    return Constraints(lx, ux, kinds, budgets), x


@given(problems())
def test_projection_feasible_and_idempotent(prob):
    c, x = prob
    y = project_feasible(x, c)
    assert c.is_feasible(y, 1e-9)
    assert np.allclose(project_feasible(y, c), y, atol=1e-12)


@given(problems(), st.integers(0, 1000))
def test_projection_is_closest(prob, seed):
    c, x = prob
    y = project_feasible(x, c)
    z = random_feasible(c, np.random.default_rng(seed))
    assert np.linalg.norm(y - x) <= np.linalg.norm(z - x) + 1e-9
    # variational inequality: <x - y, z - y> <= 0 for every feasible z
    assert np.dot(x - y, z - y) <= 1e-9


def test_projection_matches_qp():
    rng = np.random.default_rng(0)
    c = Constraints(0.0, 1.0, np.zeros(6, dtype=np.int64), np.array([1.5]))
    for _ in range(10):
        x = rng.normal(size=6)
        y = project_feasible(x, c)
        res = minimize(
            lambda z: np.sum((z - x) ** 2), np.full(6, 0.25), method="SLSQP",
            bounds=[(0, 1)] * 6, constraints=[{"type": "ineq", "fun": lambda z: 1.5 - z.sum()}],
            options={"ftol": 1e-14, "maxiter": 500},
        )
        assert y == pytest.approx(res.x, abs=1e-6)


def test_infeasible_budget():
    c = Constraints(0.5, 1.0, np.zeros(3, dtype=np.int64), np.array([1.0]))
    with pytest.raises(InfeasibleConstraints):
        project_feasible(np.zeros(3), c)


@given(problems(), st.integers(0, 1000))
def test_random_and_start_points_feasible(prob, seed):
    c, _ = prob
    assert c.is_feasible(random_feasible(c, np.random.default_rng(seed)), 1e-9)
    assert c.is_feasible(feasible_start(c), 1e-9)
