from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import enumerable_instances, small_instances
from qrinterdict.errors import PathExplosion, StepTooLarge, TooManyCriticalNodes
from qrinterdict.graph import build_layered, chain, diamond, generate_random
from qrinterdict.oracle import (
    brute_evaluate,
    enumerate_paths,
    finite_diff_gradient,
    grid_search_minimum,
    grid_search_optimum,
    matrix_objective_gradient,
    sample_coverages,
    shortest_path_interdiction,
)
from qrinterdict.paths import g_value_and_gradient
from qrinterdict.projection import random_feasible


def test_diamond_paths():
    ps = enumerate_paths(diamond())
    assert sorted(ps.paths) == [(0, 1, 3), (0, 2, 3)]
    assert np.array_equal(ps.critical_count, [1, 1])


def test_layered_paths_project_back():
    d = diamond()
    lay = build_layered(d, 0.0)
    ps = enumerate_paths(lay)
    assert sorted(lay.project_path(p) for p in ps.paths) == sorted(enumerate_paths(d).paths)


def test_path_cap():
    inst = generate_random(20, 0.9, 0.5, 0)
    with pytest.raises(PathExplosion):
        enumerate_paths(inst, cap=100)


def test_diamond_oracle_quantities():
    ev = brute_evaluate(diamond(), [0.3, 0.1], enumerate_paths(diamond()))
    assert ev.best_utility == pytest.approx(-0.1)
    assert ev.gap == pytest.approx(0.2)
    assert ev.n_best == 1
    assert ev.beta1 == 0 and ev.beta2 == 0


def test_all_paths_tie():
    ev = brute_evaluate(diamond(), [0.2, 0.2], enumerate_paths(diamond()))
    assert ev.n_best == 2 and ev.gap == np.inf


def test_chain_betas_infinite():
    c = chain(4, critical=(1, 2))
    ev = brute_evaluate(c, [0.1, 0.1], enumerate_paths(c))
    assert ev.beta1 == np.inf and ev.beta2 == np.inf
    assert np.isnan(ev.restricted_value)


def test_finite_diff_bounds():
    f = lambda x: float(np.sum(x**2))
    with pytest.raises(StepTooLarge):
        finite_diff_gradient(f, [0.0, 0.5], bounds=(0.0, 1.0))
    g = finite_diff_gradient(f, [0.0, 0.5], bounds=(0.0, 1.0), one_sided=True)
    assert g == pytest.approx([0.0, 1.0], abs=1e-4)


@given(small_instances(n_max=8, cap=200), st.integers(0, 100), st.floats(-1, 2))
def test_linear_system_matches_sweep(case, seed, delta):
    inst, _ = case
    x = random_feasible(inst.constraints, np.random.default_rng(seed))
    g, grad = matrix_objective_gradient(inst, x, delta)
    b = g_value_and_gradient(inst, x, delta)
    scale = np.exp(b.log_scale)
    assert g == pytest.approx(b.raw_value, rel=1e-9, abs=1e-12 * scale)
    assert np.allclose(grad, b.grad * scale, rtol=1e-8, atol=1e-12 * scale)


def test_grid_diamond():
    x, f = grid_search_optimum(diamond())
    assert f == pytest.approx(0.5, abs=1e-9)
    assert x == pytest.approx([0.5, 0.5])
    _, gmin = grid_search_optimum(diamond(), objective="gamma")
    assert gmin == pytest.approx(np.log(2) - 0.5, abs=1e-9)


def test_grid_minimum_restricted():
    _, lo = grid_search_minimum(diamond())
    assert lo == pytest.approx(0.0, abs=1e-12)


def test_grid_too_many_variables():
    for inst, _ in enumerable_instances(20, n_range=(10, 12), frac=0.8, cap=5000):
        if inst.constraints.n_vars > 3:
            with pytest.raises(TooManyCriticalNodes):
                grid_search_optimum(inst)
            return
    pytest.fail("no instance with more than three variables found")


def test_lp_diamond():
    x, t = shortest_path_interdiction(diamond())
    assert x == pytest.approx([0.5, 0.5])
    assert t == pytest.approx(-0.5)


@given(small_instances(n_max=8, cap=200), st.integers(0, 100))
def test_lp_is_min_max(case, seed):
    inst, paths = case
    _, t = shortest_path_interdiction(inst, paths)
    x = random_feasible(inst.constraints, np.random.default_rng(seed))
    assert paths.utility(x).max() >= t - 1e-9


def test_samples_feasible_and_include_corners():
    inst = generate_random(12, 0.5, 0.5, 4)
    pts = sample_coverages(inst, 16, 0, extra=[np.full(inst.constraints.n_vars, 0.9)])
    assert all(inst.constraints.is_feasible(p) for p in pts)
    assert np.allclose(pts[0], inst.constraints.lx)
    assert len(pts) == 16 + 3
