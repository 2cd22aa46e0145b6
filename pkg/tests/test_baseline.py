from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import small_instances
from qrinterdict.baseline import (
    _walk,
    baseline_solve,
    make_rng,
    sample_path,
    sample_paths,
    saa_objective,
    transition_probabilities,
)
from qrinterdict.graph import diamond, generate_random
from qrinterdict.oracle import brute_evaluate, enumerate_paths, finite_diff_gradient, grid_search_optimum
from qrinterdict.projection import random_feasible


@given(small_instances(), st.integers(0, 100))
def test_transition_rows_sum_to_one(case, seed):
    inst, _ = case
    net = inst.network
    x = random_feasible(inst.constraints, np.random.default_rng(seed))
    probs = transition_probabilities(net, net.utilities(x), inst.mu)
    sums = np.add.reduceat(probs, net.succ_ptr[:-2])[: net.n - 1]
    assert np.allclose(sums, 1.0, atol=1e-12)
    assert np.all(probs >= 0)


@given(small_instances(n_max=8, cap=100), st.integers(0, 100))
def test_policy_reproduces_path_probabilities(case, seed):
    inst, paths = case
    x = random_feasible(inst.constraints, np.random.default_rng(seed))
    net = inst.network
    probs = transition_probabilities(net, net.utilities(x), inst.mu)
    pos = {nid: i for i, nid in enumerate(inst.order)}
    ev = brute_evaluate(inst, x, paths)
    for path, p_exact in zip(paths.paths, ev.path_prob):
        p = 1.0
        for u, v in zip(path, path[1:]):
            i, j = pos[u], pos[v]
            lo = net.succ_ptr[i]
            p *= probs[lo + int(np.flatnonzero(net.succ_idx[lo : net.succ_ptr[i + 1]] == j)[0])]
        assert p == pytest.approx(p_exact, rel=1e-9, abs=1e-300)


def test_sampler_deterministic():
    inst = generate_random(15, 0.5, 0.5, 1)
    x = np.zeros(inst.constraints.n_vars)
    a = sample_paths(inst, x, 50, make_rng(3))
    b = sample_paths(inst, x, 50, make_rng(3))
    assert a.paths == b.paths
    assert sample_path(inst, x, make_rng(3)) == sample_path(inst, x, make_rng(3))


def test_sampled_paths_are_valid():
    inst = generate_random(15, 0.5, 0.5, 1)
    arcs = set(inst.arcs)
    batch = sample_paths(inst, np.zeros(inst.constraints.n_vars), 200, make_rng(0))
    for p in batch.paths:
        assert p[0] == inst.origin and p[-1] == inst.destination
        assert all(arc in arcs for arc in zip(p, p[1:]))


def test_diamond_frequencies():
    d = diamond()
    x = [0.8, 0.2]
    exact = dict(zip(enumerate_paths(d).paths, brute_evaluate(d, x, enumerate_paths(d)).path_prob))
    counts = Counter(sample_paths(d, x, 10_000, make_rng(0)).paths)
    tv = 0.5 * sum(abs(counts[p] / 10_000 - q) for p, q in exact.items())
    assert tv <= 0.03


def test_saa_gradient():
    inst = generate_random(12, 0.6, 0.6, 2)
    net = inst.network
    x = np.full(net.n_vars, 0.1)
    walks = _walk(net, transition_probabilities(net, net.utilities(x), inst.mu), 300, make_rng(1))
    fn = saa_objective(net, walks, inst.mu)
    numeric = finite_diff_gradient(lambda y: fn(y)[0], x)
    assert np.allclose(fn(x)[1], numeric, rtol=1e-4, atol=1e-7)


def test_baseline_on_diamond():
    rep = baseline_solve(diamond(), n_samples=500, iters=30, restarts=3, seed=0)
    _, best = grid_search_optimum(diamond())
    assert rep.objective <= best + 1e-9
    assert rep.objective >= 0.45
    assert len(rep.extras["restart_values"]) == 3


def test_baseline_reproducible():
    inst = generate_random(10, 0.6, 0.6, 4)
    a = baseline_solve(inst, n_samples=100, iters=5, restarts=2, seed=9)
    b = baseline_solve(inst, n_samples=100, iters=5, restarts=2, seed=9)
    assert np.array_equal(a.x, b.x)
