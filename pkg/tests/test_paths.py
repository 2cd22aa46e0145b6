from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import rel_close, small_instances
from qrinterdict.errors import InfeasibleStrategy, RestrictedUndefined
from qrinterdict.graph import build_layered, chain, diamond
from qrinterdict.oracle import brute_evaluate, finite_diff_gradient
from qrinterdict.paths import (
    defender_value,
    evaluate,
    evaluate_restricted,
    g_restricted_value_and_gradient,
    g_value_and_gradient,
    gamma_and_gradient,
    restricted_value,
)
from qrinterdict.projection import random_feasible


def test_diamond_uncovered():
    ev = evaluate(diamond(), [0.0, 0.0])
    assert ev.crossing == pytest.approx({1: 0.5, 2: 0.5})
    assert ev.log_partition == pytest.approx(np.log(2))
    assert ev.defender_value == pytest.approx(0.0)
    g = gamma_and_gradient(diamond(), [0.0, 0.0])
    assert g.grad == pytest.approx([-0.5, -0.5])


def test_diamond_one_covered():
    ev = evaluate(diamond(), [1.0, 0.0])
    p1 = 1 / (1 + np.e)
    assert ev.crossing[1] == pytest.approx(p1, rel=1e-12)
    assert ev.adversary_value == pytest.approx(-p1, rel=1e-12)
    assert ev.defender_value == pytest.approx(p1, rel=1e-12)


def test_diamond_restricted_family():
    b = g_restricted_value_and_gradient(diamond(), [0.5, 0.5], 0.2)
    assert b.raw_value == pytest.approx(2 * np.exp(-0.5) * 0.3, rel=1e-12)


def test_layered_penalty_shifts_gamma():
    c = chain(4, critical=(1, 2))
    lay = build_layered(c, 10.0)
    base = gamma_and_gradient(c, [0.0, 0.0]).value
    assert gamma_and_gradient(lay, [0.0, 0.0]).value == pytest.approx(base - 10.0)


def test_infeasible_rejected():
    with pytest.raises(InfeasibleStrategy):
        evaluate(diamond(), [0.9, 0.9])
    evaluate(diamond(), [0.9, 0.9], check=False)


def test_restricted_undefined_on_chain():
    with pytest.raises(RestrictedUndefined):
        restricted_value(chain(4, critical=(1, 2)), [0.1, 0.1])


def test_log_z_dict_matches_suffix_sums():
    ev = evaluate(diamond(), [0.3, 0.1])
    assert ev.Z[3] == pytest.approx(1.0)
    assert ev.Z[1] == pytest.approx(np.exp(-0.3))
    assert ev.Z[0] == pytest.approx(np.exp(-0.3) + np.exp(-0.1))


@given(small_instances(), st.integers(0, 1000))
def test_dp_matches_enumeration(case, seed):
    inst, paths = case
    x = random_feasible(inst.constraints, np.random.default_rng(seed))
    dp = evaluate(inst, x)
    bf = brute_evaluate(inst, x, paths)
    assert rel_close(dp.log_z_origin, bf.log_z)
    assert rel_close(dp.crossing_vector, bf.crossing)
    assert rel_close(dp.defender_value, bf.defender_value)
    assert rel_close(dp.adversary_value, bf.adversary_value)
    assert rel_close(dp.log_partition, bf.log_partition)
    assert abs(bf.path_prob.sum() - 1) <= 1e-10
    delta = bf.defender_value - 0.3
    assert rel_close(g_value_and_gradient(inst, x, delta).raw_value, bf.g(delta))
    if np.isfinite(bf.restricted_value):
        assert rel_close(restricted_value(inst, x), bf.restricted_value)
        assert rel_close(g_restricted_value_and_gradient(inst, x, delta).raw_value, bf.g_restricted(delta))
        r = evaluate_restricted(inst, x)
        assert rel_close(np.exp(r.log_mass_delta), np.exp(bf.log_mass_delta), atol=1e-300)
        assert rel_close(np.exp(r.log_mass_delta_plus), np.exp(bf.log_mass_delta_plus), atol=1e-300)


@given(small_instances(), st.integers(0, 1000))
def test_scaled_value_identity(case, seed):
    inst, _ = case
    x = random_feasible(inst.constraints, np.random.default_rng(seed))
    b = g_value_and_gradient(inst, x, 0.4)
    assert b.value == pytest.approx(defender_value(inst, x) - 0.4, abs=1e-12)


@given(small_instances(mu=1.0), st.integers(0, 1000))
def test_gradients_match_finite_differences(case, seed):
    inst, _ = case
    c = inst.constraints
    x = c.lx + 0.1 + 0.3 * np.random.default_rng(seed).random(c.n_vars)
    delta = 0.2

    def check(fn, value_of):
        analytic = fn(x).grad * np.exp(fn(x).log_scale)
        numeric = finite_diff_gradient(lambda y: value_of(fn(y)), x, 1e-5)
        assert np.all(np.abs(analytic - numeric) <= np.maximum(1e-4 * np.abs(numeric), 1e-7))

    check(lambda y: g_value_and_gradient(inst, y, delta, check=False), lambda b: b.raw_value)
    check(lambda y: gamma_and_gradient(inst, y, check=False), lambda b: b.raw_value)
    try:
        g_restricted_value_and_gradient(inst, x, delta, check=False)
    except RestrictedUndefined:
        return
    check(lambda y: g_restricted_value_and_gradient(inst, y, delta, check=False), lambda b: b.raw_value)
