from __future__ import annotations

import numpy as np
import pytest

from helpers import enumerable_instances
from qrinterdict.diagnostics import (
    FAIL,
    PASS,
    beta_at,
    certify_modified_solution,
    certify_restricted_solution,
    certify_solution,
    certify_zero_sum,
    has_critical_free_path,
    kappa,
    logsumexp_gap_bound,
    measure_eps_prime,
    utility_gap_bound,
    same_sign_utilities,
    sandwich,
)
from qrinterdict.graph import build_layered, chain, diamond, generate_random
from qrinterdict.oracle import brute_evaluate, enumerate_paths, sample_coverages
from qrinterdict.optimize import SolveOptions, solve
from qrinterdict.errors import RestrictedUndefined


def covered_instances(count, max_vars=3, seed0=0, mu=1.0):
    """Enumerable instances where every path crosses a critical node and single crossings exist."""
    out = []
    for inst, paths in enumerable_instances(8 * count, n_range=(5, 10), p=0.4, frac=0.6, mu=mu, max_vars=max_vars, seed0=seed0):
        if has_critical_free_path(inst):
            continue
        if not np.any(paths.critical_count == 1):
            continue
        out.append((inst, paths))
        if len(out) == count:
            break
    return out


def test_kappa_diamond():
    assert kappa(diamond()) == 2.0


def test_critical_free_path_detection():
    assert not has_critical_free_path(diamond())
    inst = generate_random(6, 1.0, 0.5, 0)  # complete DAG keeps the direct arc
    assert has_critical_free_path(inst)


def test_diamond_betas_zero():
    assert beta_at(diamond(), [0.2, 0.4]) == (0.0, 0.0)


def test_chain_betas_infinite():
    assert beta_at(chain(4, critical=(1, 2)), [0.1, 0.1]) == (np.inf, np.inf)


def test_beta_matches_oracle():
    for inst, paths in covered_instances(5):
        for x in sample_coverages(inst, 8, 1):
            ev = brute_evaluate(inst, x, paths)
            b1, b2 = beta_at(inst, x)
            assert b1 == pytest.approx(ev.beta1, rel=1e-9)
            assert b2 == pytest.approx(ev.beta2, rel=1e-9)


def test_eps_prime_diamond():
    assert measure_eps_prime(build_layered(diamond(), 0.0), [[0.0, 0.0], [0.5, 0.5]]) == (0.0, 0.0)


def test_eps_prime_decreases_with_penalty():
    for inst, _ in covered_instances(5):
        pts = sample_coverages(inst, 8, 0)
        prev = None
        for c in (0.0, 1.0, 5.0, 20.0):
            e1, e2 = measure_eps_prime(build_layered(inst, c), pts)
            if prev is not None:
                assert e1 <= prev[0] + 1e-15 and e2 <= prev[1] + 1e-15
            prev = (e1, e2)


def test_sandwich_holds():
    rng = np.random.default_rng(0)
    for inst, paths in covered_instances(5):
        for x in sample_coverages(inst, 16, int(rng.integers(1000))):
            lo, mid, hi = sandwich(inst, x)
            assert lo <= mid + 1e-9 and mid <= hi + 1e-9


def test_utility_and_logsumexp_gap_bounds():
    for inst, paths in covered_instances(5):
        for mu in (0.1, 1.0):
            sub = inst.with_mu(mu)
            sub_paths = enumerate_paths(sub)
            for x in sample_coverages(sub, 8, 0):
                ev = brute_evaluate(sub, x, sub_paths)
                assert same_sign_utilities(ev)
                assert abs(ev.adversary_value - ev.best_utility) <= utility_gap_bound(ev) + 1e-12
                assert 0 <= ev.log_partition - ev.best_utility <= logsumexp_gap_bound(ev) + 1e-12


def test_certify_restricted_diamond():
    rep = certify_restricted_solution(diamond(), solve("restricted", diamond()).x)
    assert rep.reference_kind == "grid oracle"
    assert rep.checks == {"restricted_guarantee": PASS, "penalized_guarantee_mult": PASS, "penalized_guarantee_add": PASS}
    assert rep.bound_restricted_guarantee == pytest.approx(0.5, abs=1e-6)
    assert rep.to_dict()["kappa"] == 2.0


def test_certify_restricted_random():
    for inst, _ in covered_instances(4, seed0=3):
        try:
            r = solve("restricted", inst)
        except RestrictedUndefined:
            continue
        rep = certify_restricted_solution(inst, r.extras["x_before_improvement"])
        assert rep.passed, rep.checks


def test_certify_skips_with_critical_free_paths():
    inst = generate_random(6, 1.0, 0.5, 0)
    rep = certify_restricted_solution(inst, np.zeros(inst.constraints.n_vars))
    assert all(v.startswith("skipped") for v in rep.checks.values())


def test_certify_modified():
    for inst, _ in covered_instances(3, seed0=5):
        m = solve("modified", inst)
        lay = build_layered(inst, m.extras["penalty_c"])
        cert = certify_modified_solution(inst, lay, m.extras["x_before_improvement"], m.delta_bar)
        assert FAIL not in cert.checks.values(), cert.to_dict()


def test_zero_sum_diamond():
    rep = certify_zero_sum(diamond(), [2.0, 1.0, 0.5, 0.1])
    assert rep.passed and rep.monotone
    row = next(r for r in rep.rows if r.mu == 1.0)
    assert row.gamma_star == pytest.approx(np.log(2) - 0.5, abs=1e-7)
    assert row.t_star == pytest.approx(-0.5)


def test_certify_solution_bundle():
    rep = solve("restricted", diamond())
    out = certify_solution(diamond(), rep, SolveOptions())
    assert out["status"] == "pass"
    assert out["checks"]["normalization"] == PASS
