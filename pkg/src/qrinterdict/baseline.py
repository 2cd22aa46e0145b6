"""Sampling baseline: walk the adversary's Markov policy, optimize a sample average."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graph import ValidatedInstance
from .network import Network
from .paths import defender_value, run_sweep
from .projection import project_feasible, random_feasible


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; identical seeds reproduce identical streams."""
    return np.random.Generator(np.random.Philox(int(seed)))


def transition_probabilities(net: Network, v: np.ndarray, mu: float) -> np.ndarray:
    """Successor probabilities per CSR arc: proportional to the successor's suffix sum."""
    res = run_sweep(net, v, np.zeros(net.n), mu)
    src = np.repeat(np.arange(net.n), np.diff(net.succ_ptr))
    dst = net.succ_idx
    # Z_j / Z_i written with the per-node stabilizers of the sweep
    return res.zhat[dst] * np.exp((res.phi[dst] - res.phi[src] + v[src]) / mu) / res.zhat[src]


@dataclass(frozen=True)
class SampleBatch:
    """Sampled origin-destination paths with their log weights U(tau; x)/mu."""

    paths: tuple[tuple[int, ...], ...]
    log_weights: np.ndarray
    seed: int | None
    size: int


@dataclass(frozen=True, eq=False)
class _Walks:
    positions: np.ndarray  # (n_samples, max_len), -1 padded
    incidence: np.ndarray  # (n_samples, n_vars)
    base_utility: np.ndarray  # (n_samples,)


def _walk(net: Network, probs: np.ndarray, n_samples: int, rng: np.random.Generator) -> _Walks:
    n = net.n
    # Per-node cumulative probabilities shifted by the node index, so one sorted
    # array serves every node: node i owns the interval (i, i + 1].
    cum = np.empty_like(probs)
    for i in range(n - 1):
        lo, hi = net.succ_ptr[i], net.succ_ptr[i + 1]
        c = np.cumsum(probs[lo:hi])
        c[-1] = 1.0
        cum[lo:hi] = i + c
    sink = n - 1
    cur = np.zeros(n_samples, dtype=np.int64)
    steps = [cur.copy()]
    active = np.ones(n_samples, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        u = rng.random(idx.size)
        slot = np.searchsorted(cum, cur[idx] + u, side="right")
        cur[idx] = net.succ_idx[slot]
        active = cur != sink
        step = np.full(n_samples, -1, dtype=np.int64)
        step[idx] = cur[idx]
        steps.append(step)
    pos = np.stack(steps, axis=1)
    inc = np.zeros((n_samples, net.n_vars))
    base_u = np.zeros(n_samples)
    valid = (pos >= 0) & (pos != sink)
    rows, cols = np.nonzero(valid)
    nodes = pos[rows, cols]
    np.add.at(base_u, rows, net.base[nodes])
    crit = net.var[nodes] >= 0
    inc[rows[crit], net.var[nodes[crit]]] = 1.0
    return _Walks(pos, inc, base_u)


def sample_paths(inst: ValidatedInstance, x, n_samples: int, rng: np.random.Generator) -> SampleBatch:
    xv = inst.coverage_vector(x)
    net = inst.network
    v = net.utilities(xv)
    walks = _walk(net, transition_probabilities(net, v, inst.mu), n_samples, rng)
    order = inst.order
    paths = tuple(tuple(order[p] for p in row if p >= 0) for row in walks.positions)
    u = walks.base_utility + walks.incidence @ (net.w_f * xv)
    return SampleBatch(paths, u / inst.mu, None, n_samples)


def sample_path(inst: ValidatedInstance, x, rng: np.random.Generator) -> tuple[int, ...]:
    """One path drawn from the adversary's policy at coverage ``x``."""
    return sample_paths(inst, x, 1, rng).paths[0]


def saa_objective(net: Network, walks: _Walks, mu: float):
    """Self-normalized sample average of the defender ratio over a fixed multiset."""
    inc = walks.incidence
    wf, wl, tl = net.w_f, net.w_l, net.t_l

    def fn(y):
        u = walks.base_utility + inc @ (wf * y)
        r = inc @ (wl * y + tl)
        lw = u / mu
        p = np.exp(lw - lw.max())
        p /= p.sum()
        f = float(p @ r)
        grad = wl * (inc.T @ p) + (wf / mu) * (inc.T @ (p * (r - f)))
        return f, grad

    return fn


def baseline_solve(
    inst: ValidatedInstance,
    n_samples: int = 1000,
    iters: int = 100,
    restarts: int = 10,
    seed: int = 0,
    opts=None,
):
    """Multi-start projected ascent on a sample-average objective, resampled each iteration.

    Each restart uses its own stream (seed + restart index) and a random
    feasible start; the restart with the best exact defender value wins.
    """
    from .optimize import SolveOptions, SolveReport, maximize_inner

    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    net = inst.network
    cons = inst.constraints
    mu = inst.mu
    best = None
    per_restart = []
    total_iters = 0
    for r in range(restarts):
        rng = make_rng(seed + r)
        x = random_feasible(cons, rng)
        for _ in range(iters):
            v = net.utilities(x)
            walks = _walk(net, transition_probabilities(net, v, mu), n_samples, rng)
            # each resample is a new objective, so the line search restarts from the initial step
            res = maximize_inner(saa_objective(net, walks, mu), x, cons, opts, max_iters=1)
            total_iters += 1
            if res.iterations:
                x = res.x
        value = defender_value(inst, x, check=False)
        per_restart.append(value)
        if best is None or value > best[1]:
            best = (project_feasible(x, cons), value)
    return SolveReport(
        method="baseline",
        x=best[0],
        critical_ids=inst.critical_ids,
        objective=best[1],
        inner_iterations=total_iters,
        outer_iterations=restarts,
        wall_time=time.perf_counter() - t0,
        extras={
            "restart_values": per_restart,
            "n_samples": n_samples,
            "iters": iters,
            "resampling": "per-iteration",
            "rng": "philox",
            "seed": seed,
        },
    )

