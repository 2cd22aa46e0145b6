"""Euclidean projection onto the box-plus-budget feasible set."""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleConstraints
from .graph import Constraints


def _project_capped(x: np.ndarray, lx: float, ux: float, budget: float) -> np.ndarray:
    y = np.clip(x, lx, ux)
    if y.sum() <= budget:
        return y
    # Find lam >= 0 with sum(clip(x - lam, lx, ux)) == budget. The sum is
    # piecewise linear and non-increasing in lam, with kinks at x - ux and x - lx.
    kinks = np.concatenate([x - ux, x - lx])
    kinks = np.unique(np.concatenate([[0.0], kinks[kinks > 0]]))
    totals = np.clip(x[None, :] - kinks[:, None], lx, ux).sum(axis=1)
    j = int(np.argmax(totals <= budget))
    lo, hi = kinks[j - 1], kinks[j]
    s_lo, s_hi = totals[j - 1], totals[j]
    lam = lo + (s_lo - budget) * (hi - lo) / (s_lo - s_hi)
    return np.clip(x - lam, lx, ux)


def project_feasible(x_raw, constraints: Constraints) -> np.ndarray:
    """Closest point to ``x_raw`` with lx <= x <= ux and per-kind sums <= budget.

    Kinds decouple, and within a kind the KKT conditions give
    x = clip(x_raw - lam, lx, ux) with a single multiplier lam >= 0, located
    exactly by scanning the sorted kinks of the piecewise-linear budget sum.
    """
    x = np.asarray(x_raw, dtype=float).reshape(-1)
    out = np.empty_like(x)
    lx, ux = constraints.lx, constraints.ux
    for k, budget in enumerate(constraints.budgets):
        idx = np.flatnonzero(constraints.kind_of_var == k)
        if idx.size == 0:
            continue
        if idx.size * lx > budget + 1e-12:
            raise InfeasibleConstraints(
                f"kind {k}: {idx.size} nodes at lower bound {lx} exceed budget {budget}"
            )
        out[idx] = _project_capped(x[idx], lx, ux, float(budget))
    return out


def feasible_start(constraints: Constraints) -> np.ndarray:
    """Deterministic starting point: each kind's budget spread evenly, then projected."""
    n = constraints.n_vars
    x = np.full(n, constraints.ux)
    for k, budget in enumerate(constraints.budgets):
        idx = np.flatnonzero(constraints.kind_of_var == k)
        if idx.size:
            x[idx] = budget / idx.size
    return project_feasible(x, constraints)


def random_feasible(constraints: Constraints, rng: np.random.Generator) -> np.ndarray:
    """Random feasible point: uniform in the box, rescaled toward lx when over budget."""
    lx, ux = constraints.lx, constraints.ux
    x = lx + (ux - lx) * rng.random(constraints.n_vars)
    for k, budget in enumerate(constraints.budgets):
        idx = np.flatnonzero(constraints.kind_of_var == k)
        if idx.size == 0:
            continue
        excess = x[idx] - lx
        room = budget - idx.size * lx
        total = excess.sum()
        if total > room:
            # shrink toward the lower corner along a random fraction of the slack
            x[idx] = lx + excess * (room / total) * rng.random()
    return x
