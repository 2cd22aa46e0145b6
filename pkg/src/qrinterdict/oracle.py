"""Brute-force ground truth by explicit path enumeration.

Intended for small instances only: every quantity is an explicit sum over the
enumerated origin-destination paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linprog
from scipy.special import logsumexp
from scipy.stats import qmc

from .errors import PathExplosion, StepTooLarge, TooManyCriticalNodes
from .graph import LayeredInstance, ValidatedInstance
from .projection import project_feasible

AnyInstance = Union[ValidatedInstance, LayeredInstance]

DEFAULT_PATH_CAP = 100_000
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PathSet:
    """Enumerated paths with per-path structure precomputed.

    ``incidence[p, k]`` counts visits of path p to coverage variable k (0 or 1
    on simple paths). Utilities and rewards are affine in the coverage vector.
    """

    paths: tuple[tuple, ...]
    incidence: np.ndarray
    base_utility: np.ndarray
    base_reward: np.ndarray
    w_f: np.ndarray
    w_l: np.ndarray
    mu: float

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def critical_count(self) -> np.ndarray:
        return self.incidence.sum(axis=1)

    def utility(self, x: np.ndarray) -> np.ndarray:
        return self.base_utility + self.incidence @ (self.w_f * x)

    def reward(self, x: np.ndarray) -> np.ndarray:
        return self.base_reward + self.incidence @ (self.w_l * x)


def enumerate_paths(inst: AnyInstance, cap: int = DEFAULT_PATH_CAP) -> PathSet:
    """All origin-destination paths by depth-first search in topological order."""
    net = inst.network
    keys = inst.states if isinstance(inst, LayeredInstance) else inst.order
    sink = net.n - 1
    found: list[list[int]] = []
    stack = [(0, [0])]
    while stack:
        node, trail = stack.pop()
        if node == sink:
            found.append(trail)
            if len(found) > cap:
                raise PathExplosion(f"more than {cap} paths")
            continue
        for nxt in net.successors(node)[::-1]:
            stack.append((int(nxt), trail + [int(nxt)]))
    inc = np.zeros((len(found), net.n_vars))
    base_u = np.empty(len(found))
    for p, trail in enumerate(found):
        idx = np.array(trail[:-1])
        base_u[p] = net.base[idx].sum()
        vs = net.var[idx]
        np.add.at(inc[p], vs[vs >= 0], 1.0)
    return PathSet(
        paths=tuple(tuple(keys[i] for i in trail) for trail in found),
        incidence=inc,
        base_utility=base_u,
        base_reward=inc @ net.t_l,
        w_f=net.w_f.copy(),
        w_l=net.w_l.copy(),
        mu=inst.mu,
    )


def _log_mass(log_w: np.ndarray, mask: np.ndarray) -> float:
    return float(logsumexp(log_w[mask])) if np.any(mask) else -np.inf


def _ratio(log_num: float, log_den: float) -> float:
    """num/den with 0/0 -> 0 and positive/0 -> inf."""
    if log_num == -np.inf:
        return 0.0
    if log_den == -np.inf:
        return np.inf
    return float(np.exp(log_num - log_den))


@dataclass(frozen=True, eq=False)
class OracleEvaluation:
    utilities: np.ndarray
    rewards: np.ndarray
    path_prob: np.ndarray
    crossing: np.ndarray  # per coverage variable
    defender_value: float
    adversary_value: float
    log_partition: float  # Gamma
    log_z: float
    restricted_value: float  # nan when no path crosses exactly one critical node
    best_utility: float  # T(x)
    gap: float  # alpha(x); inf when every path ties
    n_best: int  # C(x)
    log_mass_delta: np.ndarray
    log_mass_delta_plus: np.ndarray
    log_union_delta: float
    log_union_delta_plus: float
    beta1: float
    beta2: float
    delta_paths: tuple[tuple[int, ...], ...]  # per variable, indices of single-crossing paths
    delta_plus_paths: tuple[tuple[int, ...], ...]
    critical_count: np.ndarray
    mu: float

    def g(self, delta: float) -> float:
        """Explicit path-sum sum_tau exp(U/mu) (R - delta)."""
        return float(np.sum(np.exp(self.utilities / self.mu) * (self.rewards - delta)))

    def g_restricted(self, delta: float) -> float:
        single = self.critical_count == 1
        return float(
            np.sum(np.exp(self.utilities[single] / self.mu) * (self.rewards[single] - delta))
        )


def brute_evaluate(inst: AnyInstance, x, paths: PathSet) -> OracleEvaluation:
    xv = inst.coverage_vector(x)
    mu = paths.mu
    u = paths.utility(xv)
    r = paths.reward(xv)
    log_w = u / mu
    log_z = float(logsumexp(log_w))
    prob = np.exp(log_w - log_z)
    prob = prob / prob.sum()
    count = paths.critical_count
    single = count == 1
    multi = count >= 2

    best = float(u.max())
    is_best = u >= best - TIE_TOL
    rest = u[~is_best]
    gap = float(best - rest.max()) if rest.size else np.inf

    n_vars = paths.incidence.shape[1]
    log_d = np.full(n_vars, -np.inf)
    log_dp = np.full(n_vars, -np.inf)
    d_paths, dp_paths = [], []
    beta1 = 0.0
    for k in range(n_vars):
        through = paths.incidence[:, k] > 0
        m1, m2 = through & single, through & multi
        log_d[k] = _log_mass(log_w, m1)
        log_dp[k] = _log_mass(log_w, m2)
        d_paths.append(tuple(np.flatnonzero(m1).tolist()))
        dp_paths.append(tuple(np.flatnonzero(m2).tolist()))
        beta1 = max(beta1, _ratio(log_dp[k], log_d[k]))
    u1 = _log_mass(log_w, single)
    u2 = _log_mass(log_w, multi)
    if np.any(single):
        ws = np.exp(log_w[single] - u1)
        f_restricted = float(ws @ r[single] / ws.sum())
    else:
        f_restricted = float("nan")
    return OracleEvaluation(
        utilities=u,
        rewards=r,
        path_prob=prob,
        crossing=paths.incidence.T @ prob,
        defender_value=float(prob @ r),
        adversary_value=float(prob @ u),
        log_partition=mu * log_z,
        log_z=log_z,
        restricted_value=f_restricted,
        best_utility=best,
        gap=gap,
        n_best=int(is_best.sum()),
        log_mass_delta=log_d,
        log_mass_delta_plus=log_dp,
        log_union_delta=u1,
        log_union_delta_plus=u2,
        beta1=beta1,
        beta2=_ratio(u2, u1),
        delta_paths=tuple(d_paths),
        delta_plus_paths=tuple(dp_paths),
        critical_count=count,
        mu=mu,
    )


def finite_diff_gradient(
    objective: Callable[[np.ndarray], float],
    x,
    h: float = 1e-5,
    bounds: tuple[float, float] | None = None,
    one_sided: bool = False,
) -> np.ndarray:
    """Central differences per coordinate.

    With ``bounds`` set, a step leaving the interval raises StepTooLarge unless
    ``one_sided`` is true, in which case a forward or backward difference is used.
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        lo_ok = hi_ok = True
        if bounds is not None:
            lo_ok = dn[i] >= bounds[0]
            hi_ok = up[i] <= bounds[1]
        if lo_ok and hi_ok:
            grad[i] = (objective(up) - objective(dn)) / (2 * h)
        elif not one_sided:
            raise StepTooLarge(f"coordinate {i}: x +/- h leaves [{bounds[0]}, {bounds[1]}]")
        elif hi_ok:
            grad[i] = (objective(up) - objective(x)) / h
        else:
            grad[i] = (objective(x) - objective(dn)) / h
    return grad


def matrix_objective_gradient(inst: ValidatedInstance, x, delta: float) -> tuple[float, np.ndarray]:
    """g and its gradient from the dense linear-system formulation.

    With M[s, s'] = exp(v(s)/mu) on arcs s -> s', solve (I - M) H = B where B
    has a unit column at each critical node and one at the sink. Column s of H
    at the origin is the prefix sum into s; the sink column is Z. Derivatives
    follow from J_H = (I - M)^{-1} J_M H. Unscaled, so only for small instances.
    """
    xv = inst.coverage_vector(x)
    net = inst.network
    mu = inst.mu
    n = net.n
    v = net.utilities(xv)
    m = np.zeros((n, n))
    for i in range(n):
        m[i, net.successors(i)] = np.exp(v[i] / mu)
    a = np.eye(n) - m  # upper triangular in topological order
    crit_pos = np.flatnonzero(net.var >= 0)
    k_of = net.var[crit_pos]
    b = np.zeros((n, len(crit_pos) + 1))
    b[crit_pos, np.arange(len(crit_pos))] = 1.0
    b[n - 1, -1] = 1.0
    h = solve_triangular(a, b, lower=False)
    y0 = h[0, :-1]  # prefix sums into each critical node
    z = h[:, -1]
    r = net.w_l[k_of] * xv[k_of] + net.t_l[k_of]
    g = float(np.sum(r * y0 * z[crit_pos]) - delta * z[0])

    grad = np.zeros(net.n_vars)
    for c, pos in enumerate(crit_pos):
        k = k_of[c]
        jm = np.zeros((n, n))
        jm[pos] = m[pos] * net.w_f[k] / mu
        jh = solve_triangular(a, jm @ h, lower=False)
        dy0 = jh[0, :-1]
        dz = jh[:, -1]
        term = np.sum(r * (dy0 * z[crit_pos] + y0 * dz[crit_pos])) - delta * dz[0]
        term += net.w_l[k] * y0[c] * z[pos]
        grad[k] += term
    return g, grad


def _grid(inst: ValidatedInstance, resolution: int) -> np.ndarray:
    c = inst.constraints
    d = c.n_vars
    if d > 3:
        raise TooManyCriticalNodes(f"grid search supports at most 3 critical nodes, got {d}")
    if d == 0:
        return np.zeros((1, 0))
    axis = np.linspace(c.lx, c.ux, resolution)
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    ok = np.ones(len(pts), dtype=bool)
    for k, budget in enumerate(c.budgets):
        idx = np.flatnonzero(c.kind_of_var == k)
        if idx.size:
            ok &= pts[:, idx].sum(axis=1) <= budget + 1e-12
    return pts[ok]


def grid_values(inst: ValidatedInstance, pts: np.ndarray, paths: PathSet, objective: str = "defender") -> np.ndarray:
    """Objective at many coverage vectors at once ('defender', 'gamma', 'restricted' or 'adversary')."""
    out = np.empty(len(pts))
    chunk = max(1, 2_000_000 // max(len(paths), 1))
    single = paths.critical_count == 1
    for s in range(0, len(pts), chunk):
        xs = pts[s : s + chunk]
        u = paths.base_utility[None, :] + xs @ (paths.incidence * paths.w_f).T
        lw = u / paths.mu
        if objective == "gamma":
            out[s : s + chunk] = paths.mu * logsumexp(lw, axis=1)
            continue
        if objective == "adversary":
            r = u
        else:
            r = paths.base_reward[None, :] + xs @ (paths.incidence * paths.w_l).T
        if objective == "restricted":
            lw, r = lw[:, single], r[:, single]
        lw = lw - lw.max(axis=1, keepdims=True)
        w = np.exp(lw)
        out[s : s + chunk] = (w * r).sum(axis=1) / w.sum(axis=1)
    return out


def grid_search_optimum(
    inst: ValidatedInstance,
    resolution: int = 101,
    objective: str = "defender",
    paths: PathSet | None = None,
) -> tuple[np.ndarray, float]:
    """Exhaustive grid over the feasible set (at most 3 coverage variables).

    Maximizes the defender value (or the restricted value); minimizes Gamma and
    the adversary's expected utility.
    """
    pts = _grid(inst, resolution)
    paths = paths if paths is not None else enumerate_paths(inst)
    vals = grid_values(inst, pts, paths, objective)
    best = int(np.argmin(vals) if objective in ("gamma", "adversary") else np.argmax(vals))
    return pts[best].copy(), float(vals[best])


def grid_search_minimum(inst: ValidatedInstance, resolution: int = 101, objective: str = "restricted", paths: PathSet | None = None):
    pts = _grid(inst, resolution)
    paths = paths if paths is not None else enumerate_paths(inst)
    vals = grid_values(inst, pts, paths, objective)
    best = int(np.argmin(vals))
    return pts[best].copy(), float(vals[best])


def shortest_path_interdiction(inst: ValidatedInstance, paths: PathSet | None = None) -> tuple[np.ndarray, float]:
    """min over feasible x of max over paths of U(tau; x), solved exactly as an LP.

    Variables (x, t): minimize t subject to U(tau; x) <= t for every path and x feasible.
    """
    paths = paths if paths is not None else enumerate_paths(inst)
    c = inst.constraints
    d = c.n_vars
    cost = np.zeros(d + 1)
    cost[-1] = 1.0
    a_path = np.hstack([paths.incidence * paths.w_f, -np.ones((len(paths), 1))])
    b_path = -paths.base_utility
    rows = [a_path]
    rhs = [b_path]
    for k, budget in enumerate(c.budgets):
        idx = np.flatnonzero(c.kind_of_var == k)
        if idx.size:
            row = np.zeros((1, d + 1))
            row[0, idx] = 1.0
            rows.append(row)
            rhs.append(np.array([budget]))
    bounds = [(c.lx, c.ux)] * d + [(None, None)]
    res = linprog(cost, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    x = project_feasible(res.x[:d], c)
    return x, float(paths.utility(x).max())


def sample_coverages(inst: AnyInstance, n: int = 64, seed: int = 0, extra=()) -> np.ndarray:
    """Low-discrepancy feasible points plus the projected corners lx*e and ux*e."""
    c = inst.constraints
    d = c.n_vars
    pts = [np.full(d, c.lx), np.full(d, c.ux)]
    if d:
        sob = qmc.Sobol(d, scramble=True, seed=seed)
        m = int(np.ceil(np.log2(max(n, 2))))
        raw = c.lx + (c.ux - c.lx) * sob.random_base2(m)[:n]
        pts.extend(raw)
    pts.extend(np.asarray(e, dtype=float) for e in extra)
    return np.array([project_feasible(p, c) for p in pts])
