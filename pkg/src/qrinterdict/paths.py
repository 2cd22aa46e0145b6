"""Path-sum quantities and analytic gradients via topological sweeps.

All sums over paths are carried with per-node stabilizers (the best suffix or
prefix utility at each node), so nothing overflows for small mu. Reported
values are scale-corrected; ``log_scale`` fields recover unnormalized sums in
log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import EmptySubgraph, InfeasibleStrategy, NumericalUnderflow, RestrictedUndefined
from .graph import LayeredInstance, ValidatedInstance, build_layered, build_subgraph_retaining
from .network import Network

AnyInstance = Union[ValidatedInstance, LayeredInstance]

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class SweepResult:
    """Raw sweep output for one evaluation point."""

    phi: np.ndarray
    zhat: np.ndarray
    chat: np.ndarray
    psi: np.ndarray
    ahat: np.ndarray
    bhat: np.ndarray
    mu: float
    log_zsink: float = 0.0

    @property
    def log_z_origin(self) -> float:
        return float(np.log(self.zhat[0]) + self.phi[0] / self.mu - self.log_zsink)

    def _tilt(self) -> np.ndarray:
        return np.exp((self.psi + self.phi - self.phi[0]) / self.mu) / self.zhat[0]

    def through(self) -> np.ndarray:
        """Probability that a path visits each position."""
        return self.ahat * self.zhat * self._tilt()

    def moment_through(self, col: int) -> np.ndarray:
        """Per position, E[1{path visits i} * total of column ``col`` along the path]."""
        return (self.bhat[:, col] * self.zhat + self.ahat * self.chat[:, col]) * self._tilt()

    def mean(self, col: int) -> float:
        """Expected path total of column ``col``."""
        return float(self.chat[0, col] / self.zhat[0])

    def log_suffix(self) -> np.ndarray:
        """log of the suffix sums from each position (sink value 0)."""
        with np.errstate(divide="ignore"):
            return np.log(self.zhat) + self.phi / self.mu - self.log_zsink

    def log_prefix(self) -> np.ndarray:
        """log of the prefix sums into each position (utility of the node itself excluded)."""
        with np.errstate(divide="ignore"):
            return np.log(self.ahat) + self.psi / self.mu


def run_sweep(net: Network, v: np.ndarray, h: np.ndarray, mu: float, zsink: float = 1.0) -> SweepResult:
    """Run the selected kernel. ``h`` is (n, m); ``zsink`` rescales every path weight."""
    h = np.ascontiguousarray(h, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    v = np.ascontiguousarray(v, dtype=float)
    out = kernels.sweep(
        net.succ_ptr, net.succ_idx, net.pred_ptr, net.pred_idx, v, h, float(mu), float(zsink)
    )
    res = SweepResult(*out, mu=float(mu), log_zsink=float(np.log(zsink)))
    z0 = res.zhat[0]
    if not np.isfinite(z0) or z0 <= 0 or not np.isfinite(res.phi[0]):
        raise NumericalUnderflow("path mass is not representable at this point")
    return res


def _coverage(inst: AnyInstance, x, check: bool) -> np.ndarray:
    xv = inst.coverage_vector(x)
    if check:
        viol = inst.constraints.violation(xv)
        if viol > FEASIBILITY_TOL:
            raise InfeasibleStrategy(f"coverage violates constraints by {viol:.3g}")
    return xv


def _per_var(net: Network, values: np.ndarray) -> np.ndarray:
    """Sum position values into coverage variables (layered copies collapse)."""
    mask = net.var >= 0
    return np.bincount(net.var[mask], weights=values[mask], minlength=net.n_vars)


def _node_keys(inst: AnyInstance):
    return inst.states if isinstance(inst, LayeredInstance) else inst.order


@dataclass(frozen=True)
class FlowEvaluation:
    """Exact path-sum summary at one coverage vector.

    ``log_z`` maps node key to log of its suffix sum (destination: 0).
    ``log_y`` maps critical id to log of the prefix sum from the origin into it.
    """

    critical_ids: tuple[int, ...]
    log_z: dict
    log_y: dict
    crossing: dict
    crossing_vector: np.ndarray
    defender_value: float
    adversary_value: float
    log_partition: float  # mu * log Z at the origin
    log_z_origin: float

    @property
    def Z(self) -> dict:
        return {k: float(np.exp(v)) for k, v in self.log_z.items()}


def evaluate(inst: AnyInstance, x, *, check: bool = True) -> FlowEvaluation:
    """Crossing probabilities, defender value, adversary expected utility and log-partition."""
    xv = _coverage(inst, x, check)
    net = inst.network
    mu = inst.mu
    v = net.utilities(xv)
    h = np.stack([net.rewards(xv), v], axis=1)
    res = run_sweep(net, v, h, mu)
    p_var = _per_var(net, res.through())
    keys = _node_keys(inst)
    log_z = dict(zip(keys, res.log_suffix().tolist()))
    lp = res.log_prefix()
    # prefix into a critical node, summed over layered copies
    mask = net.var >= 0
    log_y_var = np.full(net.n_vars, -np.inf)
    for k in range(net.n_vars):
        sel = lp[mask][net.var[mask] == k]
        if sel.size:
            log_y_var[k] = logsumexp(sel)
    ids = inst.critical_ids
    return FlowEvaluation(
        critical_ids=ids,
        log_z=log_z,
        log_y=dict(zip(ids, log_y_var.tolist())),
        crossing=dict(zip(ids, p_var.tolist())),
        crossing_vector=p_var,
        defender_value=res.mean(0),
        adversary_value=res.mean(1),
        log_partition=mu * res.log_z_origin,
        log_z_origin=res.log_z_origin,
    )


def defender_value(inst: AnyInstance, x, *, check: bool = True) -> float:
    xv = _coverage(inst, x, check)
    net = inst.network
    res = run_sweep(net, net.utilities(xv), net.rewards(xv), inst.mu)
    return res.mean(0)


@dataclass(frozen=True)
class GradientBundle:
    """Objective value and gradient over coverage variables.

    ``value`` and ``grad`` are divided by ``exp(log_scale)``; multiply back to get
    the unnormalized objective.
    """

    value: float
    grad: np.ndarray
    log_scale: float
    critical_ids: tuple[int, ...]

    @property
    def raw_value(self) -> float:
        return float(self.value * np.exp(self.log_scale))

    def grad_mapping(self) -> dict[int, float]:
        return dict(zip(self.critical_ids, self.grad.tolist()))


def g_value_and_gradient(inst: AnyInstance, x, delta: float, *, check: bool = True) -> GradientBundle:
    """Parametric objective sum_tau exp(U/mu) (R - delta), scaled by the origin partition sum.

    The scaled value equals F^l(x) - delta.
    """
    xv = _coverage(inst, x, check)
    net = inst.network
    mu = inst.mu
    res = run_sweep(net, net.utilities(xv), net.rewards(xv), mu)
    p = res.through()
    q = res.moment_through(0)
    mask = net.var >= 0
    k = net.var[mask]
    pos_grad = net.w_l[k] * p[mask] + (net.w_f[k] / mu) * (q[mask] - delta * p[mask])
    grad = np.bincount(k, weights=pos_grad, minlength=net.n_vars)
    return GradientBundle(res.mean(0) - delta, grad, res.log_z_origin, inst.critical_ids)


def gamma_and_gradient(inst: AnyInstance, x, *, check: bool = True) -> GradientBundle:
    """Gamma(x) = mu log sum_tau exp(U/mu) and its gradient w_f * P_s (unscaled)."""
    xv = _coverage(inst, x, check)
    net = inst.network
    res = run_sweep(net, net.utilities(xv), np.zeros(net.n), inst.mu)
    p_var = _per_var(net, res.through())
    return GradientBundle(inst.mu * res.log_z_origin, net.w_f * p_var, 0.0, inst.critical_ids)


# ---------------------------------------------------------------------------
# Restricted objective (paths crossing exactly one critical node)


@dataclass(frozen=True, eq=False)
class RestrictedModel:
    """Coverage-independent pieces of the restricted objective.

    For each critical node s, the mass of paths crossing s and no other
    critical node factors as exp(v(s; x) / mu) * H_s, with H_s fixed by the
    sub-graph that deletes every other critical node.
    """

    inst: ValidatedInstance
    log_h: np.ndarray
    layered: LayeredInstance  # zero-penalty expansion, for multi-crossing masses

    def log_mass_delta(self, xv: np.ndarray) -> np.ndarray:
        net = self.inst.network
        t_f = np.array([self.inst.instance.nodes[s].base_utility for s in self.inst.critical_ids])
        return (t_f + net.w_f * xv) / self.inst.mu + self.log_h


def _log_mass_through_node(sub: ValidatedInstance, s: int) -> float:
    net = sub.network
    pos = sub.order.index(s)
    v = net.utilities(np.zeros(net.n_vars))
    v[pos] = 0.0
    res = run_sweep(net, v, np.zeros(net.n), sub.mu)
    return float(res.log_prefix()[pos] + res.log_suffix()[pos])


def restricted_model(inst: ValidatedInstance) -> RestrictedModel:
    """Build (and cache on the instance) the restricted decomposition."""
    cached = inst.__dict__.get("_restricted_model")
    if cached is not None:
        return cached
    log_h = np.full(len(inst.critical_ids), -np.inf)
    for k, s in enumerate(inst.critical_ids):
        try:
            sub = build_subgraph_retaining(inst, s)
        except EmptySubgraph:
            continue
        if s in sub.order:
            log_h[k] = _log_mass_through_node(sub, s)
    model = RestrictedModel(inst, log_h, build_layered(inst, 0.0))
    inst.__dict__["_restricted_model"] = model
    return model


@dataclass(frozen=True)
class RestrictedEvaluation:
    """Single- and multi-crossing path masses (log domain) and the restricted value."""

    critical_ids: tuple[int, ...]
    log_mass_delta: np.ndarray
    log_mass_delta_plus: np.ndarray
    log_union_delta: float
    log_union_delta_plus: float
    log_total: float
    restricted_value: float

    @property
    def mass_delta(self) -> dict[int, float]:
        return dict(zip(self.critical_ids, np.exp(self.log_mass_delta).tolist()))

    @property
    def mass_delta_plus(self) -> dict[int, float]:
        return dict(zip(self.critical_ids, np.exp(self.log_mass_delta_plus).tolist()))

    @property
    def union_delta(self) -> float:
        return float(np.exp(self.log_union_delta))

    @property
    def union_delta_plus(self) -> float:
        return float(np.exp(self.log_union_delta_plus))


def layered_class_masses(layered: LayeredInstance, xv: np.ndarray):
    """Log masses by crossing count from one layered sweep.

    Returns (log_total, log_single_per_var, log_multi_per_var, log_union_single,
    log_union_multi). Per-var single mass: paths crossing s and nothing else;
    multi: paths crossing s and at least one more critical node.
    """
    net = layered.network
    mu = layered.mu
    v = net.utilities(xv)
    h = np.zeros((net.n, 2))
    t1, t2 = layered.terminal(1), layered.terminal(2)
    if t1 is not None:
        h[t1, 0] = 1.0
    if t2 is not None:
        h[t2, 1] = 1.0
    res = run_sweep(net, v, h, mu)
    logz = res.log_z_origin
    p = res.through()
    q1 = res.moment_through(0)
    q2 = res.moment_through(1)
    layer = np.array([st[1] for st in layered.states])
    mask = net.var >= 0
    single = np.zeros(net.n)
    multi = np.zeros(net.n)
    at1 = mask & (layer == 1)
    at2 = mask & (layer == 2)
    single[at1] = q1[at1]
    multi[at1] = q2[at1]
    multi[at2] = p[at2]
    with np.errstate(divide="ignore"):
        log_single = np.log(_per_var(net, single)) + logz
        log_multi = np.log(_per_var(net, multi)) + logz
        u1 = np.log(p[t1]) + logz if t1 is not None else -np.inf
        u2 = np.log(p[t2]) + logz if t2 is not None else -np.inf
    return logz, log_single, log_multi, float(u1), float(u2)


def evaluate_restricted(inst: ValidatedInstance, x, *, check: bool = True) -> RestrictedEvaluation:
    xv = _coverage(inst, x, check)
    model = restricted_model(inst)
    log_d = model.log_mass_delta(xv)
    if not np.any(np.isfinite(log_d)):
        raise RestrictedUndefined("no path crosses exactly one critical node")
    logz, _, log_multi, _, u2 = layered_class_masses(model.layered, xv)
    union = float(logsumexp(log_d))
    w = np.exp(log_d - union)
    rewards = inst.network.w_l * xv + inst.network.t_l
    return RestrictedEvaluation(
        critical_ids=inst.critical_ids,
        log_mass_delta=log_d,
        log_mass_delta_plus=log_multi,
        log_union_delta=union,
        log_union_delta_plus=u2,
        log_total=logz,
        restricted_value=float(w @ rewards),
    )


def restricted_value(inst: ValidatedInstance, x, *, check: bool = True) -> float:
    xv = _coverage(inst, x, check)
    log_d = restricted_model(inst).log_mass_delta(xv)
    if not np.any(np.isfinite(log_d)):
        raise RestrictedUndefined("no path crosses exactly one critical node")
    w = np.exp(log_d - logsumexp(log_d))
    return float(w @ (inst.network.w_l * xv + inst.network.t_l))


def g_restricted_value_and_gradient(
    inst: ValidatedInstance, x, delta: float, *, check: bool = True
) -> GradientBundle:
    """sum_s (r_s - delta) * mass(s), scaled by the single-crossing union mass."""
    xv = _coverage(inst, x, check)
    model = restricted_model(inst)
    log_d = model.log_mass_delta(xv)
    if not np.any(np.isfinite(log_d)):
        raise RestrictedUndefined("no path crosses exactly one critical node")
    scale = float(logsumexp(log_d))
    d = np.exp(log_d - scale)
    net = inst.network
    r = net.w_l * xv + net.t_l
    value = float(d @ (r - delta))
    grad = d * (net.w_l + (net.w_f / inst.mu) * (r - delta))
    return GradientBundle(value, grad, scale, inst.critical_ids)
