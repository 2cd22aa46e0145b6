"""Defender solvers: projected-gradient ascent, bisection on the ratio, pipelines."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from .errors import BracketFailure, InvalidParams, RestrictedUndefined
from .graph import Constraints, LayeredInstance, ValidatedInstance, build_layered
from .paths import (
    defender_value,
    evaluate,
    g_restricted_value_and_gradient,
    g_value_and_gradient,
    gamma_and_gradient,
    restricted_model,
    restricted_value,
)
from .projection import feasible_start, project_feasible

log = logging.getLogger(__name__)

AnyInstance = Union[ValidatedInstance, LayeredInstance]
Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]

METHODS = ("grad", "restricted", "modified", "zerosum", "baseline")


@dataclass(frozen=True)
class SolveOptions:
    bisection_tol: float = 1e-6
    inner_max_iters: int = 500
    inner_grad_tol: float = 1e-8
    step_shrink: float = 0.5
    initial_step: float = 1.0
    sufficient_increase: float = 1e-4
    restarts: int = 10
    seed: int = 0
    penalty_c: float | None = None  # None selects the automatic penalty
    penalty_eps: float = 1e-6
    delta_bounds: tuple[float, float] | None = None
    improvement_passes: int = 2
    stop_when_feasible: bool = True
    zerosum_max_iters: int = 5000
    baseline_samples: int = 1000
    baseline_iters: int = 100
    record_trace: bool = False

    def __post_init__(self):
        for name in ("bisection_tol", "inner_grad_tol", "initial_step", "sufficient_increase", "penalty_eps"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive")
        if not 0 < self.step_shrink < 1:
            raise InvalidParams("step_shrink must lie in (0, 1)")
        if self.inner_max_iters < 1 or self.restarts < 1 or self.zerosum_max_iters < 1:
            raise InvalidParams("iteration counts must be positive")
        if self.penalty_c is not None and not self.penalty_c >= 0:
            raise InvalidParams("penalty_c must be nonnegative")


@dataclass
class SolveReport:
    method: str
    x: np.ndarray
    critical_ids: tuple[int, ...]
    objective: float  # defender value on the original instance
    delta_bar: float | None = None
    family_value: float | None = None  # objective the bisection actually targeted, at its x
    adversary_value: float | None = None
    gamma: float | None = None
    inner_iterations: int = 0
    outer_iterations: int = 0
    wall_time: float = 0.0
    trace: list[dict] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "x": {str(s): float(v) for s, v in zip(self.critical_ids, self.x)},
            "objective": self.objective,
            "delta_bar": self.delta_bar,
            "family_value": self.family_value,
            "adversary_value": self.adversary_value,
            "gamma": self.gamma,
            "inner_iterations": self.inner_iterations,
            "outer_iterations": self.outer_iterations,
            "wall_time": self.wall_time,
            "trace": self.trace,
            "events": self.events,
            "extras": self.extras,
        }


@dataclass
class InnerResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    trace: list[float]
    step: float = 1.0  # trial step the next call would start from


def maximize_inner(
    objective: Objective,
    x0: np.ndarray,
    constraints: Constraints,
    opts: SolveOptions = SolveOptions(),
    *,
    max_iters: int | None = None,
    stop_at_nonnegative: bool = False,
) -> InnerResult:
    """Projected gradient ascent with Armijo backtracking.

    Stops when the projected-gradient step ||P(x + grad) - x|| is at most
    ``inner_grad_tol``, when no step gives sufficient increase, when an accepted
    step no longer raises the value, at the iteration cap, or (optionally) as
    soon as the objective is nonnegative. Accepted values never decrease.
    """
    max_iters = opts.inner_max_iters if max_iters is None else max_iters
    x = project_feasible(x0, constraints)
    f, g = objective(x)
    trace = [f]
    step = opts.initial_step
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        if stop_at_nonnegative and f >= 0:
            it -= 1
            break
        if np.linalg.norm(project_feasible(x + g, constraints) - x) <= opts.inner_grad_tol:
            converged = True
            it -= 1
            break
        t = step
        while True:
            x_new = project_feasible(x + t * g, constraints)
            d = x_new - x
            if not np.any(d):
                converged = True
                break
            f_new, g_new = objective(x_new)
            if f_new >= f + opts.sufficient_increase * float(g @ d):
                break
            t *= opts.step_shrink
            if t < 1e-14 * opts.initial_step:
                converged = True
                break
        if converged:
            break
        if f_new <= f:
            # accepted only because g @ d rounds to zero: no progress left at this precision
            converged = True
            break
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        step = 2.0 * t
    return InnerResult(x, f, it, converged, trace, step)


def _scaled(bundle_fn: Callable, ref: float) -> Objective:
    """Wrap a GradientBundle producer so it returns values in one fixed scale."""

    def fn(x):
        b = bundle_fn(x)
        factor = float(np.exp(b.log_scale - ref))
        return b.value * factor, b.grad * factor

    return fn


def g_objective(inst: AnyInstance, delta: float, x_ref: np.ndarray) -> Objective:
    """g(., delta) in the scale of its partition sum at ``x_ref``."""
    ref = g_value_and_gradient(inst, x_ref, delta, check=False).log_scale
    return _scaled(lambda x: g_value_and_gradient(inst, x, delta, check=False), ref)


def g_restricted_objective(inst: ValidatedInstance, delta: float, x_ref: np.ndarray) -> Objective:
    ref = g_restricted_value_and_gradient(inst, x_ref, delta, check=False).log_scale
    return _scaled(lambda x: g_restricted_value_and_gradient(inst, x, delta, check=False), ref)


def neg_gamma_objective(inst: AnyInstance) -> Objective:
    def fn(x):
        b = gamma_and_gradient(inst, x, check=False)
        return -b.value, -b.grad

    return fn


def default_bracket(inst: AnyInstance) -> tuple[float, float]:
    """Reward-range bracket for the ratio: sums of the negative and positive parts."""
    net = inst.network
    c = inst.constraints
    lo_end = net.w_l * c.lx + net.t_l
    hi_end = net.w_l * c.ux + net.t_l
    lo = float(np.sum(np.minimum(0.0, np.minimum(lo_end, hi_end))))
    hi = float(np.sum(np.maximum(0.0, np.maximum(lo_end, hi_end))))
    return lo, hi


def dinkelbach_solve(
    family: str,
    inst: AnyInstance,
    opts: SolveOptions = SolveOptions(),
    x0: np.ndarray | None = None,
) -> SolveReport:
    """Bisection on delta over ``max_x g(x, delta) >= 0`` for family 'g' or 'g_restricted'.

    Each inner solve is warm-started at the last feasible point and may stop as
    soon as it certifies ``g >= 0``. A tie at exactly 0 counts as feasible.
    """
    t0 = time.perf_counter()
    if family == "g":
        make = g_objective
        value_of = lambda x: defender_value(inst, x, check=False)  # noqa: E731
    elif family == "g_restricted":
        if not isinstance(inst, ValidatedInstance):
            raise InvalidParams("restricted family needs a validated instance")
        if not np.any(np.isfinite(restricted_model(inst).log_h)):
            raise RestrictedUndefined("no path crosses exactly one critical node")
        make = g_restricted_objective
        value_of = lambda x: restricted_value(inst, x, check=False)  # noqa: E731
    else:
        raise InvalidParams(f"unknown objective family {family!r}")
    cons = inst.constraints
    default_lo, default_hi = default_bracket(inst)
    lo, hi = opts.delta_bounds if opts.delta_bounds is not None else (default_lo, default_hi)
    x_best = project_feasible(feasible_start(cons) if x0 is None else x0, cons)
    trace: list[dict] = []
    events: list[str] = []
    inner_total = 0

    def probe(delta):
        nonlocal inner_total
        res = maximize_inner(
            make(inst, delta, x_best), x_best, cons, opts, stop_at_nonnegative=opts.stop_when_feasible
        )
        inner_total += res.iterations
        feasible = res.value >= 0
        entry = {"delta": delta, "value": res.value, "feasible": bool(feasible), "inner_iterations": res.iterations}
        if opts.record_trace:
            entry["inner_trace"] = res.trace
        trace.append(entry)
        return res, feasible

    res, ok = probe(lo)
    if not ok:
        width = max(hi - lo, 1.0)
        lo -= width
        events.append(f"lower bracket widened to {lo:.6g}")
        res, ok = probe(lo)
        if not ok:
            raise BracketFailure(f"no feasible point at delta={lo:.6g}")
    x_best = res.x
    outer = 0
    while hi - lo > opts.bisection_tol:
        outer += 1
        mid = 0.5 * (lo + hi)
        res, ok = probe(mid)
        if ok:
            lo = mid
            x_best = res.x
            reached = value_of(x_best)
            if reached >= hi:
                # A point beats a level previously judged unreachable: the
                # earlier inner solve stopped at a local optimum.
                events.append(f"bracket reset at delta={mid:.6g}: value {reached:.6g} >= upper {hi:.6g}")
                trace[-1]["bracket_reset"] = True
                lo = reached
                hi = max(default_hi, reached + opts.bisection_tol)
        else:
            hi = mid
    return SolveReport(
        method=family,
        x=x_best,
        critical_ids=inst.critical_ids,
        objective=float("nan"),
        delta_bar=lo,
        family_value=value_of(x_best),
        inner_iterations=inner_total,
        outer_iterations=outer,
        wall_time=time.perf_counter() - t0,
        trace=trace,
        events=events,
        extras={"bracket": [lo, hi]},
    )


def improve(inst: ValidatedInstance, x: np.ndarray, opts: SolveOptions) -> tuple[np.ndarray, int]:
    """Ascent on g with delta frozen at the current defender value, repeated.

    Each pass starts where g = 0, so any accepted step keeps g >= 0 and hence
    never lowers the defender value.
    """
    iters = 0
    for _ in range(opts.improvement_passes):
        delta = defender_value(inst, x, check=False)
        res = maximize_inner(g_objective(inst, delta, x), x, inst.constraints, opts)
        iters += res.iterations
        if defender_value(inst, res.x, check=False) >= delta:
            x = res.x
    return x, iters


def auto_penalty(inst: ValidatedInstance, eps: float = 1e-6) -> float:
    """Penalty making every multi-crossing path family at most ``eps`` times any
    single-crossing mass, uniformly over the feasible set.

    Uses log Z(lx e) as an upper bound on the multi-crossing mass and the
    single-crossing masses at ux e as lower bounds.
    """
    c = inst.constraints
    mu = inst.mu
    lx = np.full(c.n_vars, c.lx)
    ux = np.full(c.n_vars, c.ux)
    log_total = gamma_and_gradient(inst, lx, check=False).value / mu
    log_d = restricted_model(inst).log_mass_delta(ux)
    finite = log_d[np.isfinite(log_d)]
    floor = float(finite.min()) if finite.size else 0.0
    return max(0.0, mu * (log_total - floor - np.log(eps)))


def _finish(report: SolveReport, inst: ValidatedInstance, method: str, t0: float) -> SolveReport:
    ev = evaluate(inst, report.x, check=False)
    report.method = method
    report.objective = ev.defender_value
    report.adversary_value = ev.adversary_value
    report.gamma = ev.log_partition
    report.critical_ids = inst.critical_ids
    report.wall_time = time.perf_counter() - t0
    return report


def solve(method: str, inst: ValidatedInstance, opts: SolveOptions | None = None) -> SolveReport:
    """Run one pipeline; the reported objective is always on the original instance."""
    opts = opts or SolveOptions()
    method = method.lower()
    t0 = time.perf_counter()
    if method == "grad":
        rep = dinkelbach_solve("g", inst, opts)
    elif method == "restricted":
        rep = dinkelbach_solve("g_restricted", inst, opts)
        before = defender_value(inst, rep.x, check=False)
        x, iters = improve(inst, rep.x, opts)
        rep.extras.update(x_before_improvement=rep.x.tolist(), objective_before_improvement=before)
        rep.x = x
        rep.inner_iterations += iters
    elif method == "modified":
        c = auto_penalty(inst, opts.penalty_eps) if opts.penalty_c is None else opts.penalty_c
        layered = build_layered(inst, c)
        rep = dinkelbach_solve("g", layered, opts)
        before = defender_value(inst, rep.x, check=False)
        x, iters = improve(inst, rep.x, opts)
        rep.extras.update(
            penalty_c=c, x_before_improvement=rep.x.tolist(), objective_before_improvement=before
        )
        rep.x = x
        rep.inner_iterations += iters
    elif method == "zerosum":
        res = maximize_inner(
            neg_gamma_objective(inst),
            feasible_start(inst.constraints),
            inst.constraints,
            opts,
            max_iters=opts.zerosum_max_iters,
        )
        rep = SolveReport("zerosum", res.x, inst.critical_ids, float("nan"), inner_iterations=res.iterations)
        rep.extras["converged"] = res.converged
    elif method == "baseline":
        from .baseline import baseline_solve

        rep = baseline_solve(
            inst,
            n_samples=opts.baseline_samples,
            iters=opts.baseline_iters,
            restarts=opts.restarts,
            seed=opts.seed,
            opts=opts,
        )
    else:
        raise InvalidParams(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return _finish(rep, inst, method, t0)


def with_options(opts: SolveOptions, **changes) -> SolveOptions:
    return replace(opts, **changes)
