from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from qrinterdict.errors import PathExplosion
from qrinterdict.graph import generate_random
from qrinterdict.oracle import enumerate_paths


def rel_close(a, b, rtol=1e-9, atol=1e-12) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(np.abs(a - b) <= atol + rtol * np.maximum(np.abs(a), np.abs(b))))


def enumerable(n, p, frac, seed, mu=1.0, cap=500, min_vars=1, max_vars=None):
    """Random instance with at most ``cap`` paths and a bounded number of variables, else None."""
    inst = generate_random(n, p, frac, seed, mu=mu)
    d = inst.constraints.n_vars
    if d < min_vars or (max_vars is not None and d > max_vars):
        return None
    try:
        paths = enumerate_paths(inst, cap)
    except PathExplosion:
        return None
    return inst, paths


def enumerable_instances(count, n_range=(4, 12), p=0.5, frac=0.5, mu=1.0, cap=500, max_vars=None, seed0=0):
    out = []
    seed = seed0
    rng = np.random.default_rng(seed0)
    while len(out) < count:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        got = enumerable(n, p, frac, seed, mu=mu, cap=cap, max_vars=max_vars)
        if got is not None:
            out.append(got)
        seed += 1
    return out


def random_points(inst, k, rng, interior=False):
    """Feasible points; interior ones stay clear of the box and budget faces."""
    c = inst.constraints
    d = c.n_vars
    pts = []
    while len(pts) < k:
        if interior:
            x = c.lx + (c.ux - c.lx) * (0.05 + 0.9 * rng.random(d))
            total = x.sum()
            cap = 0.9 * c.budgets[0]
            if total > cap:
                x = c.lx + (x - c.lx) * (cap - d * c.lx) / max(total - d * c.lx, 1e-300)
            if np.any(x - c.lx < 1e-3):
                continue
        else:
            from qrinterdict.projection import random_feasible

            x = random_feasible(c, rng)
        pts.append(x)
    return pts


@st.composite
def small_instances(draw, n_max=10, cap=500, mu=None):
    """Hypothesis strategy for enumerable random instances with at least one critical node."""
    n = draw(st.integers(4, n_max))
    p = draw(st.sampled_from([0.3, 0.5, 0.8]))
    frac = draw(st.sampled_from([0.3, 0.5, 0.8]))
    seed = draw(st.integers(0, 10_000))
    m = mu if mu is not None else draw(st.sampled_from([0.1, 0.5, 1.0, 2.0]))
    got = enumerable(n, p, frac, seed, mu=m, cap=cap)
    from hypothesis import assume

    assume(got is not None)
    return got


ACCEPTANCE_LINES: list[str] = []


def record(number: int, ok: bool, text: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
