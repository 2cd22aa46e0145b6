"""Compiled, array-based view of a validated network.

Nodes are renumbered by position in a topological order: position 0 is the
origin and position ``n - 1`` is the (unique) sink. Successor and predecessor
lists are stored in CSR form so the sweep kernels can walk them without
Python-level indirection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Network:
    node_ids: np.ndarray  # original node id per position
    succ_ptr: np.ndarray
    succ_idx: np.ndarray
    pred_ptr: np.ndarray
    pred_idx: np.ndarray
    var: np.ndarray  # coverage-variable index per position, -1 if not critical
    base: np.ndarray  # utility intercept per position
    w_f: np.ndarray  # per variable
    w_l: np.ndarray
    t_l: np.ndarray

    @property
    def n(self) -> int:
        return int(self.base.shape[0])

    @property
    def n_arcs(self) -> int:
        return int(self.succ_idx.shape[0])

    @property
    def n_vars(self) -> int:
        return int(self.w_f.shape[0])

    def utilities(self, x: np.ndarray) -> np.ndarray:
        """Node utilities v(s; x) per position, with the sink pinned to 0."""
        v = self.base.copy()
        mask = self.var >= 0
        idx = self.var[mask]
        v[mask] += self.w_f[idx] * x[idx]
        v[-1] = 0.0
        return v

    def rewards(self, x: np.ndarray) -> np.ndarray:
        """Defender reward collected at each position (0 off critical nodes)."""
        r = np.zeros(self.n)
        mask = self.var >= 0
        idx = self.var[mask]
        r[mask] = self.w_l[idx] * x[idx] + self.t_l[idx]
        return r

    def successors(self, i: int) -> np.ndarray:
        return self.succ_idx[self.succ_ptr[i] : self.succ_ptr[i + 1]]

    def predecessors(self, i: int) -> np.ndarray:
        return self.pred_idx[self.pred_ptr[i] : self.pred_ptr[i + 1]]


def _csr(n: int, heads: np.ndarray, tails: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((tails, heads))
    counts = np.bincount(heads, minlength=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, np.ascontiguousarray(tails[order], dtype=np.int64)


def compile_network(
    node_ids,
    arcs,
    var,
    base,
    w_f,
    w_l,
    t_l,
) -> Network:
    """Build a :class:`Network` from position-indexed arrays.

    ``arcs`` are (u, v) pairs of positions with u < v.
    """
    n = len(node_ids)
    a = np.asarray(arcs, dtype=np.int64).reshape(-1, 2)
    if a.size and np.any(a[:, 0] >= a[:, 1]):
        raise ValueError("arcs must point forward in topological order")
    succ_ptr, succ_idx = _csr(n, a[:, 0], a[:, 1])
    pred_ptr, pred_idx = _csr(n, a[:, 1], a[:, 0])
    return Network(
        node_ids=np.asarray(node_ids, dtype=np.int64),
        succ_ptr=succ_ptr,
        succ_idx=succ_idx,
        pred_ptr=pred_ptr,
        pred_idx=pred_idx,
        var=np.asarray(var, dtype=np.int64),
        base=np.asarray(base, dtype=float),
        w_f=np.asarray(w_f, dtype=float),
        w_l=np.asarray(w_l, dtype=float),
        t_l=np.asarray(t_l, dtype=float),
    )
