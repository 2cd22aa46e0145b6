"""Time the compiled sweep against the NumPy fallback on random instances.

Usage: python benchmarks/bench_kernels.py [--sizes 20,60,100] [--repeats 20]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from qrinterdict.graph import generate_random
from qrinterdict.kernels import available_backends


def bench(sizes, repeats: int, columns: int = 2) -> list[dict]:
    backends = available_backends()
    rows = []
    for n in sizes:
        inst = generate_random(n, 0.8, 0.8, seed=0, mu=2.0)
        net = inst.network
        x = np.full(net.n_vars, inst.constraints.budgets[0] / max(net.n_vars, 1))
        v = net.utilities(x)
        h = np.ascontiguousarray(np.random.default_rng(0).random((net.n, columns)))
        args = (net.succ_ptr, net.succ_idx, net.pred_ptr, net.pred_idx, v, h, inst.mu, 1.0)
        outs = {}
        row = {"nodes": net.n, "arcs": int(net.succ_idx.size)}
        for name, fn in backends.items():
            outs[name] = fn(*args)
            row[name] = min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeats))
        if len(outs) == 2:
            row["max_rel_diff"] = max(
                float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))
                for a, b in zip(outs["cython"], outs["python"])
            )
            row["speedup"] = row["python"] / row["cython"]
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="20,60,100,200")
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()
    rows = bench([int(s) for s in args.sizes.split(",")], args.repeats)
    for r in rows:
        line = f"nodes={r['nodes']:4d} arcs={r['arcs']:6d} python={r['python'] * 1e3:9.3f} ms"
        if "cython" in r:
            line += f" cython={r['cython'] * 1e3:8.3f} ms speedup={r['speedup']:6.1f}x rel_diff={r['max_rel_diff']:.1e}"
        print(line)


if __name__ == "__main__":
    main()
