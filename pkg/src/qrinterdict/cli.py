"""Command-line interface: generate, solve, benchmark, sweep-mu, check.

Exit codes: 0 success, 1 file I/O, 2 invalid input, 3 solver failure,
4 certification failure.
"""

from __future__ import annotations

import csv
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import click
import numpy as np

from . import __version__
from .errors import InterdictionError, InvalidParams, PathExplosion, ValidationError
from .graph import generate_random
from .io import dumps, load_instance, save_document, save_instance
from .optimize import METHODS, SolveOptions, solve

EXIT_IO, EXIT_INPUT, EXIT_SOLVER, EXIT_CERT = 1, 2, 3, 4

BENCH_COLUMNS = (
    "row_type",
    "size",
    "seed",
    "method",
    "objective",
    "percent_of_restricted",
    "percent_std",
    "runtime_s",
    "inner_iterations",
    "outer_iterations",
    "status",
)


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _threads() -> int:
    raw = os.environ.get("QRINTERDICT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        _fail(EXIT_INPUT, f"QRINTERDICT_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _load(path: str):
    try:
        return load_instance(path)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {path}: {exc}")
    except (ValidationError, InvalidParams, ValueError, KeyError) as exc:
        _fail(EXIT_INPUT, f"{type(exc).__name__}: {exc}")


def _write(doc, path: str | None):
    if path is None:
        click.echo(dumps(doc), nl=False)
        return
    try:
        save_document(doc, path)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {path}: {exc}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}")


@click.group()
@click.version_option(__version__)
def main():
    """Interdiction against a logit adversary on directed acyclic graphs."""


@main.command()
@click.option("--nodes", type=int, required=True)
@click.option("--edge-prob", type=float, default=0.8, show_default=True)
@click.option("--critical-frac", type=float, default=0.8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mu", type=float, default=2.0, show_default=True)
@click.option("--budget", type=float, default=None, help="Defaults to a quarter of the critical count.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), required=True)
def generate(nodes, edge_prob, critical_frac, seed, mu, budget, output):
    """Write a random instance."""
    try:
        inst = generate_random(nodes, edge_prob, critical_frac, seed, budget=budget, mu=mu)
    except (InvalidParams, ValidationError) as exc:
        _fail(EXIT_INPUT, f"{type(exc).__name__}: {exc}")
    try:
        save_instance(inst, output)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {output}: {exc}")
    click.echo(f"wrote {output}: {len(inst.order)} nodes, {inst.constraints.n_vars} critical")


def _options(tol, seed, **kw) -> SolveOptions:
    try:
        return SolveOptions(bisection_tol=tol, seed=seed, **kw)
    except InvalidParams as exc:
        _fail(EXIT_INPUT, f"InvalidParams: {exc}")


@main.command("solve")
@click.argument("instance", type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(METHODS), default="restricted", show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True, help="Bisection tolerance.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mu", type=float, default=None, help="Override the instance's mu.")
@click.option("--penalty", type=float, default=None, help="Fixed penalty for the modified network.")
@click.option("--certify", is_flag=True, help="Run oracle checks when paths are enumerable.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def solve_cmd(instance, method, tol, seed, mu, penalty, certify, output):
    """Solve one instance and write the report."""
    inst = _load(instance)
    if mu is not None:
        try:
            inst = inst.with_mu(mu)
        except (InvalidParams, ValidationError) as exc:
            _fail(EXIT_INPUT, str(exc))
    opts = _options(tol, seed, penalty_c=penalty)
    try:
        rep = solve(method, inst, opts)
    except (InvalidParams, ValidationError) as exc:
        _fail(EXIT_INPUT, f"{type(exc).__name__}: {exc}")
    except InterdictionError as exc:
        _fail(EXIT_SOLVER, f"{type(exc).__name__}: {exc}")
    doc = {
        "version": __version__,
        "instance": str(instance),
        "config": {"method": method, "mu": inst.mu, **asdict(opts)},
        "report": rep.to_dict(),
    }
    status = "pass"
    if certify:
        from .diagnostics import certify_solution

        cert = certify_solution(inst, rep, opts)
        doc["certification"] = cert
        status = cert.get("status", "pass")
    _write(doc, output)
    click.echo(f"{method}: objective {rep.objective:.6f} in {rep.wall_time:.2f}s", err=True)
    if status == "fail":
        _fail(EXIT_CERT, "certification failed: " + ", ".join(k for k, v in doc["certification"]["checks"].items() if v == "fail"))


@dataclass
class BenchmarkConfig:
    sizes: list = field(default_factory=lambda: [20, 40, 60, 80, 100])
    p: float = 0.8
    mu: float = 2.0
    critical_frac: float = 0.8
    seeds: int = 20
    methods: list = field(default_factory=lambda: ["baseline", "grad", "restricted", "modified"])
    output: str | None = None
    tol: float = 1e-6

    def __post_init__(self):
        if not self.sizes or min(self.sizes) < 3:
            raise InvalidParams("sizes must be at least 3")
        if self.seeds < 1:
            raise InvalidParams("need at least one seed")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InvalidParams(f"unknown methods: {bad}")


def _bench_one(args):
    size, seed, cfg = args
    inst = generate_random(size, cfg.p, cfg.critical_frac, seed, mu=cfg.mu)
    opts = SolveOptions(bisection_tol=cfg.tol, seed=seed)
    rows = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            rep = solve(method, inst, opts)
            rows.append(dict(size=size, seed=seed, method=method, objective=rep.objective,
                             runtime_s=rep.wall_time, inner_iterations=rep.inner_iterations,
                             outer_iterations=rep.outer_iterations, status="ok"))
        except InterdictionError as exc:
            rows.append(dict(size=size, seed=seed, method=method, objective=float("nan"),
                             runtime_s=time.perf_counter() - t0, inner_iterations=0,
                             outer_iterations=0, status=f"{type(exc).__name__}"))
    return rows


def _percent(rows: list[dict]) -> None:
    """Fill percent_of_restricted per (size, seed) from the RESTRICTED row."""
    ref = {(r["size"], r["seed"]): r["objective"] for r in rows if r["method"] == "restricted" and r["status"] == "ok"}
    for r in rows:
        base = ref.get((r["size"], r["seed"]))
        ok = base is not None and r["status"] == "ok" and base != 0
        r["percent_of_restricted"] = 100.0 * r["objective"] / base if ok else float("nan")


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and sample standard deviation of percent-of-RESTRICTED per (size, method)."""
    out = []
    keys = sorted({(r["size"], r["method"]) for r in rows}, key=lambda k: (k[0], k[1]))
    for size, method in keys:
        grp = [r for r in rows if r["size"] == size and r["method"] == method]
        pct = [r["percent_of_restricted"] for r in grp if np.isfinite(r["percent_of_restricted"])]
        obj = [r["objective"] for r in grp if np.isfinite(r["objective"])]
        out.append(dict(
            row_type="summary", size=size, seed="", method=method,
            objective=statistics.fmean(obj) if obj else float("nan"),
            percent_of_restricted=statistics.fmean(pct) if pct else float("nan"),
            percent_std=statistics.stdev(pct) if len(pct) > 1 else 0.0,
            runtime_s=statistics.fmean(r["runtime_s"] for r in grp),
            inner_iterations=sum(r["inner_iterations"] for r in grp),
            outer_iterations=sum(r["outer_iterations"] for r in grp),
            status=f"{len(pct)}/{len(grp)} ok",
        ))
    return out


def run_benchmark(cfg: BenchmarkConfig, threads: int = 1) -> tuple[list[dict], list[dict]]:
    jobs = [(size, seed, cfg) for size in cfg.sizes for seed in range(cfg.seeds)]
    if threads > 1:
        with ProcessPoolExecutor(threads) as pool:
            chunks = list(pool.map(_bench_one, jobs))
    else:
        chunks = [_bench_one(j) for j in jobs]
    rows = [dict(row_type="data", percent_std="", **r) for chunk in chunks for r in chunk]
    _percent(rows)
    return rows, summarize(rows)


@main.command()
@click.option("--sizes", default="20,40,60,80,100", show_default=True)
@click.option("--seeds", type=int, default=20, show_default=True, help="Seeds 0..N-1 per size.")
@click.option("--methods", default="baseline,grad,restricted,modified", show_default=True)
@click.option("--edge-prob", type=float, default=0.8, show_default=True)
@click.option("--mu", type=float, default=2.0, show_default=True)
@click.option("--critical-frac", type=float, default=0.8, show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="CSV path.")
def benchmark(sizes, seeds, methods, edge_prob, mu, critical_frac, tol, output):
    """Percent-of-RESTRICTED table over random instances."""
    try:
        cfg = BenchmarkConfig(_ints(sizes), edge_prob, mu, critical_frac, seeds,
                              [m.strip() for m in methods.split(",") if m.strip()], output, tol)
    except InvalidParams as exc:
        _fail(EXIT_INPUT, f"InvalidParams: {exc}")
    rows, summary = run_benchmark(cfg, _threads())
    try:
        fh = open(output, "w", newline="") if output else sys.stdout
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {output}: {exc}")
    writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
    writer.writeheader()
    writer.writerows(rows + summary)
    if output:
        fh.close()
        click.echo(_table(summary, cfg))


def _table(summary: list[dict], cfg: BenchmarkConfig) -> str:
    methods = cfg.methods
    lines = ["size  " + "  ".join(f"{m:>18}" for m in methods)]
    for size in cfg.sizes:
        cells = []
        for m in methods:
            row = next((r for r in summary if r["size"] == size and r["method"] == m), None)
            cells.append(f"{row['percent_of_restricted']:8.2f} +- {row['percent_std']:6.2f}" if row else " " * 18)
        lines.append(f"{size:<4}  " + "  ".join(f"{c:>18}" for c in cells))
    return "\n".join(lines)


@main.command("sweep-mu")
@click.argument("instance", type=click.Path(dir_okay=False))
@click.option("--mus", default="0.02,0.05,0.1,0.2,0.5,1,2", show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="CSV path.")
def sweep_mu(instance, mus, tol, output):
    """Zero-sum optimum across rationality levels."""
    from .diagnostics import kappa_terms
    from .oracle import enumerate_paths, sample_coverages, shortest_path_interdiction

    inst = _load(instance)
    mu_list = _floats(mus)
    if not mu_list or min(mu_list) <= 0:
        _fail(EXIT_INPUT, "mu values must be positive")
    opts = _options(tol, 0)
    try:
        paths = enumerate_paths(inst)
        x_t, t_star = shortest_path_interdiction(inst, paths)
    except PathExplosion:
        paths, t_star = None, None
    rows = []
    for mu in mu_list:
        sub = inst.with_mu(mu)
        try:
            rep = solve("zerosum", sub, opts)
        except InterdictionError as exc:
            _fail(EXIT_SOLVER, f"{type(exc).__name__}: {exc}")
        k1 = None
        if paths is not None:
            p_mu = enumerate_paths(sub)
            k1, _, _ = kappa_terms(sub, p_mu, sample_coverages(sub, 64, 0, [x_t, rep.x]))
        rows.append(dict(mu=mu, gamma_star=rep.gamma, adversary_value=rep.adversary_value,
                         t_star="" if t_star is None else t_star, kappa1="" if k1 is None else k1))
    try:
        fh = open(output, "w", newline="") if output else sys.stdout
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {output}: {exc}")
    writer = csv.DictWriter(fh, fieldnames=("mu", "gamma_star", "adversary_value", "t_star", "kappa1"))
    writer.writeheader()
    writer.writerows(rows)
    if output:
        fh.close()


@main.command()
@click.argument("instance", type=click.Path(dir_okay=False))
@click.option("--samples", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def check(instance, samples, seed, output):
    """Validate an instance and compare the dynamic program against path enumeration."""
    from .oracle import brute_evaluate, enumerate_paths, sample_coverages
    from .paths import evaluate

    inst = _load(instance)
    doc = {"version": __version__, "instance": str(instance), "nodes": len(inst.order),
           "critical": inst.constraints.n_vars, "pruned": list(inst.pruned)}
    try:
        paths = enumerate_paths(inst)
    except PathExplosion as exc:
        doc["status"] = f"validated; not enumerable ({exc})"
        _write(doc, output)
        return
    worst = 0.0
    for x in sample_coverages(inst, samples, seed):
        dp = evaluate(inst, x, check=False)
        bf = brute_evaluate(inst, x, paths)
        for a, b in ((dp.defender_value, bf.defender_value), (dp.adversary_value, bf.adversary_value),
                     (dp.log_partition, bf.log_partition)):
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    doc.update(paths=len(paths), max_relative_error=worst, status="pass" if worst <= 1e-9 else "fail")
    _write(doc, output)
    if doc["status"] == "fail":
        _fail(EXIT_CERT, f"dynamic program disagrees with enumeration (relative error {worst:.3g})")


if __name__ == "__main__":  # pragma: no cover
    main()
