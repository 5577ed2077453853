"""Benchmark harness: seeded multi-run solves over problems and modes, written as CSV."""
from __future__ import annotations

import argparse
import csv
import io
import statistics
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .core import ConfigError, GradSampError, Mode, SolverConfig
from .driver import minimize
from .problems import NAMED, generate_random, named

CSV_FIELDS = ["problem", "n", "m", "m_active", "mode", "run", "seed", "iters", "qp_iters", "funcs",
              "grads", "final_f", "time_sec", "termination_reason"]


def _parse_value(text: str):
    low = text.strip().lower()
    if low in ("none", "auto", ""):
        return None
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text.strip()


def parse_config_text(text: str) -> dict:
    valid = SolverConfig.keys()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in valid:
            raise ConfigError(f"line {lineno}: unknown key {key!r}; valid keys: {', '.join(valid)}")
        out[key] = _parse_value(value)
    defaults = SolverConfig()
    for key, val in out.items():
        if isinstance(getattr(defaults, key), float) and isinstance(val, int) and not isinstance(val, bool):
            out[key] = float(val)
    return out


def load_config(path: Optional[str] = None, **overrides) -> SolverConfig:
    """Defaults, then the ``key = value`` file at ``path``, then keyword overrides."""
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**values)


@dataclass
class Job:
    problem: str
    n: int
    m: Optional[int]
    m_active: Optional[int]
    instance_seed: Optional[int]
    mode: Mode
    run: int
    seed: int
    config: SolverConfig

    @property
    def label(self) -> str:
        return self.problem if self.instance_seed is None else f"{self.problem}-{self.instance_seed}"


def _build_problem(job: Job):
    if job.problem == "random":
        return generate_random(job.n, job.m, job.m_active, job.instance_seed)
    return named(job.problem, job.n)


def run_job(job: Job) -> dict:
    row = {"problem": job.label, "n": job.n, "m": job.m if job.m is not None else "",
           "m_active": job.m_active if job.m_active is not None else "", "mode": job.mode.value,
           "run": job.run, "seed": job.seed}
    config = job.config.with_(mode=job.mode, seed=job.seed)
    try:
        rep = minimize(_build_problem(job), config)
    except GradSampError as exc:
        row.update(iters="", qp_iters="", funcs="", grads="", final_f="", time_sec="",
                   termination_reason=f"failure:{type(exc).__name__}")
        return row
    row.update(iters=rep.iters, qp_iters=rep.qp_iters, funcs=rep.funcs, grads=rep.grads,
               final_f=f"{rep.final_f:.6e}", time_sec=f"{rep.wall_time:.3f}",
               termination_reason=rep.termination.value)
    return row


def average_row(rows) -> dict:
    ok = [r for r in rows if r["iters"] != ""]
    first = rows[0]
    out = {k: first[k] for k in ("problem", "n", "m", "m_active", "mode")}
    out.update(run="avg", seed="")
    if ok:
        for key in ("iters", "qp_iters", "funcs", "grads"):
            out[key] = int(round(statistics.fmean(float(r[key]) for r in ok)))
        out["final_f"] = f"{statistics.fmean(float(r['final_f']) for r in ok):.6e}"
        out["time_sec"] = f"{statistics.fmean(float(r['time_sec']) for r in ok):.3f}"
    else:
        out.update(iters="", qp_iters="", funcs="", grads="", final_f="", time_sec="")
    reasons = Counter(r["termination_reason"] for r in rows)
    out["termination_reason"] = ";".join(f"{k}:{v}" for k, v in sorted(reasons.items()))
    return out


def relative_change(qp_mode: float, qp_exact: float) -> float:
    return 100.0 * (qp_mode - qp_exact) / qp_exact


def format_table(averages) -> str:
    exact = {(r["problem"], r["n"]): r for r in averages if r["mode"] == Mode.EXACT.value and r["qp_iters"] != ""}
    head = f"{'problem':>18} {'n':>5} {'m':>4} {'mA':>4} {'mode':>12} {'iters':>8} {'QP-iters':>9} "\
           f"{'funcs':>9} {'grads':>9} {'f':>14} {'QP-change':>10}"
    lines = [head, "-" * len(head)]
    for r in averages:
        change = ""
        ref = exact.get((r["problem"], r["n"]))
        if r["mode"] != Mode.EXACT.value and ref is not None and r["qp_iters"] != "" and ref["qp_iters"]:
            change = f"{relative_change(r['qp_iters'], ref['qp_iters']):+.1f}%"
        lines.append(f"{r['problem']:>18} {r['n']:>5} {r['m']!s:>4} {r['m_active']!s:>4} {r['mode']:>12} "
                     f"{r['iters']!s:>8} {r['qp_iters']!s:>9} {r['funcs']!s:>9} {r['grads']!s:>9} "
                     f"{r['final_f']!s:>14} {change:>10}")
    return "\n".join(lines)


def build_jobs(args, config: SolverConfig):
    modes = [Mode(m.strip()) for m in args.modes.split(",") if m.strip()]
    jobs = []
    for problem in [p.strip() for p in args.problem.split(",") if p.strip()]:
        if problem == "random":
            if args.m is None or args.m_active is None:
                raise ConfigError("the random family needs --m and --m-active")
            actives = [int(a) for a in str(args.m_active).split(",")]
            specs = [(a, args.problem_seed + i) for a in actives for i in range(args.instances)]
            specs = [(args.m, a, s) for a, s in specs]
        else:
            if problem not in NAMED and problem.lower().replace("_", "") not in \
                    {k.lower().replace("_", "") for k in NAMED}:
                raise ConfigError(f"unknown problem {problem!r}; choose from random, {', '.join(NAMED)}")
            specs = [(None, None, None)]
        for m, m_active, inst in specs:
            for mode in modes:
                for run in range(args.runs):
                    jobs.append(Job(problem, args.n, m, m_active, inst, mode, run, args.seed + run, config))
    return jobs


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradsamp-bench", description=__doc__)
    p.add_argument("--problem", required=True,
                   help="'random' or a named problem (comma-separated list allowed): " + ", ".join(NAMED))
    p.add_argument("--n", type=int, required=True, help="dimension")
    p.add_argument("--m", type=int, help="rows of the random max-affine term")
    p.add_argument("--m-active", help="active rows at the minimiser (comma-separated list allowed)")
    p.add_argument("--instances", type=int, default=1, help="random instances per m-active value")
    p.add_argument("--problem-seed", type=int, default=None,
                   help="seed of the first random instance (default: --seed)")
    p.add_argument("--modes", default="exact,inexact,inexact-agg")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed + i")
    p.add_argument("--f-tol", type=float)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--hessian", choices=["full", "limited"])
    p.add_argument("--history", type=int)
    p.add_argument("--config", help="file of 'key = value' parameter overrides")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--quiet", action="store_true", help="suppress the summary table")
    return p


def run_benchmark(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.problem_seed is None:
        args.problem_seed = args.seed
    try:
        config = load_config(args.config, f_tol=args.f_tol, time_limit=args.time_limit,
                             max_iters=args.max_iters, hessian=args.hessian, history=args.history)
        jobs = build_jobs(args, config)
    except (ConfigError, ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    if args.runs < 1 or args.jobs < 1 or args.instances < 1:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: --runs, --jobs and --instances must be positive", file=sys.stderr)
        return 2

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(run_job, jobs))
    else:
        rows = [run_job(j) for j in jobs]

    groups = {}
    for job, row in zip(jobs, rows):
        groups.setdefault((job.label, job.mode), []).append(row)
    averages = [average_row(g) for g in groups.values()]

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    writer.writerows(averages)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if not args.quiet:
        print(format_table(averages), file=sys.stderr if not args.out else sys.stdout)
    return 0


def main():
    sys.exit(run_benchmark())


if __name__ == "__main__":
    main()
