"""Command-line front end.

Exit codes: 0 feasible (or success), 1 infeasible (or invalid), 2 timeout, 3 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import multiprocessing
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import generator, sofaclap
from .dp_core import Budget, Outcome
from .dp_opts import OPT_TAGS, OptConfig, solve
from .model import read_instance, read_tree, verify_tree, write_tree
from .oracle import OracleLimitError, brute_force_decide

EXIT = {Outcome.FEASIBLE: 0, Outcome.INFEASIBLE: 1, Outcome.TIMEOUT: 2}
ERROR = 3
CSV_FIELDS = ["instance_id", "seed", "lambda", "n0", "factor_lo", "factor_hi", "opt_set", "outcome",
              "time_ms", "stored", "pruned", "dominated", "greedy_calls", "greedy_successes", "counterpart_hits"]
DEFAULT_TIMEOUT_MS = 500_000


class UsageError(Exception):
    pass


def _range(text: str, conv=int):
    lo, sep, hi = text.partition(":")
    try:
        a = conv(lo)
        b = conv(hi) if sep else a
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    return a, b


def _budget(ms: Optional[float]) -> Budget:
    return Budget() if ms is None else Budget(seconds=ms / 1000.0)


def _config(tag: str) -> OptConfig:
    try:
        return OptConfig.from_tag(tag)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ------------------------------------------------------------ subcommands


def cmd_solve(args) -> int:
    inst = read_instance(Path(args.instance).read_bytes())
    d = solve(inst, _config(args.opts), _budget(args.timeout))
    print(d.outcome.value)
    if d.feasible and args.tree:
        Path(args.tree).write_bytes(write_tree(d.tree))
    return EXIT[d.outcome]


def cmd_oracle(args) -> int:
    inst = read_instance(Path(args.instance).read_bytes())
    res = brute_force_decide(inst)
    print("feasible" if res.feasible else "infeasible")
    return 0 if res.feasible else 1


def cmd_verify(args) -> int:
    inst = read_instance(Path(args.instance).read_bytes())
    tree = read_tree(Path(args.tree).read_bytes())
    report = verify_tree(inst, tree)
    if report.ok:
        print("valid")
        return 0
    for line in report.violations:
        print(line)
    return 1


def cmd_generate(args) -> int:
    if args.preset:
        params = generator.preset(args.preset, seed=args.seed, count=args.count,
                                  factor=args.factor[0] if args.factor else None)
    else:
        if args.layers is None or args.sources is None:
            raise UsageError("generate needs --layers and --sources (or --preset)")
        params = generator.GenParams(args.layers, args.sources, args.factor, seed=args.seed, count=args.count)
    if args.no_sink:
        params = generator.GenParams(params.lam, params.sources, params.factors, params.seed,
                                     params.count, params.spread, sink=False)
    paths = generator.write_corpus(params, args.out)
    if args.sofaclap:
        paths += generator.write_geometric_corpus(params, args.out)
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


def cmd_embed(args) -> int:
    graph = sofaclap.read_graph(Path(args.graph).read_bytes())
    heur = sofaclap.HEURISTICS if args.heuristics is None else tuple(h for h in args.heuristics.split(",") if h)
    d = solve(graph.instance(), _config(args.opts), _budget(args.timeout))
    if not d.feasible:
        print(d.outcome.value, file=sys.stderr)
        return EXIT[d.outcome]
    emb = sofaclap.initial_embedding(graph, d.tree)
    res = sofaclap.optimize(graph, d.tree, emb, heur)
    obj = sofaclap.layout_obj(graph, res.tree, res.embedding, res.trace)
    text = json.dumps(obj, separators=(",", ":")) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"cost {res.trace[0]:.6f} -> {res.trace[-1]:.6f}", file=sys.stderr)
    return 0


# ------------------------------------------------------------ benchmark harness


def _bench_one(task) -> dict:
    path, tag, timeout_ms, meta = task
    row = dict(meta)
    row["opt_set"] = tag
    try:
        inst = read_instance(Path(path).read_bytes())
        row.update({"lambda": inst.lam, "n0": inst.n0})
        cfg = OptConfig.from_tag(tag)
        t = time.perf_counter()
        d = solve(inst, cfg, _budget(timeout_ms))
        ms = (time.perf_counter() - t) * 1000.0
    except Exception as exc:  # recorded, never fatal
        row.update({"outcome": "error", "time_ms": "", "error": f"{type(exc).__name__}: {exc}"})
        return row
    diag = d.diagnostics
    row.update({
        "outcome": d.outcome.value,
        "time_ms": f"{ms:.3f}",
        "stored": diag.stored,
        "pruned": diag.pruned,
        "dominated": diag.dominated,
        "greedy_calls": diag.greedy_calls,
        "greedy_successes": diag.greedy_successes,
        "counterpart_hits": diag.counterpart_hits,
    })
    return row


def _manifest(directory: Path) -> dict:
    p = directory / "manifest.json"
    if not p.exists():
        return {}
    return json.loads(p.read_text())


def bench_rows(directory, tags, jobs: int = 1, timeout_ms: float = DEFAULT_TIMEOUT_MS) -> list[dict]:
    directory = Path(directory)
    man = _manifest(directory)
    entries = man.get("instances", {})
    tasks = []
    for path in sorted(directory.glob("*.clt")):
        info = entries.get(path.stem, {})
        meta = {"instance_id": path.stem, "seed": man.get("seed", ""),
                "factor_lo": info.get("factor_lo", ""), "factor_hi": info.get("factor_hi", ""),
                "lambda": "", "n0": ""}
        for tag in tags:
            tasks.append((str(path), tag, timeout_ms, meta))
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            rows = pool.map(_bench_one, tasks, chunksize=1)
    else:
        rows = [_bench_one(t) for t in tasks]
    rows.sort(key=lambda r: (r["instance_id"], r["opt_set"]))
    return rows


def write_csv(rows: list[dict], out) -> None:
    w = csv.DictWriter(out, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in CSV_FIELDS})


def default_jobs() -> int:
    env = os.environ.get("LAYERTREE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"LAYERTREE_THREADS must be an integer, got {env!r}") from None
    return 1


def cmd_bench(args) -> int:
    tags = [t for t in args.opts.split(",") if t]
    bad = [t for t in tags if t not in OPT_TAGS]
    if bad:
        raise UsageError(f"unknown opt set(s): {', '.join(bad)}; choose from {', '.join(OPT_TAGS)}")
    jobs = args.jobs if args.jobs is not None else default_jobs()
    rows = bench_rows(args.dir, tags, jobs, args.timeout)
    for r in rows:
        if r["outcome"] == "error":
            print(f"{r['instance_id']} {r['opt_set']}: {r['error']}", file=sys.stderr)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        buf = io.StringIO()
        write_csv(rows, buf)
        sys.stdout.write(buf.getvalue())
    return 0


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="layertree", description="Constrained layer tree solver and tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="decide an instance file")
    p.add_argument("instance")
    p.add_argument("--opts", default="all", help=f"optimization set ({', '.join(OPT_TAGS)})")
    p.add_argument("--timeout", type=float, metavar="MS", help="time budget in milliseconds")
    p.add_argument("--tree", metavar="OUT", help="write the tree certificate here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="write random instances")
    p.add_argument("--layers", type=int)
    p.add_argument("--sources", type=_range, metavar="LO:HI")
    p.add_argument("--factor", type=lambda s: _range(s, Fraction), metavar="LO:HI")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--preset", choices=sorted(generator.PRESETS))
    p.add_argument("--sofaclap", action="store_true", help="also write geometric JSON instances")
    p.add_argument("--no-sink", action="store_true", help="do not append the single root layer")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle", help="exhaustive decision for tiny instances")
    p.add_argument("instance")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="check a tree certificate against an instance")
    p.add_argument("instance")
    p.add_argument("tree")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("embed", help="solve a geometric instance and improve its layout")
    p.add_argument("graph")
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--heuristics", help=f"comma list out of {', '.join(sofaclap.HEURISTICS)}")
    p.add_argument("--opts", default="all")
    p.add_argument("--timeout", type=float, metavar="MS")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bench", help="run opt sets over a directory of instances, CSV to stdout")
    p.add_argument("dir")
    p.add_argument("--opts", default="all", help="comma list of optimization sets")
    p.add_argument("--jobs", type=int, help="worker processes (default: $LAYERTREE_THREADS or 1)")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT_MS, metavar="MS")
    p.add_argument("--out", metavar="CSV")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, UsageError, OracleLimitError, generator.GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
