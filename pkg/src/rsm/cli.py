"""Command-line front end: ``rsm {synth,decompose,plan,eval,bench}``.

Exit codes: 0 ok, 1 other error, 2 invalid configuration, 3 parse or I/O
error, 4 insufficient coverage. Failures print one line to stderr of the
form ``error: <Category>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Sequence

from . import __version__
from .bench import PRESETS, as_records, run_grid, summarize
from .core import (
    DecompositionReport,
    Factorization,
    MaskedMatrix,
    density,
    masked_residual_norm,
)
from .errors import InvalidConfig, IoError, RsmError
from .io import checksum, load_matrix, save_matrix
from .planner import DEFAULT_MULTIPLIER, plan_trials_heuristic, plan_trials_theorem3
from .solver import RsmConfig, decompose
from .synth import GENERATOR, SyntheticSpec, generate


@dataclass(frozen=True)
class RunReport:
    """Flat record of one decomposition: report fields, config echo, provenance."""

    fields: dict

    @classmethod
    def build(cls, M: MaskedMatrix, cfg: RsmConfig, report: DecompositionReport) -> RunReport:
        run = report.to_dict()
        run.pop("history")
        run.update(
            m=M.m, n=M.n, density=density(M), rank=cfg.rank, mode=cfg.mode,
            block=cfg.block_size, vectors_per_trial=cfg.vectors_per_trial,
            trials=str(cfg.trials), epsilon=cfg.epsilon, multiplier=cfg.multiplier,
            seed=cfg.seed, workers=cfg.workers, gram_rank_tol=cfg.gram_rank_tol,
            dataset_sha256=checksum(M), tool_version=__version__,
        )
        return cls(run)

    def to_json(self) -> str:
        return json.dumps(self.fields, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls(json.loads(text))

    def write(self, path: str | None) -> None:
        _write_text(self.to_json(), path)


def _write_text(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _trials(value: str) -> int | str:
    if value in ("auto", "theorem3"):
        return value
    try:
        count = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a count, 'auto' or 'theorem3'") from None
    if count < 1:
        raise argparse.ArgumentTypeError("trial count must be >= 1")
    return count


def _size(value: str) -> tuple[int, int]:
    try:
        m, n = value.lower().split("x")
        return int(m), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MxN, got {value!r}") from None


def _dump_json(data: dict, path: str | None) -> None:
    _write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", path)


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(args.rows, args.cols, args.rank, args.density, args.sigma, args.seed)
    inst = generate(spec)
    save_matrix(inst.observed, args.out)
    if args.truth:
        save_matrix(inst.ground_truth, args.truth)
    if args.basis:
        save_matrix(inst.truth_basis, args.basis)
    if args.meta:
        _dump_json({
            "m": spec.m, "n": spec.n, "rank": spec.rank, "density": spec.density,
            "sigma": spec.sigma, "seed": spec.seed, "generator": GENERATOR,
            "observed_density": density(inst.observed), "tool_version": __version__,
        }, args.meta)
    return 0


def cmd_decompose(args: argparse.Namespace) -> int:
    M = load_matrix(args.input)
    cfg = RsmConfig(
        rank=args.rank,
        mode=args.mode,
        block=args.block,
        vectors_per_trial=args.vectors_per_trial,
        trials=args.trials,
        epsilon=args.epsilon,
        multiplier=args.multiplier,
        seed=args.seed,
        workers=args.workers or os.cpu_count() or 1,
    )
    F, report = decompose(M, cfg)
    if args.out_u:
        save_matrix(F.u, args.out_u)
    if args.out_v:
        save_matrix(F.v, args.out_v)
    RunReport.build(M, cfg, report).write(args.report)
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    block = args.block if args.block is not None else args.rank + 1
    heuristic = plan_trials_heuristic(args.cols, args.multiplier)
    print(f"heuristic_trials={heuristic.trials}")
    bound = plan_trials_theorem3(
        args.rows, args.cols, args.density, args.rank, block, args.epsilon, args.mode,
    )
    print(f"theorem3_trials={bound.trials}")
    print(f"theorem3_bound={bound.bound!r}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    M = load_matrix(args.input)
    u = load_matrix(args.u)
    v = load_matrix(args.v)
    if u.known != u.m * u.n or v.known != v.m * v.n:
        raise InvalidConfig("factor files must not contain missing cells")
    try:
        F = Factorization(u.values, v.values)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    print(repr(masked_residual_norm(M, F)))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    grid = dict(PRESETS[args.preset]) if args.preset else dict(PRESETS["table1-desk"])
    if args.sizes:
        grid["sizes"] = args.sizes
    if args.density:
        grid["densities"] = args.density
    if args.sigma:
        grid["sigmas"] = args.sigma
    if args.rank is not None:
        grid["rank"] = args.rank
    if args.repeats is not None:
        grid["repeats"] = args.repeats
    runs = []
    for row in run_grid(
        grid["sizes"], grid["densities"], grid["sigmas"], grid["rank"], grid["repeats"],
        base_seed=args.seed, trials=args.trials, workers=args.workers or 1,
        als_iterations=args.als_iterations if args.als else None,
    ):
        runs.append(row)
        print(
            f"m={row.m} n={row.n} rho={row.density} sigma={row.sigma} rep={row.repeat} "
            f"e={row.e:.4f} t={row.wall_time:.2f}s",
            file=sys.stderr,
        )
    records = as_records(runs if args.per_run else summarize(runs))
    if not args.als:
        for rec in records:
            rec.pop("als_e")
            rec.pop("als_time")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    _write_text(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsm", description=__doc__.splitlines()[0], allow_abbrev=False
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic low-rank instance")
    p.add_argument("-m", "--rows", type=int, required=True)
    p.add_argument("-n", "--cols", type=int, required=True)
    p.add_argument("-r", "--rank", type=int, default=3)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="observed matrix (NaN = missing)")
    p.add_argument("--truth", help="write the noiseless ground truth here")
    p.add_argument("--basis", help="write the true right singular basis here")
    p.add_argument("--meta", help="write instance metadata JSON here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="low-rank decomposition of a CSV matrix")
    p.add_argument("input")
    p.add_argument("-r", "--rank", type=int, required=True)
    p.add_argument("--mode", choices=("m1", "m2"), default="m1")
    p.add_argument("--block", type=int, help="columns (m1) or rows (m2) per trial; default rank+1")
    p.add_argument("--trials", type=_trials, default="auto", help="N, auto (25n) or theorem3")
    p.add_argument("--multiplier", type=float, default=DEFAULT_MULTIPLIER)
    p.add_argument("--epsilon", type=float, default=0.99)
    p.add_argument("--vectors-per-trial", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="default: machine parallelism")
    p.add_argument("--out-u")
    p.add_argument("--out-v")
    p.add_argument("--report", default="-", help="JSON run report (default stdout)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("plan", help="trial counts for a given shape and density")
    p.add_argument("-m", "--rows", type=int, required=True)
    p.add_argument("-n", "--cols", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("-r", "--rank", type=int, required=True)
    p.add_argument("--block", type=int)
    p.add_argument("--epsilon", type=float, default=0.99)
    p.add_argument("--mode", choices=("m1", "m2"), default="m2")
    p.add_argument("--multiplier", type=float, default=DEFAULT_MULTIPLIER)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="masked RMS error of U V^T against a matrix")
    p.add_argument("input")
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a benchmark grid and emit a CSV table")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--sizes", type=_size, nargs="+", help="e.g. 4096x256 8192x128")
    p.add_argument("--density", type=float, nargs="+")
    p.add_argument("--sigma", type=float, nargs="+")
    p.add_argument("-r", "--rank", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--trials", type=_trials, default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--als", action="store_true", help="add ALS baseline columns")
    p.add_argument("--als-iterations", type=int, default=200)
    p.add_argument("--per-run", action="store_true", help="one row per repeat instead of medians")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RsmError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
