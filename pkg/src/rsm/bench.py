"""Seeded benchmark grid over synthetic instances.

A cell is one ``(m, n, density, sigma)`` combination; each repeat draws a
fresh instance with seed ``base_seed + repeat`` and decomposes it with the
same seed. Cells report medians over repeats.
"""

from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass
from itertools import product
from typing import Iterator

from .solver import RsmConfig, baseline_als, decompose
from .synth import SyntheticSpec, generate

PRESETS: dict[str, dict] = {
    "table1-desk": {
        "sizes": [(4096, 256), (8192, 256), (8192, 128)],
        "densities": [0.2, 0.3, 0.5],
        "sigmas": [0.1, 0.2, 0.3],
        "rank": 3,
        "repeats": 3,
    },
    "smoke": {
        "sizes": [(400, 40)],
        "densities": [0.5],
        "sigmas": [0.1],
        "rank": 3,
        "repeats": 2,
    },
}


@dataclass
class RunRow:
    m: int
    n: int
    rank: int
    density: float
    sigma: float
    repeat: int
    seed: int
    e: float
    wall_time: float
    z: int
    trials_attempted: int
    trials_accepted: int
    als_e: float | None = None
    als_time: float | None = None


@dataclass
class CellRow:
    m: int
    n: int
    rank: int
    density: float
    sigma: float
    repeats: int
    e: float
    wall_time: float
    z: float
    trials: float
    als_e: float | None = None
    als_time: float | None = None


def run_grid(
    sizes: list[tuple[int, int]],
    densities: list[float],
    sigmas: list[float],
    rank: int = 3,
    repeats: int = 3,
    base_seed: int = 0,
    trials: int | str = "auto",
    workers: int = 1,
    als_iterations: int | None = None,
) -> Iterator[RunRow]:
    for (m, n), rho, sigma in product(sizes, densities, sigmas):
        for rep in range(repeats):
            seed = base_seed + rep
            inst = generate(SyntheticSpec(m, n, rank, rho, sigma, seed))
            cfg = RsmConfig(rank=rank, trials=trials, seed=seed, workers=workers)
            _, report = decompose(inst.observed, cfg)
            row = RunRow(
                m, n, rank, rho, sigma, rep, seed,
                e=report.error,
                wall_time=report.wall_time,
                z=report.constraint_vectors,
                trials_attempted=report.trials_attempted,
                trials_accepted=report.trials_accepted,
            )
            if als_iterations:
                _, als = baseline_als(inst.observed, rank, als_iterations, seed)
                row.als_e = als.error
                row.als_time = als.wall_time
            yield row


def _median(values: list) -> float | None:
    values = [v for v in values if v is not None]
    return statistics.median(values) if values else None


def summarize(rows: list[RunRow]) -> list[CellRow]:
    cells: dict[tuple, list[RunRow]] = {}
    for row in rows:
        cells.setdefault((row.m, row.n, row.rank, row.density, row.sigma), []).append(row)
    return [
        CellRow(
            *key,
            repeats=len(group),
            e=_median([g.e for g in group]),
            wall_time=_median([g.wall_time for g in group]),
            z=_median([g.z for g in group]),
            trials=_median([g.trials_accepted for g in group]),
            als_e=_median([g.als_e for g in group]),
            als_time=_median([g.als_time for g in group]),
        )
        for key, group in cells.items()
    ]


def as_records(rows: list) -> list[dict]:
    return [asdict(r) for r in rows]
