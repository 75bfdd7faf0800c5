"""Synthetic low-rank instances with Gaussian noise and a Bernoulli mask.

Draw order from a single ``numpy.random.PCG64`` stream seeded with ``seed``:
left factor (m x r), right factor (r x n), noise (m x n), mask uniforms
(m x n). Keeping that order fixed makes instances reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array, MaskedMatrix
from .errors import InvalidSpec

GENERATOR = "numpy.random.PCG64"


@dataclass(frozen=True)
class SyntheticSpec:
    m: int
    n: int
    rank: int
    density: float = 0.3
    sigma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.m < 1 or self.n < 1:
            raise InvalidSpec("m and n must be positive")
        if not 1 <= self.rank < min(self.m, self.n):
            raise InvalidSpec(f"rank must satisfy 1 <= r < min(m, n), got {self.rank}")
        if not 0.0 < self.density <= 1.0:
            raise InvalidSpec(f"density must lie in (0, 1], got {self.density}")
        if not self.sigma >= 0.0:
            raise InvalidSpec(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class SyntheticInstance:
    spec: SyntheticSpec
    observed: MaskedMatrix
    ground_truth: Array
    noise: Array
    # orthonormal right singular vectors of the ground truth (n x r)
    truth_basis: Array
    generator: str = GENERATOR


def generate(spec: SyntheticSpec) -> SyntheticInstance:
    spec.validate()
    m, n, r = spec.m, spec.n, spec.rank
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    left = rng.standard_normal((m, r))
    right = rng.standard_normal((r, n))
    truth = left @ right
    noise = spec.sigma * rng.standard_normal((m, n))
    mask = rng.random((m, n)) <= spec.density
    values = truth + noise
    values[~mask] = np.nan

    # right singular vectors of left @ right via the small r x n core
    q, rr = np.linalg.qr(left)
    _, _, vt = np.linalg.svd(rr @ right, full_matrices=False)
    return SyntheticInstance(
        spec=spec,
        observed=MaskedMatrix(values, mask),
        ground_truth=truth,
        noise=noise,
        truth_basis=np.ascontiguousarray(vt.T),
    )
