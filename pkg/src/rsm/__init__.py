"""Random-submatrix low-rank decomposition of matrices with missing entries."""

from .core import (
    DecompositionReport,
    Factorization,
    MaskedMatrix,
    density,
    masked_objective,
    masked_residual_norm,
)
from .errors import RsmError
from .io import load_matrix, save_matrix
from .solver import RsmConfig, baseline_als, decompose
from .synth import SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "DecompositionReport",
    "Factorization",
    "MaskedMatrix",
    "RsmConfig",
    "RsmError",
    "SyntheticSpec",
    "baseline_als",
    "decompose",
    "density",
    "generate",
    "load_matrix",
    "masked_objective",
    "masked_residual_norm",
    "save_matrix",
]
