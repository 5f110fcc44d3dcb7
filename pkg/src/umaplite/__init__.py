"""Uniform-manifold neighbor embedding: batch, density-preserving, streaming and parametric."""

from .config import RunConfig
from .dataio import DataMatrix, Embedding, emit_scatter_svg, load_csv, load_labels, write_embedding
from .errors import (
    DatasetTooSmallError,
    DegenerateDensityError,
    DimensionError,
    IsolatedPointError,
    NumericalDivergenceError,
    ParameterError,
    ParseError,
    StageError,
    UmapError,
)
from .pipeline import RunResult, run

__all__ = [
    "RunConfig", "DataMatrix", "Embedding", "RunResult", "run",
    "load_csv", "load_labels", "write_embedding", "emit_scatter_svg",
    "UmapError", "ParameterError", "ParseError", "DatasetTooSmallError", "DimensionError",
    "IsolatedPointError", "DegenerateDensityError", "NumericalDivergenceError", "StageError",
]
__version__ = "0.1.0"
