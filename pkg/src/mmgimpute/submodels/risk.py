"""Empirical imputation risk of a submodel over its qualifying rows."""

from __future__ import annotations

import numpy as np

from ..dataset import DataMatrix, rows_at_least
from ..graph import UndirectedGraph
from ..patterns import Pattern, model_pattern_of
from .gaussian import GaussianParams, gaussian_nll
from .ising import IsingParams, ising_nll
from .mixture import MPParams, mp_nll


def negative_log_likelihood(params, block: np.ndarray) -> np.ndarray:
    """Per-row negative log-likelihood; ``block`` columns follow ``params.scope``."""
    if isinstance(params, GaussianParams):
        return gaussian_nll(params, block)
    if isinstance(params, IsingParams):
        return ising_nll(params, block)
    if isinstance(params, MPParams):
        return mp_nll(params, block)
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def empirical_risk(loss, theta, data: DataMatrix, s: Pattern, g: UndirectedGraph) -> float:
    """Average loss over all ``n`` rows, counting only rows that observe ``s`` and its neighbors.

    ``loss(theta, block)`` must return per-row losses for a block whose
    columns are the model-pattern variables in index order. The divisor is
    ``n``, not the number of qualifying rows; the minimizer is the same.
    """
    if data.n == 0:
        return 0.0
    required = model_pattern_of(g, s)
    rows = rows_at_least(data, required)
    if len(rows) == 0:
        return 0.0
    block = data.values[np.ix_(rows, required.indices)]
    return float(np.sum(loss(theta, block)) / data.n)
