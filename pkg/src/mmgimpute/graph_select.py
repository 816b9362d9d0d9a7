"""Working-graph estimation from complete cases by thresholding partial correlations."""

from __future__ import annotations

import numpy as np

from .dataset import DataMatrix
from .exceptions import InvalidArgumentError, NoSupportError, SingularityError
from .graph import UndirectedGraph


def partial_correlations(x: np.ndarray) -> np.ndarray:
    """Partial correlation matrix of the columns of ``x`` (unit diagonal)."""
    cov = np.cov(x, rowvar=False)
    cov = np.atleast_2d(cov)
    if np.any(~(np.diag(cov) > 0)):
        raise SingularityError("a complete-case column is constant")
    scale = np.sqrt(np.diag(cov))
    corr = cov / np.outer(scale, scale)
    if np.linalg.cond(corr) > 1e12:
        raise SingularityError("complete-case covariance is singular")
    prec = np.linalg.inv(corr)
    k = np.sqrt(np.diag(prec))
    pc = -prec / np.outer(k, k)
    np.fill_diagonal(pc, 1.0)
    return (pc + pc.T) / 2


def partial_corr_graph(data: DataMatrix, threshold: float) -> UndirectedGraph:
    """Edge ``(u, v)`` whenever ``|partial correlation| > threshold`` among complete cases."""
    if not threshold >= 0:
        raise InvalidArgumentError("threshold must be nonnegative")
    rows = data.complete_rows()
    if len(rows) < data.d + 2:
        raise NoSupportError(f"{len(rows)} complete cases, need at least {data.d + 2}")
    pc = partial_correlations(data.values[rows])
    iu, ju = np.triu_indices(data.d, k=1)
    keep = np.abs(pc[iu, ju]) > threshold
    return UndirectedGraph(data.d, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))
