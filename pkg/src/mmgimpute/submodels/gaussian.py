"""Joint-Gaussian submodels fitted on the rows observing a model pattern."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..dataset import DataMatrix, rows_at_least
from ..exceptions import (
    InvalidArgumentError,
    NoSupportError,
    SingularCovarianceWarning,
    SingularityError,
)
from ..graph import UndirectedGraph
from ..patterns import Pattern
from ._common import local_positions, qualifying_block

PIVOT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GaussianParams:
    scope: tuple[int, ...]
    mean: np.ndarray
    cov: np.ndarray
    n_rows: int = 0
    singular: bool = False

    family = "gaussian"

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "scope": list(self.scope),
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "n_rows": self.n_rows,
            "singular": self.singular,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GaussianParams":
        return cls(
            tuple(obj["scope"]),
            np.asarray(obj["mean"], dtype=float),
            np.asarray(obj["cov"], dtype=float),
            int(obj.get("n_rows", 0)),
            bool(obj.get("singular", False)),
        )

    def same_as(self, other) -> bool:
        return (
            isinstance(other, GaussianParams)
            and self.scope == other.scope
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )


def gaussian_mle(block: np.ndarray):
    """Sample mean and divide-by-n covariance of the rows of ``block``."""
    mean = block.mean(axis=0)
    centered = block - mean
    cov = centered.T @ centered / block.shape[0]
    return mean, (cov + cov.T) / 2


def _is_singular(cov: np.ndarray) -> bool:
    try:
        _scaled_cholesky(cov)
    except SingularityError:
        return True
    return False


def fit_gaussian(data: DataMatrix, s: Pattern, g: UndirectedGraph) -> GaussianParams:
    """Gaussian MLE over the closed neighborhood of ``s``.

    Uses every row that observes ``s`` and its neighbors. A singular fitted
    covariance is flagged with :class:`SingularCovarianceWarning` rather than
    rejected; conditioning on it may fail later.
    """
    width = (s.bits | g.neighbor_mask(s.bits)).bit_count()
    scope, rows, block = qualifying_block(data, s, g, min_rows=width + 1)
    return _fit_block(scope, block)


def _fit_block(scope, block) -> GaussianParams:
    mean, cov = gaussian_mle(block)
    singular = _is_singular(cov)
    if singular:
        warnings.warn(f"singular covariance over scope {scope}", SingularCovarianceWarning, stacklevel=3)
    return GaussianParams(tuple(scope), mean, cov, block.shape[0], singular)


def fit_gaussian_marginal(data: DataMatrix, s: Pattern) -> GaussianParams:
    """Fallback fit over rows observing ``s`` alone, ignoring its neighbors."""
    rows = rows_at_least(data, s)
    scope = s.indices
    if len(rows) < len(scope) + 1:
        raise NoSupportError(f"connected pattern {s}: only {len(rows)} rows observe it", [str(s)])
    return _fit_block(scope, data.values[np.ix_(rows, scope)])


def _scaled_cholesky(cov: np.ndarray):
    """Cholesky factor of ``cov`` rescaled to unit diagonal.

    Raises SingularityError if a scaled pivot falls below ``PIVOT_TOL``.
    """
    diag = np.diag(cov).copy()
    if cov.size and np.any(~(diag > 0)):
        raise SingularityError("covariance block has a non-positive variance")
    scale = np.sqrt(diag)
    scaled = cov / np.outer(scale, scale)
    try:
        chol = np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError:
        raise SingularityError("covariance block is not positive definite") from None
    if chol.size and np.min(np.diag(chol)) ** 2 < PIVOT_TOL:
        raise SingularityError("covariance block is numerically singular")
    return chol, scale


def conditional_linear(p: GaussianParams, observed):
    """Regression form of the conditional law of unobserved scope variables.

    Returns ``(missing, intercept, coef, cov)`` such that the missing block
    given ``x_observed`` is normal with mean ``intercept + coef @ x_observed``
    and covariance ``cov``.
    """
    observed = [int(v) for v in observed]
    if len(set(observed)) != len(observed):
        raise InvalidArgumentError("observed indices repeat")
    obs_pos = local_positions(p.scope, observed)
    mis_pos = [k for k in range(len(p.scope)) if k not in set(obs_pos)]
    missing = tuple(p.scope[k] for k in mis_pos)
    mu1, mu2 = p.mean[mis_pos], p.mean[obs_pos]
    s11 = p.cov[np.ix_(mis_pos, mis_pos)]
    s12 = p.cov[np.ix_(mis_pos, obs_pos)]
    s22 = p.cov[np.ix_(obs_pos, obs_pos)]
    if not obs_pos:
        return missing, mu1.copy(), np.zeros((len(mis_pos), 0)), s11.copy()
    try:
        chol, scale = _scaled_cholesky(s22)
    except SingularityError as exc:
        raise SingularityError(
            f"cannot condition on variables {tuple(observed)} in scope {p.scope}: {exc}"
        ) from None
    # s12 @ inv(s22) via the scaled factor
    rhs = (s12 / scale).T
    coef = (linalg.cho_solve((chol, True), rhs).T) / scale
    cov = s11 - coef @ s12.T
    cov = (cov + cov.T) / 2
    intercept = mu1 - coef @ mu2
    return missing, intercept, coef, cov


def gaussian_conditional(p: GaussianParams, observed, values):
    """Conditional mean and covariance of the non-observed scope variables.

    Parameters
    ----------
    p : GaussianParams
    observed : sequence of int
        Variable indices (global column indices) being conditioned on.
    values : array_like
        Values of ``observed`` in the same order.

    Returns
    -------
    missing : tuple of int
        Variables of the conditional law, in scope order.
    mean, cov : ndarray
    """
    missing, intercept, coef, cov = conditional_linear(p, observed)
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != coef.shape[1]:
        raise InvalidArgumentError("values length does not match observed")
    return missing, intercept + coef @ values, cov


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Factor ``F`` with ``F @ F.T == cov`` that tolerates semidefinite input."""
    if cov.size == 0:
        return cov.copy()
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def gaussian_nll(p: GaussianParams, block: np.ndarray) -> np.ndarray:
    """Per-row negative log density of ``block`` (columns in scope order)."""
    block = np.atleast_2d(block)
    try:
        chol = np.linalg.cholesky(p.cov)
    except np.linalg.LinAlgError:
        return np.full(block.shape[0], np.inf)
    z = linalg.solve_triangular(chol, (block - p.mean).T, lower=True)
    k = len(p.scope)
    logdet = 2 * np.log(np.diag(chol)).sum()
    return 0.5 * (k * np.log(2 * np.pi) + logdet + (z**2).sum(axis=0))
