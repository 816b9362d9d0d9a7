"""Ising submodels over binary variables with an exactly enumerated partition function.

The log-density of ``x`` in ``{0,1}^p`` is ``field @ x + x @ coupling @ x - log_partition``
with ``coupling`` symmetric and zero on the diagonal, so each pair
contributes ``2 * coupling[u, v] * x_u * x_v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from ..dataset import DataMatrix
from ..exceptions import (
    ColumnTypeError,
    ConvergenceError,
    DegenerateFitError,
    InvalidArgumentError,
)
from ..graph import UndirectedGraph
from ..patterns import Pattern
from ._common import local_positions, qualifying_block

MAX_SCOPE = 15


@lru_cache(maxsize=None)
def binary_states(p: int) -> np.ndarray:
    """All ``2**p`` configurations; row ``k`` has ``x_j = (k >> j) & 1``."""
    k = np.arange(2**p)[:, None]
    out = ((k >> np.arange(p)) & 1).astype(float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class IsingParams:
    scope: tuple[int, ...]
    field: np.ndarray
    coupling: np.ndarray
    log_partition: float
    n_rows: int = 0

    family = "ising"

    def log_pmf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return energy(self.field, self.coupling, x) - self.log_partition

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "scope": list(self.scope),
            "field": self.field.tolist(),
            "coupling": self.coupling.tolist(),
            "log_partition": self.log_partition,
            "n_rows": self.n_rows,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "IsingParams":
        return cls(
            tuple(obj["scope"]),
            np.asarray(obj["field"], dtype=float),
            np.asarray(obj["coupling"], dtype=float).reshape(len(obj["field"]), len(obj["field"])),
            float(obj["log_partition"]),
            int(obj.get("n_rows", 0)),
        )

    @classmethod
    def from_natural(cls, scope, field, coupling, n_rows: int = 0) -> "IsingParams":
        field = np.asarray(field, dtype=float)
        coupling = np.asarray(coupling, dtype=float)
        return cls(tuple(scope), field, coupling, log_partition(field, coupling), n_rows)

    def same_as(self, other) -> bool:
        return (
            isinstance(other, IsingParams)
            and self.scope == other.scope
            and np.array_equal(self.field, other.field)
            and np.array_equal(self.coupling, other.coupling)
        )


def energy(field, coupling, x) -> np.ndarray:
    return x @ field + np.einsum("ij,jk,ik->i", x, coupling, x)


def log_partition(field, coupling) -> float:
    states = binary_states(len(field))
    return float(logsumexp(energy(field, coupling, states)))


def _pairs(p: int):
    return np.triu_indices(p, k=1)


def _stats(x: np.ndarray) -> np.ndarray:
    """Sufficient statistics ``[x, 2 x_u x_v for u < v]`` per row."""
    iu, ju = _pairs(x.shape[1])
    return np.hstack([x, 2.0 * x[:, iu] * x[:, ju]])


def _unpack(phi: np.ndarray, p: int):
    field = phi[:p].copy()
    coupling = np.zeros((p, p))
    iu, ju = _pairs(p)
    coupling[iu, ju] = phi[p:]
    coupling[ju, iu] = phi[p:]
    return field, coupling


def _pack(field, coupling) -> np.ndarray:
    iu, ju = _pairs(len(field))
    return np.concatenate([field, coupling[iu, ju]])


def _weights(n: int, weights) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
        raise InvalidArgumentError("weights must be nonnegative with positive sum")
    return w / w.sum()


def ising_loglik(field, coupling, x, weights=None) -> float:
    """Weighted mean log-likelihood of binary rows ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = _weights(x.shape[0], weights)
    return float(w @ energy(field, coupling, x) - log_partition(field, coupling))


def ising_loglik_grad(field, coupling, x, weights=None):
    """Gradient of :func:`ising_loglik`.

    The coupling gradient is returned as a symmetric matrix whose ``(u, v)``
    entry is the derivative with respect to the tied pair
    ``coupling[u, v] = coupling[v, u]``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = x.shape[1]
    w = _weights(x.shape[0], weights)
    states = binary_states(p)
    e = energy(field, coupling, states)
    prob = np.exp(e - logsumexp(e))
    g = w @ _stats(x) - prob @ _stats(states)
    return _unpack(g, p)


def ising_mle(x, weights=None, *, max_iter: int = 200, tol: float = 1e-9, step: float = 1.0):
    """Maximum likelihood ``(field, coupling)`` for binary rows ``x``.

    Damped Newton ascent with backtracking on the exact concave
    log-likelihood. Stops once the gradient's max-norm drops below ``tol``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    if p > MAX_SCOPE:
        raise InvalidArgumentError(f"exact Ising fitting supports at most {MAX_SCOPE} variables")
    if np.any((x != 0) & (x != 1)):
        raise ColumnTypeError("Ising submodels need 0/1 data")
    w = _weights(n, weights)
    means = w @ x
    if np.any(means <= 0) | np.any(means >= 1):
        bad = np.flatnonzero((means <= 0) | (means >= 1)).tolist()
        raise DegenerateFitError(f"variables at local positions {bad} are constant in the sample")

    states = binary_states(p)
    t_states = _stats(states)
    t_bar = w @ _stats(x)

    def evaluate(phi):
        e = t_states @ phi
        lz = logsumexp(e)
        prob = np.exp(e - lz)
        return phi @ t_bar - lz, prob

    phi = np.zeros(t_states.shape[1])
    # start from the independence fit
    phi[:p] = np.log(means) - np.log1p(-means)
    ll, prob = evaluate(phi)
    grad_norm = np.inf
    for _ in range(max_iter):
        et = prob @ t_states
        grad = t_bar - et
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < tol:
            field, coupling = _unpack(phi, p)
            return field, coupling
        centered = t_states - et
        fisher = (centered * prob[:, None]).T @ centered
        try:
            direction = np.linalg.solve(fisher + 1e-12 * np.eye(len(phi)), grad)
        except np.linalg.LinAlgError:
            direction = grad
        if not np.all(np.isfinite(direction)) or direction @ grad <= 0:
            direction = grad
        t = step
        slope = direction @ grad
        while True:
            cand = phi + t * direction
            ll_new, prob_new = evaluate(cand)
            if ll_new >= ll + 1e-4 * t * slope or t < 1e-12:
                break
            t /= 2
        if ll_new < ll:
            break
        phi, ll, prob = cand, ll_new, prob_new
    raise ConvergenceError(
        f"Ising fit did not reach gradient tolerance {tol:g} (final max-norm {grad_norm:.3g})",
        grad_norm=grad_norm,
    )


def fit_ising(
    data: DataMatrix,
    s: Pattern,
    g: UndirectedGraph,
    *,
    max_iter: int = 200,
    tol: float = 1e-9,
    step: float = 1.0,
) -> IsingParams:
    scope, rows, block = qualifying_block(data, s, g, min_rows=1)
    if len(scope) > MAX_SCOPE:
        raise InvalidArgumentError(
            f"scope of {s} has {len(scope)} variables; exact fitting supports {MAX_SCOPE}"
        )
    for j in scope:
        if data.columns[j].kind != "binary":
            raise ColumnTypeError(f"column {data.columns[j].name!r} is not binary")
    field, coupling = ising_mle(block, max_iter=max_iter, tol=tol, step=step)
    return IsingParams.from_natural(scope, field, coupling, n_rows=len(rows))


def conditional_table(p: IsingParams, observed):
    """Pieces of the conditional law of the non-observed scope variables.

    Returns ``(missing, states, base, cross)``: for observed values ``v``
    the unnormalized log-probability of ``states[k]`` is
    ``base[k] + states[k] @ cross @ v``.
    """
    observed = [int(v) for v in observed]
    obs_pos = local_positions(p.scope, observed)
    mis_pos = [k for k in range(len(p.scope)) if k not in set(obs_pos)]
    if len(mis_pos) > MAX_SCOPE:
        raise InvalidArgumentError(f"at most {MAX_SCOPE} missing variables can be enumerated")
    missing = tuple(p.scope[k] for k in mis_pos)
    states = binary_states(len(mis_pos))
    f_m = p.field[mis_pos]
    c_mm = p.coupling[np.ix_(mis_pos, mis_pos)]
    cross = 2.0 * p.coupling[np.ix_(mis_pos, obs_pos)]
    base = energy(f_m, c_mm, states)
    return missing, states, base, cross


def ising_conditional_pmf(p: IsingParams, observed, values):
    """Exact conditional PMF of the unobserved scope variables.

    Returns
    -------
    missing : tuple of int
    states : ndarray, shape (2**m, m)
    probs : ndarray, shape (2**m,)
    """
    missing, states, base, cross = conditional_table(p, observed)
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != cross.shape[1]:
        raise InvalidArgumentError("values length does not match observed")
    logits = base + states @ (cross @ values)
    probs = np.exp(logits - logsumexp(logits))
    return missing, states, probs


def ising_nll(p: IsingParams, block: np.ndarray) -> np.ndarray:
    return -p.log_pmf(np.asarray(block, dtype=float))
