"""Mixture-of-products submodels fitted by EM.

Every scope variable gets a univariate law per mixture component: Gaussian
for continuous columns, Binomial(``max_count``, q) for binary and count
columns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from ..dataset import DataMatrix
from ..exceptions import (
    ComponentCollapseWarning,
    EMMonotonicityWarning,
    FitError,
    InvalidArgumentError,
    UnderflowError,
)
from ..graph import UndirectedGraph
from ..patterns import Pattern
from ._common import local_positions, qualifying_block

COLLAPSE_TOL = 1e-8
MONOTONE_SLACK = 1e-8
PROB_CLIP = 1e-10


@dataclass(frozen=True, eq=False)
class MPParams:
    """Fitted mixture of products over ``scope``.

    ``loc[k, j]`` is the mean (Gaussian columns) or success probability
    (Binomial columns) of scope variable ``j`` in component ``k``; ``var`` is
    the Gaussian variance and NaN for Binomial columns.
    """

    scope: tuple[int, ...]
    kinds: tuple[str, ...]
    trials: tuple[int, ...]
    weights: np.ndarray
    loc: np.ndarray
    var: np.ndarray
    loglik_trace: tuple[float, ...] = ()
    n_rows: int = 0
    converged: bool = True
    restart_logliks: tuple[float, ...] = field(default=())

    family = "mp"

    @property
    def k(self) -> int:
        return len(self.weights)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "scope": list(self.scope),
            "kinds": list(self.kinds),
            "trials": list(self.trials),
            "weights": self.weights.tolist(),
            "loc": self.loc.tolist(),
            "var": [[None if np.isnan(v) else v for v in row] for row in self.var.tolist()],
            "n_rows": self.n_rows,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MPParams":
        var = np.array([[np.nan if v is None else v for v in row] for row in obj["var"]], dtype=float)
        return cls(
            tuple(obj["scope"]),
            tuple(obj["kinds"]),
            tuple(obj["trials"]),
            np.asarray(obj["weights"], dtype=float),
            np.asarray(obj["loc"], dtype=float),
            var.reshape(len(obj["weights"]), len(obj["scope"])),
            n_rows=int(obj.get("n_rows", 0)),
            converged=bool(obj.get("converged", True)),
        )

    def same_as(self, other) -> bool:
        return (
            isinstance(other, MPParams)
            and self.scope == other.scope
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.loc, other.loc)
            and np.array_equal(self.var, other.var, equal_nan=True)
        )


def column_kinds(data: DataMatrix, scope) -> tuple[tuple[str, ...], tuple[int, ...]]:
    kinds, trials = [], []
    for j in scope:
        c = data.columns[j]
        if c.kind == "continuous":
            kinds.append("gaussian")
            trials.append(0)
        else:
            kinds.append("binomial")
            trials.append(int(c.max_count))
    return tuple(kinds), tuple(trials)


def component_logpdf(kinds, trials, loc, var, x) -> np.ndarray:
    """Per-variable log densities, shape ``(n, K, p)``."""
    x = np.atleast_2d(x)[:, None, :]
    out = np.empty((x.shape[0], loc.shape[0], loc.shape[1]))
    gauss = np.array([k == "gaussian" for k in kinds])
    if gauss.any():
        v = var[:, gauss]
        out[:, :, gauss] = -0.5 * (np.log(2 * np.pi * v) + (x[:, :, gauss] - loc[:, gauss]) ** 2 / v)
    if (~gauss).any():
        nt = np.asarray(trials, dtype=float)[~gauss]
        xb = x[:, :, ~gauss]
        q = loc[:, ~gauss]
        out[:, :, ~gauss] = (
            gammaln(nt + 1) - gammaln(xb + 1) - gammaln(nt - xb + 1)
            + xb * np.log(q) + (nt - xb) * np.log1p(-q)
        )
    return out


def _joint_logp(weights, kinds, trials, loc, var, x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logw + component_logpdf(kinds, trials, loc, var, x).sum(axis=2)


def _m_step(x, gamma, kinds, trials):
    nk = gamma.sum(axis=0)
    weights = nk / x.shape[0]
    safe = np.where(nk > 0, nk, 1.0)
    loc = (gamma.T @ x) / safe[:, None]
    var = np.full_like(loc, np.nan)
    gauss = np.array([k == "gaussian" for k in kinds])
    if gauss.any():
        diff2 = (x[:, None, gauss] - loc[None, :, gauss]) ** 2
        var[:, gauss] = np.einsum("ik,ikj->kj", gamma, diff2) / safe[:, None]
    if (~gauss).any():
        nt = np.asarray(trials, dtype=float)[~gauss]
        loc[:, ~gauss] = np.clip(loc[:, ~gauss] / nt, PROB_CLIP, 1 - PROB_CLIP)
    return weights, loc, var


def _collapsed(weights, var) -> np.ndarray:
    bad = weights < COLLAPSE_TOL
    with np.errstate(invalid="ignore"):
        bad |= np.any(var < COLLAPSE_TOL, axis=1)
    return bad


def _kmeans_pp_init(x, k, rng) -> np.ndarray:
    """Responsibilities from k-means++ seeding on standardized rows."""
    sd = x.std(axis=0)
    z = (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    n = z.shape[0]
    centers = [z[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min([((z - c) ** 2).sum(axis=1) for c in centers], axis=0)
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(z[idx])
    d2 = np.stack([((z - c) ** 2).sum(axis=1) for c in centers], axis=1)
    gamma = np.full((n, k), 1e-3)
    gamma[np.arange(n), d2.argmin(axis=1)] += 1.0
    return gamma / gamma.sum(axis=1, keepdims=True)


def _run_em(x, kinds, trials, gamma, max_iter, tol):
    weights, loc, var = _m_step(x, gamma, kinds, trials)
    trace: list[float] = []
    converged = False
    for _ in range(max_iter):
        bad = _collapsed(weights, var)
        if bad.any():
            keep = ~bad
            if not keep.any():
                raise FitError("every mixture component collapsed")
            warnings.warn(
                f"pruning {int(bad.sum())} collapsed mixture component(s); refitting with K={int(keep.sum())}",
                ComponentCollapseWarning,
                stacklevel=4,
            )
            weights = weights[keep] / weights[keep].sum()
            loc, var = loc[keep], var[keep]
            trace = []
            continue
        logp = _joint_logp(weights, kinds, trials, loc, var, x)
        lse = logsumexp(logp, axis=1)
        ll = float(lse.mean())
        if trace:
            if ll < trace[-1] - MONOTONE_SLACK:
                warnings.warn(
                    f"EM log-likelihood decreased from {trace[-1]!r} to {ll!r}",
                    EMMonotonicityWarning,
                    stacklevel=4,
                )
            if ll - trace[-1] < tol:
                trace.append(ll)
                converged = True
                break
        trace.append(ll)
        gamma = np.exp(logp - lse[:, None])
        weights, loc, var = _m_step(x, gamma, kinds, trials)
    return weights, loc, var, tuple(trace), converged


def mp_em(
    x,
    kinds,
    trials,
    k: int,
    rng: np.random.Generator,
    *,
    max_iter: int = 500,
    tol: float = 1e-8,
    restarts: int = 3,
):
    """Best-of-``restarts`` EM fit of a ``k``-component mixture of products.

    Returns ``(weights, loc, var, trace, converged, restart_logliks)`` where
    ``trace`` is the mean per-row observed-data log-likelihood by iteration.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if k < 1:
        raise InvalidArgumentError("K must be at least 1")
    if x.shape[0] == 0:
        raise InvalidArgumentError("no rows to fit")
    best = None
    finals = []
    for _ in range(max(1, restarts)):
        kk = min(k, x.shape[0])
        gamma = _kmeans_pp_init(x, kk, rng)
        res = _run_em(x, kinds, trials, gamma, max_iter, tol)
        final = res[3][-1] if res[3] else -np.inf
        finals.append(final)
        if best is None or final > best[3][-1]:
            best = res
    return (*best, tuple(finals))


def fit_mp_em(
    data: DataMatrix,
    s: Pattern,
    g: UndirectedGraph,
    k: int,
    *,
    max_iter: int = 500,
    tol: float = 1e-8,
    restarts: int = 3,
    seed=0,
) -> MPParams:
    scope, rows, block = qualifying_block(data, s, g, min_rows=1)
    kinds, trials = column_kinds(data, scope)
    rng = np.random.default_rng(seed)
    weights, loc, var, trace, converged, finals = mp_em(
        block, kinds, trials, k, rng, max_iter=max_iter, tol=tol, restarts=restarts
    )
    return MPParams(
        tuple(scope), kinds, trials, weights, loc, var, trace, len(rows), converged, finals
    )


def mp_log_weights(p: MPParams, observed, values) -> np.ndarray:
    """Normalized log component weights given observed scope values.

    ``values`` may be a single row or an ``(n, len(observed))`` block.
    """
    obs_pos = local_positions(p.scope, observed)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    with np.errstate(divide="ignore"):
        logw = np.broadcast_to(np.log(p.weights), (values.shape[0], p.k)).copy()
    if obs_pos:
        kinds = tuple(p.kinds[j] for j in obs_pos)
        trials = tuple(p.trials[j] for j in obs_pos)
        logw += component_logpdf(kinds, trials, p.loc[:, obs_pos], p.var[:, obs_pos], values).sum(axis=2)
    norm = logsumexp(logw, axis=1)
    if np.any(~np.isfinite(norm)):
        raise UnderflowError("every mixture component has zero weight for these observed values")
    return logw - norm[:, None]


def mp_component_weights(p: MPParams, observed, values) -> np.ndarray:
    return np.exp(mp_log_weights(p, observed, values)[0])


def draw_columns(p: MPParams, positions, comps, rng: np.random.Generator) -> np.ndarray:
    """Draw scope variables at ``positions`` from the chosen components."""
    out = np.empty((len(comps), len(positions)))
    for c, j in enumerate(positions):
        loc = p.loc[comps, j]
        if p.kinds[j] == "gaussian":
            out[:, c] = rng.normal(loc, np.sqrt(p.var[comps, j]))
        else:
            out[:, c] = rng.binomial(p.trials[j], loc)
    return out


def sample_components(log_w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(log_w.shape[0])
    cdf = np.cumsum(np.exp(log_w), axis=1)
    return np.minimum((cdf < u[:, None] * cdf[:, -1:]).sum(axis=1), log_w.shape[1] - 1)


def mp_impute(p: MPParams, observed, values, rng: np.random.Generator):
    """One imputation of the non-observed scope variables.

    Weights every component by its prior weight times the observed
    likelihood, samples one component, then draws each missing variable
    from that component's univariate law.

    Returns ``(missing, draws, weights)``.
    """
    observed = [int(v) for v in observed]
    obs_set = set(local_positions(p.scope, observed))
    mis_pos = [j for j in range(len(p.scope)) if j not in obs_set]
    log_w = mp_log_weights(p, observed, values)
    comp = sample_components(log_w, rng)
    draws = draw_columns(p, mis_pos, comp, rng)[0]
    return tuple(p.scope[j] for j in mis_pos), draws, np.exp(log_w[0])


def mp_nll(p: MPParams, block: np.ndarray) -> np.ndarray:
    logp = _joint_logp(p.weights, p.kinds, p.trials, p.loc, p.var, np.atleast_2d(block))
    return -logsumexp(logp, axis=1)
