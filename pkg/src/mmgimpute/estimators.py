"""Estimators of the marginal mean of one target column.

Rows with the target observed enter through their raw values. Each row with
the target missing is assigned the connected component ``s`` of its missing
set that holds the target; its contribution is recovered from the rows
observing ``s`` together with the boundary of ``s``, either by regression
(RA), by reweighting with a pattern odds model (IPW) or by both (AIPW).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.special import expit

from .dataset import DataMatrix, pattern_table, rows_at_least
from .exceptions import (
    BootstrapError,
    ConfigurationError,
    InvalidArgumentError,
    NoSupportError,
    SeparationWarning,
    SingularityError,
)
from .graph import UndirectedGraph
from .patterns import Pattern, boundary, psi

PROB_CLIP = 1e-6
METHODS = ("cc", "ra", "ipw", "aipw")


def _design(x_nb, k: int) -> np.ndarray:
    x_nb = np.asarray(x_nb, dtype=float)
    if x_nb.ndim == 2:
        return x_nb
    return x_nb.reshape(-1, k) if k else np.zeros((x_nb.shape[0] if x_nb.ndim else 1, 0))


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Linear model of the target on the boundary of ``s``."""

    s: Pattern
    target: int
    neighbors: tuple[int, ...]
    intercept: float
    slopes: np.ndarray
    n_rows: int = 0

    def predict(self, x_nb: np.ndarray) -> np.ndarray:
        x_nb = _design(x_nb, len(self.neighbors))
        return self.intercept + x_nb @ self.slopes


@dataclass(frozen=True, eq=False)
class OddsModel:
    """Logistic model for target-missing membership versus full boundary observation."""

    s: Pattern
    target: int
    neighbors: tuple[int, ...]
    intercept: float
    slopes: np.ndarray
    n_missing: int = 0
    n_observed: int = 0
    separated: bool = False

    def prob(self, x_nb: np.ndarray) -> np.ndarray:
        x_nb = _design(x_nb, len(self.neighbors))
        return np.clip(expit(self.intercept + x_nb @ self.slopes), PROB_CLIP, 1 - PROB_CLIP)

    def odds(self, x_nb: np.ndarray) -> np.ndarray:
        p = self.prob(x_nb)
        return p / (1 - p)


@dataclass
class EstimatorReport:
    method: str
    point: float
    ci: tuple | None = None
    n_used: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ci is not None and not self.ci[0] <= self.point <= self.ci[1]:
            raise InvalidArgumentError(f"interval {self.ci[:2]} excludes point {self.point}")

    def to_dict(self) -> dict:
        ci = None
        if self.ci is not None:
            ci = {"lo": self.ci[0], "hi": self.ci[1], "level": self.ci[2]}
        return {
            "method": self.method,
            "point": self.point,
            "ci": ci,
            "n_used": self.n_used,
            "warnings": list(self.warnings),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False)


def _check_target(data: DataMatrix, g: UndirectedGraph, target: int) -> None:
    if g.d != data.d:
        raise InvalidArgumentError(f"graph has {g.d} vertices but data has {data.d} columns")
    if not 0 <= target < data.d:
        raise InvalidArgumentError(f"target {target} outside 0..{data.d - 1}")


def target_groups(data: DataMatrix, g: UndirectedGraph, target: int):
    """Rows with the target observed, and target-missing rows grouped by component.

    Returns ``(observed_rows, groups)`` where ``groups`` maps each connected
    pattern ``s`` holding the target to the rows whose missing set has ``s``
    as the component containing the target.
    """
    observed = []
    groups: dict[Pattern, list] = {}
    for r, rows in pattern_table(data).items():
        if target in r:
            observed.append(rows)
        else:
            groups.setdefault(psi(g, r.complement(), target), []).append(rows)
    obs = np.sort(np.concatenate(observed)) if observed else np.zeros(0, dtype=int)
    out = {s: np.sort(np.concatenate(v)) for s, v in sorted(groups.items(), key=lambda kv: kv[0].sort_key())}
    return obs, out


def _support_rows(data: DataMatrix, g: UndirectedGraph, s: Pattern) -> np.ndarray:
    return rows_at_least(data, Pattern(g.d, s.bits | g.neighbor_mask(s.bits)))


def fit_regression(data: DataMatrix, g: UndirectedGraph, s: Pattern, target: int) -> RegressionModel:
    """Least squares of the target on the boundary of ``s``.

    Uses rows observing ``s`` and its boundary, which is where the
    conditional mean of the target given the boundary is identified.
    """
    _check_target(data, g, target)
    if target not in s:
        raise InvalidArgumentError(f"target {target} is not in {s}")
    nb = boundary(g, s).indices
    rows = _support_rows(data, g, s)
    if len(rows) < len(nb) + 2:
        raise NoSupportError(f"regression for {s}: {len(rows)} qualifying rows, need {len(nb) + 2}", [str(s)])
    design = np.column_stack([np.ones(len(rows)), data.values[np.ix_(rows, nb)]])
    y = data.values[rows, target]
    coef, _, rank, _ = linalg.lstsq(design, y)
    if rank < design.shape[1]:
        raise SingularityError(f"regression design for {s} is rank deficient")
    return RegressionModel(s, target, nb, float(coef[0]), coef[1:], len(rows))


def _logistic_fit(design: np.ndarray, y: np.ndarray, max_iter: int = 100):
    """Newton ascent on the logistic log-likelihood; returns ``(beta, converged)``."""
    n, p = design.shape

    def loglik(beta):
        eta = design @ beta
        return float(y @ eta - np.logaddexp(0.0, eta).sum())

    beta = np.zeros(p)
    ybar = np.clip(y.mean(), PROB_CLIP, 1 - PROB_CLIP)
    beta[0] = np.log(ybar / (1 - ybar))
    ll = loglik(beta)
    for _ in range(max_iter):
        prob = expit(design @ beta)
        grad = design.T @ (y - prob)
        if np.max(np.abs(grad)) < 1e-9 * n:
            return beta, True
        hess = (design * (prob * (1 - prob))[:, None]).T @ design
        try:
            step = np.linalg.solve(hess + 1e-12 * np.eye(p), grad)
        except np.linalg.LinAlgError:
            step = grad / n
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = loglik(cand)
            if ll_new >= ll or t < 1e-10:
                break
            t /= 2
        if ll_new - ll < 1e-14 * n and np.max(np.abs(t * step)) < 1e-12:
            return beta, False
        beta, ll = cand, ll_new
    return beta, False


def odds_from_groups(
    data: DataMatrix,
    s: Pattern,
    target: int,
    neighbors,
    rows_missing: np.ndarray,
    rows_observed: np.ndarray,
) -> OddsModel:
    """Logistic odds of membership in ``rows_missing`` against ``rows_observed``.

    The two row groups must be disjoint; both must be nonempty.
    """
    rows_missing = np.asarray(rows_missing, dtype=int)
    rows_observed = np.asarray(rows_observed, dtype=int)
    if len(rows_missing) == 0 or len(rows_observed) == 0:
        raise NoSupportError(
            f"odds for {s}: {len(rows_missing)} target-missing rows, {len(rows_observed)} reference rows",
            [str(s)],
        )
    if np.intersect1d(rows_missing, rows_observed).size:
        raise AssertionError(f"odds groups for {s} overlap")
    neighbors = tuple(neighbors)
    rows = np.concatenate([rows_missing, rows_observed])
    y = np.concatenate([np.ones(len(rows_missing)), np.zeros(len(rows_observed))])
    design = np.column_stack([np.ones(len(rows)), data.values[np.ix_(rows, list(neighbors))]])
    beta, converged = _logistic_fit(design, y)
    eta = design @ beta
    separated = not converged or bool(np.max(np.abs(eta)) > -np.log(PROB_CLIP))
    if separated:
        warnings.warn(f"odds model for {s} is (quasi-)separated; probabilities clipped at {PROB_CLIP:g}",
                      SeparationWarning, stacklevel=3)
    return OddsModel(s, target, neighbors, float(beta[0]), beta[1:], len(rows_missing), len(rows_observed), separated)


def fit_odds(data: DataMatrix, g: UndirectedGraph, s: Pattern, target: int) -> OddsModel:
    """Odds of the target-missing group for ``s`` relative to rows observing ``s`` and its boundary."""
    _check_target(data, g, target)
    if target not in s:
        raise InvalidArgumentError(f"target {target} is not in {s}")
    _, groups = target_groups(data, g, target)
    rows_a = groups.get(s, np.zeros(0, dtype=int))
    return odds_from_groups(data, s, target, boundary(g, s).indices, rows_a, _support_rows(data, g, s))


def fit_nuisances(data: DataMatrix, g: UndirectedGraph, target: int, regression=True, odds=True):
    """Regression and odds models for every component occurring in ``data``."""
    _, groups = target_groups(data, g, target)
    regs = {s: fit_regression(data, g, s, target) for s in groups} if regression else None
    ods = {s: fit_odds(data, g, s, target) for s in groups} if odds else None
    return regs, ods


def estimate_cc(data: DataMatrix, target: int) -> EstimatorReport:
    """Mean of the target over complete rows."""
    rows = data.complete_rows()
    if len(rows) == 0:
        raise NoSupportError("no complete cases")
    return EstimatorReport("cc", float(data.values[rows, target].mean()), n_used={"complete": int(len(rows))})


def _lookup(models: dict | None, s: Pattern, kind: str):
    if models is None or s not in models:
        raise ConfigurationError(f"no {kind} model supplied for connected pattern {s}")
    return models[s]


def _terms(data, g, target, regs, odds, use_reg, use_odds):
    """Per-component contributions, each summed over rows (not yet divided by n)."""
    _check_target(data, g, target)
    obs, groups = target_groups(data, g, target)
    total = float(data.values[obs, target].sum())
    n_used = {"n": data.n, "observed_target": int(len(obs))}
    diag = {}
    for s, rows_a in groups.items():
        info = {"missing_rows": int(len(rows_a))}
        nb = list(boundary(g, s).indices)
        contrib = 0.0
        if use_odds:
            om = _lookup(odds, s, "odds")
            rows_b = _support_rows(data, g, s)
            w = om.odds(data.values[np.ix_(rows_b, nb)])
            contrib += float(data.values[rows_b, target] @ w)
            info.update(support_rows=int(len(rows_b)), odds_min=float(w.min(initial=np.inf)),
                        odds_max=float(w.max(initial=-np.inf)))
        if use_reg:
            rm = _lookup(regs, s, "regression")
            contrib += float(rm.predict(data.values[np.ix_(rows_a, nb)]).sum())
            if use_odds:
                contrib -= float(rm.predict(data.values[np.ix_(rows_b, nb)]) @ w)
        info["contribution"] = contrib / data.n
        diag[str(s)] = info
        total += contrib
    return total / data.n, n_used, diag


def estimate_ra(data, g, target, regs) -> EstimatorReport:
    point, n_used, diag = _terms(data, g, target, regs, None, True, False)
    return EstimatorReport("ra", point, n_used=n_used, diagnostics=diag)


def estimate_ipw(data, g, target, odds) -> EstimatorReport:
    point, n_used, diag = _terms(data, g, target, None, odds, False, True)
    return EstimatorReport("ipw", point, n_used=n_used, diagnostics=diag)


def estimate_aipw(data, g, target, regs, odds) -> EstimatorReport:
    """Augmented estimator; consistent if either nuisance family is correct."""
    point, n_used, diag = _terms(data, g, target, regs, odds, True, True)
    return EstimatorReport("aipw", point, n_used=n_used, diagnostics=diag)


def make_estimator(g: UndirectedGraph, target: int, method: str) -> Callable[[DataMatrix], EstimatorReport]:
    """Closure fitting nuisances on its input and returning the point estimate."""
    if method not in METHODS:
        raise InvalidArgumentError(f"method must be one of {METHODS}, got {method!r}")

    def est(data: DataMatrix) -> EstimatorReport:
        if method == "cc":
            return estimate_cc(data, target)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SeparationWarning)
            regs, odds = fit_nuisances(data, g, target, regression=method != "ipw", odds=method != "ra")
        if method == "ra":
            rep = estimate_ra(data, g, target, regs)
        elif method == "ipw":
            rep = estimate_ipw(data, g, target, odds)
        else:
            rep = estimate_aipw(data, g, target, regs, odds)
        rep.warnings.extend(str(w.message) for w in caught)
        return rep

    return est


def bootstrap(est, data: DataMatrix, B: int, level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Percentile interval from ``B`` row resamples.

    Replicate ``b`` draws its rows from ``default_rng([seed, b])``. Replicates
    that fail for lack of support or singular designs are skipped; more than
    10% failures raise :class:`BootstrapError`.
    """
    if B < 2:
        raise InvalidArgumentError("B must be at least 2")
    if not 0 < level < 1:
        raise InvalidArgumentError("level must lie in (0, 1)")
    values, failures = [], 0
    for b in range(B):
        idx = np.random.default_rng([seed, b]).integers(0, data.n, data.n)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SeparationWarning)
                values.append(est(data.subset(idx)).point)
        except (NoSupportError, SingularityError):
            failures += 1
    if failures > 0.1 * B:
        raise BootstrapError(f"{failures} of {B} bootstrap replicates failed")
    alpha = 1 - level
    lo, hi = np.quantile(values, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


def with_interval(report: EstimatorReport, lo: float, hi: float, level: float) -> EstimatorReport:
    """Attach an interval, widened if needed so that it contains the point estimate."""
    return replace(report, ci=(min(lo, report.point), max(hi, report.point), level))
