"""Simulation designs: Gaussian graphical and two-component mixture data, MCAR and MAR masking."""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .dataset import ColumnSpec, DataMatrix
from .exceptions import (
    ConfigurationError,
    ExperimentError,
    FallbackWarning,
    InvalidArgumentError,
    MMGError,
    SingularCovarianceWarning,
)
from .graph import UndirectedGraph
from .graph_select import partial_corr_graph
from .imputer import fit_all, multiple_impute, pool

PRECISION_5VAR = np.array([
    [1.0, 0.6, 0.3, 0.0, 0.0],
    [0.6, 1.0, 0.4, 0.3, 0.0],
    [0.3, 0.4, 1.0, 0.0, 0.0],
    [0.0, 0.3, 0.0, 1.0, 0.9],
    [0.0, 0.0, 0.0, 0.9, 1.0],
])
PRECISION_4VAR = np.array([
    [1.0, 0.6, 0.0, 0.4],
    [0.6, 1.0, 0.3, 0.0],
    [0.0, 0.3, 1.0, 0.6],
    [0.4, 0.0, 0.6, 1.0],
])
for _m in (PRECISION_5VAR, PRECISION_4VAR):
    _m.setflags(write=False)

MAR_MAX_VARIABLES = 16


def support_graph(precision: np.ndarray, tol: float = 0.0) -> UndirectedGraph:
    """Graph with an edge wherever the off-diagonal precision entry is nonzero."""
    precision = np.asarray(precision)
    iu, ju = np.triu_indices(precision.shape[0], k=1)
    keep = np.abs(precision[iu, ju]) > tol
    return UndirectedGraph(precision.shape[0], tuple(zip(iu[keep].tolist(), ju[keep].tolist())))


def named_graph(name: str, d: int) -> UndirectedGraph:
    """Built-in working graphs.

    ``ggm5`` and ``ggm4`` are the supports of the two precision
    matrices; ``chain``, ``cycle``, ``complete``, ``empty`` are generic and
    ``bowtie`` is the five-vertex graph with edges 1-2, 1-3, 2-3, 2-4, 4-5.
    """
    if name == "ggm5":
        return support_graph(PRECISION_5VAR)
    if name == "ggm4":
        return support_graph(PRECISION_4VAR)
    if name == "chain":
        return UndirectedGraph.chain(d)
    if name == "cycle":
        edges = [(j, j + 1) for j in range(d - 1)] + ([(0, d - 1)] if d > 2 else [])
        return UndirectedGraph(d, tuple(edges))
    if name == "complete":
        return UndirectedGraph.complete(d)
    if name == "empty":
        return UndirectedGraph(d, ())
    if name == "bowtie":
        if d != 5:
            raise ConfigurationError("the bowtie graph has 5 vertices")
        return UndirectedGraph.from_edges_1based(5, [(1, 2), (1, 3), (2, 3), (2, 4), (4, 5)])
    raise ConfigurationError(f"unknown graph name {name!r}")


def _frame(x: np.ndarray) -> DataMatrix:
    x = np.asarray(x, dtype=float).reshape(-1, x.shape[1] if x.ndim == 2 else 1)
    cols = tuple(ColumnSpec(f"X{j + 1}") for j in range(x.shape[1]))
    return DataMatrix(cols, x, np.ones(x.shape, dtype=bool))


def sample_ggm(precision, mu, n: int, rng: np.random.Generator) -> DataMatrix:
    """Draw ``n`` rows from ``N(mu, inv(precision))``."""
    precision = np.asarray(precision, dtype=float)
    d = precision.shape[0]
    if precision.shape != (d, d) or not np.allclose(precision, precision.T):
        raise InvalidArgumentError("precision must be a symmetric square matrix")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (d,))
    try:
        np.linalg.cholesky(precision)
        chol = np.linalg.cholesky(np.linalg.inv(precision))
    except np.linalg.LinAlgError:
        raise InvalidArgumentError("precision is not positive definite") from None
    z = rng.standard_normal((n, d))
    return _frame(mu + z @ chol.T)


def sample_mixture2(weights, mu1, mu2, n: int, rng: np.random.Generator, d: int | None = None,
                    return_labels: bool = False):
    """Two unit-covariance Gaussian components; label 0 has probability ``weights[0]``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (2,) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
        raise InvalidArgumentError("weights must be two nonnegative numbers summing to one")
    mu1, mu2 = np.atleast_1d(np.asarray(mu1, dtype=float)), np.atleast_1d(np.asarray(mu2, dtype=float))
    d = d or max(mu1.size, mu2.size)
    means = np.vstack([np.broadcast_to(mu1, (d,)), np.broadcast_to(mu2, (d,))])
    labels = (rng.random(n) >= w[0]).astype(int)
    x = means[labels] + rng.standard_normal((n, d))
    data = _frame(x)
    return (data, labels) if return_labels else data


def mcar_missing_rate(rho: float, d: int) -> float:
    """Expected fraction of masked cells after rejecting all-missing rows."""
    return (rho - rho**d) / (1 - rho**d)


def mask_mcar(data: DataMatrix, rho: float, rng: np.random.Generator) -> DataMatrix:
    """Mask each cell with probability ``rho``; all-missing rows are redrawn."""
    if not 0 <= rho < 1:
        raise InvalidArgumentError("rho must lie in [0, 1)")
    mask = rng.random(data.values.shape) >= rho
    bad = ~mask.any(axis=1) if data.d else np.zeros(data.n, dtype=bool)
    while bad.any():
        idx = np.flatnonzero(bad)
        mask[idx] = rng.random((len(idx), data.d)) >= rho
        bad[idx] = ~mask[idx].any(axis=1)
    return DataMatrix(data.columns, data.values, data.mask & mask)


def _all_patterns(d: int) -> np.ndarray:
    bits = np.arange(1, 2**d)
    return ((bits[:, None] >> np.arange(d)) & 1).astype(float)


def mar_weights(x: np.ndarray, beta0: float = -1.0) -> np.ndarray:
    """Normalized pattern probabilities for each row of ``x``.

    Column ``b - 1`` holds pattern bitmask ``b``; the unnormalized weight is
    ``expit(beta0 + sum of the observed coordinates)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    if d > MAR_MAX_VARIABLES:
        raise InvalidArgumentError(f"MAR masking enumerates 2**d patterns; d must be <= {MAR_MAX_VARIABLES}")
    w = expit(beta0 + x @ _all_patterns(d).T)
    return w / w.sum(axis=1, keepdims=True)


def mask_mar(data: DataMatrix, beta0: float = -1.0, rng: np.random.Generator | None = None,
             chunk: int = 512) -> DataMatrix:
    """Sample one non-empty response pattern per row from :func:`mar_weights`."""
    if rng is None:
        raise InvalidArgumentError("an explicit generator is required")
    if data.d > MAR_MAX_VARIABLES:
        raise InvalidArgumentError(f"MAR masking enumerates 2**d patterns; d must be <= {MAR_MAX_VARIABLES}")
    if not data.mask.all():
        raise InvalidArgumentError("MAR masking expects fully observed input")
    u = rng.random(data.n)
    chosen = np.empty(data.n, dtype=np.int64)
    for start in range(0, data.n, chunk):
        sl = slice(start, start + chunk)
        cdf = np.cumsum(mar_weights(data.values[sl], beta0), axis=1)
        idx = (cdf < u[sl, None] * cdf[:, -1:]).sum(axis=1)
        chosen[sl] = np.minimum(idx, cdf.shape[1] - 1) + 1
    mask = ((chosen[:, None] >> np.arange(data.d)) & 1).astype(bool)
    return DataMatrix(data.columns, data.values, mask)


@dataclass
class SimConfig:
    """One simulation design; JSON keys mirror the field names.

    ``graph`` is a built-in name (see :func:`named_graph`), a list of 1-based
    edges, or ``"estimate"`` to threshold complete-case partial correlations
    at ``graph_threshold`` in every trial.
    """

    scenario: str = "ggm"
    precision: list | None = None
    mu: float | list = 1.5
    weights: tuple = (0.34, 0.66)
    mu1: float | list = 0.0
    mu2: float | list = 5.0
    d: int = 5
    mechanism: str = "mcar"
    rho: float = 0.2
    beta0: float = -1.0
    n: int = 2000
    trials: int = 100
    m: int = 20
    family: str = "gaussian"
    k: int = 2
    graph: str | list = "ggm5"
    graph_threshold: float = 0.15
    seed: int = 0
    target: int = 0
    estimand: str = "median"
    em_restarts: int = 2
    em_tol: float = 1e-6
    em_max_iter: int = 300
    allow_fallback: bool = False

    def __post_init__(self):
        if self.scenario not in ("ggm", "mixture2"):
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        if self.mechanism not in ("mcar", "mar"):
            raise ConfigurationError(f"unknown mechanism {self.mechanism!r}")
        if self.estimand not in ("mean", "median"):
            raise ConfigurationError(f"unknown estimand {self.estimand!r}")
        if self.family not in ("gaussian", "ising", "mp"):
            raise ConfigurationError(f"unknown family {self.family!r}")
        if not 0 <= self.rho < 1:
            raise ConfigurationError("rho must lie in [0, 1)")
        if self.trials < 1 or self.m < 1:
            raise ConfigurationError("trials and m must be positive")
        if self.n < self.dim + 2:
            raise ConfigurationError(f"n must be at least d + 2 = {self.dim + 2}")
        if not 0 <= self.target < self.dim:
            raise ConfigurationError(f"target {self.target} outside 0..{self.dim - 1}")

    @property
    def dim(self) -> int:
        if self.scenario == "ggm":
            return len(self.precision) if self.precision is not None else PRECISION_5VAR.shape[0]
        return self.d

    @property
    def precision_matrix(self) -> np.ndarray:
        return PRECISION_5VAR if self.precision is None else np.asarray(self.precision, dtype=float)

    def working_graph(self) -> UndirectedGraph | None:
        if self.graph == "estimate":
            return None
        if isinstance(self.graph, str):
            return named_graph(self.graph, self.dim)
        return UndirectedGraph.from_edges_1based(self.dim, [tuple(e) for e in self.graph])

    def to_dict(self) -> dict:
        out = asdict(self)
        out["weights"] = list(self.weights)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        obj = dict(obj)
        if "weights" in obj:
            obj["weights"] = tuple(obj["weights"])
        return cls(**obj)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except (TypeError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"bad config {path}: {exc}") from None


METHOD_ORDER = ("full", "cc", "mmg")


@dataclass
class ExperimentResult:
    """Per-trial estimates and their per-method aggregates.

    ``summary`` rows are ``(method, trial, estimate)``; ``aggregate`` rows are
    ``(method, mean, sd, bias)`` with ``bias`` the mean difference from the
    same trial's full-data estimate.
    """

    config: SimConfig
    summary: list = field(default_factory=list)
    aggregate: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def estimates(self, method: str) -> np.ndarray:
        return np.array([e for m, _, e in self.summary if m == method])

    def write(self, outdir: str | os.PathLike) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "trial", "estimate"])
            w.writerows([m, t, repr(e)] for m, t, e in self.summary)
        with open(outdir / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "mean", "sd", "bias"])
            w.writerows([m, repr(a), repr(s), repr(b)] for m, a, s, b in self.aggregate)
        if self.failures:
            with open(outdir / "failures.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["trial", "error"])
                w.writerows(sorted(self.failures.items()))


def _statistic(x: np.ndarray, estimand: str) -> float:
    return float(np.median(x) if estimand == "median" else np.mean(x))


def _child_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1, dtype=np.uint32)[0])


def run_trial(cfg: SimConfig, trial: int) -> dict:
    """Estimates for one trial, keyed by method."""
    rng = np.random.default_rng([cfg.seed, trial])
    if cfg.scenario == "ggm":
        full = sample_ggm(cfg.precision_matrix, cfg.mu, cfg.n, rng)
    else:
        full = sample_mixture2(cfg.weights, cfg.mu1, cfg.mu2, cfg.n, rng, d=cfg.d)
    if cfg.mechanism == "mcar":
        data = mask_mcar(full, cfg.rho, rng)
    else:
        data = mask_mar(full, cfg.beta0, rng)
    t = cfg.target
    out = {"full": _statistic(full.values[:, t], cfg.estimand)}
    cc = data.complete_rows()
    out["cc"] = _statistic(data.values[cc, t], cfg.estimand) if len(cc) else float("nan")
    g = cfg.working_graph() or partial_corr_graph(data, cfg.graph_threshold)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FallbackWarning)
        warnings.simplefilter("ignore", SingularCovarianceWarning)
        store = fit_all(g, data, cfg.family, k=cfg.k, restarts=cfg.em_restarts, tol=cfg.em_tol,
                        max_iter=cfg.em_max_iter, seed=_child_seed(cfg.seed, trial, 1),
                        allow_fallback=cfg.allow_fallback)
    run = multiple_impute(store, data, cfg.m, _child_seed(cfg.seed, trial, 2))
    out["mmg"], _ = pool([_statistic(ds.values[:, t], cfg.estimand) for ds in run.datasets])
    return out


def run_experiment(cfg: SimConfig, progress=None) -> ExperimentResult:
    """Run ``cfg.trials`` independent trials.

    Trial ``i`` draws data and masks from ``default_rng([seed, i])``, so any
    subset of trials can be reproduced on its own. Failed trials are
    recorded; more than 20% failures raise :class:`ExperimentError`.
    """
    res = ExperimentResult(cfg)
    per_trial = {}
    for trial in range(cfg.trials):
        try:
            per_trial[trial] = run_trial(cfg, trial)
        except MMGError as exc:
            res.failures[trial] = f"{type(exc).__name__}: {exc}"
        if progress is not None:
            progress(trial)
    if len(res.failures) > 0.2 * cfg.trials:
        raise ExperimentError(f"{len(res.failures)} of {cfg.trials} trials failed; first: "
                              f"{next(iter(res.failures.values()))}")
    for method in METHOD_ORDER:
        for trial, est in per_trial.items():
            res.summary.append((method, trial, est[method]))
    for method in METHOD_ORDER:
        vals = np.array([est[method] for est in per_trial.values()])
        ref = np.array([est["full"] for est in per_trial.values()])
        ok = np.isfinite(vals)
        mean = float(vals[ok].mean()) if ok.any() else float("nan")
        sd = float(vals[ok].std(ddof=1)) if ok.sum() > 1 else 0.0
        bias = float((vals[ok] - ref[ok]).mean()) if ok.any() else float("nan")
        res.aggregate.append((method, mean, sd, bias))
    return res
