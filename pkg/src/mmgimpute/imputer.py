"""Fit every required submodel and draw single or multiple imputations."""

from __future__ import annotations

import json
import os
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import ColumnSpec, DataMatrix, pattern_table, rows_at_least, write_csv
from .exceptions import FallbackWarning, InvalidArgumentError, NoSupportError
from .graph import UndirectedGraph
from .patterns import Pattern, factorization, missing_components
from .submodels import (
    FAMILIES,
    GaussianParams,
    IsingParams,
    MPParams,
    conditional_linear,
    fit_gaussian,
    fit_gaussian_marginal,
    fit_ising,
    fit_mp_em,
    gaussian_conditional,
    ising_conditional_pmf,
    ising_mle,
    mp_em,
    mp_impute,
    params_from_dict,
)
from .submodels.gaussian import psd_sqrt
from .submodels.ising import conditional_table
from .submodels.mixture import column_kinds, draw_columns, mp_log_weights, sample_components


@dataclass
class SubmodelStore:
    """Fitted submodels keyed by connected pattern.

    Keys depend on the connected pattern alone, so every response pattern
    whose missing set contains ``s`` as a component reuses ``fits[s]``.
    """

    family: str
    graph: UndirectedGraph
    fits: dict = field(default_factory=dict)
    support: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    fallback: set = field(default_factory=set)
    k: int | None = None

    def __contains__(self, s: Pattern) -> bool:
        return s in self.fits

    def __len__(self) -> int:
        return len(self.fits)

    def keys(self) -> list[Pattern]:
        return sorted(self.fits, key=Pattern.sort_key)

    def get(self, s: Pattern):
        try:
            return self.fits[s]
        except KeyError:
            reason = self.failures.get(s, "never fitted")
            raise NoSupportError(f"no submodel for connected pattern {s}: {reason}", [str(s)]) from None

    def submodel_for(self, r: Pattern, s: Pattern):
        """Submodel imputing component ``s`` of response pattern ``r``."""
        if s not in missing_components(self.graph, r):
            raise InvalidArgumentError(f"{s} is not a missing component of {r}")
        return self.get(s)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "k": self.k,
            "graph": self.graph.to_dict(),
            "fits": {str(s): self.fits[s].to_dict() for s in self.keys()},
            "support": {str(s): int(n) for s, n in sorted(self.support.items(), key=lambda kv: kv[0].sort_key())},
            "failures": {str(s): msg for s, msg in sorted(self.failures.items(), key=lambda kv: kv[0].sort_key())},
            "fallback": sorted(str(s) for s in self.fallback),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SubmodelStore":
        return cls(
            family=obj["family"],
            graph=UndirectedGraph.from_dict(obj["graph"]),
            fits={Pattern.from_str(k): params_from_dict(v) for k, v in obj["fits"].items()},
            support={Pattern.from_str(k): int(v) for k, v in obj.get("support", {}).items()},
            failures={Pattern.from_str(k): v for k, v in obj.get("failures", {}).items()},
            fallback={Pattern.from_str(k) for k in obj.get("fallback", [])},
            k=obj.get("k"),
        )

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, allow_nan=False)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SubmodelStore":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def required_components(g: UndirectedGraph, data: DataMatrix) -> list[Pattern]:
    """Distinct connected patterns across the missing sets of all rows."""
    seen = set()
    for r in pattern_table(data).patterns():
        seen.update(missing_components(g, r))
    return sorted(seen, key=Pattern.sort_key)


def _fit_one(family, data, s, g, opts, seed):
    if family == "gaussian":
        return fit_gaussian(data, s, g)
    if family == "ising":
        return fit_ising(data, s, g, **opts)
    return fit_mp_em(data, s, g, opts["k"], max_iter=opts["max_iter"], tol=opts["tol"],
                     restarts=opts["restarts"], seed=[seed, s.bits])


def _fit_marginal(family, data, s, opts, seed):
    if family == "gaussian":
        return fit_gaussian_marginal(data, s)
    rows = rows_at_least(data, s)
    scope = s.indices
    if len(rows) == 0:
        raise NoSupportError(f"connected pattern {s}: no rows observe it", [str(s)])
    block = data.values[np.ix_(rows, scope)]
    if family == "ising":
        f, c = ising_mle(block, **opts)
        return IsingParams.from_natural(scope, f, c, n_rows=len(rows))
    kinds, trials = column_kinds(data, scope)
    w, loc, var, trace, conv, finals = mp_em(
        block, kinds, trials, opts["k"], np.random.default_rng([seed, s.bits]),
        max_iter=opts["max_iter"], tol=opts["tol"], restarts=opts["restarts"],
    )
    return MPParams(tuple(scope), kinds, trials, w, loc, var, trace, len(rows), conv, finals)


def fit_all(
    g: UndirectedGraph,
    data: DataMatrix,
    family: str = "gaussian",
    *,
    k: int = 2,
    max_iter: int | None = None,
    tol: float | None = None,
    restarts: int = 3,
    step: float = 1.0,
    seed: int = 0,
    allow_fallback: bool = False,
) -> SubmodelStore:
    """Fit one submodel per connected pattern occurring in ``data``.

    Each submodel is fitted on the rows observing its connected pattern and
    that pattern's neighbors. Connected patterns without enough such rows are
    collected and reported together in a :class:`NoSupportError`, unless
    ``allow_fallback`` is set. The fallback fits the marginal law of ``s``
    on rows observing ``s`` alone and ignores the neighbors entirely.
    """
    if family not in FAMILIES:
        raise InvalidArgumentError(f"family must be one of {FAMILIES}, got {family!r}")
    if g.d != data.d:
        raise InvalidArgumentError(f"graph has {g.d} vertices but data has {data.d} columns")
    if family == "ising":
        opts = {"max_iter": max_iter or 200, "tol": tol or 1e-9, "step": step}
    elif family == "mp":
        opts = {"k": k, "max_iter": max_iter or 500, "tol": tol or 1e-8, "restarts": restarts}
    else:
        opts = {}
    store = SubmodelStore(family, g, k=k if family == "mp" else None)
    for s in required_components(g, data):
        required = Pattern(g.d, s.bits | g.neighbor_mask(s.bits))
        store.support[s] = len(rows_at_least(data, required))
        try:
            store.fits[s] = _fit_one(family, data, s, g, opts, seed)
        except NoSupportError as exc:
            if not allow_fallback:
                store.failures[s] = str(exc)
                continue
            try:
                store.fits[s] = _fit_marginal(family, data, s, opts, seed)
            except NoSupportError as exc2:
                store.failures[s] = str(exc2)
                continue
            store.fallback.add(s)
            warnings.warn(f"connected pattern {s} fitted without its neighbors (no-support fallback)",
                          FallbackWarning, stacklevel=2)
    if store.failures:
        names = [str(s) for s in sorted(store.failures, key=Pattern.sort_key)]
        raise NoSupportError(f"no support for connected pattern(s): {', '.join(names)}", names)
    return store


def _conditioning(params, s: Pattern) -> list[int]:
    return [j for j in params.scope if j not in s]


def impute_row(store: SubmodelStore, values, mask, rng: np.random.Generator, draw_log=None) -> np.ndarray:
    """Complete one row by drawing each missing component independently.

    Each connected component of the missing set is drawn from its submodel's
    conditional law given the component's observed neighbors. When
    ``draw_log`` is a list, ``(s, conditioning_indices)`` is appended for
    every draw.
    """
    values = np.array(values, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    r = Pattern.from_mask(mask)
    for s, _ in factorization(store.graph, r):
        p = store.get(s)
        obs = _conditioning(p, s)
        x_obs = values[obs]
        if isinstance(p, GaussianParams):
            mis, mean, cov = gaussian_conditional(p, obs, x_obs)
            draw = mean + psd_sqrt(cov) @ rng.standard_normal(len(mis))
        elif isinstance(p, IsingParams):
            mis, states, probs = ising_conditional_pmf(p, obs, x_obs)
            idx = min(int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right")),
                      len(probs) - 1)
            draw = states[idx]
        else:
            mis, draw, _ = mp_impute(p, obs, x_obs, rng)
        values[list(mis)] = draw
        if draw_log is not None:
            draw_log.append((s, tuple(obs)))
    return values


def _draw_block(p, s: Pattern, x_obs: np.ndarray, rng: np.random.Generator):
    obs = _conditioning(p, s)
    if isinstance(p, GaussianParams):
        mis, intercept, coef, cov = conditional_linear(p, obs)
        z = rng.standard_normal((x_obs.shape[0], len(mis)))
        return mis, intercept + x_obs @ coef.T + z @ psd_sqrt(cov).T
    if isinstance(p, IsingParams):
        mis, states, base, cross = conditional_table(p, obs)
        logits = base + (x_obs @ cross.T) @ states.T
        logits -= logits.max(axis=1, keepdims=True)
        cdf = np.cumsum(np.exp(logits), axis=1)
        u = rng.random(x_obs.shape[0])[:, None] * cdf[:, -1:]
        idx = np.minimum((cdf <= u).sum(axis=1), len(states) - 1)
        return mis, states[idx]
    obs_set = {p.scope.index(j) for j in obs}
    mis_pos = [j for j in range(len(p.scope)) if j not in obs_set]
    log_w = mp_log_weights(p, obs, x_obs)
    comps = sample_components(log_w, rng)
    return tuple(p.scope[j] for j in mis_pos), draw_columns(p, mis_pos, comps, rng)


def impute_dataset(store: SubmodelStore, data: DataMatrix, rng: np.random.Generator) -> np.ndarray:
    """One completed copy of ``data.values``, drawn component by component.

    Rows sharing a connected pattern are drawn together; keys are visited in
    sorted order and rows in ascending order, so output depends only on the
    generator state.
    """
    out = np.array(data.values, dtype=float)
    groups = defaultdict(list)
    for r, rows in pattern_table(data).items():
        for s in missing_components(store.graph, r):
            groups[s].append(rows)
    for s in sorted(groups, key=Pattern.sort_key):
        rows = np.sort(np.concatenate(groups[s]))
        p = store.get(s)
        obs = _conditioning(p, s)
        mis, block = _draw_block(p, s, data.values[np.ix_(rows, obs)], rng)
        out[np.ix_(rows, list(mis))] = block
    return out


@dataclass(frozen=True, eq=False)
class ImputationRun:
    datasets: list
    seed: int
    imputed: np.ndarray

    @property
    def m(self) -> int:
        return len(self.datasets)


def multiple_impute(store: SubmodelStore, data: DataMatrix, m: int, seed: int) -> ImputationRun:
    """``m`` completed datasets; dataset ``t`` uses the stream ``default_rng([seed, t])``."""
    if m < 1:
        raise InvalidArgumentError("m must be at least 1")
    full = np.ones_like(data.mask)
    datasets = []
    for t in range(m):
        rng = np.random.default_rng([seed, t])
        values = impute_dataset(store, data, rng)
        datasets.append(DataMatrix(data.columns, values, full))
    imputed = ~data.mask
    imputed.setflags(write=False)
    return ImputationRun(datasets, seed, imputed)


def pool(estimates, variances=None):
    """Combine per-dataset estimates.

    Returns the mean of ``estimates`` and, when within-imputation
    ``variances`` are given, Rubin's total variance
    ``mean(variances) + (1 + 1/m) * between``.
    """
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise InvalidArgumentError("nothing to pool")
    point = float(est.mean())
    if variances is None:
        return point, None
    within = np.asarray(variances, dtype=float)
    if within.shape != est.shape:
        raise InvalidArgumentError("variances must match estimates")
    m = est.size
    between = float(est.var(ddof=1)) if m > 1 else 0.0
    return point, float(within.mean() + (1 + 1 / m) * between)


def write_run(run: ImputationRun, store: SubmodelStore, outdir: str | os.PathLike) -> list[Path]:
    """Write ``imp_001.csv ...``, ``provenance.csv`` and ``store.json``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(run.m)))
    paths = []
    for t, ds in enumerate(run.datasets, start=1):
        path = outdir / f"imp_{t:0{width}d}.csv"
        write_csv(ds, path)
        paths.append(path)
    cols = tuple(ColumnSpec(c.name, "binary") for c in run.datasets[0].columns)
    prov = DataMatrix(cols, run.imputed.astype(float), np.ones_like(run.imputed))
    write_csv(prov, outdir / "provenance.csv")
    store.save(outdir / "store.json")
    return paths + [outdir / "provenance.csv", outdir / "store.json"]
