"""Exact computations on a fully specified binary law ``p(x, r)``.

Every quantity here is an exact sum over the ``2**d`` value states and
``2**d`` response patterns, so it can serve as ground truth for the sample
based fitting code. Functions of ``x`` are returned as length-``2**d``
vectors over value states (state ``k`` has ``x_j = (k >> j) & 1``), already
broadcast over the variables they do not depend on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .graph import UndirectedGraph
from .patterns import Pattern
from .submodels.ising import binary_states

MAX_EXACT = 8


def broadcast_marginal(f: np.ndarray, d: int, keep: int) -> np.ndarray:
    """Sum ``f`` over variables outside the bitmask ``keep`` and broadcast back."""
    t = f.reshape((2,) * d)
    # reshape puts variable j on axis d - 1 - j
    axes = tuple(d - 1 - j for j in range(d) if not keep >> j & 1)
    if not axes:
        return f.copy()
    return np.broadcast_to(t.sum(axis=axes, keepdims=True), t.shape).reshape(-1).copy()


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Probability table ``prob[x_state, r_bits]`` summing to one."""

    d: int
    prob: np.ndarray

    def __post_init__(self):
        if not 1 <= self.d <= MAX_EXACT:
            raise InvalidArgumentError(f"exact laws support 1..{MAX_EXACT} variables")
        prob = np.asarray(self.prob, dtype=float)
        if prob.shape != (2**self.d, 2**self.d) or np.any(prob < 0):
            raise InvalidArgumentError("prob must be a nonnegative (2**d, 2**d) table")
        prob = prob / prob.sum()
        prob.setflags(write=False)
        object.__setattr__(self, "prob", prob)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, patterns=None, concentration: float = 2.0):
        """Random positive law supported on ``patterns`` (default: all but all-missing)."""
        if patterns is None:
            patterns = range(1, 2**d)
        cols = sorted({Pattern.from_str(p).bits if isinstance(p, str) else int(getattr(p, "bits", p))
                       for p in patterns})
        prob = np.zeros((2**d, 2**d))
        prob[:, cols] = rng.dirichlet(np.full(2**d * len(cols), concentration)).reshape(2**d, len(cols))
        return cls(d, prob)

    @property
    def states(self) -> np.ndarray:
        return binary_states(self.d)

    @property
    def patterns(self) -> list[Pattern]:
        """Response patterns with positive probability."""
        return [Pattern(self.d, int(b)) for b in np.flatnonzero(self.prob.sum(axis=0) > 0)]

    def marginal(self, f: np.ndarray, keep: int) -> np.ndarray:
        return broadcast_marginal(f, self.d, keep)

    def mass_at_least(self, required: int) -> np.ndarray:
        """``P(x, R >= required)`` as a function of ``x``."""
        cols = [r for r in range(2**self.d) if r & required == required]
        return self.prob[:, cols].sum(axis=1)

    def mass_where(self, pred) -> np.ndarray:
        cols = [r for r in range(2**self.d) if pred(r)]
        return self.prob[:, cols].sum(axis=1)

    def x_mean(self, target: int) -> float:
        return float(self.prob.sum(axis=1) @ self.states[:, target])

    def expect(self, values: np.ndarray) -> float:
        """Expectation of ``values[x_state, r_bits]``."""
        return float(np.sum(self.prob * values))

    # extrapolation laws

    def observed_law(self, r: int) -> np.ndarray:
        """``P(x_r, R = r)`` broadcast over the missing coordinates."""
        return self.marginal(self.prob[:, r], r)

    def extrapolation(self, r: int) -> np.ndarray:
        """True ``p(x_missing | x_r, R = r)``."""
        return _ratio(self.prob[:, r], self.observed_law(r))

    def available_conditional(self, g: UndirectedGraph, subset: int) -> np.ndarray:
        """``p(x_A | x_N(A), R >= A + N(A))`` for the variable set ``A = subset``."""
        nb = g.neighbor_mask(subset)
        f = self.mass_at_least(subset | nb)
        return _ratio(self.marginal(f, subset | nb), self.marginal(f, nb))

    def mmg_extrapolation(self, g: UndirectedGraph, r: int) -> np.ndarray:
        """Product over missing components of the available-case conditionals."""
        out = np.ones(2**self.d)
        missing = (2**self.d - 1) & ~r
        for c in g.components_of_mask(missing):
            out = out * self.available_conditional(g, c)
        return out

    def ccmv_extrapolation(self, r: int) -> np.ndarray:
        full = self.prob[:, 2**self.d - 1]
        return _ratio(full, self.marginal(full, r))

    def mmg_completion(self, g: UndirectedGraph) -> "DiscreteJoint":
        """Law sharing this law's observed data but with graph-restricted extrapolations."""
        prob = np.zeros_like(self.prob)
        for r in range(2**self.d):
            if self.prob[:, r].sum() > 0:
                prob[:, r] = self.observed_law(r) * self.mmg_extrapolation(g, r)
        return DiscreteJoint(self.d, prob)

    # mean-functional nuisances

    def target_component_indicator(self, g: UndirectedGraph, s: int, target: int) -> np.ndarray:
        """Indicator over patterns: target missing and its missing component equals ``s``."""
        full = 2**self.d - 1
        out = np.zeros(2**self.d)
        for r in range(2**self.d):
            if r >> target & 1:
                continue
            for c in g.components_of_mask(full & ~r):
                if c >> target & 1:
                    out[r] = float(c == s)
        return out

    def at_least_indicator(self, required: int) -> np.ndarray:
        return np.array([float(r & required == required) for r in range(2**self.d)])

    def target_components(self, g: UndirectedGraph, target: int) -> list[int]:
        full = 2**self.d - 1
        seen = set()
        for r in range(2**self.d):
            if r >> target & 1 or self.prob[:, r].sum() == 0:
                continue
            seen.update(c for c in g.components_of_mask(full & ~r) if c >> target & 1)
        return sorted(seen, key=lambda c: (bin(c).count("1"), c))

    def regression_function(self, g: UndirectedGraph, s: int, target: int) -> np.ndarray:
        """``E[X_target | x_N(s), R >= s + N(s)]``."""
        nb = g.neighbor_mask(s)
        f = self.mass_at_least(s | nb)
        xt = self.states[:, target]
        return _ratio(self.marginal(f * xt, nb), self.marginal(f, nb))

    def odds_function(self, g: UndirectedGraph, s: int, target: int) -> np.ndarray:
        """Odds of the target-missing group for ``s`` against ``R >= s + N(s)``, given ``x_N(s)``."""
        nb = g.neighbor_mask(s)
        ind = self.target_component_indicator(g, s, target)
        num = self.marginal(self.prob @ ind, nb)
        den = self.marginal(self.mass_at_least(s | nb), nb)
        return _ratio(num, den)

    def pattern_odds(self, g: UndirectedGraph, r: int, s: int) -> np.ndarray:
        """Odds of the single pattern ``r`` against ``R >= s + N(s)``, given ``x_N(s)``."""
        nb = g.neighbor_mask(s)
        return _ratio(self.marginal(self.prob[:, r], nb), self.marginal(self.mass_at_least(s | nb), nb))

    def mean_functionals(self, g: UndirectedGraph, target: int) -> dict:
        """Population RA, IPW and AIPW values together with the mean-zero checks."""
        xt = self.states[:, target][:, None]
        obs_ind = np.array([float(r >> target & 1) for r in range(2**self.d)])[None, :]
        base = self.expect(xt * obs_ind)
        ra = ipw = aipw = base
        aug_ra = aug_ipw = eif = 0.0
        for s in self.target_components(g, target):
            m = self.regression_function(g, s, target)[:, None]
            o = self.odds_function(g, s, target)[:, None]
            a = self.target_component_indicator(g, s, target)[None, :]
            b = self.at_least_indicator(s | g.neighbor_mask(s))[None, :]
            mu_s = self.expect(xt * a)
            leif = xt * o * b + m * (a - b * o)
            ra += self.expect(m * a)
            ipw += self.expect(xt * o * b)
            aipw += self.expect(leif)
            aug_ra = max(aug_ra, abs(self.expect((xt - m) * o * b)))
            aug_ipw = max(aug_ipw, abs(self.expect(m * (a - o * b))))
            eif = max(eif, abs(self.expect(leif) - mu_s))
        return {"ra": ra, "ipw": ipw, "aipw": aipw, "augmentation_ra": aug_ra,
                "augmentation_ipw": aug_ipw, "eif_mean": eif}

    def to_counts(self, scale: int) -> np.ndarray:
        """Integer cell counts ``round(scale * prob)``."""
        return np.rint(self.prob * scale).astype(int)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


def from_counts(d: int, counts: np.ndarray) -> DiscreteJoint:
    return DiscreteJoint(d, np.asarray(counts, dtype=float))


def expand_counts(d: int, counts: np.ndarray):
    """Rows ``(values, mask)`` realizing integer cell counts ``counts[x_state, r_bits]``."""
    states = binary_states(d)
    weights = 1 << np.arange(d)
    rows, masks = [], []
    for x, r in zip(*np.nonzero(counts)):
        k = int(counts[x, r])
        mask = (r & weights) > 0
        vals = np.where(mask, states[x], np.nan)
        rows.append(np.repeat(vals[None, :], k, axis=0))
        masks.append(np.repeat(mask[None, :], k, axis=0))
    return np.vstack(rows), np.vstack(masks)
