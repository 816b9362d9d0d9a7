import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmgimpute.exact import DiscreteJoint, broadcast_marginal, expand_counts, from_counts
from mmgimpute.exceptions import InvalidArgumentError
from mmgimpute.graph import UndirectedGraph
from mmgimpute.patterns import psi

FULL = lambda d: 2**d - 1  # noqa: E731


def chain_markov_law(d, rng):
    """Random positive law on binary x that is Markov to the chain X1 - ... - Xd."""
    p = np.zeros(2**d)
    init = rng.dirichlet([2, 2])
    trans = rng.dirichlet([2, 2], size=(d - 1, 2))
    for k in range(2**d):
        x = [(k >> j) & 1 for j in range(d)]
        v = init[x[0]]
        for j in range(1, d):
            v *= trans[j - 1, x[j - 1], x[j]]
        p[k] = v
    return p


def monotone_law(d, rng, complete_cases):
    prob = np.zeros((2**d, 2**d))
    weights = rng.dirichlet(np.ones(d))
    for l in range(1, d + 1):
        r = (1 << l) - 1
        prob[:, r] = weights[l - 1] * (complete_cases if l == d else rng.dirichlet(np.ones(2**d)))
    return DiscreteJoint(d, prob)


seeds = st.integers(0, 2**32 - 1)


def test_rejects_bad_tables():
    with pytest.raises(InvalidArgumentError):
        DiscreteJoint(2, np.ones((4, 3)))
    with pytest.raises(InvalidArgumentError):
        DiscreteJoint(9, np.ones((2**9, 2**9)))
    with pytest.raises(InvalidArgumentError):
        DiscreteJoint(1, -np.ones((2, 2)))


def test_broadcast_marginal_sums():
    f = np.arange(8.0)
    # keep X1 only: states with x1 = 0 are 0,2,4,6
    out = broadcast_marginal(f, 3, 0b001)
    assert out[0] == 0 + 2 + 4 + 6 and out[1] == 1 + 3 + 5 + 7
    assert np.array_equal(out[::2], np.full(4, 12.0))
    assert np.array_equal(broadcast_marginal(f, 3, 0b111), f)


def test_expand_counts_round_trip():
    rng = np.random.default_rng(0)
    law = DiscreteJoint.random(3, rng)
    counts = law.to_counts(400)
    vals, mask = expand_counts(3, counts)
    assert len(vals) == counts.sum()
    assert np.all(np.isnan(vals) == ~mask)
    # rebuild counts from rows
    back = np.zeros_like(counts)
    for v, m in zip(vals, mask):
        x = int(sum(int(v[j]) << j for j in range(3) if m[j]))
        r = int(sum(1 << j for j in range(3) if m[j]))
        # missing coordinates of x are unrecoverable; only marginal counts over r match
        back[x, r] += 1
    assert np.array_equal(back.sum(axis=0), counts.sum(axis=0))
    assert from_counts(3, counts).prob.sum() == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(["chain", "cycle4", "star4", "complete3"]), st.integers(0, 3))
def test_identification_algebra(seed, gname, target):
    graphs = {
        "chain": UndirectedGraph.chain(3),
        "cycle4": UndirectedGraph.from_edges_1based(4, [(1, 2), (2, 3), (3, 4), (1, 4)]),
        "star4": UndirectedGraph.from_edges_1based(4, [(1, 2), (1, 3), (1, 4)]),
        "complete3": UndirectedGraph.complete(3),
    }
    g = graphs[gname]
    target %= g.d
    law = DiscreteJoint.random(g.d, np.random.default_rng(seed))
    out = law.mean_functionals(g, target)
    assert out["augmentation_ra"] < 1e-12
    assert out["augmentation_ipw"] < 1e-12
    assert abs(out["ra"] - out["ipw"]) < 1e-10
    assert abs(out["aipw"] - out["ra"]) < 1e-10
    completed = law.mmg_completion(g)
    done = completed.mean_functionals(g, target)
    assert done["eif_mean"] < 1e-12
    # under its own graph-restricted completion the identified mean is the true mean
    assert abs(done["aipw"] - completed.x_mean(target)) < 1e-10
    # completion leaves the observed-data law unchanged
    for r in range(1, 2**g.d):
        assert np.allclose(completed.observed_law(r), law.observed_law(r), atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(0, 2))
def test_pattern_odds_aggregate(seed, target):
    g = UndirectedGraph.chain(3)
    law = DiscreteJoint.random(3, np.random.default_rng(seed))
    for s in law.target_components(g, target):
        members = [r for r in range(1, 8) if not r >> target & 1 and psi(g, _comp(r), target).bits == s]
        total = sum(law.pattern_odds(g, r, s) for r in members)
        assert np.allclose(total, law.odds_function(g, s, target), atol=1e-12)


def _comp(r):
    from mmgimpute.patterns import Pattern

    return Pattern(3, 7 & ~r)


def test_eif_not_centered_off_model():
    # a generic law is not graph-restricted, so its EIF mean is nonzero
    law = DiscreteJoint.random(3, np.random.default_rng(3))
    assert law.mean_functionals(UndirectedGraph.chain(3), 0)["eif_mean"] > 1e-6


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 4))
def test_complete_graph_is_ccmv(seed, d):
    law = DiscreteJoint.random(d, np.random.default_rng(seed))
    g = UndirectedGraph.complete(d)
    for r in range(1, FULL(d)):
        assert np.allclose(law.mmg_extrapolation(g, r), law.ccmv_extrapolation(r), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 5))
def test_monotone_chain_is_ccmv(seed, d):
    rng = np.random.default_rng(seed)
    law = monotone_law(d, rng, chain_markov_law(d, rng))
    g = UndirectedGraph.chain(d)
    for l in range(1, d):
        r = (1 << l) - 1
        support = law.observed_law(r) > 0
        a = law.mmg_extrapolation(g, r)
        b = law.ccmv_extrapolation(r)
        assert np.max(np.abs(a - b)[support]) < 1e-10


def test_monotone_non_markov_differs():
    rng = np.random.default_rng(11)
    law = monotone_law(3, rng, rng.dirichlet(np.ones(8)))
    g = UndirectedGraph.chain(3)
    assert np.max(np.abs(law.mmg_extrapolation(g, 0b011) - law.ccmv_extrapolation(0b011))) > 1e-4


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_nested_submodel_marginalization(seed):
    g = UndirectedGraph.from_edges_1based(5, [(1, 2), (1, 3), (2, 3), (2, 4), (4, 5)])
    law = DiscreteJoint.random(5, np.random.default_rng(seed), concentration=1.0)
    a, b = 0b00111, 0b00110
    assert a | g.neighbor_mask(a) == b | g.neighbor_mask(b)
    fa = law.available_conditional(g, a)
    denom = law.marginal(fa, FULL(5) & ~b)
    ratio = np.divide(fa, denom, out=np.zeros_like(fa), where=denom > 0)
    assert np.allclose(ratio, law.available_conditional(g, b), atol=1e-10)


def test_extrapolations_are_conditionals():
    law = DiscreteJoint.random(3, np.random.default_rng(5))
    g = UndirectedGraph.chain(3)
    for r in range(1, 7):
        for f in (law.extrapolation(r), law.mmg_extrapolation(g, r), law.ccmv_extrapolation(r)):
            # summing over missing coordinates gives one wherever the observed part has mass
            tot = law.marginal(f, r)
            assert np.allclose(tot[law.observed_law(r) > 0], 1.0, atol=1e-12)
