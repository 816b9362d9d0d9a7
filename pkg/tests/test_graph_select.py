import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmgimpute.dataset import DataMatrix
from mmgimpute.exceptions import InvalidArgumentError, NoSupportError, SingularityError
from mmgimpute.graph_select import partial_corr_graph, partial_correlations
from mmgimpute.simulation import PRECISION_5VAR, sample_ggm, support_graph


def population_partial_corr(precision):
    k = np.sqrt(np.diag(precision))
    pc = -precision / np.outer(k, k)
    np.fill_diagonal(pc, 1.0)
    return pc


def test_identity_covariance_gives_empty_graph():
    # rows +-e_j have identity sample covariance up to a scalar
    x = np.vstack([np.eye(4), -np.eye(4)])
    pc = partial_correlations(x)
    assert np.allclose(pc, np.eye(4), atol=1e-12)
    assert partial_corr_graph(DataMatrix.from_arrays(x), 1e-9).edges == frozenset()


def test_matches_population_formula():
    x = sample_ggm(PRECISION_5VAR, 0.0, 200_000, np.random.default_rng(1)).values
    assert np.allclose(partial_correlations(x), population_partial_corr(PRECISION_5VAR), atol=0.01)


def test_recovers_support_from_large_sample():
    data = sample_ggm(PRECISION_5VAR, 1.5, 5000, np.random.default_rng(2))
    assert partial_corr_graph(data, 0.15).edges == support_graph(PRECISION_5VAR).edges


def test_population_margin_around_threshold():
    # every true partial correlation clears 0.15 and every absent one is exactly zero
    pc = np.abs(population_partial_corr(PRECISION_5VAR)[np.triu_indices(5, 1)])
    assert np.all((pc == 0) | (pc > 0.25))


def test_threshold_zero_is_complete_on_generic_data(rng):
    data = DataMatrix.from_arrays(rng.normal(size=(50, 4)))
    assert len(partial_corr_graph(data, 0.0).edges) == 6


def test_errors(rng):
    x = rng.normal(size=(5, 4))
    with pytest.raises(NoSupportError):
        partial_corr_graph(DataMatrix.from_arrays(x), 0.1)
    x = rng.normal(size=(20, 3))
    x[:, 2] = x[:, 0] + x[:, 1]
    with pytest.raises(SingularityError):
        partial_corr_graph(DataMatrix.from_arrays(x), 0.1)
    with pytest.raises(InvalidArgumentError):
        partial_corr_graph(DataMatrix.from_arrays(rng.normal(size=(20, 3))), -0.1)


def test_uses_complete_cases_only(rng):
    x = rng.normal(size=(40, 3))
    mask = np.ones_like(x, dtype=bool)
    mask[:30, 0] = False
    x[:30, 0] = 1e6  # would dominate if incomplete rows leaked in
    data = DataMatrix.from_arrays(x, mask)
    assert np.allclose(partial_correlations(x[30:]), partial_correlations(data.values[data.complete_rows()]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_monotone_in_threshold(seed, t1, t2):
    lo, hi = sorted([t1, t2])
    data = DataMatrix.from_arrays(np.random.default_rng(seed).normal(size=(30, 5)))
    assert partial_corr_graph(data, hi).edges <= partial_corr_graph(data, lo).edges
