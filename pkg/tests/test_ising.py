import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmgimpute.dataset import ColumnSpec, DataMatrix
from mmgimpute.exceptions import ColumnTypeError, ConvergenceError, DegenerateFitError
from mmgimpute.graph import UndirectedGraph
from mmgimpute.patterns import Pattern
from mmgimpute.submodels import (
    IsingParams,
    fit_ising,
    ising_conditional_pmf,
    ising_loglik,
    ising_loglik_grad,
    ising_mle,
)
from mmgimpute.submodels.ising import binary_states


def random_params(p, rng, scale=1.0):
    field = rng.normal(scale=scale, size=p)
    c = rng.normal(scale=scale, size=(p, p))
    c = np.triu(c, 1)
    return field, c + c.T


def binary_data(x):
    return DataMatrix.from_arrays(x, columns=[ColumnSpec(f"b{j}", "binary") for j in range(x.shape[1])])


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_gradient_matches_finite_differences(p, rng):
    field, coupling = random_params(p, rng)
    x = rng.integers(0, 2, size=(50, p)).astype(float)
    gf, gc = ising_loglik_grad(field, coupling, x)
    h = 1e-5
    fd_f = np.zeros(p)
    for j in range(p):
        e = np.zeros(p)
        e[j] = h
        fd_f[j] = (ising_loglik(field + e, coupling, x) - ising_loglik(field - e, coupling, x)) / (2 * h)
    fd_c = np.zeros((p, p))
    for u in range(p):
        for v in range(u + 1, p):
            e = np.zeros((p, p))
            e[u, v] = e[v, u] = h
            fd_c[u, v] = fd_c[v, u] = (ising_loglik(field, coupling + e, x)
                                       - ising_loglik(field, coupling - e, x)) / (2 * h)
    analytic = np.concatenate([gf, gc[np.triu_indices(p, 1)]])
    numeric = np.concatenate([fd_f, fd_c[np.triu_indices(p, 1)]])
    assert np.max(np.abs(analytic - numeric)) / np.max(np.abs(numeric)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1), st.data())
def test_conditional_pmf_normalized(p, seed, data):
    rng = np.random.default_rng(seed)
    params = IsingParams.from_natural(range(p), *random_params(p, rng, scale=2.0))
    obs = data.draw(st.lists(st.sampled_from(range(p)), unique=True))
    vals = rng.integers(0, 2, size=len(obs))
    _, states, probs = ising_conditional_pmf(params, obs, vals)
    assert abs(probs.sum() - 1) < 1e-12
    assert states.shape == (2 ** (p - len(obs)), p - len(obs))


def test_pmf_normalized():
    rng = np.random.default_rng(3)
    params = IsingParams.from_natural(range(4), *random_params(4, rng))
    assert abs(np.exp(params.log_pmf(binary_states(4))).sum() - 1) < 1e-12


def test_uniform_coins_fit_zero():
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 5, dtype=float)
    p = fit_ising(binary_data(x), Pattern.from_str("10"), UndirectedGraph.complete(2), tol=1e-10)
    assert np.max(np.abs(p.field)) < 1e-9 and abs(p.coupling[0, 1]) < 1e-9


def test_weighted_fit_recovers_truth():
    rng = np.random.default_rng(11)
    field, coupling = random_params(3, rng)
    states = binary_states(3)
    truth = IsingParams.from_natural(range(3), field, coupling)
    w = np.exp(truth.log_pmf(states))
    f_hat, c_hat = ising_mle(states, weights=w, tol=1e-12)
    assert np.max(np.abs(f_hat - field)) < 1e-6
    assert np.max(np.abs(c_hat - coupling)) < 1e-6


def test_single_balanced_variable():
    f, c = ising_mle(np.array([[0.0], [1.0], [1.0], [0.0]]))
    assert f == pytest.approx([0.0], abs=1e-12) and c.shape == (1, 1)


def test_zero_coupling_conditional_is_product():
    field = np.array([0.3, -1.0, 0.7])
    p = IsingParams.from_natural(range(3), field, np.zeros((3, 3)))
    for v in (0, 1):
        _, states, probs = ising_conditional_pmf(p, [2], [v])
        q = 1 / (1 + np.exp(-field[:2]))
        expect = np.prod(np.where(states == 1, q, 1 - q), axis=1)
        assert np.allclose(probs, expect, atol=1e-15)


def test_two_variable_logistic_form():
    field = np.array([0.4, -0.2])
    coupling = np.array([[0.0, 0.8], [0.8, 0.0]])
    p = IsingParams.from_natural((0, 1), field, coupling)
    for x2 in (0, 1):
        _, states, probs = ising_conditional_pmf(p, [1], [x2])
        expect = 1 / (1 + np.exp(-(field[0] + 2 * coupling[0, 1] * x2)))
        assert abs(probs[states[:, 0] == 1][0] - expect) < 1e-12


def test_condition_on_everything():
    p = IsingParams.from_natural((0, 1), [0.1, 0.2], [[0, 0.3], [0.3, 0]])
    missing, states, probs = ising_conditional_pmf(p, [0, 1], [1, 0])
    assert missing == () and states.shape == (1, 0) and probs.tolist() == [1.0]


def test_non_binary_column_rejected():
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ColumnTypeError):
        fit_ising(DataMatrix.from_arrays(x), Pattern.from_str("10"), UndirectedGraph.complete(2))


def test_constant_variable_degenerate():
    x = np.array([[0.0, 1.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(DegenerateFitError):
        fit_ising(binary_data(x), Pattern.from_str("10"), UndirectedGraph.complete(2))


def test_convergence_error_reports_gradient():
    x = np.array([[0, 0], [0, 1], [1, 1], [1, 1], [1, 0]], dtype=float)
    with pytest.raises(ConvergenceError) as exc:
        ising_mle(x, max_iter=1, tol=1e-14)
    assert exc.value.grad_norm > 0
