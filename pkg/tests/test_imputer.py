import json

import numpy as np
import pytest

import mmgimpute.imputer as imputer
from mmgimpute.dataset import ColumnSpec, DataMatrix, load_csv
from mmgimpute.exceptions import FallbackWarning, NoSupportError
from mmgimpute.graph import UndirectedGraph
from mmgimpute.imputer import (
    SubmodelStore,
    fit_all,
    impute_dataset,
    impute_row,
    multiple_impute,
    pool,
    write_run,
)
from mmgimpute.patterns import Pattern, boundary, factorization
from mmgimpute.submodels import gaussian_conditional

P = Pattern.from_str


def masked(x, patterns, reps):
    """Rows cycling through ``patterns`` (bit strings), ``reps`` of each."""
    rows = [p for p in patterns for _ in range(reps)]
    mask = np.array([[c == "1" for c in p] for p in rows])
    return DataMatrix.from_arrays(x[: len(rows)], mask)


def gaussian_rows(rng, n, d, rho=0.5):
    cov = rho ** np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
    return rng.multivariate_normal(np.zeros(d), cov, size=n)


def test_fully_observed_gives_empty_store(chain3, rng):
    store = fit_all(chain3, DataMatrix.from_arrays(rng.normal(size=(10, 3))))
    assert len(store) == 0 and store.failures == {}


def test_each_key_fit_once(chain3, rng, monkeypatch):
    calls = []
    real = imputer._fit_one

    def counting(family, data, s, g, opts, seed):
        calls.append(str(s))
        return real(family, data, s, g, opts, seed)

    monkeypatch.setattr(imputer, "_fit_one", counting)
    data = masked(gaussian_rows(rng, 100, 3), ["111", "101", "100", "001", "010"], 20)
    store = fit_all(chain3, data)
    assert sorted(calls) == sorted(["010", "011", "110", "100", "001"])
    assert sorted(str(s) for s in store.keys()) == sorted(calls)
    assert store.support[P("010")] == 20


def test_shared_key_is_same_object(bowtie, rng):
    data = masked(gaussian_rows(rng, 60, 5), ["11111", "00110", "10110"], 20)
    store = fit_all(bowtie, data)
    a = store.submodel_for(P("00110"), P("00001"))
    b = store.submodel_for(P("10110"), P("00001"))
    assert a is b
    assert a.scope == (3, 4) and a.n_rows == 20


def test_fully_observed_row_untouched(chain3, rng):
    data = masked(gaussian_rows(rng, 40, 3), ["111", "011"], 20)
    store = fit_all(chain3, data)
    gen = np.random.default_rng(1)
    before = json.dumps(gen.bit_generator.state)
    row = np.array([0.1, 0.2, 0.3])
    out = impute_row(store, row, [True, True, True], gen)
    assert np.array_equal(out, row)
    assert json.dumps(gen.bit_generator.state) == before


def test_row_draw_log(bowtie, rng):
    data = masked(gaussian_rows(rng, 60, 5), ["11111", "00110"], 30)
    store = fit_all(bowtie, data)
    log = []
    out = impute_row(store, data.values[30], data.mask[30], rng, draw_log=log)
    assert [(str(s), c) for s, c in log] == [("11000", (2, 3)), ("00001", (3,))]
    assert np.array_equal(out[[2, 3]], data.values[30, [2, 3]])
    assert np.isfinite(out).all()


def test_row_draw_moments(chain3, rng):
    data = masked(gaussian_rows(rng, 400, 3, 0.7), ["111", "101"], 200)
    store = fit_all(chain3, data)
    p = store.get(P("010"))
    _, mean, cov = gaussian_conditional(p, [0, 2], [0.5, -1.0])
    reps = 10_000
    draws = np.array([impute_row(store, [0.5, np.nan, -1.0], [1, 0, 1], rng)[1] for _ in range(reps)])
    sd = np.sqrt(cov[0, 0])
    assert abs(draws.mean() - mean[0]) < 5 * sd / np.sqrt(reps)
    assert abs(draws.var() - cov[0, 0]) < 5 * cov[0, 0] * np.sqrt(2 / reps)


def test_batched_draw_moments(chain3, rng):
    train = masked(gaussian_rows(rng, 400, 3, 0.7), ["111", "011"], 200)
    store = fit_all(chain3, train)
    reps = 10_000
    target = DataMatrix.from_arrays(np.tile([np.nan, 1.0, 2.0], (reps, 1)))
    out = impute_dataset(store, target, rng)
    _, mean, cov = gaussian_conditional(store.get(P("100")), [1], [1.0])
    assert np.array_equal(out[:, 1:], target.values[:, 1:])
    assert abs(out[:, 0].mean() - mean[0]) < 5 * np.sqrt(cov[0, 0] / reps)
    assert abs(out[:, 0].var() - cov[0, 0]) < 5 * cov[0, 0] * np.sqrt(2 / reps)


def test_factorization_uses_boundaries(bowtie, rng):
    x = gaussian_rows(rng, 600, 5)
    mask = rng.random(x.shape) > 0.3
    mask[~mask.any(axis=1), 0] = True
    data = DataMatrix.from_arrays(x, mask)
    store = fit_all(bowtie, data, allow_fallback=False)
    for i in range(0, data.n, 7):
        log = []
        impute_row(store, data.values[i], data.mask[i], rng, draw_log=log)
        assert [s for s, _ in log] == [s for s, _ in factorization(bowtie, data.row_pattern(i))]
        for s, cond in log:
            assert cond == boundary(bowtie, s).indices
            assert all(data.mask[i, cond])


def test_m1_without_missing_is_identity(chain3, rng):
    data = DataMatrix.from_arrays(rng.normal(size=(5, 3)))
    run = multiple_impute(fit_all(chain3, data), data, 1, seed=3)
    assert run.datasets[0].equals(data)


def test_same_seed_bit_identical(chain3, rng):
    data = masked(gaussian_rows(rng, 90, 3), ["111", "101", "110"], 30)
    store = fit_all(chain3, data)
    a = multiple_impute(store, data, 3, seed=8)
    b = multiple_impute(store, data, 3, seed=8)
    for x, y in zip(a.datasets, b.datasets):
        assert np.array_equal(x.values, y.values)
    c = multiple_impute(store, data, 3, seed=9)
    assert not np.array_equal(a.datasets[0].values, c.datasets[0].values)


def test_observed_cells_constant_across_datasets(rng):
    from mmgimpute.simulation import PRECISION_5VAR, mask_mcar, named_graph, sample_ggm

    full = sample_ggm(PRECISION_5VAR, 1.5, 2000, rng)
    data = mask_mcar(full, 0.2, rng)
    store = fit_all(named_graph("ggm5", 5), data)
    run = multiple_impute(store, data, 20, seed=1)
    medians = [np.median(ds.values[:, 0]) for ds in run.datasets]
    assert len(set(medians)) > 1
    for ds in run.datasets:
        assert np.array_equal(ds.values[data.mask], data.values[data.mask])
        assert ds.mask.all()
    assert np.array_equal(run.imputed, ~data.mask)


def test_pool_examples():
    assert pool([2.0] * 5, [1.0] * 5) == (2.0, 1.0)
    assert pool([1.0, 2.0, 3.0]) == (2.0, None)
    point, var = pool([0.0, 2.0], [1.0, 1.0])
    assert point == 1.0 and var == pytest.approx(4.0, abs=1e-15)


def test_identical_neighborhoods_give_identical_fits(bowtie, rng):
    trimmed = UndirectedGraph.from_edges_1based(5, [(1, 3), (2, 3), (4, 5)])
    data = masked(gaussian_rows(rng, 80, 5), ["11111", "11110", "10110", "01110"], 20)
    a = fit_all(bowtie, data, allow_fallback=True)
    b = fit_all(trimmed, data, allow_fallback=True)
    s = P("00001")
    assert a.get(s).same_as(b.get(s))


def test_cycle_and_chain_condition_differently():
    cycle = UndirectedGraph.from_edges_1based(4, [(1, 2), (2, 3), (3, 4), (1, 4)])
    chain = UndirectedGraph.chain(4)
    fc = factorization(cycle, P("0101"))
    fl = factorization(chain, P("0101"))
    assert [str(s) for s, _ in fc] == [str(s) for s, _ in fl] == ["1000", "0010"]
    assert [c for _, c in fc] == [(1, 3), (1, 3)]
    assert [c for _, c in fl] == [(1,), (1, 3)]
    assert fc != fl


def test_no_support_report_lists_all(chain3, rng):
    data = masked(gaussian_rows(rng, 6, 3), ["100", "001", "010"], 2)
    with pytest.raises(NoSupportError) as exc:
        fit_all(chain3, data)
    assert sorted(exc.value.patterns) == sorted(["011", "110", "100", "001"])


def test_fallback_fits_marginal(chain3, rng):
    data = masked(gaussian_rows(rng, 120, 3), ["100", "001", "011", "110"], 30)
    with pytest.warns(FallbackWarning):
        store = fit_all(chain3, data, allow_fallback=True)
    p = store.get(P("011"))
    assert p.scope == (1, 2) and store.fallback == {P("011"), P("110")}
    assert store.support[P("011")] == 0 and store.get(P("011")).n_rows == 30
    out = impute_dataset(store, data, rng)
    assert np.isfinite(out).all()


def test_fallback_without_any_rows_still_fails(chain3, rng):
    data = masked(gaussian_rows(rng, 60, 3), ["100", "001"], 30)
    with pytest.raises(NoSupportError):
        fit_all(chain3, data, allow_fallback=True)


def test_store_json_round_trip(chain3, rng, tmp_path):
    data = masked(gaussian_rows(rng, 90, 3), ["111", "101", "110"], 30)
    store = fit_all(chain3, data)
    store.save(tmp_path / "s.json")
    back = SubmodelStore.load(tmp_path / "s.json")
    assert back.keys() == store.keys()
    for s in store.keys():
        assert back.get(s).same_as(store.get(s))


def test_write_run_layout(chain3, rng, tmp_path):
    data = masked(gaussian_rows(rng, 60, 3), ["111", "101"], 30)
    store = fit_all(chain3, data)
    run = multiple_impute(store, data, 3, seed=2)
    write_run(run, store, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["imp_001.csv", "imp_002.csv", "imp_003.csv", "provenance.csv", "store.json"]
    back = load_csv(tmp_path / "imp_002.csv", data.columns)
    assert np.array_equal(back.values, run.datasets[1].values)
    assert "NA" not in (tmp_path / "imp_001.csv").read_text()
    prov = load_csv(tmp_path / "provenance.csv")
    assert np.array_equal(prov.values.astype(bool), ~data.mask)


def test_ising_family_imputes_binary(chain3, rng):
    x = (gaussian_rows(rng, 300, 3, 0.6) > 0).astype(float)
    mask = rng.random(x.shape) > 0.2
    mask[~mask.any(axis=1), 1] = True
    cols = [ColumnSpec(f"b{j}", "binary") for j in range(3)]
    data = DataMatrix(tuple(cols), x, mask)
    store = fit_all(chain3, data, family="ising")
    run = multiple_impute(store, data, 2, seed=4)
    vals = run.datasets[0].values
    assert set(np.unique(vals)) <= {0.0, 1.0}
    log = []
    i = int(np.flatnonzero(~data.mask.all(axis=1))[0])
    impute_row(store, data.values[i], data.mask[i], rng, draw_log=log)
    assert log


def test_mixture_family_imputes(chain3, rng):
    z = rng.random(400) < 0.4
    x = 5.0 * z[:, None] + rng.standard_normal((400, 3))
    mask = rng.random(x.shape) > 0.2
    mask[~mask.any(axis=1), 0] = True
    data = DataMatrix.from_arrays(x, mask)
    store = fit_all(chain3, data, family="mp", k=2, restarts=2, seed=3)
    assert store.k == 2
    out = multiple_impute(store, data, 2, seed=5).datasets[1].values
    assert np.isfinite(out).all()
    back = SubmodelStore.from_dict(json.loads(json.dumps(store.to_dict())))
    assert all(back.get(s).same_as(store.get(s)) for s in store.keys())
