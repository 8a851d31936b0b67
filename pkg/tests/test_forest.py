import gzip
import json

import numpy as np
import pytest

from chemoutcome.errors import InsufficientEvents, SchemaHashMismatch, SchemaMismatch, VersionMismatch
from chemoutcome.survival import ForestParams, deserialize_model, fit_forest, nelson_aalen, serialize_model
from chemoutcome.synth import weibull_cohort


@pytest.fixture(scope="module")
def small():
    X, time, event, names = weibull_cohort(n=200, seed=3)
    return X, time, event, names


def test_single_unsplittable_tree_is_bootstrap_nelson_aalen(small):
    X, time, event, _ = small
    n = len(time)
    model = fit_forest(X, time, event, ForestParams(n_trees=1, min_leaf_size=n, seed=9))
    rng = np.random.default_rng(np.random.SeedSequence(9).spawn(1)[0])
    idx = rng.integers(0, n, n)
    H = nelson_aalen((time[idx], event[idx]))
    expected = np.exp(-H(model.time_grid))
    got = model.predict_survival_matrix(X[:3])
    np.testing.assert_allclose(got, np.tile(expected, (3, 1)), atol=1e-12)
    assert model.trees[0].n_leaves == 1


def test_same_seed_same_bytes(small):
    X, time, event, names = small
    p = ForestParams(n_trees=8, min_leaf_size=10, seed=4)
    a = serialize_model(fit_forest(X, time, event, p, names))
    b = serialize_model(fit_forest(X, time, event, p, names))
    assert a == b
    c = serialize_model(fit_forest(X, time, event, ForestParams(n_trees=8, min_leaf_size=10, seed=5), names))
    assert a != c


def test_parallel_matches_serial(small):
    X, time, event, names = small
    a = fit_forest(X, time, event, ForestParams(n_trees=6, seed=1, n_jobs=1), names)
    b = fit_forest(X, time, event, ForestParams(n_trees=6, seed=1, n_jobs=2), names)
    assert serialize_model(a) == serialize_model(b)


def test_group_feature_is_root(rng):
    n = 300
    g = rng.integers(0, 2, n)
    noise = rng.normal(size=n)
    time = np.where(g == 1, rng.integers(1, 50, n), rng.integers(200, 400, n)).astype(float)
    event = np.ones(n, dtype=bool)
    X = np.column_stack([g, noise])
    model = fit_forest(X, time, event, ForestParams(n_trees=50, mtry=2, min_leaf_size=10, seed=0))
    roots = [t.root_feature for t in model.trees]
    assert sum(r == 0 for r in roots) / len(roots) > 0.9


def test_duplicate_trees_average_to_one(small):
    X, time, event, _ = small
    model = fit_forest(X, time, event, ForestParams(n_trees=1, seed=2))
    one = model.predict_survival_matrix(X[:10])
    model.trees = model.trees * 2
    model._leaf_cache.clear()
    np.testing.assert_allclose(model.predict_survival_matrix(X[:10]), one, atol=1e-15)


def test_survival_monotone_and_bounded(small):
    X, time, event, _ = small
    model = fit_forest(X, time, event, ForestParams(n_trees=10, seed=0))
    S = model.predict_survival_matrix(X)
    assert np.all(np.diff(S, axis=1) <= 1e-12)
    assert S.min() >= 0 and S.max() <= 1
    risk = model.predict_risk(X)
    H = model.predict_cumulative_hazard_matrix(X)
    np.testing.assert_allclose(risk, H.sum(axis=1), rtol=1e-12)


def test_round_trip_and_tamper(small):
    X, time, event, names = small
    model = fit_forest(X, time, event, ForestParams(n_trees=4, seed=0), names)
    blob = serialize_model(model)
    back = deserialize_model(blob, expected_features=names)
    np.testing.assert_array_equal(back.predict_survival_matrix(X), model.predict_survival_matrix(X))

    d = json.loads(gzip.decompress(blob))
    d["schema_hash"] = "0" * 64
    with pytest.raises(SchemaHashMismatch):
        deserialize_model(gzip.compress(json.dumps(d).encode()))
    with pytest.raises(SchemaHashMismatch):
        deserialize_model(blob, expected_features=names[::-1])

    d = json.loads(gzip.decompress(blob))
    d["version"] = 99
    with pytest.raises(VersionMismatch):
        deserialize_model(gzip.compress(json.dumps(d).encode()))
    with pytest.raises(VersionMismatch):
        deserialize_model(b"not gzip")


def test_input_checks(small):
    X, time, event, _ = small
    model = fit_forest(X, time, event, ForestParams(n_trees=2, seed=0))
    with pytest.raises(SchemaMismatch):
        model.predict_risk(X[:, :2])
    with pytest.raises(InsufficientEvents):
        fit_forest(X[:5], time[:5], np.zeros(5, dtype=bool), ForestParams(n_trees=1))
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        fit_forest(bad, time, event, ForestParams(n_trees=1))
