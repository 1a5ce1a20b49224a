import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metadist import DistanceConfig, TrainedIdw, parameter_count
from metadist.bench.runner import InstanceSpec, instance_data, instance_dataset
from metadist.bench.variants import build_variant
from metadist.models import route_groups
from metadist.tuning import (
    Dimension,
    Evaluator,
    InstanceData,
    ParameterSpace,
    TuneError,
    build_space,
    default_point,
    lhs_count,
    lhs_sample,
    pattern_search,
    tune,
)

# rows of the per-subproblem and aggregated parameter tables
SUB_ROWS = {1: [2, 3, 4], 2: [5, 6, 7], 3: [5, 6, 5, 6], 4: [5, 6, 5, 6, 7], 5: [6, 7, 6, 7, 8]}
META_ROWS = {1: (5, 2), 2: (8, 2), 3: (11, 7), 4: (12, 8), 5: (13, 8)}


@pytest.mark.parametrize("v", [1, 2, 3, 4, 5])
def test_parameter_counts_match_tables(v):
    g = build_variant(v)
    assert [len(grp.variables) for grp in route_groups(g, "sub")] == SUB_ROWS[v]
    assert parameter_count("sub", g) == sum(SUB_ROWS[v])
    n_vars, n_theta = META_ROWS[v]
    assert len(g.names) == n_vars and len(g.excludable()) == n_theta
    assert parameter_count("meta", g) == n_vars + n_theta


def test_hybrid_counts():
    assert [parameter_count("hybrid", build_variant(v)) for v in range(1, 6)] == [4, 7, 12, 13, 15]


def test_lhs_count_arithmetic():
    assert lhs_count(1400) == 462 and 1400 - lhs_count(1400) == 938
    assert lhs_count(700) == 231
    assert lhs_count(1) == 1 and lhs_count(100) == 33 and lhs_count(101) == 34


def test_lhs_one_per_quarter():
    space = ParameterSpace((Dimension("x", 0.0, 1.0),))
    xs = sorted(float(x[0]) for x in lhs_sample(space, 4, seed=3))
    assert [int(x * 4) for x in xs] == [0, 1, 2, 3]


@given(st.integers(1, 60), st.integers(1, 6), st.integers(0, 2**31))
def test_lhs_stratified_per_dimension(count, dims, seed):
    space = ParameterSpace(tuple(Dimension(f"x{j}", -2.0, 3.0) for j in range(dims)))
    pts = np.array(lhs_sample(space, count, seed))
    for j in range(dims):
        strata = np.floor((pts[:, j] + 2.0) / 5.0 * count).astype(int)
        assert sorted(np.minimum(strata, count - 1)) == list(range(count))
    np.testing.assert_array_equal(pts, np.array(lhs_sample(space, count, seed)))


def test_lhs_log_and_integer_dimensions():
    space = ParameterSpace((Dimension("w", 1e-3, 1e3, log=True), Dimension("k", 1, 4, integer=True)))
    pts = np.array(lhs_sample(space, 8, 11))
    strata = np.floor((np.log10(pts[:, 0]) + 3) / 6 * 8).astype(int)
    assert sorted(strata) == list(range(8))
    # 8 samples over 4 integer values: each value exactly twice
    assert sorted(np.bincount(pts[:, 1].astype(int))[1:]) == [2, 2, 2, 2]
    assert all(space.contains(p) for p in pts)


def _quad(center):
    c = np.asarray(center)
    return lambda x: float(np.sum((np.asarray(x) - c) ** 2))


@pytest.mark.parametrize("center,start", [((0.0, 0.0), (0.7, -0.3)), ((0.123, -0.456), (-0.9, 0.8))])
def test_gps_converges_on_quadratic(center, start):
    space = ParameterSpace((Dimension("a", -1.0, 1.0), Dimension("b", -1.0, 1.0)))
    seen = []

    def f(x):
        seen.append(np.array(x))
        return _quad(center)(x)

    res = pattern_search(f, space, start, budget=500, seed=0)
    assert res.best_objective <= 1e-4
    assert res.evaluations <= 500 and len(seen) == res.evaluations
    assert all(space.contains(x) for x in seen)


def test_gps_budget_one_returns_start():
    space = ParameterSpace((Dimension("a", -1.0, 1.0),))
    res = pattern_search(_quad((0.5,)), space, (0.2,), budget=1)
    assert res.evaluations == 1 and res.best[0] == 0.2


def test_gps_rejects_bad_start():
    space = ParameterSpace((Dimension("a", -1.0, 1.0),))
    with pytest.raises(TuneError):
        pattern_search(_quad((0,)), space, (2.0,), budget=5)
    with pytest.raises(TuneError):
        pattern_search(lambda x: math.inf, space, (0.0,), budget=5)


def test_gps_deterministic():
    space = ParameterSpace(tuple(Dimension(f"x{i}", -1.0, 1.0) for i in range(4)))
    f = _quad((0.3, -0.2, 0.1, 0.05))
    a = pattern_search(f, space, (0, 0, 0, 0), 200, seed=9)
    b = pattern_search(f, space, (0, 0, 0, 0), 200, seed=9)
    assert a.trace == b.trace and a.history == b.history


# --- tuning on an instance -----------------------------------------------------

@pytest.fixture(scope="module")
def small_instance():
    spec = InstanceSpec(3, "VS", "MLP", 0)
    return instance_dataset(spec, 0)


@pytest.mark.parametrize("approach", ["meta", "sub", "hybrid"])
@pytest.mark.parametrize("model", ["idw", "knn"])
def test_tune_budget_exact_and_trace(small_instance, approach, model):
    data = instance_data(small_instance, model)
    ev = Evaluator(data, approach, model)
    res = tune(ev, 4, seed=1)
    assert res.evaluations == res.budget == 4 * ev.space.n
    assert res.lhs_evaluations == lhs_count(res.budget)
    assert res.lhs_evaluations + res.search_evaluations == res.budget
    assert len(res.history) == res.budget
    objs = [t[1] for t in res.trace]
    assert all(b < a for a, b in zip(objs, objs[1:]))
    assert objs[-1] == res.best_objective == min(res.history)
    assert all(t[2] is not None for t in res.trace)
    assert ev.space.contains(res.best)


def test_tune_reproducible(small_instance):
    data = instance_data(small_instance, "idw")
    a = tune(Evaluator(data, "meta", "idw"), 3, seed=5)
    b = tune(Evaluator(data, "meta", "idw"), 3, seed=5)
    assert a.history == b.history and a.trace == b.trace
    c = tune(Evaluator(data, "meta", "idw"), 3, seed=6)
    assert c.history != a.history


def test_meta_budget_example(small_instance):
    g = build_variant(1)
    assert parameter_count("meta", g) == 7
    assert 200 * 7 == 1400 and lhs_count(1400) == 462


def test_evaluator_matches_trained_model(small_instance):
    data = instance_data(small_instance, "idw")
    ev = Evaluator(data, "meta", "idw")
    rng = np.random.default_rng(0)
    x = ev.space.from_unit(rng.random(ev.space.n))
    cfg = DistanceConfig.from_dict({k: v for k, v in ev.config_dict(x).items() if k not in ("approach", "model")})
    m = TrainedIdw(data.graph, cfg, "meta", data.X_train, data.y_train, validate=False)
    pred, _ = m.predict(data.X_val, validate=False)
    np.testing.assert_allclose(pred, ev.predict(x), rtol=1e-12)


def test_single_validation_point(small_instance):
    d = instance_data(small_instance, "idw")
    one = InstanceData(d.graph, d.X_train, d.y_train, d.X_val[:1], d.y_val[:1])
    res = tune(Evaluator(one, "sub", "idw"), 2, seed=0)
    assert math.isfinite(res.best_objective)


def test_space_layout():
    g = build_variant(3)
    s = build_space(g, "meta", "knn", n_train=10)
    assert s.names[-1] == "k" and s.dims[-1].hi == 10
    assert sum(n.startswith("w:") for n in s.names) == 11
    assert sum(n.startswith("t:") for n in s.names) == 7
    x = default_point(s)
    assert s.contains(x)
    sub = build_space(g, "sub")
    assert {n.split("/")[0] for n in sub.names} == {"o=ASGD,l=1", "o=ASGD,l=2", "o=ADAM,l=1", "o=ADAM,l=2"}
    with pytest.raises(TuneError):
        build_space(g, "meta", "svm")
