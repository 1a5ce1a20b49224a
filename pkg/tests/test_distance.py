import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metadist import (
    EXC,
    CompiledDistance,
    ConfigError,
    DistanceConfig,
    Encoder,
    PointError,
    SignatureError,
    hybrid_distance,
    hybrid_variables,
    inc_exc_distance,
    induced_distance,
    meta_distance,
    one_dim_distance,
    sub_distance,
    theta_lower_bound,
)
from metadist.bench.variants import build_variant
from metadist.distance import absolute_thetas_to_offsets, theta
from metadist.sampling import sample_extended, sample_point


def _oracle(g, cfg, xb, yb, p):
    """Coordinate vector built straight from the three-case definition."""
    coords = []
    for v in g.names:
        a, b = xb[v], yb[v]
        if a is EXC and b is EXC:
            coords.append(0.0)
        elif a is EXC or b is EXC:
            lo, hi = g.var[v].universal.without_exc().hull() if g.var[v].kind.value != "categorical" else (0, 1)
            coords.append(cfg.weight(v) * (hi - lo) / 2 + cfg.offset(v))
        elif g.var[v].kind.value == "categorical":
            coords.append(0.0 if a == b else cfg.weight(v))
        else:
            coords.append(cfg.weight(v) * abs(a - b))
    c = np.array(coords)
    return float(np.max(c)) if math.isinf(p) else float(np.sum(c**p) ** (1 / p))


def _random_cfg(g, rng, p=2.0, offsets=False):
    w = {n: float(np.exp(rng.uniform(-2, 2))) for n in g.names}
    t = {n: float(rng.uniform(0, 1)) for n in g.excludable()} if offsets else {}
    return DistanceConfig(w, t, p)


# --- worked example: the update alpha of the MLP domain -----------------------

def test_alpha_both_included(mlp):
    cfg = DistanceConfig()
    assert inc_exc_distance(mlp, cfg, "alpha", 0.9, 0.1) == pytest.approx(0.8, abs=1e-15)


def test_alpha_both_excluded(mlp):
    assert inc_exc_distance(mlp, DistanceConfig(), "alpha", EXC, EXC) == 0.0


def test_alpha_one_excluded_at_bound(mlp):
    cfg = DistanceConfig()
    assert theta_lower_bound(mlp, cfg, "alpha") == 0.5
    assert inc_exc_distance(mlp, cfg, "alpha", EXC, 0.1) == 0.5
    cfg2 = DistanceConfig(theta_offsets={"alpha": 0.25})
    assert inc_exc_distance(mlp, cfg2, "alpha", 0.1, EXC) == 0.75


def test_theta_bounds(mlp):
    cfg = DistanceConfig(weights={"u1": 2.0})
    assert theta_lower_bound(mlp, cfg, "u1") == 290.0  # 2 * (300 - 10) / 2
    with pytest.raises(ConfigError):
        theta_lower_bound(mlp, cfg, "r")
    conv = absolute_thetas_to_offsets(mlp, cfg, {"u1": 300.0})
    assert conv.offset("u1") == 10.0 and theta(mlp, conv, "u1") == 300.0
    with pytest.raises(ConfigError):
        absolute_thetas_to_offsets(mlp, cfg, {"u1": 100.0})


def test_categorical_indicator_and_matrix(mlp, dropout):
    cfg = DistanceConfig(weights={"o": 3.0})
    assert one_dim_distance(mlp, cfg, "o", "ASGD", "ADAM") == 3.0
    assert one_dim_distance(mlp, cfg, "o", "ADAM", "ADAM") == 0.0
    m = DistanceConfig(weights={"o": 2.0}, matrices={"o": [[0, 0.5], [0.5, 0]]})
    assert one_dim_distance(mlp, m, "o", "ASGD", "ADAM") == 1.0


@pytest.mark.parametrize(
    "matrix",
    [[[0, 1], [2, 0]], [[1, 1], [1, 0]], [[0, 0], [0, 0]], [[0, 1, 5], [1, 0, 1], [5, 1, 0]], [[0, 1]]],
)
def test_bad_matrices(matrix):
    with pytest.raises(ConfigError):
        DistanceConfig(matrices={"o": matrix})


def test_config_validation_and_serialization(mlp):
    with pytest.raises(ConfigError):
        DistanceConfig(weights={"r": 0.0})
    with pytest.raises(ConfigError):
        DistanceConfig(theta_offsets={"u1": -1.0})
    with pytest.raises(ConfigError):
        DistanceConfig(p=0.5)
    with pytest.raises(ConfigError):
        DistanceConfig.from_dict({"weights": {"o": 2}, "categorical": {"o": {"scale": 3}}})
    cfg = DistanceConfig({"o": 2.0, "r": 5.0}, {"u1": 1.5}, math.inf)
    d = cfg.to_dict(mlp)
    assert d["categorical"] == {"o": {"scale": 2.0}}
    assert d["p"] == "inf"
    assert d["thetas"]["u1"] == 146.5
    assert DistanceConfig.from_dict(d) == cfg


def test_meta_distance_rejects_invalid(mlp):
    xb = mlp.extend({"r": 0.1, "o": "ASGD", "l": 0, "alpha": 0.3})
    bad = dict(xb, beta=0.4)
    with pytest.raises(PointError):
        meta_distance(mlp, DistanceConfig(), xb, bad)


def test_theta_must_be_positive_for_single_value(mlp):
    from metadist import RoleGraph

    data = mlp.to_dict()
    for v in data["variables"]:
        if v["name"] == "alpha":
            v["universal"] = [{"interval": [0.5, 0.5]}, "EXC"]
    for r in data["rules"]:
        if r["child"] == "alpha":
            r["cases"][0]["set"] = {"interval": [0.5, 0.5]}
    g = RoleGraph.from_dict(data)
    with pytest.raises(ConfigError):
        theta(g, DistanceConfig(), "alpha")
    assert theta(g, DistanceConfig(theta_offsets={"alpha": 0.1}), "alpha") == 0.1


# --- metric properties (dict path against an independent oracle) ---------------------

@given(seed=st.integers(0, 2**32 - 1), v=st.integers(1, 5), p=st.sampled_from([1.0, 2.0, 3.0, math.inf]))
def test_meta_distance_matches_oracle_and_axioms(seed, v, p):
    g = build_variant(v)
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(g, rng, p, offsets=bool(seed % 2))
    x, y, z = (sample_extended(g, rng) for _ in range(3))
    dxy = meta_distance(g, cfg, x, y)
    assert dxy == pytest.approx(_oracle(g, cfg, x, y, p), rel=1e-12, abs=1e-12)
    assert dxy == meta_distance(g, cfg, y, x)
    assert meta_distance(g, cfg, x, x) == 0.0
    assert (dxy == 0) == (x == y)
    assert dxy <= meta_distance(g, cfg, x, z) + meta_distance(g, cfg, z, y) + 1e-12


@given(seed=st.integers(0, 2**32 - 1), v=st.integers(1, 5))
def test_triangle_at_theta_bound_with_exc_middle(seed, v):
    g = build_variant(v)
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(g, rng)
    # pick the two ends in one signature and the middle in another, so EXC sits in z
    sigs = g.enumerate_signatures()
    a, b = rng.choice(len(sigs), 2, replace=len(sigs) < 2)
    x = sample_extended(g, rng, sigs[a])
    y = sample_extended(g, rng, sigs[a])
    z = sample_extended(g, rng, sigs[b])
    for v_ in g.excludable():
        assert inc_exc_distance(g, cfg, v_, x[v_], y[v_]) <= (
            inc_exc_distance(g, cfg, v_, x[v_], z[v_]) + inc_exc_distance(g, cfg, v_, z[v_], y[v_]) + 1e-12
        )
    assert meta_distance(g, cfg, x, y) <= meta_distance(g, cfg, x, z) + meta_distance(g, cfg, z, y) + 1e-12


def test_theta_below_bound_is_refused_and_would_break_triangle(mlp):
    cfg = DistanceConfig()
    lb = theta_lower_bound(mlp, cfg, "alpha")
    small = 0.9 * lb
    # alpha: 0.01 -> EXC -> 0.99 would be shorter than the direct route
    assert one_dim_distance(mlp, cfg, "alpha", 0.01, 0.99) > 2 * small
    with pytest.raises(ConfigError):
        absolute_thetas_to_offsets(mlp, cfg, {"alpha": small})


@given(seed=st.integers(0, 2**32 - 1), v=st.integers(1, 5))
def test_p_norm_ordering(seed, v):
    g = build_variant(v)
    rng = np.random.default_rng(seed)
    w = _random_cfg(g, rng)
    x, y = sample_extended(g, rng), sample_extended(g, rng)
    n = len(g.names)
    ps = [1.0, 1.5, 2.0, 4.0, math.inf]
    d = {p: meta_distance(g, w.replace(p=p), x, y) for p in ps}
    coords = [inc_exc_distance(g, w, v_, x[v_], y[v_]) for v_ in g.names]
    assert d[math.inf] == max(coords)
    for p1, p2 in zip(ps, ps[1:]):
        assert d[p2] <= d[p1] * (1 + 1e-12)
        factor = n ** (1 / p1 - (0 if math.isinf(p2) else 1 / p2))
        assert d[p1] <= factor * d[p2] * (1 + 1e-12) + 1e-12


@given(seed=st.integers(0, 2**32 - 1), v=st.integers(1, 5), p=st.sampled_from([1.0, 2.0, 3.0]))
def test_weight_doubling(seed, v, p):
    g = build_variant(v)
    rng = np.random.default_rng(seed)
    cfg = DistanceConfig(p=p)
    x, y = sample_extended(g, rng), sample_extended(g, rng)
    name = g.names[int(rng.integers(len(g.names)))]
    if x[name] is EXC or y[name] is EXC:
        return
    c = one_dim_distance(g, cfg, name, x[name], y[name])
    doubled = cfg.replace(weights={name: 2.0})
    big = meta_distance(g, doubled, x, y) ** p
    diff = big - meta_distance(g, cfg, x, y) ** p
    # subtracting two p-th powers loses precision relative to their size
    assert diff == pytest.approx((2**p - 1) * c**p, rel=1e-9, abs=1e-12 * max(1.0, big))


@given(seed=st.integers(0, 2**32 - 1), v=st.integers(1, 5))
def test_induced_equals_meta_of_extensions(seed, v):
    g = build_variant(v)
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(g, rng)
    x, y = sample_point(g, rng), sample_point(g, rng)
    assert induced_distance(g, cfg, x, y) == meta_distance(g, cfg, g.extend(x), g.extend(y))


# --- sub and hybrid baselines ---------------------------------------------------------

@given(seed=st.integers(0, 2**32 - 1), v=st.integers(1, 5))
def test_sub_equals_meta_within_signature(seed, v):
    g = build_variant(v)
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(g, rng, p=3.0)
    sig = g.enumerate_signatures()[int(rng.integers(len(g.enumerate_signatures())))]
    x, y = sample_extended(g, rng, sig), sample_extended(g, rng, sig)
    s = sub_distance(g, cfg, x, y)
    assert s == pytest.approx(meta_distance(g, cfg.replace(p=2.0), x, y), rel=1e-12)
    assert hybrid_distance(g, cfg.replace(p=2.0), x, y) == pytest.approx(s, rel=1e-12)


def test_sub_rejects_cross_signature():
    g = build_variant(1)
    rng = np.random.default_rng(0)
    s0, s1 = g.enumerate_signatures()[:2]
    with pytest.raises(SignatureError):
        sub_distance(g, DistanceConfig(), sample_extended(g, rng, s0), sample_extended(g, rng, s1))


def test_hybrid_pseudo_metric_witness():
    g = build_variant(3)
    cfg = DistanceConfig()
    x = g.extend({"o": "ASGD", "l": 1, "r": 0.01, "u1": 64, "a1": 0.2, "a2": 0.3, "a3": 0.4})
    y = g.extend({"o": "ASGD", "l": 2, "r": 0.01, "u1": 64, "u2": 128, "a1": 0.2, "a2": 0.3, "a3": 0.4})
    assert x != y
    assert hybrid_distance(g, cfg, x, y) == 0.0
    assert meta_distance(g, cfg, x, y) > 0.0


@given(seed=st.integers(0, 2**32 - 1), v=st.integers(1, 5))
def test_hybrid_symmetric_nonnegative(seed, v):
    g = build_variant(v)
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(g, rng)
    x, y = sample_extended(g, rng), sample_extended(g, rng)
    h = hybrid_distance(g, cfg, x, y)
    assert h >= 0 and h == hybrid_distance(g, cfg, y, x)
    assert "o" not in hybrid_variables(g) and "r" in hybrid_variables(g)


# --- array path --------------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 2.0, 3.5, math.inf])
@pytest.mark.parametrize("mode", ["meta", "hybrid"])
def test_compiled_matches_dict_path(variant, p, mode):
    _, g = variant
    rng = np.random.default_rng(7)
    cfg = _random_cfg(g, rng, p, offsets=True)
    pts = [sample_extended(g, rng) for _ in range(30)]
    X = Encoder(g).encode_many(pts)
    D = CompiledDistance(g, cfg, mode=mode).pairwise(X, X)
    fn = meta_distance if mode == "meta" else hybrid_distance
    for i in range(0, 30, 3):
        for j in range(0, 30, 4):
            assert D[i, j] == pytest.approx(fn(g, cfg, pts[i], pts[j]), rel=1e-12, abs=1e-12)


def test_encoder_round_trip(variant, rng):
    _, g = variant
    enc = Encoder(g)
    for _ in range(50):
        xb = sample_extended(g, rng)
        assert enc.decode(enc.encode(xb)) == xb


def test_reweighted_equals_fresh(variant, rng):
    _, g = variant
    cfg = _random_cfg(g, rng, offsets=True)
    base = CompiledDistance(g, DistanceConfig())
    names = base.variables
    fast = base.reweighted(
        np.array([cfg.weight(n) for n in names]), np.array([cfg.offset(n) for n in names])
    )
    fresh = CompiledDistance(g, cfg)
    X = Encoder(g).encode_many([sample_extended(g, rng) for _ in range(20)])
    np.testing.assert_allclose(fast.pairwise(X, X), fresh.pairwise(X, X), rtol=1e-14, atol=0)
