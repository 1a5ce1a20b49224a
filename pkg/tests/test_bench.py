import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metadist import EXC, Role
from metadist.bench.data import (
    assign_splits,
    dataset_to_csv,
    largest_remainder,
    read_points_csv,
    sample_dataset,
    split_counts,
    stratified_split,
    write_dataset,
)
from metadist.bench.profiles import (
    ProfileError,
    ProfileRecord,
    data_profile,
    first_solved,
    kappa_grid,
    tau_solved_at,
)
from metadist.bench.runner import instances, run_benchmark
from metadist.bench.surrogate import lipschitz_bound, surrogate_score
from metadist.bench.variants import SIZES, TABLE6A, TABLE6B, build_variant, signature_key, signature_sizes
from metadist.sampling import sample_extended

VARIABLES = {
    1: "l r u1 u2 u3",
    2: "l r u1 u2 u3 a1 a2 a3",
    3: "o l r u1 u2 a1 a2 a3 b1 b2 b3",
    4: "o l r u1 u2 u3 a1 a2 a3 b1 b2 b3",
    5: "o l r u1 u2 u3 a1 a2 a3 b1 b2 b3 rho",
}


def _included(o, l, v):
    inc = {"l", "r"} | {f"u{i}" for i in range(1, l + 1)}
    if v >= 3:
        inc.add("o")
    if v >= 2:
        inc |= {f"{'a' if o == 'ASGD' else 'b'}{i}" for i in (1, 2, 3)}
    if v == 5:
        inc.add("rho")
    return inc


# --- variants ---------------------------------------------------------------

@pytest.mark.parametrize("v", [1, 2, 3, 4, 5])
def test_variant_structure(v):
    g = build_variant(v)
    assert set(g.names) == set(VARIABLES[v].split())
    sigs = g.enumerate_signatures()
    assert len(sigs) == [3, 3, 4, 5, 5][v - 1]
    for sig in sigs:
        o, l = signature_key(sig)
        assert sig.included == _included(o, l, v)
    assert set(TABLE6A[v]) == {signature_key(s) for s in sigs}


def test_variant_roles():
    assert build_variant(1).role_of("l") is Role.META
    assert not any(build_variant(1).var[n].kind.value == "categorical" for n in build_variant(1).names)
    assert build_variant(3).role_of("l") is Role.META
    assert build_variant(4).role_of("l") is Role.META_DECREED
    assert all("rho" in s.included for s in build_variant(5).enumerate_signatures())
    with pytest.raises(ValueError):
        build_variant(6)


# --- dataset sizes and splits ----------------------------------------------------

@pytest.mark.parametrize("v", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("size", SIZES)
def test_signature_sizes_match_tables(v, size):
    g = build_variant(v)
    sizes = signature_sizes(v, size)
    col = SIZES.index(size)
    for sig in g.enumerate_signatures():
        assert sizes[sig.index] == TABLE6A[v][signature_key(sig)][col]
    assert sum(sizes.values()) == TABLE6B[v][col]


def test_sample_dataset_counts_and_validity():
    ds = sample_dataset(1, "VS", "MLP", 0)
    assert len(ds) == 90
    sigs = ds.signatures()
    assert [sigs.count(i) for i in range(3)] == [20, 30, 40]
    g = ds.graph
    for x in ds.points:
        assert g.is_extended_point(x)
        o_l = ("ASGD", x["l"])
        assert {n for n in g.names if x[n] is not EXC} == _included(*o_l, 1)
    assert np.all((ds.targets >= 0) & (ds.targets <= 100))
    assert len(sample_dataset(5, "L", "CNN", 3)) == 850


def test_largest_remainder():
    assert largest_remainder(90) == [45, 23, 22]
    assert largest_remainder(4) == [2, 1, 1]
    assert largest_remainder(7) == [3, 2, 2]  # remainders .5, .75, .75


def test_split_counts_controlled_rounding():
    rows = split_counts([20, 30, 40])
    assert rows == [[10, 5, 5], [15, 8, 7], [20, 10, 10]]
    assert [sum(c) for c in zip(*rows)] == [45, 23, 22]


@given(st.lists(st.integers(1, 80), min_size=1, max_size=6))
def test_split_counts_properties(sizes):
    rows = split_counts(sizes)
    assert [sum(r) for r in rows] == sizes
    assert [sum(c) for c in zip(*rows)] == largest_remainder(sum(sizes))
    for n, r in zip(sizes, rows):
        for c, f in zip(r, (0.5, 0.25, 0.25)):
            assert abs(c - n * f) < 1


def test_stratified_split_deterministic(rng):
    groups = [0] * 20 + [1] * 30 + [2] * 40
    a = stratified_split(groups, np.random.default_rng(5))
    assert a == stratified_split(groups, np.random.default_rng(5))
    assert sorted(set(a)) == ["test", "train", "validation"]
    assert (a.count("train"), a.count("validation"), a.count("test")) == (45, 23, 22)


# --- CSV ------------------------------------------------------------------------------

def test_csv_round_trip_byte_identical(tmp_path):
    ds = assign_splits(sample_dataset(5, "VS", "MLP", 1), 2)
    path = tmp_path / "ds.csv"
    write_dataset(ds, path)
    again = read_points_csv(ds.graph, path, require_target=True)
    assert dataset_to_csv(again) == path.read_text()
    assert again.points == ds.points
    assert np.array_equal(again.targets, ds.targets)
    header = path.read_text().splitlines()[0].split(",")
    assert header == list(ds.graph.names) + ["target", "split"]
    assert "EXC" in path.read_text()


def test_csv_errors(tmp_path):
    g = build_variant(1)
    p = tmp_path / "bad.csv"
    p.write_text("l,r,u1,zzz\n1,0.1,50,3\n")
    with pytest.raises(ValueError):
        read_points_csv(g, p)
    p.write_text("l,r,u1\n1,0.1,5000\n")
    with pytest.raises(ValueError):
        read_points_csv(g, p)
    p.write_text("l,r,u1,u2,u3\n1,0.1,50,EXC,\n")
    assert read_points_csv(g, p).points[0]["u2"] is EXC


# --- surrogate -------------------------------------------------------------------

def test_surrogate_deterministic_and_bounded():
    rng = np.random.default_rng(0)
    for v in (1, 3, 5):
        g = build_variant(v)
        for _ in range(200):
            x = sample_extended(g, rng)
            for arch in ("MLP", "CNN"):
                s = surrogate_score(v, arch, x, 4)
                assert 0 <= s <= 100
                assert s == surrogate_score(v, arch, x, 4)
    with pytest.raises(ValueError):
        surrogate_score(1, "MLP", {"l": 1, "r": 0.5}, 0)


@pytest.mark.parametrize("arch", ["MLP", "CNN"])
def test_surrogate_lipschitz_audit(arch):
    g = build_variant(5)
    rng = np.random.default_rng(1)
    L = lipschitz_bound(arch, 7)
    worst = 0.0
    for _ in range(300):
        sig = g.enumerate_signatures()[int(rng.integers(5))]
        x = sample_extended(g, rng, sig)
        y = sample_extended(g, rng, sig)
        diff = [float(x[n]) - float(y[n]) for n in g.names if x[n] is not EXC and g.var[n].kind.value != "categorical"]
        d = math.sqrt(sum(t * t for t in diff))
        if d > 0:
            worst = max(worst, abs(surrogate_score(5, arch, x, 7) - surrogate_score(5, arch, y, 7)) / d)
    assert worst <= L


# --- profiles ---------------------------------------------------------------------

def test_tau_solved_examples():
    r = ProfileRecord("p", "s", 3, ((1, 1.10),))
    assert not tau_solved_at(r, 1.0, 0.05, 1)
    assert tau_solved_at(r, 1.0, 0.10 + 1e-12, 1)
    assert tau_solved_at(ProfileRecord("p", "s", 3, ((4, 1.0),)), 1.0, 0.0, 4)
    assert tau_solved_at(ProfileRecord("p", "s", 3, ((4, 1.9),)), 1.0, 1.0, 10)
    assert not tau_solved_at(r, 1.0, 1.0, 0)
    with pytest.raises(ProfileError):
        tau_solved_at(r, 0.0, 0.1, 1)


def test_profile_record_validation():
    with pytest.raises(ProfileError):
        ProfileRecord("p", "s", 1, ((3, 1.0), (3, 0.5)))
    with pytest.raises(ProfileError):
        ProfileRecord("p", "s", 1, ((3, 0.0),))


def test_data_profile_definition():
    n = 4
    recs = [
        ProfileRecord("p1", "a", n, ((1, 2.0), (n + 1, 1.0))),
        ProfileRecord("p2", "a", n, ((1, 5.0),)),
        ProfileRecord("p1", "b", n, ((1, 3.0),)),
        ProfileRecord("p2", "b", n, ((2, 1.0),)),
    ]
    prof = data_profile(recs, 0.0, [0.0, 1.0, 100.0])
    assert prof["a"] == [0.0, 0.5, 0.5]
    assert prof["b"] == [0.0, 0.5, 0.5]
    assert first_solved(recs[0], 1.0, 0.0) == n + 1
    with pytest.raises(ProfileError):
        data_profile(recs[:3], 0.0, [1.0])


@given(st.lists(st.tuples(st.integers(1, 50), st.floats(0.1, 10)), min_size=1, max_size=8), st.floats(0, 1))
def test_data_profile_monotone_and_bounded(pts, tau):
    recs = []
    for i, (k, v) in enumerate(pts):
        recs.append(ProfileRecord(f"p{i}", "a", 3, ((k, v),)))
        recs.append(ProfileRecord(f"p{i}", "b", 5, ((1, v * 1.5), (k + 1, v))))
    kap = kappa_grid(20, 40)
    for curve in data_profile(recs, tau, kap).values():
        assert all(0 <= c <= 1 for c in curve)
        assert all(b >= a for a, b in zip(curve, curve[1:]))


def test_loose_tau_solves_within_factor_two():
    recs = [ProfileRecord("p", "a", 2, ((1, 1.0),)), ProfileRecord("p", "b", 2, ((7, 1.9),))]
    prof = data_profile(recs, 1.0, [1e9])
    assert prof == {"a": [1.0], "b": [1.0]}


# --- runner ------------------------------------------------------------------------

def test_instance_count():
    assert len(instances((1, 2, 3, 4, 5), SIZES, ("MLP", "CNN"), 5)) == 200
    ids = [s.id for s in instances((1,), ("VS",), ("MLP",), 2)]
    assert ids == ["HPD-1-VS-MLP-0", "HPD-1-VS-MLP-1"]


def test_smoke_run_emits_artifacts(tmp_path):
    man = run_benchmark(tmp_path, variants=(1,), sizes=("VS",), archs=("MLP",), seeds=1, budget_mult=2)
    assert len(man["instances"]) == 1
    for f in ("manifest.json", "summary.csv", "accuracy_VS.csv", "profiles_validation.csv", "profiles_test.csv"):
        assert (tmp_path / f).exists(), f
    entry = man["instances"][0]
    for rel in entry["results"].values():
        rec = json.loads((tmp_path / rel).read_text())
        assert rec["evaluations"] == rec["budget"]
    rows = list(csv.DictReader(io.StringIO((tmp_path / "profiles_test.csv").read_text())))
    assert {r["approach"] for r in rows} == {"sub-idw", "hybrid-idw", "meta-idw"}
    acc = list(csv.reader(io.StringIO((tmp_path / "accuracy_VS.csv").read_text())))
    assert acc[0][0] == "variant" and len(acc) == 2
    with pytest.raises(FileExistsError):
        run_benchmark(tmp_path, variants=(1,), sizes=("VS",), archs=("MLP",), seeds=1, budget_mult=2)
