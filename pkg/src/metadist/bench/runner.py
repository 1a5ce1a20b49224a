"""Benchmark runner: instances, tuning runs, tables and profile curves.

Every output is a pure function of the arguments (no timestamps, sorted
keys, fixed float formatting), so two runs with the same seed produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ..models import Approach, bin_label, idw_from_distances
from ..rng import seed_sequence, stream
from ..tuning import Evaluator, InstanceData, default_point, tune
from .data import Dataset, assign_splits, format_float, sample_dataset, write_dataset
from .profiles import ProfileRecord, data_profile, kappa_grid
from .variants import ARCHITECTURES, SIZES, VARIANTS, build_variant

APPROACHES = ("sub", "hybrid", "meta")
MODELS = ("idw", "knn")
DEFAULT_TAU = 0.005
KAPPA_STEPS = 100


class BenchError(RuntimeError):
    pass


@dataclass(frozen=True)
class InstanceSpec:
    variant: int
    size: str
    arch: str
    seed_index: int

    @property
    def id(self) -> str:
        return f"HPD-{self.variant}-{self.size}-{self.arch}-{self.seed_index}"

    def seed(self, base_seed: int) -> int:
        """Per-instance seed driving the split and the tuner."""
        ss = seed_sequence(base_seed, "splits", self.variant, SIZES.index(self.size),
                           ARCHITECTURES.index(self.arch), self.seed_index)
        return int(ss.generate_state(1, np.uint32)[0])


def instances(variants: Iterable[int], sizes: Iterable[str], archs: Iterable[str], seeds: int) -> list[InstanceSpec]:
    out = []
    for v in variants:
        if v not in VARIANTS:
            raise BenchError(f"unknown variant {v}")
        for s in sizes:
            if s not in SIZES:
                raise BenchError(f"unknown size {s!r}")
            for a in archs:
                if a not in ARCHITECTURES:
                    raise BenchError(f"unknown architecture {a!r}")
                out.extend(InstanceSpec(v, s, a, i) for i in range(seeds))
    return out


def instance_dataset(spec: InstanceSpec, base_seed: int) -> Dataset:
    ds = sample_dataset(spec.variant, spec.size, spec.arch, base_seed)
    return assign_splits(ds, spec.seed(base_seed))


def instance_data(ds: Dataset, model: str) -> InstanceData:
    X = ds.encoded()
    y = ds.targets if model == "idw" else np.array([bin_label(5, t) for t in ds.targets], dtype=np.int64)
    idx = {s: ds.indices(s) for s in ("train", "validation", "test")}
    return InstanceData(ds.graph, X[idx["train"]], y[idx["train"]], X[idx["validation"]], y[idx["validation"]],
                        X[idx["test"]], y[idx["test"]])


def _job(args: tuple) -> tuple[str, dict[str, Any]]:
    spec, base_seed, approaches, models, mults = args
    ds = instance_dataset(spec, base_seed)
    seed = spec.seed(base_seed)
    out: dict[str, Any] = {}
    for model in models:
        data = instance_data(ds, model)
        for approach in approaches:
            ev = Evaluator(data, approach, model)
            res = tune(ev, mults[model], seed)
            test = ev.score(res.best, "test")
            rec = res.to_dict()
            rec["space"] = ev.space.to_dict()
            rec["n_params"] = ev.space.n
            rec["test_metric"] = test if model == "idw" else -test
            rec["metric"] = "rmse" if model == "idw" else "accuracy"
            out[f"{approach}-{model}"] = rec
    return spec.id, out


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _write(path: Path, text: str, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _csv(rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([format_float(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def run_benchmark(
    out_dir: str | Path,
    variants: Sequence[int] = VARIANTS,
    sizes: Sequence[str] = SIZES,
    archs: Sequence[str] = ARCHITECTURES,
    seeds: int = 5,
    budget_mult: int = 200,
    *,
    knn_budget_mult: int | None = None,
    approaches: Sequence[str] = APPROACHES,
    models: Sequence[str] = MODELS,
    base_seed: int = 0,
    jobs: int = 1,
    tau: float = DEFAULT_TAU,
    force: bool = False,
) -> dict[str, Any]:
    """Run every (instance, approach, model) tuning and write all artifacts.

    Layout of ``out_dir``: ``manifest.json``, ``datasets/<id>.csv``,
    ``results/<id>/<approach>-<model>.json``, ``summary.csv``,
    ``accuracy_<size>.csv`` (KNN), ``profiles_validation.csv`` and
    ``profiles_test.csv`` (IDW).
    """
    out = Path(out_dir)
    approaches = [Approach(a).value for a in approaches]
    for m in models:
        if m not in MODELS:
            raise BenchError(f"unknown model {m!r}")
    specs = instances(variants, sizes, archs, seeds)
    mults = {"idw": int(budget_mult), "knn": int(knn_budget_mult if knn_budget_mult is not None else budget_mult)}
    if not force and (out / "manifest.json").exists():
        raise FileExistsError(f"{out / 'manifest.json'} exists (use --force to overwrite)")
    args = [(s, base_seed, tuple(approaches), tuple(models), mults) for s in specs]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_job, args))
    else:
        results = dict(map(_job, args))

    manifest: dict[str, Any] = {
        "base_seed": base_seed,
        "budget_mult": mults,
        "approaches": approaches,
        "models": list(models),
        "tau": tau,
        "instances": [],
    }
    summary = [["instance", "variant", "size", "arch", "seed_index", "approach", "model", "n_params", "budget",
                "best_validation", "test_metric"]]
    for spec in specs:
        ds = instance_dataset(spec, base_seed)
        ds_path = Path("datasets") / f"{spec.id}.csv"
        buf = out / ds_path
        if buf.exists() and not force:
            raise FileExistsError(f"{buf} exists (use --force to overwrite)")
        buf.parent.mkdir(parents=True, exist_ok=True)
        write_dataset(ds, buf)
        entry = {
            "id": spec.id, "variant": spec.variant, "size": spec.size, "arch": spec.arch,
            "seed_index": spec.seed_index, "instance_seed": spec.seed(base_seed),
            "dataset": ds_path.as_posix(), "results": {},
        }
        for key, rec in sorted(results[spec.id].items()):
            rel = Path("results") / spec.id / f"{key}.json"
            _write(out / rel, _dump_json(rec), force)
            entry["results"][key] = rel.as_posix()
            approach, model = key.split("-")
            best_val = rec["best_objective"] if model == "idw" else -rec["best_objective"]
            summary.append([spec.id, spec.variant, spec.size, spec.arch, spec.seed_index, approach, model,
                            rec["n_params"], rec["budget"], float(best_val), float(rec["test_metric"])])
        manifest["instances"].append(entry)
    _write(out / "manifest.json", _dump_json(manifest), force)
    _write(out / "summary.csv", _csv(summary), force)
    if "knn" in models:
        for size in sizes:
            _write(out / f"accuracy_{size}.csv", _csv(accuracy_table(results, specs, size, variants, approaches)), force)
    if "idw" in models:
        for metric in ("validation", "test"):
            rows = profile_rows(load_records(out, metric), tau, kappa_grid(mults["idw"], KAPPA_STEPS),
                                [f"{a}-idw" for a in approaches])
            _write(out / f"profiles_{metric}.csv", _csv(rows), force)
    return manifest


def accuracy_table(results, specs, size, variants, approaches) -> list[list[Any]]:
    """Mean and standard deviation of test accuracy per variant and approach."""
    header = ["variant"] + [f"{a}_{stat}" for a in approaches for stat in ("mean", "std")]
    rows: list[list[Any]] = [header]
    for v in variants:
        row: list[Any] = [v]
        for a in approaches:
            vals = [results[s.id][f"{a}-knn"]["test_metric"] for s in specs if s.variant == v and s.size == size]
            row += [float(np.mean(vals)), float(np.std(vals))] if vals else ["", ""]
        rows.append(row)
    return rows


def load_records(out_dir: str | Path, metric: str = "validation", model: str = "idw") -> list[ProfileRecord]:
    """Profile records from a benchmark directory (``metric``: validation or test)."""
    out = Path(out_dir)
    try:
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise BenchError(f"cannot read benchmark manifest in {out}: {exc}") from None
    recs = []
    for entry in manifest["instances"]:
        for key, rel in sorted(entry["results"].items()):
            if not key.endswith(f"-{model}"):
                continue
            rec = json.loads((out / rel).read_text(encoding="utf-8"))
            field = "objective" if metric == "validation" else "test"
            points = [(t["k"], t[field]) for t in rec["trace"] if t[field] is not None]
            recs.append(ProfileRecord(entry["id"], key, int(rec["n_params"]), tuple(points)))
    return recs


def profile_rows(records: Sequence[ProfileRecord], tau: float, kappas: Sequence[float],
                 approaches: Sequence[str] | None = None) -> list[list[Any]]:
    curves = data_profile(records, tau, kappas, approaches=approaches)
    rows: list[list[Any]] = [["kappa", "approach", "fraction"]]
    for name, fr in curves.items():
        rows.extend([float(k), name, float(f)] for k, f in zip(kappas, fr))
    return rows


def write_profiles(in_dir: str | Path, out_path: str | Path, tau: float, *, metric: str = "validation",
                   max_kappa: float | None = None, force: bool = False) -> list[list[Any]]:
    recs = load_records(in_dir, metric)
    if max_kappa is None:
        manifest = json.loads((Path(in_dir) / "manifest.json").read_text(encoding="utf-8"))
        max_kappa = float(manifest["budget_mult"]["idw"])
    names = sorted({r.approach for r in recs}, key=lambda s: (APPROACHES.index(s.split("-")[0]), s))
    rows = profile_rows(recs, tau, kappa_grid(max_kappa, KAPPA_STEPS), names)
    _write(Path(out_path), _csv(rows), force)
    return rows


# -------------------------------------------------------- aggregate curve
def _params_from_results(ev: Evaluator, path: Path) -> np.ndarray:
    rec = json.loads(path.read_text(encoding="utf-8"))
    best = rec["best_params"]
    missing = [n for n in ev.space.names if n not in best]
    if missing:
        raise BenchError(f"{path}: parameters {missing[:3]} missing")
    return np.array([best[n] for n in ev.space.names], dtype=float)


def _full_matrix(ev: Evaluator, x: np.ndarray) -> np.ndarray:
    """Test-by-train distances under fixed parameters; cross-route pairs are inf."""
    X_test = np.ascontiguousarray(ev.data.X_test, dtype=np.float64)
    D = np.full((len(X_test), len(ev.routed.X)), np.inf)
    for key, qi in ev.test_groups.items():
        ti = ev.routed.groups.get(key)
        if ti is None:
            continue
        D[np.ix_(qi, ti)] = ev._distance(key, x).pairwise(X_test[qi], ev.routed.X[ti])
    return D


def aggregate_curve(
    variants: Sequence[int] = VARIANTS,
    archs: Sequence[str] = ARCHITECTURES,
    approaches: Sequence[str] = APPROACHES,
    *,
    size: str = "M",
    runs: int = 20,
    base_seed: int = 0,
    results_dir: str | Path | None = None,
    stride: int = 1,
) -> list[list[Any]]:
    """Test RMSE of IDW as training points are added one at a time.

    The partial training set starts with one random point per signature;
    the remaining training points follow in random order. Parameters are
    the defaults, or the tuned ones of the first seed's instance from
    ``results_dir``. Returns CSV rows (variant, arch, approach, n_train,
    mean, std) with statistics over ``runs`` random orders.
    """
    rows: list[list[Any]] = [["variant", "arch", "approach", "n_train", "rmse_mean", "rmse_std"]]
    for v in variants:
        for arch in archs:
            spec = InstanceSpec(v, size, arch, 0)
            ds = instance_dataset(spec, base_seed)
            data = instance_data(ds, "idw")
            sigs = [ds.graph.signature_of(ds.points[i]).index for i in ds.indices("train")]
            by_sig: dict[int, list[int]] = {}
            for i, s in enumerate(sigs):
                by_sig.setdefault(s, []).append(i)
            orders = []
            for run in range(runs):
                rng = stream(base_seed, "splits", 1000 + v, ARCHITECTURES.index(arch), run)
                first = [by_sig[s][int(rng.integers(len(by_sig[s])))] for s in sorted(by_sig)]
                rest = [i for i in rng.permutation(len(sigs)) if i not in set(first)]
                orders.append(np.array(first + [int(i) for i in rest], dtype=np.int64))
            start = len(by_sig)
            counts = list(range(start, len(sigs) + 1, max(1, stride)))
            if counts[-1] != len(sigs):
                counts.append(len(sigs))
            for a in approaches:
                ev = Evaluator(data, a, "idw")
                if results_dir is not None:
                    x = _params_from_results(ev, Path(results_dir) / "results" / spec.id / f"{a}-idw.json")
                else:
                    x = default_point(ev.space)
                D = _full_matrix(ev, x)
                y_train = np.asarray(data.y_train, dtype=float)
                y_test = np.asarray(data.y_test, dtype=float)
                for n in counts:
                    errs = []
                    for order in orders:
                        cols = order[:n]
                        pred = _idw_partial(D[:, cols], y_train[cols], y_train[cols].mean())
                        errs.append(float(np.sqrt(np.mean((pred - y_test) ** 2))))
                    rows.append([v, arch, a, n, float(np.mean(errs)), float(np.std(errs))])
    return rows


def _idw_partial(D: np.ndarray, y: np.ndarray, fallback: float) -> np.ndarray:
    out = np.full(D.shape[0], fallback)
    ok = np.isfinite(D).any(axis=1)
    if ok.any():
        out[ok] = idw_from_distances(D[ok], y)
    return out


def write_aggregate_curve(out_path: str | Path, rows: Sequence[Sequence[Any]], force: bool = False) -> None:
    _write(Path(out_path), _csv(rows), force)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("METADIST_JOBS", "1")))
    except ValueError:
        return 1
