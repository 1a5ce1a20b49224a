"""Command-line interface: ``metadist <command> ...``.

Exit codes: 0 success, 1 other failure, 2 usage error, 3 unreadable or
malformed input file, 4 invalid domain or configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .distance import CompiledDistance, ConfigError, DistanceConfig, Encoder
from .domain import GraphError, PointError, RoleGraph, SignatureError, validate_graph
from .models import Approach, ModelError, TrainedIdw, TrainedKnn, bin_label, route_groups
from .tuning import Evaluator, InstanceData, TuneError, build_space, lhs_count, tune

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INPUT, EXIT_INVALID = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAIL):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ input
def _read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from None
    except ValueError as exc:
        raise CliError(f"{path}: not valid JSON ({exc})", EXIT_INPUT) from None


def _load_graph(path: str) -> RoleGraph:
    data = _read_json(path)
    try:
        return RoleGraph.from_dict(data)
    except GraphError as exc:
        first = exc.violations[0] if getattr(exc, "violations", None) else exc
        raise CliError(f"{path}: invalid domain: {first}", EXIT_INVALID) from None


def _load_config(path: str) -> tuple[DistanceConfig, dict[str, DistanceConfig], dict[str, Any]]:
    """Distance config plus optional per-group configs and model defaults."""
    data = _read_json(path)
    if not isinstance(data, dict):
        raise CliError(f"{path}: config must be a JSON object", EXIT_INPUT)
    try:
        base = DistanceConfig.from_dict({k: v for k, v in data.items() if k not in ("groups", "model", "thetas")})
        groups = {label: DistanceConfig.from_dict({k: v for k, v in cfg.items() if k != "thetas"})
                  for label, cfg in data.get("groups", {}).items()}
    except (ConfigError, TypeError, AttributeError) as exc:
        raise CliError(f"{path}: invalid config: {exc}", EXIT_INVALID) from None
    return base, groups, dict(data.get("model", {}))


def _read_points(g: RoleGraph, path: str, require_target: bool = False):
    from .bench.data import DataError, read_points_csv

    try:
        return read_points_csv(g, path, require_target=require_target)
    except DataError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _check_config(g: RoleGraph, cfg: DistanceConfig, where: str) -> None:
    unknown = [v for v in (*cfg.weights, *cfg.theta_offsets, *cfg.matrices) if v not in g.var]
    if unknown:
        raise CliError(f"{where}: config names unknown variables {sorted(set(unknown))}", EXIT_INVALID)
    bad = [v for v in cfg.theta_offsets if not g.var[v].excludable]
    if bad:
        raise CliError(f"{where}: theta offsets given for variables that are never excluded: {bad}", EXIT_INVALID)


# ----------------------------------------------------------------- output
def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def _emit(text: str, out: str | None, force: bool) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    p = Path(out)
    if p.exists() and not force:
        raise CliError(f"{out} exists (use --force to overwrite)")
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _csv_text(rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------- commands
def cmd_validate(a: argparse.Namespace) -> int:
    data = _read_json(a.spec)
    try:
        g = RoleGraph.from_dict(data, check=False)
    except GraphError as exc:
        raise CliError(f"{a.spec}: {exc}", EXIT_INVALID) from None
    report = validate_graph(g)
    for v in report:
        print(v)
    return EXIT_INVALID if report else EXIT_OK


def _group_configs(g, approach, base, groups):
    if not groups:
        return None
    by_label = {grp.label: grp.key for grp in route_groups(g, approach)}
    unknown = [k for k in groups if k not in by_label]
    if unknown:
        raise CliError(f"config groups {unknown} do not match any {approach.value} sub-model", EXIT_INVALID)
    return {by_label[k]: cfg for k, cfg in groups.items()}


def cmd_distance(a: argparse.Namespace) -> int:
    g = _load_graph(a.spec)
    cfg, groups, _ = _load_config(a.config)
    _check_config(g, cfg, a.config)
    ds = _read_points(g, a.points)
    X = Encoder(g).encode_many(ds.points)
    approach = Approach(a.approach)
    try:
        if approach is Approach.SUB:
            sigs = [g.signature_of(x) for x in ds.points]
            if len({s.index for s in sigs}) > 1:
                raise CliError("sub distance needs points from a single subproblem", EXIT_INVALID)
            cd = CompiledDistance(g, cfg, variables=sigs[0].included if sigs else None, p=2.0)
        else:
            cd = CompiledDistance(g, cfg, mode="hybrid" if approach is Approach.HYBRID else "meta")
        D = cd.pairwise(X, X)
    except ConfigError as exc:
        raise CliError(f"{a.config}: {exc}", EXIT_INVALID) from None
    _emit(_csv_text([[_fmt(x) for x in row] for row in D]), a.out, a.force)
    return EXIT_OK


def _labels(targets: np.ndarray, bins: int, raw: bool) -> np.ndarray:
    if raw:
        if not np.all(np.asarray(targets) == np.round(targets)):
            raise CliError("--labels expects integer targets", EXIT_INPUT)
        return np.asarray(targets).astype(np.int64)
    try:
        return np.array([bin_label(bins, float(t)) for t in targets], dtype=np.int64)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def cmd_fit_predict(a: argparse.Namespace) -> int:
    g = _load_graph(a.spec)
    cfg, groups, model_defaults = _load_config(a.config)
    _check_config(g, cfg, a.config)
    approach = Approach(a.approach)
    gcfg = _group_configs(g, approach, cfg, groups)
    train = _read_points(g, a.train, require_target=True)
    query = _read_points(g, a.query)
    if not train.points:
        raise CliError(f"{a.train}: no training points", EXIT_INPUT)
    try:
        if a.model == "idw":
            q = a.q if a.q is not None else float(model_defaults.get("q", 2.0))
            m = TrainedIdw(g, cfg, approach, train.points, train.targets, q, group_configs=gcfg)
            pred, flags = m.predict(query.points, fallback=a.fallback)
            values = [_fmt(x) for x in pred]
        else:
            k = a.k if a.k is not None else int(model_defaults.get("k", 1))
            labels = _labels(train.targets, a.bins, a.labels)
            m = TrainedKnn(g, cfg, approach, train.points, labels, k, group_configs=gcfg)
            pred, flags = m.predict(query.points, fallback=a.fallback)
            values = [str(int(x)) for x in pred]
    except (ModelError, SignatureError) as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    except ConfigError as exc:
        raise CliError(f"{a.config}: {exc}", EXIT_INVALID) from None
    rows = [["prediction", "fallback"]] + [[v, int(f)] for v, f in zip(values, flags)]
    _emit(_csv_text(rows), a.out, a.force)
    return EXIT_OK


def _instance(g: RoleGraph, path: str, model: str, seed: int, bins: int, raw_labels: bool) -> InstanceData:
    from .bench.data import assign_splits

    ds = _read_points(g, path, require_target=True)
    if ds.splits is None:
        ds = assign_splits(ds, seed)
    y = ds.targets if model == "idw" else _labels(ds.targets, bins, raw_labels)
    X = ds.encoded()
    idx = {s: ds.indices(s) for s in ("train", "validation", "test")}
    if len(idx["train"]) == 0 or len(idx["validation"]) == 0:
        raise CliError(f"{path}: tuning needs training and validation rows", EXIT_INPUT)
    return InstanceData(g, X[idx["train"]], y[idx["train"]], X[idx["validation"]], y[idx["validation"]],
                        X[idx["test"]], y[idx["test"]])


def cmd_tune(a: argparse.Namespace) -> int:
    g = _load_graph(a.spec)
    if a.out and Path(a.out).exists() and not a.force:
        raise CliError(f"{a.out} exists (use --force to overwrite)")
    if a.external:
        return _tune_external(g, a)
    if a.dataset is None:
        raise CliError("a dataset is required unless --external is given", EXIT_USAGE)
    data = _instance(g, a.dataset, a.model, a.seed, a.bins, a.labels)
    try:
        ev = Evaluator(data, a.approach, a.model, q=a.q if a.q is not None else 2.0, p=a.p)
        res = tune(ev, a.budget_mult, a.seed)
    except (TuneError, ModelError, SignatureError) as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    out = res.to_dict()
    out["space"] = ev.space.to_dict()
    out["n_params"] = ev.space.n
    out["approach"], out["model"], out["seed"] = a.approach, a.model, a.seed
    _emit(json.dumps(out, indent=1, sort_keys=True) + "\n", a.out, a.force)
    return EXIT_OK


def _tune_external(g: RoleGraph, a: argparse.Namespace) -> int:
    """Candidates go to stdout as JSON lines; one objective value per line is read from stdin."""
    from .tuning import _Counter, _gps, lhs_sample
    from .rng import stream

    space = build_space(g, a.approach, a.model, a.n_train)
    budget = a.budget_mult * space.n

    def objective(x):
        print(json.dumps({"params": dict(zip(space.names, map(float, x)))}), flush=True)
        line = sys.stdin.readline()
        if not line:
            raise CliError("objective stream closed before the budget was spent", EXIT_INPUT)
        try:
            return float(line)
        except ValueError:
            raise CliError(f"expected a number on stdin, got {line.strip()!r}", EXIT_INPUT) from None

    rng = stream(a.seed, "tuner")
    f = _Counter(objective, budget)
    for x in lhs_sample(space, lhs_count(budget), rng):
        f(x)
    lhs_calls = f.calls
    u, fu = space.to_unit(f.best_x), f.best_f
    while f.left > 0:
        _gps(f, space, u, fu, rng, budget)
        if f.left > 0:
            x = space.from_unit(rng.random(space.n))
            fu, u = f(x), space.to_unit(x)
    result = {
        "budget": budget, "evaluations": f.calls, "lhs_evaluations": lhs_calls,
        "best_objective": f.best_f, "best_params": dict(zip(space.names, map(float, f.best_x))),
        "trace": [{"k": k, "objective": v} for k, v, _ in f.trace], "space": space.to_dict(),
    }
    text = json.dumps(result, indent=1, sort_keys=True) + "\n"
    if a.out:
        _emit(text, a.out, a.force)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _str_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def cmd_bench_run(a: argparse.Namespace) -> int:
    from .bench.runner import BenchError, run_benchmark

    try:
        run_benchmark(
            a.out, _int_list(a.variants), _str_list(a.sizes), _str_list(a.arch), a.seeds, a.budget_mult,
            knn_budget_mult=a.knn_budget_mult, approaches=_str_list(a.approaches), models=_str_list(a.models),
            base_seed=a.seed, jobs=a.jobs, tau=a.tau, force=a.force,
        )
    except (BenchError, ValueError) as exc:
        raise CliError(str(exc), EXIT_USAGE if isinstance(exc, BenchError) else EXIT_INVALID) from None
    except FileExistsError as exc:
        raise CliError(str(exc)) from None
    return EXIT_OK


def cmd_bench_profile(a: argparse.Namespace) -> int:
    from .bench.profiles import ProfileError
    from .bench.runner import BenchError, write_profiles

    if not (Path(a.input) / "manifest.json").exists():
        raise CliError(f"{a.input}: no benchmark manifest found", EXIT_INPUT)
    try:
        write_profiles(a.input, a.out, a.tau, metric=a.metric, max_kappa=a.max_kappa, force=a.force)
    except (BenchError, ProfileError, KeyError) as exc:
        raise CliError(f"{a.input}: {exc}", EXIT_INPUT) from None
    except FileExistsError as exc:
        raise CliError(str(exc)) from None
    return EXIT_OK


def cmd_bench_curve(a: argparse.Namespace) -> int:
    from .bench.runner import BenchError, aggregate_curve, write_aggregate_curve

    if a.out and Path(a.out).exists() and not a.force:
        raise CliError(f"{a.out} exists (use --force to overwrite)")
    try:
        rows = aggregate_curve(
            _int_list(a.variants), _str_list(a.arch), _str_list(a.approaches), size=a.size, runs=a.runs,
            base_seed=a.seed, results_dir=a.results, stride=a.stride,
        )
    except BenchError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    except FileNotFoundError as exc:
        raise CliError(f"missing tuning result: {exc.filename}", EXIT_INPUT) from None
    from .bench.runner import _csv

    if a.out:
        write_aggregate_curve(a.out, rows, a.force)
    else:
        sys.stdout.write(_csv(rows))
    return EXIT_OK


# ----------------------------------------------------------------- parser
class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    from .bench.runner import DEFAULT_TAU, default_jobs

    p = _Parser(prog="metadist", description="Distances, models and tuning on hierarchical mixed-variable domains.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    v = sub.add_parser("validate", help="check a domain file; prints one line per violation")
    v.add_argument("spec", help="domain description (JSON)")
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("distance", help="pairwise distance matrix of the points in a CSV file")
    d.add_argument("spec", help="domain description (JSON)")
    d.add_argument("config", help="distance config (JSON)")
    d.add_argument("points", help="points CSV; header holds variable names, EXC or empty cells for excluded")
    d.add_argument("--approach", choices=[x.value for x in Approach], default="meta",
                   help="meta distance (default), sub (one subproblem only) or hybrid")
    d.add_argument("--out", help="output file (default: stdout)")
    d.add_argument("--force", action="store_true", help="overwrite an existing output file")
    d.set_defaults(func=cmd_distance)

    f = sub.add_parser("fit-predict", help="train IDW or KNN and predict query points")
    f.add_argument("spec", help="domain description (JSON)")
    f.add_argument("config", help="distance config (JSON); may hold per-group configs from 'tune'")
    f.add_argument("train", help="training CSV with a 'target' column")
    f.add_argument("query", help="query CSV")
    f.add_argument("--model", choices=["idw", "knn"], required=True, help="regression (idw) or classification (knn)")
    f.add_argument("--approach", choices=[x.value for x in Approach], default="meta", help="distance routing")
    f.add_argument("--q", type=float, help="IDW exponent (default from config, else 2)")
    f.add_argument("--k", type=int, help="number of neighbors (default from config, else 1)")
    f.add_argument("--bins", type=int, default=5, help="label bins over [0, 100] for KNN targets (default 5)")
    f.add_argument("--labels", action="store_true", help="use integer targets as KNN labels without binning")
    f.add_argument("--fallback", action="store_true",
                   help="answer queries with no routed training data by the global mean or majority")
    f.add_argument("--out", help="output file (default: stdout)")
    f.add_argument("--force", action="store_true", help="overwrite an existing output file")
    f.set_defaults(func=cmd_fit_predict)

    t = sub.add_parser("tune", help="tune distance and model parameters on a dataset")
    t.add_argument("spec", help="domain description (JSON)")
    t.add_argument("dataset", nargs="?", help="dataset CSV with 'target' (and optionally 'split') columns")
    t.add_argument("--approach", choices=[x.value for x in Approach], default="meta", help="model routing")
    t.add_argument("--model", choices=["idw", "knn"], default="idw", help="model type")
    t.add_argument("--budget-mult", type=int, default=200, help="evaluations per tuned parameter (default 200)")
    t.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    t.add_argument("--p", type=float, default=2.0, help="order of the meta/hybrid distance (default 2)")
    t.add_argument("--q", type=float, help="IDW exponent (default 2)")
    t.add_argument("--bins", type=int, default=5, help="label bins for KNN (default 5)")
    t.add_argument("--labels", action="store_true", help="use integer targets as KNN labels without binning")
    t.add_argument("--external", action="store_true",
                   help="read objective values from stdin for candidates written to stdout")
    t.add_argument("--n-train", type=int, default=25, help="training size bounding K in external mode")
    t.add_argument("--out", help="result JSON (default: stdout)")
    t.add_argument("--force", action="store_true", help="overwrite an existing output file")
    t.set_defaults(func=cmd_tune)

    b = sub.add_parser("bench", help="benchmark harness on the five hyperparameter-domain variants")
    bsub = b.add_subparsers(dest="bench_command", metavar="BENCH_COMMAND", parser_class=_Parser)
    bsub.required = True
    r = bsub.add_parser("run", help="generate instances, tune every approach-model, write tables and profiles")
    r.add_argument("--variants", default="1..5", help="variant ids, e.g. '1..5' or '3,4' (default 1..5)")
    r.add_argument("--sizes", default="VS,S,M,L", help="size tags (default VS,S,M,L)")
    r.add_argument("--arch", default="MLP,CNN", help="architecture tags (default MLP,CNN)")
    r.add_argument("--seeds", type=int, default=5, help="instances per dataset (default 5)")
    r.add_argument("--budget-mult", type=int, default=200, help="IDW evaluations per parameter (default 200)")
    r.add_argument("--knn-budget-mult", type=int, help="KNN evaluations per parameter (default: --budget-mult)")
    r.add_argument("--approaches", default="sub,hybrid,meta", help="approaches (default sub,hybrid,meta)")
    r.add_argument("--models", default="idw,knn", help="models (default idw,knn)")
    r.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    r.add_argument("--jobs", type=int, default=default_jobs(), help="parallel instances (default $METADIST_JOBS or 1)")
    r.add_argument("--tau", type=float, default=DEFAULT_TAU, help=f"profile tolerance (default {DEFAULT_TAU})")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--force", action="store_true", help="overwrite existing outputs")
    r.set_defaults(func=cmd_bench_run)
    pr = bsub.add_parser("profile", help="data profile CSV (kappa, approach, fraction) from a benchmark directory")
    pr.add_argument("--in", dest="input", required=True, help="benchmark output directory")
    pr.add_argument("--tau", type=float, default=DEFAULT_TAU, help=f"relative tolerance (default {DEFAULT_TAU})")
    pr.add_argument("--metric", choices=["validation", "test"], default="validation", help="RMSE used (default validation)")
    pr.add_argument("--max-kappa", type=float, help="largest kappa (default: the IDW budget multiplier)")
    pr.add_argument("--out", required=True, help="output CSV")
    pr.add_argument("--force", action="store_true", help="overwrite an existing output file")
    pr.set_defaults(func=cmd_bench_profile)
    ac = bsub.add_parser("aggregate-curve", help="test RMSE as training points are added (IDW, fixed parameters)")
    ac.add_argument("--variants", default="1..5", help="variant ids (default 1..5)")
    ac.add_argument("--arch", default="MLP,CNN", help="architecture tags (default MLP,CNN)")
    ac.add_argument("--approaches", default="sub,hybrid,meta", help="approaches (default sub,hybrid,meta)")
    ac.add_argument("--size", default="M", help="size tag (default M)")
    ac.add_argument("--runs", type=int, default=20, help="random orders per curve (default 20)")
    ac.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    ac.add_argument("--results", help="benchmark directory whose first-seed tuned parameters are used")
    ac.add_argument("--stride", type=int, default=1, help="training-size step (default 1)")
    ac.add_argument("--out", help="output CSV (default: stdout)")
    ac.add_argument("--force", action="store_true", help="overwrite an existing output file")
    ac.set_defaults(func=cmd_bench_curve)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except CliError as exc:
        print(f"metadist: error: {exc}", file=sys.stderr)
        return exc.code
    except (GraphError, PointError) as exc:
        print(f"metadist: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
