"""Derivative-free tuning of distance and model parameters.

The budget is ``multiplier * n`` objective calls, where ``n`` is the size of
the tuned parameter space. The first ``ceil(0.33 * budget)`` calls go to a
Latin hypercube sample. The rest go to a generalized pattern search started
from the best sample, restarted from seeded random points whenever its mesh
collapses, so exactly ``budget`` calls are made.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from .distance import CompiledDistance, DistanceConfig, _diameter
from .domain import RoleGraph
from .models import (
    Approach,
    _Routed,
    idw_from_distances,
    knn_from_distances,
    route_groups,
)
from .rng import stream

__all__ = [
    "Dimension",
    "ParameterSpace",
    "TuneResult",
    "InstanceData",
    "TuneError",
    "parameter_count",
    "build_space",
    "lhs_sample",
    "lhs_count",
    "pattern_search",
    "tune",
    "Evaluator",
    "W_BOUNDS",
    "K_MAX",
    "MIN_MESH",
]

W_BOUNDS = (1e-3, 1e3)
K_MAX = 25
MIN_MESH = 1e-9
INITIAL_MESH = 0.25


class TuneError(ValueError):
    pass


@dataclass(frozen=True)
class Dimension:
    name: str
    lo: float
    hi: float
    integer: bool = False
    log: bool = False

    def __post_init__(self):
        if not (self.lo < self.hi or (self.integer and self.lo == self.hi)):
            raise ValueError(f"dimension {self.name!r}: need lo < hi, got [{self.lo}, {self.hi}]")
        if self.log and self.lo <= 0:
            raise ValueError(f"dimension {self.name!r}: log scale needs lo > 0")

    def from_unit(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        if self.log:
            a, b = math.log(self.lo), math.log(self.hi)
            return min(max(math.exp(a + u * (b - a)), self.lo), self.hi)
        x = self.lo + u * (self.hi - self.lo)
        if self.integer:
            # equal-width bins per integer value keep LHS strata meaningful
            width = self.hi - self.lo + 1
            return float(min(int(self.lo + math.floor(u * width)), int(self.hi)))
        return min(max(x, self.lo), self.hi)

    def to_unit(self, x: float) -> float:
        if self.log:
            a, b = math.log(self.lo), math.log(self.hi)
            return (math.log(x) - a) / (b - a)
        if self.integer:
            width = self.hi - self.lo + 1
            return min((x - self.lo + 0.5) / width, 1.0)
        return (x - self.lo) / (self.hi - self.lo)


@dataclass(frozen=True)
class ParameterSpace:
    dims: tuple[Dimension, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("duplicate dimension names")

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    def from_unit(self, u: Sequence[float]) -> np.ndarray:
        return np.array([d.from_unit(float(x)) for d, x in zip(self.dims, u)])

    def to_unit(self, x: Sequence[float]) -> np.ndarray:
        return np.array([d.to_unit(float(v)) for d, v in zip(self.dims, x)])

    def contains(self, x: Sequence[float]) -> bool:
        return all(d.lo <= v <= d.hi and (not d.integer or float(v).is_integer()) for d, v in zip(self.dims, x))

    def to_dict(self) -> list[dict[str, Any]]:
        return [
            {"name": d.name, "lo": d.lo, "hi": d.hi, "integer": d.integer, "scale": "log" if d.log else "linear"}
            for d in self.dims
        ]


@dataclass
class TuneResult:
    """Outcome of a tuning run.

    ``trace`` holds one ``(k, objective, test)`` record per improvement of the
    best-so-far objective; ``k`` is the 1-based evaluation index.
    """

    best: np.ndarray
    best_objective: float
    trace: list[tuple[int, float, float | None]]
    evaluations: int
    budget: int
    lhs_evaluations: int = 0
    search_evaluations: int = 0
    restarts: int = 0
    names: tuple[str, ...] = ()
    best_config: dict[str, Any] = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    def best_params(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.best)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "budget": self.budget,
            "evaluations": self.evaluations,
            "lhs_evaluations": self.lhs_evaluations,
            "search_evaluations": self.search_evaluations,
            "restarts": self.restarts,
            "best_objective": self.best_objective,
            "best_params": self.best_params(),
            "trace": [{"k": k, "objective": f, "test": t} for k, f, t in self.trace],
            "best_config": self.best_config,
        }


class _Counter:
    """Wraps an objective; records every call and the improvement trace."""

    def __init__(self, fn: Callable[[np.ndarray], float], budget: int, on_improve=None):
        self.fn, self.budget, self.on_improve = fn, budget, on_improve
        self.calls = 0
        self.best_x: np.ndarray | None = None
        self.best_f = math.inf
        self.trace: list[tuple[int, float, float | None]] = []
        self.history: list[float] = []

    @property
    def left(self) -> int:
        return self.budget - self.calls

    def __call__(self, x: np.ndarray) -> float:
        if self.calls >= self.budget:
            raise TuneError("evaluation budget exceeded")
        self.calls += 1
        f = float(self.fn(x))
        if math.isnan(f):
            f = math.inf
        self.history.append(f)
        if f < self.best_f:
            self.best_f, self.best_x = f, np.array(x, dtype=float)
            test = self.on_improve(x) if self.on_improve else None
            self.trace.append((self.calls, f, test))
        return f


# ------------------------------------------------------------------ LHS
def lhs_count(budget: int) -> int:
    """ceil(33% of budget) in exact integer arithmetic."""
    return (33 * int(budget) + 99) // 100


def lhs_unit(n_dims: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise ValueError("LHS needs at least one sample")
    out = np.empty((count, n_dims))
    for j in range(n_dims):
        perm = rng.permutation(count)
        out[:, j] = (perm + rng.random(count)) / count
    return out


def lhs_sample(space: ParameterSpace, count: int, seed: int | np.random.Generator) -> list[np.ndarray]:
    """Latin hypercube sample; sample ``i`` of dimension ``j`` lies in stratum ``perm_j(i)``."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(int(seed), "tuner")
    return [space.from_unit(u) for u in lhs_unit(space.n, count, rng)]


# ------------------------------------------------------------------ GPS
def _gps(f: _Counter, space: ParameterSpace, u0: np.ndarray, f0: float, rng: np.random.Generator,
         stop_at: int) -> tuple[np.ndarray, float]:
    u, fu = np.array(u0, dtype=float), f0
    mesh = INITIAL_MESH
    n = space.n
    while f.calls < stop_at and mesh >= MIN_MESH:
        improved = False
        for idx in rng.permutation(2 * n):
            j, sign = divmod(int(idx), 2)
            cand = u.copy()
            cand[j] = min(max(cand[j] + (mesh if sign == 0 else -mesh), 0.0), 1.0)
            if cand[j] == u[j]:
                continue
            fc = f(space.from_unit(cand))
            if fc < fu:
                u, fu, improved = cand, fc, True
                break
            if f.calls >= stop_at:
                break
        mesh = min(2.0 * mesh, 1.0) if improved else mesh / 2.0
    return u, fu


def pattern_search(
    objective: Callable[[np.ndarray], float],
    space: ParameterSpace,
    start: Sequence[float],
    budget: int,
    seed: int | np.random.Generator = 0,
    *,
    start_value: float | None = None,
) -> TuneResult:
    """Coordinate pattern search in the normalized box.

    Polls the 2n signed coordinate directions in a seeded order, accepts the
    first improvement, doubles the mesh after success and halves it after a
    failed poll. Stops when the budget is spent or the mesh drops below
    ``MIN_MESH``. ``start_value`` skips the evaluation of a known start.
    """
    if budget < 1:
        raise TuneError("budget must be at least 1")
    start = np.asarray(start, dtype=float)
    if not space.contains(start):
        raise TuneError("start point lies outside the parameter space")
    rng = seed if isinstance(seed, np.random.Generator) else stream(int(seed), "tuner")
    f = _Counter(objective, budget)
    if start_value is None:
        f0 = f(start)
    else:
        f0 = float(start_value)
        f.best_f, f.best_x = f0, start.copy()
    if not math.isfinite(f0):
        raise TuneError("objective is not finite at the start point")
    _gps(f, space, space.to_unit(start), f0, rng, budget)
    return TuneResult(f.best_x, f.best_f, f.trace, f.calls, budget, 0, f.calls, 0, space.names, history=f.history)


# ------------------------------------------------------- spaces & counts
def _unit_diameter(g: RoleGraph, v: str) -> float:
    d = _diameter(g, DistanceConfig(), v)
    return d if math.isfinite(d) and d > 0 else 1.0


def build_space(g: RoleGraph, approach: Approach | str, model: str = "idw", n_train: int | None = None) -> ParameterSpace:
    """Tuned dimensions: log-scaled weights, theta-offset units, and K for KNN.

    Sub and Hybrid get distinct weights per routed sub-model, named
    ``label/w:var``.
    """
    approach = Approach(approach)
    dims: list[Dimension] = []
    for grp in route_groups(g, approach):
        prefix = "" if approach is Approach.META else f"{grp.label}/"
        dims.extend(Dimension(f"{prefix}w:{v}", *W_BOUNDS, log=True) for v in grp.variables)
        dims.extend(Dimension(f"{prefix}t:{v}", 0.0, _unit_diameter(g, v)) for v in grp.excludable)
    if model == "knn":
        hi = min(K_MAX, n_train if n_train is not None else K_MAX)
        if hi < 1:
            raise TuneError("KNN needs training data")
        dims.append(Dimension("k", 1, hi, integer=True))
    elif model != "idw":
        raise TuneError(f"unknown model {model!r}")
    return ParameterSpace(tuple(dims))


def parameter_count(approach: Approach | str, g: RoleGraph) -> int:
    """Number of distance parameters (weights plus thetas) of an approach."""
    return sum(len(grp.variables) + len(grp.excludable) for grp in route_groups(g, approach))


# ------------------------------------------------------------ objective
@dataclass
class InstanceData:
    """Encoded splits of one instance (see :class:`metadist.distance.Encoder`)."""

    graph: RoleGraph
    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    X_test: np.ndarray | None = None
    y_test: np.ndarray | None = None


class Evaluator:
    """Fast objective for one (instance, approach, model).

    Routing and encoding are done once; each call only swaps the weight and
    theta arrays of the precompiled distances.
    """

    def __init__(self, data: InstanceData, approach: Approach | str, model: str = "idw", q: float = 2.0,
                 p: float = 2.0):
        self.data, self.approach, self.model, self.q = data, Approach(approach), model, float(q)
        g = data.graph
        self.base_cfg = DistanceConfig(p=p)
        self.space = build_space(g, self.approach, model, len(data.X_train))
        self.routed = _Routed.build(g, self.base_cfg, self.approach, data.X_train)
        self.val_groups = self.routed.split(np.ascontiguousarray(data.X_val, dtype=np.float64))
        self.test_groups = (
            self.routed.split(np.ascontiguousarray(data.X_test, dtype=np.float64)) if data.X_test is not None else {}
        )
        self.labels = {grp.key: grp.label for grp in route_groups(g, self.approach)}
        index = {name: i for i, name in enumerate(self.space.names)}
        self.k_index = index.get("k")
        self.slots: dict[Hashable, tuple[CompiledDistance, np.ndarray, np.ndarray]] = {}
        for key, cd in self.routed.distances.items():
            prefix = "" if self.approach is Approach.META else f"{self.labels[key]}/"
            w_idx = np.array([index.get(f"{prefix}w:{v}", -1) for v in cd.variables], dtype=np.int64)
            t_idx = np.array([index.get(f"{prefix}t:{v}", -1) for v in cd.variables], dtype=np.int64)
            self.slots[key] = (cd, w_idx, t_idx)
        y = np.asarray(data.y_train)
        if model == "idw":
            self.fallback = float(np.mean(y))
        else:
            vals, counts = np.unique(y.astype(np.int64), return_counts=True)
            self.fallback = int(vals[np.argmax(counts)])

    def _distance(self, key: Hashable, x: np.ndarray) -> CompiledDistance:
        cd, w_idx, t_idx = self.slots[key]
        w = np.where(w_idx >= 0, x[np.maximum(w_idx, 0)], 1.0)
        # theta offset is expressed in units of the weighted scale
        t = np.where(t_idx >= 0, x[np.maximum(t_idx, 0)], 0.0) * w
        return cd.reweighted(w, t)

    def predict(self, x: np.ndarray, which: str = "val") -> np.ndarray:
        X = self.data.X_val if which == "val" else self.data.X_test
        groups = self.val_groups if which == "val" else self.test_groups
        X = np.ascontiguousarray(X, dtype=np.float64)
        y_train = np.asarray(self.data.y_train)
        out = np.empty(len(X), dtype=float if self.model == "idw" else np.int64)
        k = int(x[self.k_index]) if self.k_index is not None else None
        for key, qi in groups.items():
            ti = self.routed.groups.get(key)
            if ti is None:
                out[qi] = self.fallback
                continue
            D = self._distance(key, x).pairwise(X[qi], self.routed.X[ti])
            if self.model == "idw":
                out[qi] = idw_from_distances(D, y_train[ti], self.q)
            else:
                out[qi] = knn_from_distances(D, y_train[ti].astype(np.int64), min(k, len(ti)))
        return out

    def score(self, x: np.ndarray, which: str = "val") -> float:
        """Validation (or test) RMSE for IDW; negative accuracy for KNN."""
        pred = self.predict(x, which)
        y = np.asarray(self.data.y_val if which == "val" else self.data.y_test)
        if self.model == "idw":
            return float(np.sqrt(np.mean((pred - y.astype(float)) ** 2)))
        return -float(np.mean(pred == y.astype(np.int64)))

    def __call__(self, x: np.ndarray) -> float:
        return self.score(x, "val")

    def config_dict(self, x: np.ndarray) -> dict[str, Any]:
        """Best parameters in the distance-config file format (grouped for Sub and Hybrid)."""
        g = self.data.graph
        out: dict[str, Any] = {}
        groups: dict[str, Any] = {}
        for key, (cd, w_idx, t_idx) in self.slots.items():
            weights = {v: float(x[i]) for v, i in zip(cd.variables, w_idx) if i >= 0}
            offsets = {v: float(x[i]) * weights.get(v, 1.0) for v, i in zip(cd.variables, t_idx) if i >= 0}
            cfg = DistanceConfig(weights, offsets, self.base_cfg.p if self.approach is not Approach.SUB else 2.0)
            groups[self.labels[key]] = cfg.to_dict(g)
        if self.approach is Approach.META:
            out.update(groups["all"])
        else:
            out["p"] = 2.0 if self.approach is Approach.SUB else self.base_cfg.p
            out["groups"] = groups
        out["approach"] = self.approach.value
        out["model"] = {"type": self.model}
        if self.model == "idw":
            out["model"]["q"] = self.q
        else:
            out["model"]["k"] = int(x[self.k_index])
        return out


def default_point(space: ParameterSpace) -> np.ndarray:
    """Unit weights, zero offsets, K=1 (clipped into the box)."""
    vals = []
    for d in space.dims:
        if d.name.split("/")[-1].startswith("w:"):
            vals.append(min(max(1.0, d.lo), d.hi))
        elif d.name == "k":
            vals.append(d.lo)
        else:
            vals.append(d.lo)
    return np.array(vals, dtype=float)


def tune(
    evaluator: Evaluator,
    budget_multiplier: int,
    seed: int,
    *,
    with_test: bool = True,
) -> TuneResult:
    """LHS then pattern search on the validation objective with an exact budget.

    The test metric is evaluated at every improvement of the validation
    objective (for profiles); it never drives the search.
    """
    space = evaluator.space
    budget = int(budget_multiplier) * space.n
    if budget < 1:
        raise TuneError("budget must be at least 1")
    rng = stream(seed, "tuner")
    on_improve = None
    if with_test and evaluator.data.X_test is not None and len(evaluator.data.X_test):
        on_improve = lambda x: evaluator.score(x, "test")  # noqa: E731
    f = _Counter(evaluator, budget, on_improve)
    n_lhs = lhs_count(budget)
    for x in lhs_sample(space, n_lhs, rng):
        f(x)
    lhs_calls = f.calls
    if not math.isfinite(f.best_f):
        raise TuneError("objective is not finite at any sampled point")
    u, fu = space.to_unit(f.best_x), f.best_f
    restarts = 0
    while f.left > 0:
        _gps(f, space, u, fu, rng, budget)
        if f.left > 0:
            restarts += 1
            x = space.from_unit(rng.random(space.n))
            fu = f(x)
            u = space.to_unit(x)
    if f.calls != budget:
        raise TuneError(f"budget audit failed: {f.calls} calls for budget {budget}")
    return TuneResult(
        f.best_x, f.best_f, f.trace, f.calls, budget, lhs_calls, f.calls - lhs_calls, restarts, space.names,
        evaluator.config_dict(f.best_x), f.history,
    )
