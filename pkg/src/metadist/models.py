"""IDW regression and KNN classification over extended points.

Each model routes points to one or more sub-models:

* ``meta``: a single model under the meta distance;
* ``sub``: one model per inclusion signature, Euclidean over its variables;
* ``hybrid``: one model per value of the graph's hybrid partition variables,
  comparing only non-controlling variables included in both points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Hashable, Mapping, Sequence

import numpy as np

from .distance import CompiledDistance, DistanceConfig, Encoder, hybrid_variables
from .domain import PointError, RoleGraph, SignatureError

__all__ = [
    "Approach",
    "RouteGroup",
    "route_groups",
    "group_label",
    "LabelBinning",
    "ModelError",
    "TrainedIdw",
    "TrainedKnn",
    "fit_idw",
    "fit_knn",
    "bin_label",
    "idw_predict",
    "knn_predict",
    "idw_from_distances",
    "knn_from_distances",
    "rmse",
    "accuracy",
]


class ModelError(ValueError):
    pass


class Approach(str, Enum):
    META = "meta"
    SUB = "sub"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class LabelBinning:
    bins: int = 5
    lo: float = 0.0
    hi: float = 100.0

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("at least two bins are needed")
        if not self.lo < self.hi:
            raise ValueError("empty binning range")


def bin_label(b: LabelBinning | int, score: float) -> int:
    """Uniform bins over [lo, hi]; the last bin is closed."""
    if isinstance(b, int):
        b = LabelBinning(b)
    if not (b.lo <= score <= b.hi):
        raise ValueError(f"score {score} outside [{b.lo}, {b.hi}]")
    return min(int(math.floor((score - b.lo) * b.bins / (b.hi - b.lo))), b.bins - 1)


def rmse(predictions: Sequence[float], targets: Sequence[float]) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} targets")
    if p.size == 0:
        raise ValueError("rmse of an empty sample")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(labels)} labels")
    if not labels:
        raise ValueError("accuracy of an empty sample")
    return sum(int(a) == int(b) for a, b in zip(predictions, labels)) / len(labels)


# --------------------------------------------------------------- kernels
def idw_from_distances(D: np.ndarray, y: np.ndarray, q: float = 2.0) -> np.ndarray:
    """Shepard interpolation from a (queries x train) distance matrix."""
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    if D.shape[0] == 0:
        return np.empty(0)
    finite = np.isfinite(D)
    if not finite.any(axis=1).all():
        raise ModelError("every training point lies at infinite distance")
    hit = D == 0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        W = np.where(finite & ~hit, D, 1.0) ** -q
        W[~finite] = 0.0
        s = W.sum(axis=1)
        out = (W @ y) / s
    bad = ~(np.isfinite(s) & (s > 0))
    if bad.any():
        # weights overflow or underflow: fall back to the nearest points
        for i in np.flatnonzero(bad):
            near = D[i] == D[i].min()
            out[i] = y[near].mean()
    hits = hit.any(axis=1)
    if hits.any():
        out[hits] = (hit[hits] @ y) / hit[hits].sum(axis=1)
    return out


def knn_from_distances(D: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Majority vote among the ``k`` nearest; ties by summed distance, then label.

    Distance ties at the K-th rank keep the earlier training index.
    """
    D = np.asarray(D, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if k < 1 or k > D.shape[1]:
        raise ModelError(f"K={k} needs between 1 and {D.shape[1]} training points")
    if D.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    near = np.argsort(D, axis=1, kind="stable")[:, :k]
    lab = labels[near]
    dist = np.take_along_axis(D, near, axis=1)
    uniq = np.unique(lab)
    match = lab[:, :, None] == uniq[None, None, :]
    counts = match.sum(axis=1)
    with np.errstate(invalid="ignore"):
        sums = np.where(match, dist[:, :, None], 0.0).sum(axis=1)
    sums = np.where(counts == counts.max(axis=1, keepdims=True), sums, np.inf)
    # argmin returns the first minimum, i.e. the smaller label on exact ties
    choice = np.argmin(np.where(np.isnan(sums), np.inf, sums), axis=1)
    tied_inf = np.isinf(sums[np.arange(len(sums)), choice])
    if tied_inf.any():
        # every candidate sum is infinite: smallest label among the most frequent
        best = counts == counts.max(axis=1, keepdims=True)
        choice[tied_inf] = np.argmax(best[tied_inf], axis=1)
    return uniq[choice]


# --------------------------------------------------------------- routing
def _route_keys(g: RoleGraph, approach: Approach, X: np.ndarray) -> list[Hashable]:
    if approach is Approach.META:
        return [None] * len(X)
    if approach is Approach.SUB:
        sigs = {s.included: s.index for s in g.enumerate_signatures()}
        names = g.names
        keys = []
        for row in X:
            inc = frozenset(n for n, x in zip(names, row) if not math.isnan(x))
            if inc not in sigs:
                raise SignatureError(f"no signature includes exactly {sorted(inc)}")
            keys.append(sigs[inc])
        return keys
    cols = [g.names.index(n) for n in g.hybrid_partition]
    return [tuple(float(row[c]) for c in cols) for row in X]


@dataclass(frozen=True)
class RouteGroup:
    """One routed sub-model: its key, a readable label, and tunable variables."""

    key: Hashable
    label: str
    variables: tuple[str, ...]
    excludable: tuple[str, ...]


def _partition_key(g: RoleGraph, env: Mapping[str, Any]) -> tuple[float, ...]:
    enc = Encoder(g)
    return tuple(enc.code(n, env[n]) for n in g.hybrid_partition)


def route_groups(g: RoleGraph, approach: Approach | str) -> list[RouteGroup]:
    """Sub-models an approach builds on ``g``, in a deterministic order.

    ``variables`` are those whose weights matter (fixed controlling values
    are dropped for Sub; inclusion controllers are dropped for Hybrid).
    """
    approach = Approach(approach)
    if approach is Approach.META:
        return [RouteGroup(None, "all", g.names, tuple(g.excludable()))]
    if approach is Approach.SUB:
        return [
            RouteGroup(s.index, s.label(), tuple(n for n in g.names if n in s.free_variables), ())
            for s in g.enumerate_signatures()
        ]
    pv = g.hybrid_partition
    hv = hybrid_variables(g)
    if not pv:
        return [RouteGroup((), "all", hv, ())]
    seen: dict[tuple[float, ...], tuple[str, set[str]]] = {}
    for s in g.enumerate_signatures():
        for conf in s.configs:
            env = dict(conf)
            missing = [n for n in pv if n not in env]
            if missing:
                raise SignatureError(f"hybrid partition variables {missing} do not control inclusion")
            key = _partition_key(g, env)
            label = ",".join(f"{n}={env[n]}" for n in pv)
            seen.setdefault(key, (label, set()))[1].update(s.included)
    return [
        RouteGroup(k, label, tuple(n for n in hv if n in inc), ())
        for k, (label, inc) in seen.items()
    ]


def group_label(g: RoleGraph, approach: Approach | str, key: Hashable) -> str:
    for grp in route_groups(g, approach):
        if grp.key == key:
            return grp.label
    return str(key)


def _distance_for(g: RoleGraph, cfg: DistanceConfig, approach: Approach, key: Hashable) -> CompiledDistance:
    if approach is Approach.META:
        return CompiledDistance(g, cfg, mode="meta")
    if approach is Approach.SUB:
        sig = g.enumerate_signatures()[key]
        return CompiledDistance(g, cfg, variables=sig.included, mode="meta", p=2.0)
    return CompiledDistance(g, cfg, mode="hybrid")


@dataclass
class _Routed:
    graph: RoleGraph
    config: DistanceConfig
    approach: Approach
    X: np.ndarray
    groups: dict[Hashable, np.ndarray] = field(default_factory=dict)
    distances: dict[Hashable, CompiledDistance] = field(default_factory=dict)

    @classmethod
    def build(cls, g: RoleGraph, cfg: DistanceConfig, approach: Approach | str, X: np.ndarray,
              group_configs: Mapping[Hashable, DistanceConfig] | None = None) -> _Routed:
        approach = Approach(approach)
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(g.names) or len(X) == 0:
            raise ModelError("training data must be a nonempty (n, |V|) array")
        keys = _route_keys(g, approach, X)
        order: dict[Hashable, list[int]] = {}
        for i, k in enumerate(keys):
            order.setdefault(k, []).append(i)
        r = cls(g, cfg, approach, X)
        for k, idx in order.items():
            r.groups[k] = np.array(idx, dtype=np.int64)
            r.distances[k] = _distance_for(g, (group_configs or {}).get(k, cfg), approach, k)
        return r

    def split(self, Q: np.ndarray) -> dict[Hashable, np.ndarray]:
        keys = _route_keys(self.graph, self.approach, Q)
        out: dict[Hashable, list[int]] = {}
        for i, k in enumerate(keys):
            out.setdefault(k, []).append(i)
        return {k: np.array(v, dtype=np.int64) for k, v in out.items()}


def _encode(g: RoleGraph, points: Sequence[Mapping[str, Any]] | np.ndarray, validate: bool) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.ascontiguousarray(points, dtype=np.float64)
    if validate:
        for xb in points:
            problems = g.check_extended(xb)
            if problems:
                raise PointError("invalid extended point: " + "; ".join(problems))
    return Encoder(g).encode_many(points)


class _Trained:
    def __init__(self, g, cfg, approach, points, values, validate, group_configs=None):
        X = _encode(g, points, validate)
        self.routed = _Routed.build(g, cfg, approach, X, group_configs)
        self.values = np.asarray(values)
        if self.values.shape != (len(X),):
            raise ModelError("one target per training point is required")

    @property
    def graph(self) -> RoleGraph:
        return self.routed.graph

    @property
    def approach(self) -> Approach:
        return self.routed.approach

    def group_sizes(self) -> dict[Hashable, int]:
        return {k: len(v) for k, v in self.routed.groups.items()}

    def _predict(self, points, fallback: bool, validate: bool, fn, default):
        Q = _encode(self.graph, points, validate)
        out = np.empty(len(Q), dtype=self.values.dtype)
        flagged = np.zeros(len(Q), dtype=bool)
        for key, qi in self.routed.split(Q).items():
            ti = self.routed.groups.get(key)
            if ti is None:
                if not fallback:
                    raise ModelError(f"no training data routed to {self._describe(key)}")
                out[qi] = default
                flagged[qi] = True
                continue
            D = self.routed.distances[key].pairwise(Q[qi], self.routed.X[ti])
            out[qi] = fn(D, self.values[ti])
        return out, flagged

    def _describe(self, key: Hashable) -> str:
        if self.approach is Approach.SUB:
            return f"subproblem {self.graph.enumerate_signatures()[key].label()}"
        if self.approach is Approach.HYBRID:
            return f"partition {key}"
        return "the model"

    def __len__(self) -> int:
        return len(self.values)


class TrainedIdw(_Trained):
    """Inverse distance weighting with exponent ``q``."""

    def __init__(self, g: RoleGraph, cfg: DistanceConfig, approach: Approach | str, points, targets, q: float = 2.0,
                 *, validate: bool = True, group_configs: Mapping[Hashable, DistanceConfig] | None = None):
        if not q > 0:
            raise ModelError("IDW exponent must be positive")
        super().__init__(g, cfg, approach, points, np.asarray(targets, dtype=float), validate, group_configs)
        if not np.all(np.isfinite(self.values)):
            raise ModelError("IDW targets must be finite")
        self.q = float(q)

    def predict(self, points, *, fallback: bool = False, validate: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Predictions and a flag array marking rows answered with the global mean.

        Without ``fallback`` an unseen route raises :class:`ModelError`.
        """
        return self._predict(points, fallback, validate, lambda D, y: idw_from_distances(D, y, self.q),
                             float(self.values.mean()))


class TrainedKnn(_Trained):
    def __init__(self, g: RoleGraph, cfg: DistanceConfig, approach: Approach | str, points, labels, k: int = 1,
                 *, validate: bool = True, group_configs: Mapping[Hashable, DistanceConfig] | None = None):
        super().__init__(g, cfg, approach, points, np.asarray(labels, dtype=np.int64), validate, group_configs)
        self.k = int(k)
        if self.k < 1:
            raise ModelError("K must be at least 1")

    def predict(self, points, *, fallback: bool = False, clamp_k: bool = False,
                validate: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Labels and fallback flags; unseen routes get the global majority label.

        ``clamp_k`` lowers K to the routed training size instead of raising.
        """
        def vote(D, lab):
            k = min(self.k, D.shape[1]) if clamp_k else self.k
            return knn_from_distances(D, lab, k)

        vals, counts = np.unique(self.values, return_counts=True)
        majority = int(vals[np.argmax(counts)])
        return self._predict(points, fallback, validate, vote, majority)


def fit_idw(g, cfg, approach, points, targets, q: float = 2.0) -> TrainedIdw:
    return TrainedIdw(g, cfg, approach, points, targets, q)


def fit_knn(g, cfg, approach, points, labels, k: int = 1) -> TrainedKnn:
    return TrainedKnn(g, cfg, approach, points, labels, k)


def idw_predict(m: TrainedIdw, xbar: Mapping[str, Any]) -> float:
    return float(m.predict([xbar])[0][0])


def knn_predict(m: TrainedKnn, xbar: Mapping[str, Any]) -> int:
    return int(m.predict([xbar])[0][0])
