"""Included-excluded, meta, induced, Sub and Hybrid distances.

Per-variable distances are scaled by a weight ``w > 0``. For an excludable
variable, comparing an included value with ``EXC`` costs ``theta``, which
must be at least half the weighted diameter of the variable's included
values; configs store ``theta`` as a nonnegative offset above that bound so
that any offset yields a valid metric.

Two evaluation paths exist: the dict-based functions below (one pair at a
time, used as the reference) and :class:`CompiledDistance`, which encodes
points into arrays for the vectorized kernels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .domain import PointError, RoleGraph, SignatureError, VariableKind
from .valuesets import EXC, CatSet

__all__ = [
    "ConfigError",
    "DistanceConfig",
    "Encoder",
    "CompiledDistance",
    "one_dim_distance",
    "theta_lower_bound",
    "theta",
    "inc_exc_distance",
    "meta_distance",
    "induced_distance",
    "sub_distance",
    "hybrid_distance",
    "hybrid_variables",
    "p_norm",
]


class ConfigError(ValueError):
    pass


def _parse_p(p: Any) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return math.inf
        p = float(p)
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ConfigError(f"order p must be >= 1 or inf, got {p}")
    return p


@dataclass(frozen=True)
class DistanceConfig:
    """Weights, theta offsets, order p and categorical matrices.

    Missing weights default to 1 and missing offsets to 0. For categorical
    variables the weight is the scale of the indicator (or matrix) distance.
    """

    weights: Mapping[str, float] = field(default_factory=dict)
    theta_offsets: Mapping[str, float] = field(default_factory=dict)
    p: float = 2.0
    matrices: Mapping[str, tuple[tuple[float, ...], ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "p", _parse_p(self.p))
        object.__setattr__(self, "weights", {str(k): float(v) for k, v in self.weights.items()})
        object.__setattr__(self, "theta_offsets", {str(k): float(v) for k, v in self.theta_offsets.items()})
        object.__setattr__(
            self, "matrices", {str(k): tuple(tuple(float(x) for x in row) for row in m) for k, m in self.matrices.items()}
        )
        for k, w in self.weights.items():
            if not (w > 0 and math.isfinite(w)):
                raise ConfigError(f"weight of {k!r} must be positive and finite, got {w}")
        for k, t in self.theta_offsets.items():
            if not t >= 0:
                raise ConfigError(f"theta offset of {k!r} must be >= 0, got {t}")
        for k, m in self.matrices.items():
            _check_matrix(k, m)

    def weight(self, v: str) -> float:
        return self.weights.get(v, 1.0)

    def offset(self, v: str) -> float:
        return self.theta_offsets.get(v, 0.0)

    def replace(self, **changes: Any) -> DistanceConfig:
        data = {"weights": self.weights, "theta_offsets": self.theta_offsets, "p": self.p, "matrices": self.matrices}
        data.update(changes)
        return DistanceConfig(**data)

    # serialization ----------------------------------------------------
    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> DistanceConfig:
        weights = dict(data.get("weights", {}))
        matrices = {}
        for var, spec in data.get("categorical", {}).items():
            if "matrix" in spec:
                matrices[var] = spec["matrix"]
                if "scale" in spec:
                    weights.setdefault(var, spec["scale"])
            elif "scale" in spec:
                if var in weights and float(weights[var]) != float(spec["scale"]):
                    raise ConfigError(f"{var!r}: categorical scale conflicts with its weight")
                weights[var] = spec["scale"]
            else:
                raise ConfigError(f"categorical spec of {var!r} needs 'scale' or 'matrix'")
        try:
            return cls(weights, dict(data.get("theta_offsets", {})), data.get("p", 2.0), matrices)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed distance config: {exc}") from None

    def to_dict(self, g: RoleGraph | None = None) -> dict[str, Any]:
        """JSON-ready dict. With a graph, categorical weights are written as scales
        and absolute thetas are added for reference."""
        weights = dict(self.weights)
        categorical: dict[str, Any] = {}
        if g is not None:
            for v in g.names:
                if g.var[v].kind is VariableKind.CATEGORICAL and v in weights:
                    categorical[v] = {"scale": weights.pop(v)}
        for v, m in self.matrices.items():
            categorical.setdefault(v, {})["matrix"] = [list(r) for r in m]
        out: dict[str, Any] = {
            "p": "inf" if math.isinf(self.p) else self.p,
            "weights": weights,
            "theta_offsets": dict(self.theta_offsets),
        }
        if categorical:
            out["categorical"] = categorical
        if g is not None:
            out["thetas"] = {v: _json_num(theta(g, self, v)) for v in g.excludable()}
        return out

    @classmethod
    def load(cls, path: str | Path) -> DistanceConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _json_num(x: float):
    return "inf" if math.isinf(x) else x


def _check_matrix(name: str, m: Sequence[Sequence[float]]) -> None:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ConfigError(f"{name!r}: categorical matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=0):
        raise ConfigError(f"{name!r}: categorical matrix must be symmetric")
    if np.any(np.diag(a) != 0):
        raise ConfigError(f"{name!r}: categorical matrix needs a zero diagonal")
    off = a[~np.eye(len(a), dtype=bool)]
    if np.any(off <= 0) or not np.all(np.isfinite(off)):
        raise ConfigError(f"{name!r}: off-diagonal entries must be positive and finite")
    # a[i, j] <= a[i, k] + a[k, j]
    if np.any(a[:, None, :] > a[:, :, None] + a[None, :, :] + 1e-12):
        raise ConfigError(f"{name!r}: categorical matrix violates the triangle inequality")


def _labels(g: RoleGraph, v: str) -> tuple[str, ...]:
    base = g.var[v].universal
    for m in base.parts():
        if isinstance(m, CatSet):
            return m.labels
    raise ConfigError(f"{v!r} has no categorical labels")


def _matrix_for(g: RoleGraph, cfg: DistanceConfig, v: str) -> tuple[tuple[float, ...], ...] | None:
    m = cfg.matrices.get(v)
    if m is not None and len(m) != len(_labels(g, v)):
        raise ConfigError(f"{v!r}: matrix size {len(m)} does not match {len(_labels(g, v))} labels")
    return m


def one_dim_distance(g: RoleGraph, cfg: DistanceConfig, v: str, u: Any, w: Any) -> float:
    """Weighted distance between two included values of ``v``."""
    if u is EXC or w is EXC:
        raise PointError(f"one-dimensional distance of {v!r} got EXC")
    var = g.var[v]
    for val in (u, w):
        if not var.universal.contains(val):
            raise PointError(f"{v}={val!r} is outside its universal set")
    weight = cfg.weight(v)
    if var.kind is VariableKind.CATEGORICAL:
        if u == w:
            return 0.0
        m = _matrix_for(g, cfg, v)
        if m is None:
            return weight
        labels = _labels(g, v)
        return weight * m[labels.index(u)][labels.index(w)]
    return weight * abs(float(u) - float(w))


def _diameter(g: RoleGraph, cfg: DistanceConfig, v: str) -> float:
    var = g.var[v]
    if var.kind is VariableKind.CATEGORICAL:
        labels = _labels(g, v)
        if len(labels) < 2:
            return 0.0
        m = _matrix_for(g, cfg, v)
        return 1.0 if m is None else max(max(row) for row in m)
    lo, hi = var.universal.hull()
    return hi - lo


def theta_lower_bound(g: RoleGraph, cfg: DistanceConfig, v: str) -> float:
    """Half the weighted diameter of the included values of ``v`` (may be inf)."""
    if not g.var[v].excludable:
        raise ConfigError(f"{v!r} is not excludable")
    return cfg.weight(v) * _diameter(g, cfg, v) / 2.0


def theta(g: RoleGraph, cfg: DistanceConfig, v: str) -> float:
    """Absolute theta of ``v``: lower bound plus the configured offset."""
    t = theta_lower_bound(g, cfg, v) + cfg.offset(v)
    if not t > 0:
        raise ConfigError(f"theta of {v!r} must be positive; set a positive offset")
    return t


def absolute_thetas_to_offsets(g: RoleGraph, cfg: DistanceConfig, thetas: Mapping[str, float]) -> DistanceConfig:
    offsets = dict(cfg.theta_offsets)
    for v, t in thetas.items():
        lb = theta_lower_bound(g, cfg, v)
        if t < lb:
            raise ConfigError(f"theta of {v!r} is {t}, below its lower bound {lb}")
        offsets[v] = 0.0 if math.isinf(lb) else t - lb
    return cfg.replace(theta_offsets=offsets)


def inc_exc_distance(g: RoleGraph, cfg: DistanceConfig, v: str, u: Any, w: Any) -> float:
    if u is EXC and w is EXC:
        return 0.0
    if u is EXC or w is EXC:
        if not g.var[v].excludable:
            raise PointError(f"{v!r} is never excluded")
        return theta(g, cfg, v)
    return one_dim_distance(g, cfg, v, u, w)


def p_norm(values: Iterable[float], p: float) -> float:
    vals = list(values)
    if not vals:
        return 0.0
    if math.isinf(p):
        return max(vals)
    if any(math.isinf(x) for x in vals):
        return math.inf
    if p == 1:
        return math.fsum(vals)
    if p == 2:
        return math.sqrt(math.fsum(x * x for x in vals))
    return math.fsum(x**p for x in vals) ** (1.0 / p)


def _require_extended(g: RoleGraph, *points: Mapping[str, Any]) -> None:
    for xb in points:
        problems = g.check_extended(xb)
        if problems:
            raise PointError("invalid extended point: " + "; ".join(problems))


def meta_distance(g: RoleGraph, cfg: DistanceConfig, xb: Mapping[str, Any], yb: Mapping[str, Any], *, check: bool = True) -> float:
    if check:
        _require_extended(g, xb, yb)
    return p_norm((inc_exc_distance(g, cfg, v, xb[v], yb[v]) for v in g.names), cfg.p)


def induced_distance(g: RoleGraph, cfg: DistanceConfig, x: Mapping[str, Any], y: Mapping[str, Any]) -> float:
    return meta_distance(g, cfg, g.extend(x), g.extend(y), check=False)


def sub_distance(g: RoleGraph, cfg: DistanceConfig, xb: Mapping[str, Any], yb: Mapping[str, Any], *, check: bool = True) -> float:
    """Euclidean distance inside one signature; differing signatures raise."""
    if check:
        _require_extended(g, xb, yb)
    sx, sy = g.signature_of(xb), g.signature_of(yb)
    if sx.index != sy.index:
        raise SignatureError(f"points belong to different subproblems ({sx.label()} vs {sy.label()})")
    return p_norm((one_dim_distance(g, cfg, v, xb[v], yb[v]) for v in g.names if v in sx.included), 2.0)


def hybrid_variables(g: RoleGraph) -> tuple[str, ...]:
    """Variables a shared-variable distance compares.

    Inclusion controllers act as dimensional variables: they pick which
    variables exist but are not compared themselves.
    """
    ctrl = set(g.inclusion_controllers())
    return tuple(n for n in g.names if n not in ctrl)


def hybrid_distance(g: RoleGraph, cfg: DistanceConfig, xb: Mapping[str, Any], yb: Mapping[str, Any], *, check: bool = True) -> float:
    """p-norm over the compared variables included in both points (a pseudo-metric)."""
    if check:
        _require_extended(g, xb, yb)
    shared = [v for v in hybrid_variables(g) if xb[v] is not EXC and yb[v] is not EXC]
    return p_norm((one_dim_distance(g, cfg, v, xb[v], yb[v]) for v in shared), cfg.p)


class Encoder:
    """Encode extended points as float rows: NaN for EXC, label index for categories."""

    def __init__(self, g: RoleGraph):
        self.graph = g
        self.names = g.names
        self.column = {n: i for i, n in enumerate(self.names)}
        self._labels = {n: _labels(g, n) for n in self.names if g.var[n].kind is VariableKind.CATEGORICAL}
        self._index = {n: {lab: i for i, lab in enumerate(labs)} for n, labs in self._labels.items()}

    def code(self, name: str, value: Any) -> float:
        """Encoded form of one value."""
        if value is EXC:
            return math.nan
        if name in self._index:
            return float(self._index[name][value])
        return float(value)

    def encode(self, xb: Mapping[str, Any]) -> np.ndarray:
        row = np.empty(len(self.names), dtype=np.float64)
        for i, n in enumerate(self.names):
            val = xb[n]
            if val is EXC:
                row[i] = np.nan
            elif n in self._index:
                row[i] = self._index[n][val]
            else:
                row[i] = float(val)
        return row

    def encode_many(self, points: Iterable[Mapping[str, Any]]) -> np.ndarray:
        rows = [self.encode(p) for p in points]
        if not rows:
            return np.empty((0, len(self.names)), dtype=np.float64)
        return np.ascontiguousarray(np.vstack(rows))

    def decode(self, row: Sequence[float]) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for i, n in enumerate(self.names):
            x = row[i]
            if math.isnan(x):
                out[n] = EXC
            elif n in self._labels:
                out[n] = self._labels[n][int(x)]
            elif self.graph.var[n].kind is VariableKind.INTEGER:
                out[n] = int(x)
            else:
                out[n] = float(x)
        return out


class CompiledDistance:
    """Array form of a distance over a subset of variables.

    ``mode`` is ``"meta"`` (theta for one-sided exclusion) or ``"hybrid"``
    (coordinates with any EXC are skipped; by default only
    :func:`hybrid_variables` are used). Sub distances use ``"meta"`` with
    p=2 over a signature's variables, where no EXC can occur.
    """

    def __init__(
        self,
        g: RoleGraph,
        cfg: DistanceConfig,
        variables: Iterable[str] | None = None,
        mode: str = "meta",
        p: float | None = None,
        backend=None,
    ):
        if mode not in ("meta", "hybrid"):
            raise ValueError(f"unknown distance mode {mode!r}")
        self.graph, self.cfg, self.mode = g, cfg, mode
        if variables is None:
            variables = hybrid_variables(g) if mode == "hybrid" else g.names
        names = [n for n in g.names if n in set(variables)]
        self.variables = tuple(names)
        self.p = cfg.p if p is None else _parse_p(p)
        self.backend = backend or kernels.backend
        col = {n: i for i, n in enumerate(g.names)}
        self.cols = np.array([col[n] for n in names], dtype=np.int64)
        kinds, weights, thetas, offs, sizes = [], [], [], [], []
        blocks: list[float] = []
        diam, excl = [], []
        for n in names:
            var = g.var[n]
            weights.append(cfg.weight(n))
            thetas.append(theta(g, cfg, n) if var.excludable and mode == "meta" else 0.0)
            excl.append(var.excludable and mode == "meta")
            diam.append(_diameter(g, cfg, n) if var.excludable else 0.0)
            if var.kind is VariableKind.CATEGORICAL:
                m = _matrix_for(g, cfg, n)
                if m is None:
                    kinds.append(1)
                    offs.append(0)
                    sizes.append(0)
                else:
                    kinds.append(2)
                    offs.append(len(blocks))
                    sizes.append(len(m))
                    blocks.extend(x for row in m for x in row)
            else:
                kinds.append(0)
                offs.append(0)
                sizes.append(0)
        self._diam = np.array(diam, dtype=np.float64)
        self._excl = np.array(excl, dtype=bool)
        self.kinds = np.array(kinds, dtype=np.int32)
        self.weights = np.array(weights, dtype=np.float64)
        self.thetas = np.array(thetas, dtype=np.float64)
        self.cat = np.array(blocks or [0.0], dtype=np.float64)
        self.cat_off = np.array(offs, dtype=np.int64)
        self.cat_size = np.array(sizes, dtype=np.int64)
        if math.isinf(self.p):
            self.pmode = 3
        elif self.p == 1:
            self.pmode = 0
        elif self.p == 2:
            self.pmode = 1
        else:
            self.pmode = 2

    def reweighted(self, weights: np.ndarray, offsets: np.ndarray) -> CompiledDistance:
        """Copy with new per-column weights and theta offsets (aligned with ``variables``).

        Categorical matrices are kept; only their scale changes.
        """
        w = np.asarray(weights, dtype=np.float64)
        t = np.asarray(offsets, dtype=np.float64)
        if np.any(~(w > 0)) or np.any(~(t >= 0)):
            raise ConfigError("weights must be positive and theta offsets nonnegative")
        out = object.__new__(CompiledDistance)
        out.__dict__.update(self.__dict__)
        out.weights = np.ascontiguousarray(w)
        with np.errstate(invalid="ignore"):
            th = np.where(self._excl, w * self._diam / 2.0 + t, 0.0)
        if np.any(self._excl & ~(th > 0)):
            raise ConfigError("theta must be positive; set a positive offset")
        out.thetas = np.ascontiguousarray(th)
        return out

    def _args(self):
        return (self.cols, self.kinds, self.weights, self.thetas, self.cat, self.cat_off, self.cat_size,
                self.pmode, float(self.p), int(self.mode == "hybrid"))

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.ascontiguousarray(A, dtype=np.float64)
        B = np.ascontiguousarray(B, dtype=np.float64)
        return self.backend.pairwise(A, B, *self._args())

    def rowwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.ascontiguousarray(A, dtype=np.float64)
        B = np.ascontiguousarray(B, dtype=np.float64)
        if A.shape != B.shape:
            raise ValueError("rowwise distances need equally shaped inputs")
        return self.backend.rowwise(A, B, *self._args())
