"""Datasets of scored extended points, stratified splits and CSV IO."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..distance import Encoder
from ..domain import RoleGraph, VariableKind
from ..rng import stream
from ..sampling import sample_extended
from ..valuesets import EXC
from .surrogate import surrogate_score
from .variants import ARCHITECTURES, SIZES, build_variant, signature_sizes

SPLITS = ("train", "validation", "test")
FRACTIONS = (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    graph: RoleGraph
    points: list[dict[str, Any]]
    targets: np.ndarray
    splits: list[str] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def signatures(self) -> list[int]:
        return [self.graph.signature_of(x).index for x in self.points]

    def encoded(self) -> np.ndarray:
        return Encoder(self.graph).encode_many(self.points)

    def indices(self, split: str) -> np.ndarray:
        if self.splits is None:
            raise DataError("dataset has no split assignment")
        return np.array([i for i, s in enumerate(self.splits) if s == split], dtype=np.int64)

    def subset(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        idx = self.indices(split)
        X = self.encoded()
        return X[idx], self.targets[idx]


# ----------------------------------------------------------------- splits
def largest_remainder(total: int, fractions: Sequence[Fraction] = FRACTIONS) -> list[int]:
    """Apportion ``total``; remainder ties go to the earlier share."""
    quotas = [Fraction(total) * f for f in fractions]
    out = [math.floor(q) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda j: (-(quotas[j] - out[j]), j))
    for j in order[: total - sum(out)]:
        out[j] += 1
    return out


def split_counts(group_sizes: Sequence[int], fractions: Sequence[Fraction] = FRACTIONS) -> list[list[int]]:
    """Controlled rounding of the per-group quota table.

    Column totals follow :func:`largest_remainder` on the grand total, row
    totals are the group sizes, and every cell is the floor or ceiling of its
    quota (so per-group proportions are off by less than one row).
    """
    quotas = [[Fraction(n) * f for f in fractions] for n in group_sizes]
    cells = [[math.floor(q) for q in row] for row in quotas]
    col_target = largest_remainder(sum(group_sizes), fractions)
    row_need = [n - sum(r) for n, r in zip(group_sizes, cells)]
    col_need = [t - sum(r[j] for r in cells) for j, t in enumerate(col_target)]
    can = [[quotas[i][j] != cells[i][j] for j in range(len(fractions))] for i in range(len(group_sizes))]
    used = [[False] * len(fractions) for _ in group_sizes]
    # greedy by largest fraction, then augmenting paths for what is left
    order = sorted(
        ((i, j) for i in range(len(group_sizes)) for j in range(len(fractions)) if can[i][j]),
        key=lambda ij: (-(quotas[ij[0]][ij[1]] - cells[ij[0]][ij[1]]), ij[0], ij[1]),
    )
    for i, j in order:
        if row_need[i] > 0 and col_need[j] > 0:
            used[i][j] = True
            row_need[i] -= 1
            col_need[j] -= 1
    while any(row_need):
        path = _augment(can, used, row_need, col_need)
        if path is None:
            raise DataError("no controlled rounding exists for these split sizes")
        for k, (i, j) in enumerate(path):
            used[i][j] = k % 2 == 0
        row_need[path[0][0]] -= 1
        col_need[path[-1][1]] -= 1
    return [[c + int(u) for c, u in zip(row, urow)] for row, urow in zip(cells, used)]


def _augment(can, used, row_need, col_need):
    """Alternating path: start at a needy row, end at a needy column."""
    n_rows, n_cols = len(can), len(can[0])
    for start in range(n_rows):
        if row_need[start] <= 0:
            continue
        prev: dict[tuple[str, int], tuple[tuple[str, int], tuple[int, int]] | None] = {("r", start): None}
        frontier = [("r", start)]
        while frontier:
            nxt = []
            for kind, idx in frontier:
                if kind == "r":
                    for j in range(n_cols):
                        if can[idx][j] and not used[idx][j] and ("c", j) not in prev:
                            prev[("c", j)] = (("r", idx), (idx, j))
                            if col_need[j] > 0:
                                path = []
                                node = ("c", j)
                                while prev[node] is not None:
                                    parent, cell = prev[node]
                                    path.append(cell)
                                    node = parent
                                return path[::-1]
                            nxt.append(("c", j))
                else:
                    for i in range(n_rows):
                        if used[i][idx] and ("r", i) not in prev:
                            prev[("r", i)] = (("c", idx), (i, idx))
                            nxt.append(("r", i))
            frontier = nxt
    return None


def stratified_split(groups: Sequence[int], rng: np.random.Generator) -> list[str]:
    """Assign train/validation/test per row, stratified by group id."""
    keys = sorted(set(groups))
    members = {k: [i for i, g in enumerate(groups) if g == k] for k in keys}
    counts = split_counts([len(members[k]) for k in keys])
    out = [""] * len(groups)
    for k, row in zip(keys, counts):
        idx = np.array(members[k])[rng.permutation(len(members[k]))]
        pos = 0
        for name, c in zip(SPLITS, row):
            for i in idx[pos : pos + c]:
                out[int(i)] = name
            pos += c
    return out


# --------------------------------------------------------------- sampling
def sample_dataset(variant: int, size: str, arch: str, seed: int) -> Dataset:
    """Scored points with exactly the tabulated count per signature.

    Points and surrogate noise depend only on (variant, size, arch, seed);
    no split is assigned (see :func:`assign_splits`).
    """
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    g = build_variant(variant)
    rng = stream(seed, "sampling", variant, SIZES.index(size), ARCHITECTURES.index(arch))
    points: list[dict[str, Any]] = []
    for sig in g.enumerate_signatures():
        for _ in range(signature_sizes(variant, size)[sig.index]):
            points.append(sample_extended(g, rng, sig))
    targets = np.array([surrogate_score(variant, arch, x, seed) for x in points])
    return Dataset(g, points, targets, None, {"variant": variant, "size": size, "arch": arch, "seed": seed})


def assign_splits(ds: Dataset, seed: int) -> Dataset:
    rng = stream(seed, "splits")
    return Dataset(ds.graph, ds.points, ds.targets, stratified_split(ds.signatures(), rng), dict(ds.meta))


# -------------------------------------------------------------------- CSV
def format_value(kind: VariableKind, v: Any) -> str:
    if v is EXC:
        return "EXC"
    if kind is VariableKind.CATEGORICAL:
        return str(v)
    if kind is VariableKind.INTEGER:
        return str(int(v))
    return format_float(float(v))


def format_float(x: float) -> str:
    return format(x, ".17g")


def parse_value(kind: VariableKind, text: str) -> Any:
    text = text.strip()
    if text == "EXC":
        return EXC
    if kind is VariableKind.CATEGORICAL:
        return text
    if kind is VariableKind.INTEGER:
        f = float(text)
        if not f.is_integer():
            raise DataError(f"expected an integer, got {text!r}")
        return int(f)
    return float(text)


def dataset_to_csv(ds: Dataset) -> str:
    g = ds.graph
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(g.names) + ["target"] + (["split"] if ds.splits is not None else [])
    w.writerow(header)
    for i, x in enumerate(ds.points):
        row = [format_value(g.var[n].kind, x[n]) for n in g.names] + [format_float(float(ds.targets[i]))]
        if ds.splits is not None:
            row.append(ds.splits[i])
        w.writerow(row)
    return buf.getvalue()


def write_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(dataset_to_csv(ds), encoding="utf-8")


def read_points_csv(g: RoleGraph, path: str | Path, *, require_target: bool = False) -> Dataset:
    """Read a CSV of points (header: variable names, optional ``target`` and ``split``).

    Missing variable columns and empty cells mean EXC. Points are completed
    and validated through the transfer mapping.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    unknown = [h for h in header if h not in g.var and h not in ("target", "split")]
    if unknown:
        raise DataError(f"{path}: unknown columns {unknown}")
    if require_target and "target" not in header:
        raise DataError(f"{path}: missing 'target' column")
    points, targets, splits = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{ln}: expected {len(header)} fields, got {len(row)}")
        cells = dict(zip(header, row))
        try:
            x = {n: parse_value(g.var[n].kind, cells[n]) for n in header if n in g.var and cells[n].strip() != ""}
            x = {k: v for k, v in x.items() if v is not EXC}
            xbar = g.extend(x)
            if "target" in cells:
                targets.append(float(cells["target"]))
        except ValueError as exc:
            raise DataError(f"{path}:{ln}: {exc}") from None
        if "split" in cells:
            if cells["split"] not in SPLITS:
                raise DataError(f"{path}:{ln}: unknown split {cells['split']!r}")
            splits.append(cells["split"])
        points.append(xbar)
    return Dataset(g, points, np.array(targets, dtype=float), splits if "split" in header else None)
