"""Uniform random points of a role graph's domain."""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from .domain import RoleGraph, Signature, VariableKind
from .valuesets import EXC, CatSet, ExcOnly, Interval, IntRange, IntSet, Union, ValueSet, iter_members


def sample_value(s: ValueSet, kind: VariableKind, rng: np.random.Generator) -> Any:
    """A value drawn from ``s``; unions pick a member first (EXC is a member like any other)."""
    members = list(iter_members(s)) if isinstance(s, Union) else [s]
    m = members[int(rng.integers(len(members)))] if len(members) > 1 else members[0]
    if isinstance(m, ExcOnly):
        return EXC
    if isinstance(m, Interval):
        if m.lo == m.hi:
            return float(m.lo)
        if math.isinf(m.lo) or math.isinf(m.hi):
            raise ValueError("cannot sample uniformly from an unbounded interval")
        while True:
            x = float(m.lo + (m.hi - m.lo) * rng.random())
            if (x > m.lo or not m.open_lo) and (x < m.hi or not m.open_hi):
                return x
    if isinstance(m, IntRange):
        return int(rng.integers(m.lo, m.hi + 1))
    if isinstance(m, IntSet):
        return int(m.items[int(rng.integers(len(m.items)))])
    if isinstance(m, CatSet):
        return m.labels[int(rng.integers(len(m.labels)))]
    raise TypeError(f"cannot sample from {m!r}")


def sample_extended(g: RoleGraph, rng: np.random.Generator, signature: Signature | None = None) -> dict[str, Any]:
    """Random extended point, built in topological order from restricted sets.

    With ``signature`` the inclusion-controlling variables follow one of its
    configurations (chosen uniformly).
    """
    fixed: dict[str, Any] = {}
    if signature is not None and signature.configs:
        fixed = dict(signature.configs[int(rng.integers(len(signature.configs)))])
    out: dict[str, Any] = {}
    for v in g.topological_order():
        if v in fixed:
            out[v] = fixed[v]
            continue
        rs = g.restricted_set(v, {p: out[p] for p in g.parents(v)})
        out[v] = sample_value(rs, g.var[v].kind, rng)
    return {n: out[n] for n in g.names}


def sample_point(g: RoleGraph, rng: np.random.Generator, signature: Signature | None = None) -> dict[str, Any]:
    return g.project(sample_extended(g, rng, signature))
