"""Hierarchical mixed-variable domains described by a role graph.

Variables are nodes, decree dependencies are arcs (parent -> child). The
role of a variable (meta, meta-decreed, decreed, neutral) follows from its
position in the graph. Each variable with parents carries one decree rule:
an ordered case table mapping joint conditions on parent values to the
variable's restricted set, possibly ``{EXC}``.

Points are plain dicts holding the included variables only; extended points
are total dicts over all variables with ``EXC`` for excluded ones.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

from . import expr as ex
from .valuesets import (
    EXC,
    CatSet,
    DescriptorError,
    ExcOnly,
    ExprInterval,
    Interval,
    IntRange,
    IntSet,
    Union,
    ValueSet,
    canonical,
    parse_descriptor,
    to_descriptor,
    union,
)

__all__ = [
    "VariableKind",
    "Role",
    "ArcKind",
    "Variable",
    "DecreeArc",
    "RuleCase",
    "DecreeRule",
    "Signature",
    "Violation",
    "RoleGraph",
    "GraphError",
    "PointError",
    "SignatureError",
    "validate_graph",
    "load_domain",
]

# finite ancestors with at most this many values are enumerated exhaustively
ENUM_CARDINALITY = 64
ENUM_CONFIG_LIMIT = 200_000


class VariableKind(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    CATEGORICAL = "categorical"


class Role(str, Enum):
    META = "meta"
    META_DECREED = "meta-decreed"
    DECREED = "decreed"
    NEUTRAL = "neutral"


class ArcKind(str, Enum):
    INCLUSION = "inclusion"
    VALUES = "values"
    BOTH = "both"

    @property
    def controls_inclusion(self) -> bool:
        return self is not ArcKind.VALUES


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VariableKind
    universal: ValueSet
    excludable: bool = False


@dataclass(frozen=True)
class DecreeArc:
    parent: str
    child: str
    kind: ArcKind = ArcKind.INCLUSION


@dataclass(frozen=True)
class RuleCase:
    when: tuple[tuple[str, ValueSet], ...]
    set: ValueSet

    def matches(self, values: Mapping[str, Any]) -> bool:
        return all(cond.contains(values[p]) for p, cond in self.when)


@dataclass(frozen=True)
class DecreeRule:
    child: str
    cases: tuple[RuleCase, ...]

    def condition_parents(self) -> list[str]:
        seen: list[str] = []
        for case in self.cases:
            for p, _ in case.when:
                if p not in seen:
                    seen.append(p)
        return seen


@dataclass(frozen=True)
class Signature:
    """An inclusion pattern shared by a portion of the domain.

    ``configs`` lists the assignments of inclusion-controlling variables that
    produce this pattern; ``fixed`` holds the controlling variables whose value
    is the same across all of them.
    """

    index: int
    included: frozenset[str]
    configs: tuple[tuple[tuple[str, Any], ...], ...]
    fixed: tuple[tuple[str, Any], ...]

    @property
    def free_variables(self) -> frozenset[str]:
        return self.included - {name for name, _ in self.fixed}

    def label(self) -> str:
        if not self.fixed:
            return f"sig{self.index}"
        return ",".join(f"{k}={v}" for k, v in self.fixed)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.subject}: {self.message}"


class GraphError(ValueError):
    def __init__(self, violations: list[Violation] | str):
        if isinstance(violations, str):
            violations = [Violation("invalid", "graph", violations)]
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class PointError(ValueError):
    pass


class SignatureError(ValueError):
    pass


class _Box:
    """Value range stand-in for a large-domain variable during enumeration."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        self.lo, self.hi = lo, hi


class _NotEnumerable(Exception):
    pass


_KIND_SETS = {
    VariableKind.CONTINUOUS: (Interval,),
    VariableKind.INTEGER: (IntRange, IntSet),
    VariableKind.CATEGORICAL: (CatSet,),
}


def normalize_value(kind: VariableKind, value: Any) -> Any:
    if value is EXC:
        return EXC
    if kind is VariableKind.CATEGORICAL:
        return value
    if kind is VariableKind.INTEGER:
        if isinstance(value, float) and value.is_integer():
            return int(value)
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


class RoleGraph:
    """Immutable role graph with its decree rules.

    Construction validates eagerly and raises :class:`GraphError` listing all
    violations; pass ``check=False`` to build an unchecked graph for
    :func:`validate_graph`.
    """

    def __init__(
        self,
        variables: Iterable[Variable],
        arcs: Iterable[DecreeArc] = (),
        rules: Iterable[DecreeRule] = (),
        constants: Mapping[str, Mapping[str, str]] | None = None,
        hybrid_partition: Iterable[str] | None = None,
        *,
        check: bool = True,
    ):
        self._variables: tuple[Variable, ...] = tuple(variables)
        self._arcs: tuple[DecreeArc, ...] = tuple(arcs)
        self._rules: tuple[DecreeRule, ...] = tuple(rules)
        self._constant_defs: dict[str, dict[str, str]] = {k: dict(v) for k, v in (constants or {}).items()}
        self._hybrid_partition = None if hybrid_partition is None else tuple(hybrid_partition)
        self.var: dict[str, Variable] = {}
        for v in self._variables:
            self.var.setdefault(v.name, v)
        self.names: tuple[str, ...] = tuple(self.var)
        self._decl = {n: i for i, n in enumerate(self.names)}
        self._parents: dict[str, tuple[str, ...]] = {n: () for n in self.names}
        self._children: dict[str, tuple[str, ...]] = {n: () for n in self.names}
        for a in self._arcs:
            if a.parent in self.var and a.child in self.var and a.parent != a.child:
                if a.parent not in self._parents[a.child]:
                    self._parents[a.child] += (a.parent,)
                    self._children[a.parent] += (a.child,)
        self.rule: dict[str, DecreeRule] = {}
        for r in self._rules:
            self.rule.setdefault(r.child, r)
        self._parsed: dict[str, ex.Expr] = {}
        self.constants: dict[str, float] = {}
        self._topo: tuple[str, ...] | None = None
        self._anc_cache: dict[str, frozenset[str]] = {}
        self._signatures: list[Signature] | None = None
        self._sig_index: dict[frozenset[str], int] | None = None
        if check:
            report = validate_graph(self)
            if report:
                raise GraphError(report)

    # ------------------------------------------------------------------ I/O
    @classmethod
    def from_dict(cls, data: Mapping[str, Any], *, check: bool = True) -> RoleGraph:
        try:
            variables = [
                Variable(
                    name=str(v["name"]),
                    kind=VariableKind(v["kind"]),
                    universal=parse_descriptor(v["universal"]),
                    excludable=bool(v.get("excludable", False)),
                )
                for v in data["variables"]
            ]
            arcs = [
                DecreeArc(str(a["parent"]), str(a["child"]), ArcKind(a.get("kind", "inclusion")))
                for a in data.get("arcs", [])
            ]
            rules = []
            for r in data.get("rules", []):
                cases = []
                for c in r["cases"]:
                    when = tuple((str(p), parse_descriptor(d)) for p, d in c.get("when", {}).items())
                    cases.append(RuleCase(when, parse_descriptor(c["set"])))
                rules.append(DecreeRule(str(r["child"]), tuple(cases)))
            constants = {str(c["name"]): {k: c[k] for k in c if k != "name"} for c in data.get("constants", [])}
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"malformed domain description: {exc}") from None
        return cls(variables, arcs, rules, constants, data.get("hybrid_partition"), check=check)

    @classmethod
    def load(cls, path: str | Path) -> RoleGraph:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "variables": [
                {"name": v.name, "kind": v.kind.value, "universal": to_descriptor(v.universal), "excludable": v.excludable}
                for v in self._variables
            ],
            "arcs": [{"parent": a.parent, "child": a.child, "kind": a.kind.value} for a in self._arcs],
            "rules": [
                {
                    "child": r.child,
                    "cases": [{"when": {p: to_descriptor(s) for p, s in c.when}, "set": to_descriptor(c.set)} for c in r.cases],
                }
                for r in self._rules
            ],
        }
        if self._constant_defs:
            out["constants"] = [{"name": k, **v} for k, v in self._constant_defs.items()]
        if self._hybrid_partition is not None:
            out["hybrid_partition"] = list(self._hybrid_partition)
        return out

    # ------------------------------------------------------------ structure
    @property
    def arcs(self) -> tuple[DecreeArc, ...]:
        return self._arcs

    def _require(self, v: str) -> None:
        if v not in self.var:
            raise KeyError(f"unknown variable {v!r}")

    def parents(self, v: str) -> frozenset[str]:
        self._require(v)
        return frozenset(self._parents[v])

    def children(self, v: str) -> frozenset[str]:
        self._require(v)
        return frozenset(self._children[v])

    def ancestors(self, v: str) -> frozenset[str]:
        self._require(v)
        if v not in self._anc_cache:
            out: set[str] = set()
            for p in self._parents[v]:
                out.add(p)
                out |= self.ancestors(p)
            self._anc_cache[v] = frozenset(out)
        return self._anc_cache[v]

    def role_of(self, v: str) -> Role:
        self._require(v)
        has_in = bool(self._parents[v])
        has_out = bool(self._children[v])
        if has_out:
            return Role.META_DECREED if has_in else Role.META
        return Role.DECREED if has_in else Role.NEUTRAL

    def topological_order(self) -> tuple[str, ...]:
        if self._topo is None:
            indeg = {n: len(self._parents[n]) for n in self.names}
            heap = [self._decl[n] for n in self.names if indeg[n] == 0]
            heapq.heapify(heap)
            order: list[str] = []
            while heap:
                n = self.names[heapq.heappop(heap)]
                order.append(n)
                for c in self._children[n]:
                    indeg[c] -= 1
                    if indeg[c] == 0:
                        heapq.heappush(heap, self._decl[c])
            if len(order) != len(self.names):
                raise GraphError([Violation("cycle", "graph", "decree dependencies contain a cycle")])
            self._topo = tuple(order)
        return self._topo

    def is_hierarchical(self) -> bool:
        by_arcs = len(self._arcs) > 0
        by_parents = any(self._parents[n] for n in self.names)
        by_meta = any(self.role_of(n) is Role.META for n in self.names)
        if not (by_arcs == by_parents == by_meta):
            raise GraphError("hierarchical-domain equivalences disagree")
        return by_arcs

    def excludable(self) -> list[str]:
        return [n for n in self.names if self.var[n].excludable]

    @property
    def hybrid_partition(self) -> tuple[str, ...]:
        if self._hybrid_partition is not None:
            return self._hybrid_partition
        out = []
        for n in self.names:
            v = self.var[n]
            if v.kind is VariableKind.CATEGORICAL and self.role_of(n) is Role.META:
                if any(a.parent == n and a.kind.controls_inclusion for a in self._arcs):
                    out.append(n)
        return tuple(out)

    # -------------------------------------------------------------- values
    def _expr(self, text: str) -> ex.Expr:
        if text not in self._parsed:
            self._parsed[text] = ex.parse(text)
        return self._parsed[text]

    def _match(self, v: str, values: Mapping[str, Any]) -> RuleCase:
        rule = self.rule.get(v)
        if rule is None:
            raise GraphError(f"variable {v!r} has parents but no decree rule")
        hits = [c for c in rule.cases if c.matches(values)]
        if len(hits) != 1:
            what = "no" if not hits else "more than one"
            shown = {p: values.get(p) for p in rule.condition_parents()}
            raise GraphError(f"{what} rule case of {v!r} matches parent values {shown}")
        return hits[0]

    def _lookup_number(self, values: Mapping[str, Any]):
        def lookup(name: str) -> float:
            if name in self.constants:
                return self.constants[name]
            if name not in values:
                raise ex.ExprError(f"bound expression references {name!r}, which is not available")
            val = values[name]
            if val is EXC:
                raise ex.ExprError(f"bound expression references excluded variable {name!r}")
            if isinstance(val, str):
                raise ex.ExprError(f"bound expression references categorical value {name}={val!r}")
            return float(val)

        return lookup

    def _evaluate_set(self, s: ValueSet, values: Mapping[str, Any]) -> ValueSet:
        if isinstance(s, ExprInterval):
            lookup = self._lookup_number(values)
            lo = ex.evaluate(self._expr(s.lo_expr), lookup)
            hi = ex.evaluate(self._expr(s.hi_expr), lookup)
            if lo > hi:
                raise ex.ExprError(f"bound expressions give empty interval [{lo}, {hi}]")
            return Interval(lo, hi)
        return s

    def restricted_set(self, v: str, parent_values: Mapping[str, Any] | None = None) -> ValueSet:
        """Value set of ``v`` given its parents' values (``{EXC}`` if excluded)."""
        self._require(v)
        parents = self._parents[v]
        if not parents:
            return self.var[v].universal
        parent_values = parent_values or {}
        missing = [p for p in parents if p not in parent_values]
        if missing:
            raise KeyError(f"restricted_set({v!r}) needs values for parents {missing}")
        case = self._match(v, parent_values)
        return self._evaluate_set(case.set, parent_values)

    def universal_set(self, v: str) -> ValueSet:
        self._require(v)
        return self.var[v].universal

    # --------------------------------------------------------------- points
    def extend(self, x: Mapping[str, Any]) -> dict[str, Any]:
        """Transfer mapping: add ``EXC`` for every excluded variable."""
        unknown = [k for k in x if k not in self.var]
        if unknown:
            raise PointError(f"unknown variables {unknown}")
        out: dict[str, Any] = {}
        for v in self.topological_order():
            rs = self._restricted_for_point(v, out)
            if rs.is_exc_only():
                if v in x:
                    raise PointError(f"variable {v!r} is excluded here but present in the point")
                out[v] = EXC
                continue
            if v not in x:
                raise PointError(f"included variable {v!r} is missing from the point")
            val = normalize_value(self.var[v].kind, x[v])
            if val is EXC or not rs.contains(val):
                raise PointError(f"{v}={x[v]!r} lies outside its restricted set {rs!r}")
            out[v] = val
        return {n: out[n] for n in self.names}

    def _restricted_for_point(self, v: str, assigned: Mapping[str, Any]) -> ValueSet:
        try:
            return self.restricted_set(v, {p: assigned[p] for p in self._parents[v]})
        except (GraphError, ex.ExprError) as exc:
            raise PointError(f"cannot resolve restricted set of {v!r}: {exc}") from None

    def check_extended(self, xbar: Mapping[str, Any]) -> list[str]:
        """Problems preventing ``xbar`` from belonging to the extended domain."""
        problems = []
        extra = [k for k in xbar if k not in self.var]
        if extra:
            problems.append(f"unknown variables {extra}")
        missing = [n for n in self.names if n not in xbar]
        if missing:
            problems.append(f"missing variables {missing}")
            return problems
        for v in self.topological_order():
            try:
                rs = self.restricted_set(v, {p: xbar[p] for p in self._parents[v]})
            except (GraphError, ex.ExprError) as exc:
                problems.append(f"{v}: {exc}")
                continue
            val = normalize_value(self.var[v].kind, xbar[v])
            if not rs.contains(val):
                problems.append(f"{v}={xbar[v]!r} not in restricted set {rs!r}")
        return problems

    def is_extended_point(self, xbar: Mapping[str, Any]) -> bool:
        return not self.check_extended(xbar)

    def project(self, xbar: Mapping[str, Any]) -> dict[str, Any]:
        """Inverse transfer mapping: drop the ``EXC`` entries."""
        problems = self.check_extended(xbar)
        if problems:
            raise PointError("not an extended point: " + "; ".join(problems))
        return {n: normalize_value(self.var[n].kind, xbar[n]) for n in self.names if xbar[n] is not EXC}

    # ----------------------------------------------------------- enumeration
    def _is_small(self, v: str) -> bool:
        u = self.var[v].universal
        return u.is_finite() and u.cardinality() <= ENUM_CARDINALITY

    def _closure(self, names: Iterable[str]) -> list[str]:
        keep: set[str] = set()
        for n in names:
            keep.add(n)
            keep |= self.ancestors(n)
        return [n for n in self.topological_order() if n in keep]

    def _configs(self, names: list[str], enumerate_all: bool = False) -> list[dict[str, Any]]:
        """Consistent assignments of an ancestor-closed variable list.

        Small finite variables are enumerated; others are carried as value
        boxes. Raises :class:`_NotEnumerable` when a rule conditions on a box.
        """
        results: list[dict[str, Any]] = []

        def rec(i: int, env: dict[str, Any]) -> None:
            if len(results) > ENUM_CONFIG_LIMIT:
                raise _NotEnumerable("too many configurations")
            if i == len(names):
                results.append(dict(env))
                return
            v = names[i]
            rs = self._restricted_any(v, env)
            if rs.is_exc_only() or self._is_small(v) or (enumerate_all and rs.is_finite()):
                for val in rs.values():
                    env[v] = val
                    rec(i + 1, env)
                del env[v]
            else:
                lo, hi = rs.hull()
                env[v] = _Box(lo, hi)
                rec(i + 1, env)
                del env[v]

        rec(0, {})
        return results

    def _restricted_any(self, v: str, env: Mapping[str, Any]) -> ValueSet:
        """Restricted set where parents may be value boxes."""
        parents = self._parents[v]
        if not parents:
            return self.var[v].universal
        rule = self.rule.get(v)
        if rule is None:
            raise _NotEnumerable(f"no rule for {v}")
        for p in rule.condition_parents():
            if isinstance(env.get(p), _Box):
                raise _NotEnumerable(f"rule of {v} conditions on large-domain {p}")
        case = self._match(v, env)
        if isinstance(case.set, ExprInterval):
            lookup = self._lookup_box(env)
            lo = ex.evaluate_interval(self._expr(case.set.lo_expr), lookup)
            hi = ex.evaluate_interval(self._expr(case.set.hi_expr), lookup)
            return Interval(lo[0], hi[1])
        return case.set

    def _lookup_box(self, env: Mapping[str, Any]):
        def lookup(name: str) -> tuple[float, float]:
            if name in self.constants:
                c = self.constants[name]
                return (c, c)
            if name not in env:
                raise ex.ExprError(f"bound expression references {name!r}, which is not available")
            val = env[name]
            if isinstance(val, _Box):
                return (val.lo, val.hi)
            if val is EXC or isinstance(val, str):
                raise ex.ExprError(f"bound expression references non-numeric {name}={val!r}")
            return (float(val), float(val))

        return lookup

    def _expr_refs(self, text: str) -> set[str]:
        names, prefixes = ex.references(self._expr(text))
        refs = set(names) - set(self.constants) - set(self._constant_defs)
        for pre in prefixes:
            refs |= {n for n in self.names if n.startswith(pre) and n[len(pre):].isdigit()}
        return refs

    def _compute_constants(self) -> list[Violation]:
        problems = []
        for name, spec in self._constant_defs.items():
            mode = "max" if "max" in spec else "min" if "min" in spec else None
            if mode is None:
                problems.append(Violation("constant", name, "needs a 'max' or 'min' expression"))
                continue
            try:
                text = spec[mode]
                refs = self._expr_refs(text)
                unknown = [r for r in refs if r not in self.var]
                if unknown:
                    raise ex.ExprError(f"unknown names {unknown}")
                configs = self._configs(self._closure(refs))
                best = -math.inf if mode == "max" else math.inf
                for env in configs:
                    try:
                        lo, hi = ex.evaluate_interval(self._expr(text), self._lookup_box(env))
                    except ex.ExprError:
                        continue
                    best = max(best, hi) if mode == "max" else min(best, lo)
                if not math.isfinite(best):
                    raise ex.ExprError("no configuration gives a finite value")
                self.constants[name] = best
            except (ex.ExprError, _NotEnumerable, GraphError) as exc:
                problems.append(Violation("constant", name, str(exc)))
        return problems

    def audit_universal(self, v: str) -> bool | None:
        """Compare the declared universal set with the union of restricted sets.

        Returns ``None`` when ancestor configurations cannot be enumerated.
        """
        if not self._parents[v]:
            return True
        try:
            configs = self._configs(self._closure(self.ancestors(v)))
            sets = [self._restricted_any(v, env) for env in configs]
        except (_NotEnumerable, ex.ExprError, GraphError):
            return None
        try:
            return canonical(union(*sets)) == canonical(self.var[v].universal)
        except TypeError:
            return None

    def inclusion_controllers(self) -> tuple[str, ...]:
        """Variables (with their ancestors) whose values decide some inclusion."""
        ctrl: set[str] = set()
        for n in self.names:
            if self.var[n].excludable and n in self.rule:
                ctrl.update(self.rule[n].condition_parents())
        return tuple(self._closure(ctrl))

    def enumerate_signatures(self) -> list[Signature]:
        """Inclusion patterns of the domain, one per reachable set of included variables."""
        if self._signatures is None:
            ctrl = list(self.inclusion_controllers())
            for c in ctrl:
                u = self.var[c].universal
                if not u.is_finite():
                    raise SignatureError(f"inclusion-controlling variable {c!r} has a non-enumerable domain")
            groups: dict[frozenset[str], list[dict[str, Any]]] = {}
            for env in self._configs(ctrl, enumerate_all=True) if ctrl else [{}]:
                included = set()
                for n in self.names:
                    if n in env:
                        if env[n] is not EXC:
                            included.add(n)
                    elif not self.var[n].excludable:
                        included.add(n)
                    else:
                        case = self._match(n, env)
                        if not case.set.is_exc_only():
                            included.add(n)
                groups.setdefault(frozenset(included), []).append(env)
            sigs = []
            for i, (inc, envs) in enumerate(groups.items()):
                fixed = tuple(
                    (c, envs[0][c])
                    for c in ctrl
                    if envs[0][c] is not EXC and all(e[c] == envs[0][c] for e in envs)
                )
                configs = tuple(tuple((c, e[c]) for c in ctrl) for e in envs)
                sigs.append(Signature(i, inc, configs, fixed))
            self._signatures = sigs
            self._sig_index = {s.included: s.index for s in sigs}
        return list(self._signatures)

    def signature_of(self, xbar: Mapping[str, Any]) -> Signature:
        sigs = self.enumerate_signatures()
        inc = frozenset(n for n in self.names if xbar[n] is not EXC)
        assert self._sig_index is not None
        try:
            return sigs[self._sig_index[inc]]
        except KeyError:
            raise SignatureError(f"no signature includes exactly {sorted(inc)}") from None

    def __repr__(self) -> str:
        return f"RoleGraph({len(self.names)} variables, {len(self._arcs)} arcs)"


def _find_cycle(g: RoleGraph) -> list[str] | None:
    color = {n: 0 for n in g.names}
    stack: list[str] = []

    def dfs(n: str) -> list[str] | None:
        color[n] = 1
        stack.append(n)
        for c in g._children[n]:
            if color[c] == 1:
                return stack[stack.index(c):] + [c]
            if color[c] == 0:
                found = dfs(c)
                if found:
                    return found
        stack.pop()
        color[n] = 2
        return None

    for n in g.names:
        if color[n] == 0:
            found = dfs(n)
            if found:
                return found
    return None


def _representatives(universal: ValueSet, conds: list[ValueSet]) -> list[Any]:
    """Finite set of values hitting every cell cut out by the conditions."""
    if universal.is_finite():
        return universal.values()
    points: set[float] = set()
    for s in [universal, *conds]:
        for m in s.parts():
            if isinstance(m, (Interval, IntRange, IntSet)):
                lo, hi = m.hull()
                points.update(p for p in (lo, hi) if math.isfinite(p))
                if isinstance(m, IntSet):
                    points.update(m.items)
    cuts = sorted(points)
    reps: list[Any] = list(cuts)
    reps += [(a + b) / 2 for a, b in zip(cuts, cuts[1:])]
    if cuts:
        reps += [cuts[0] - 1.0, cuts[-1] + 1.0]
    else:
        reps.append(0.0)
    out = [r for r in sorted(set(reps)) if universal.contains(r)]
    if universal.has_exc:
        out.append(EXC)
    return out


def _check_kind(v: Variable, s: ValueSet) -> bool:
    allowed = _KIND_SETS[v.kind]
    for m in s.parts():
        if isinstance(m, ExcOnly):
            continue
        if isinstance(m, ExprInterval) and v.kind is not VariableKind.CATEGORICAL:
            continue
        if not isinstance(m, allowed):
            return False
    return True


def _subset(g: RoleGraph, child: str, case: RuleCase) -> bool | None:
    """Whether a rule case's set lies in the child's declared universal set."""
    uni = g.var[child].universal
    s = case.set
    if isinstance(s, ExprInterval):
        return None
    if s.is_finite():
        return all(uni.contains(val) for val in s.values())
    try:
        cu = canonical(union(uni, s))
    except TypeError:
        return None
    return canonical(uni) == cu


def validate_graph(g: RoleGraph) -> list[Violation]:
    """All invariant violations of a role graph; an empty list means valid."""
    out: list[Violation] = []
    seen: set[str] = set()
    for v in g._variables:
        if not v.name:
            out.append(Violation("name", "<empty>", "variable names must be non-empty"))
        if v.name in seen:
            out.append(Violation("duplicate", v.name, "variable declared twice"))
        seen.add(v.name)
        if isinstance(v.universal, ExprInterval) or any(isinstance(m, ExprInterval) for m in v.universal.parts()):
            out.append(Violation("universal", v.name, "universal set must be explicit, not an expression"))
        elif not _check_kind(v, v.universal):
            out.append(Violation("kind", v.name, f"universal set {v.universal!r} does not fit kind {v.kind.value}"))
        if v.excludable and not v.universal.has_exc:
            out.append(Violation("excludable", v.name, "excludable variable lacks EXC in its universal set"))
        if not v.excludable and v.universal.has_exc:
            out.append(Violation("excludable", v.name, "EXC in universal set of a non-excludable variable"))
        if v.universal.is_exc_only():
            out.append(Violation("universal", v.name, "universal set cannot be {EXC} alone"))

    arcset: set[tuple[str, str]] = set()
    for a in g._arcs:
        subj = f"{a.parent}->{a.child}"
        if a.parent not in g.var or a.child not in g.var:
            out.append(Violation("arc", subj, "arc references an unknown variable"))
            continue
        if a.parent == a.child:
            out.append(Violation("cycle", subj, "self-dependency"))
        if (a.parent, a.child) in arcset:
            out.append(Violation("arc", subj, "duplicate arc"))
        arcset.add((a.parent, a.child))

    cycle = _find_cycle(g)
    if cycle:
        out.append(Violation("cycle", " -> ".join(cycle), "decree dependencies form a cycle"))

    for v in g._variables:
        if v.excludable and not any(a.child == v.name and a.kind.controls_inclusion for a in g._arcs):
            out.append(Violation("excludable", v.name, "excludable variable has no inclusion arc"))

    rule_seen: set[str] = set()
    for r in g._rules:
        if r.child not in g.var:
            out.append(Violation("rule", r.child, "rule for unknown variable"))
            continue
        if r.child in rule_seen:
            out.append(Violation("rule", r.child, "more than one rule"))
        rule_seen.add(r.child)
        if not g._parents[r.child]:
            out.append(Violation("rule", r.child, "rule for a variable without parents"))
        if not r.cases:
            out.append(Violation("rule", r.child, "rule has no cases"))
    for n in g.names:
        if g._parents[n] and n not in g.rule:
            out.append(Violation("missing-rule", n, f"variable has parents {list(g._parents[n])} but no rule"))

    # constants need an acyclic graph
    if not cycle:
        out.extend(g._compute_constants())

    for n, r in g.rule.items():
        if n not in g.var:
            continue
        v = g.var[n]
        parents = set(g._parents[n])
        bad_refs = [p for p in r.condition_parents() if p not in parents]
        if bad_refs:
            out.append(Violation("rule", n, f"conditions reference non-parents {bad_refs}"))
            continue
        for i, case in enumerate(r.cases):
            if not _check_kind(v, case.set):
                out.append(Violation("rule", n, f"case {i} set {case.set!r} does not fit kind {v.kind.value}"))
                continue
            if isinstance(case.set, ExprInterval):
                for text in (case.set.lo_expr, case.set.hi_expr):
                    try:
                        refs = g._expr_refs(text)
                    except ex.ExprError as exc:
                        out.append(Violation("expression", n, str(exc)))
                        continue
                    stray = sorted(refs - parents)
                    if stray:
                        out.append(Violation("expression", n, f"bound {text!r} references non-parents {stray}"))
                continue
            if case.set.has_exc and not v.excludable:
                out.append(Violation("escape", n, f"case {i} excludes a non-excludable variable"))
            elif _subset(g, n, case) is False:
                out.append(Violation("escape", n, f"case {i} set {case.set!r} escapes universal set {v.universal!r}"))
        cparents = r.condition_parents()
        reps = []
        for p in cparents:
            conds = [s for c in r.cases for q, s in c.when if q == p]
            reps.append(_representatives(g.var[p].universal, conds))
        total = math.prod(len(x) for x in reps) if reps else 1
        if total > ENUM_CONFIG_LIMIT:
            out.append(Violation("rule", n, "too many condition combinations to check exhaustiveness"))
            continue
        gaps, overlaps = [], []
        for combo in itertools.product(*reps):
            env = dict(zip(cparents, combo))
            hits = sum(1 for c in r.cases if c.matches(env))
            if hits == 0:
                gaps.append(env)
            elif hits > 1:
                overlaps.append(env)
        if gaps:
            out.append(Violation("non-exhaustive", n, f"no case covers {gaps[0]} ({len(gaps)} gaps)"))
        if overlaps:
            out.append(Violation("overlap", n, f"several cases cover {overlaps[0]} ({len(overlaps)} overlaps)"))

    if not out:
        for n in g.names:
            if g.audit_universal(n) is False:
                out.append(Violation("universal-audit", n, "declared universal set differs from the union of restricted sets"))
    return out


def load_domain(path: str | Path) -> RoleGraph:
    return RoleGraph.load(path)
