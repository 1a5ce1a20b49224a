"""Value sets for hierarchical domain variables.

A value set is one of: a real interval (with open/closed endpoints), an
integer range, an explicit integer enumeration, a categorical enumeration,
the singleton ``{EXC}``, an interval whose endpoints are bound expressions,
or a finite union of these. Sets are immutable and hashable.

The JSON set-descriptor syntax used by domain files is handled by
:func:`parse_descriptor` and :func:`to_descriptor`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterator

__all__ = [
    "EXC",
    "Excluded",
    "ValueSet",
    "Interval",
    "IntRange",
    "IntSet",
    "CatSet",
    "ExcOnly",
    "ExprInterval",
    "Union",
    "union",
    "parse_descriptor",
    "to_descriptor",
    "is_exc",
    "DescriptorError",
]


class Excluded:
    """Sentinel type of the excluded value. Use the module-level ``EXC``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EXC"

    def __reduce__(self):
        return (Excluded, ())


EXC = Excluded()


def is_exc(value: Any) -> bool:
    return value is EXC


class DescriptorError(ValueError):
    """Raised for malformed set descriptors."""


class ValueSet:
    """Base class. Subclasses implement membership and enumeration."""

    def contains(self, value: Any) -> bool:
        raise NotImplementedError

    def __contains__(self, value: Any) -> bool:
        return self.contains(value)

    @property
    def has_exc(self) -> bool:
        return False

    def without_exc(self) -> ValueSet:
        return self

    def is_finite(self) -> bool:
        return False

    def values(self) -> list:
        """Enumerate a finite set (ascending for numbers, declared order for labels)."""
        raise TypeError(f"{self!r} is not enumerable")

    def cardinality(self) -> float:
        return len(self.values()) if self.is_finite() else math.inf

    def is_exc_only(self) -> bool:
        return False

    def hull(self) -> tuple[float, float]:
        """Numeric closure bounds (lo, hi) of the non-EXC part."""
        raise TypeError(f"{self!r} has no numeric hull")

    def parts(self) -> tuple[ValueSet, ...]:
        return (self,)


@dataclass(frozen=True)
class Interval(ValueSet):
    lo: float
    hi: float
    open_lo: bool = False
    open_hi: bool = False

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise DescriptorError(f"interval with lo > hi: [{self.lo}, {self.hi}]")
        if self.lo == self.hi and (self.open_lo or self.open_hi):
            raise DescriptorError(f"empty interval at {self.lo}")

    def contains(self, value: Any) -> bool:
        if value is EXC or isinstance(value, (str, bool)):
            return False
        try:
            x = float(value)
        except (TypeError, ValueError):
            return False
        if math.isnan(x):
            return False
        if x < self.lo or (self.open_lo and x == self.lo):
            return False
        if x > self.hi or (self.open_hi and x == self.hi):
            return False
        return True

    def is_finite(self) -> bool:
        return self.lo == self.hi

    def values(self) -> list:
        if self.lo == self.hi:
            return [float(self.lo)]
        return super().values()

    def hull(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def __repr__(self) -> str:
        left = "]" if self.open_lo else "["
        right = "[" if self.open_hi else "]"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"


def _as_int(value: Any) -> int | None:
    if value is EXC or isinstance(value, (str, bool)):
        return None
    if isinstance(value, int):
        return value
    try:
        x = float(value)
    except (TypeError, ValueError):
        return None
    if math.isfinite(x) and x.is_integer():
        return int(x)
    return None


@dataclass(frozen=True)
class IntRange(ValueSet):
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise DescriptorError(f"integer range with lo > hi: [{self.lo}, {self.hi}]")

    def contains(self, value: Any) -> bool:
        k = _as_int(value)
        return k is not None and self.lo <= k <= self.hi

    def is_finite(self) -> bool:
        return True

    def values(self) -> list:
        return list(range(self.lo, self.hi + 1))

    def cardinality(self) -> float:
        return self.hi - self.lo + 1

    def hull(self) -> tuple[float, float]:
        return (float(self.lo), float(self.hi))

    def __repr__(self) -> str:
        return f"{{{self.lo}..{self.hi}}}"


@dataclass(frozen=True)
class IntSet(ValueSet):
    items: tuple[int, ...]

    def __post_init__(self):
        if not self.items:
            raise DescriptorError("empty integer enumeration")
        object.__setattr__(self, "items", tuple(sorted(set(int(v) for v in self.items))))

    def contains(self, value: Any) -> bool:
        k = _as_int(value)
        return k is not None and k in self.items

    def is_finite(self) -> bool:
        return True

    def values(self) -> list:
        return list(self.items)

    def hull(self) -> tuple[float, float]:
        return (float(self.items[0]), float(self.items[-1]))

    def __repr__(self) -> str:
        return "{" + ", ".join(str(v) for v in self.items) + "}"


@dataclass(frozen=True)
class CatSet(ValueSet):
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise DescriptorError("empty categorical enumeration")
        if len(set(self.labels)) != len(self.labels):
            raise DescriptorError(f"duplicate labels in {self.labels}")

    def contains(self, value: Any) -> bool:
        return isinstance(value, str) and value in self.labels

    def is_finite(self) -> bool:
        return True

    def values(self) -> list:
        return list(self.labels)

    def __repr__(self) -> str:
        return "{" + ", ".join(self.labels) + "}"


@dataclass(frozen=True)
class ExcOnly(ValueSet):
    def contains(self, value: Any) -> bool:
        return value is EXC

    @property
    def has_exc(self) -> bool:
        return True

    def without_exc(self) -> ValueSet:
        raise ValueError("{EXC} has no included part")

    def is_finite(self) -> bool:
        return True

    def values(self) -> list:
        return [EXC]

    def is_exc_only(self) -> bool:
        return True

    def __repr__(self) -> str:
        return "{EXC}"


@dataclass(frozen=True)
class ExprInterval(ValueSet):
    """Interval whose endpoints are bound expressions over parent values.

    Not directly usable for membership: restricted-set evaluation turns it
    into a concrete :class:`Interval`.
    """

    lo_expr: str
    hi_expr: str

    def contains(self, value: Any) -> bool:
        raise TypeError("expression interval must be evaluated before membership tests")

    def __repr__(self) -> str:
        return f"[{self.lo_expr}, {self.hi_expr}]"


@dataclass(frozen=True)
class Union(ValueSet):
    members: tuple[ValueSet, ...]

    def contains(self, value: Any) -> bool:
        return any(m.contains(value) for m in self.members)

    @property
    def has_exc(self) -> bool:
        return any(isinstance(m, ExcOnly) for m in self.members)

    def without_exc(self) -> ValueSet:
        rest = tuple(m for m in self.members if not isinstance(m, ExcOnly))
        if not rest:
            raise ValueError("{EXC} has no included part")
        return rest[0] if len(rest) == 1 else Union(rest)

    def is_finite(self) -> bool:
        return all(m.is_finite() for m in self.members)

    def values(self) -> list:
        out: list = []
        seen = set()
        nums = []
        for m in self.members:
            for v in m.values():
                if v is EXC or isinstance(v, str):
                    if v not in seen:
                        seen.add(v)
                        out.append(v)
                else:
                    nums.append(v)
        nums = sorted(set(nums))
        tail = [v for v in out if v is EXC]
        cats = [v for v in out if v is not EXC]
        return nums + cats + tail

    def is_exc_only(self) -> bool:
        return all(isinstance(m, ExcOnly) for m in self.members)

    def hull(self) -> tuple[float, float]:
        bounds = [m.hull() for m in self.members if not isinstance(m, ExcOnly)]
        if not bounds:
            raise TypeError("{EXC} has no numeric hull")
        return (min(b[0] for b in bounds), max(b[1] for b in bounds))

    def parts(self) -> tuple[ValueSet, ...]:
        return self.members

    def __repr__(self) -> str:
        return " ∪ ".join(repr(m) for m in self.members)


def union(*sets: ValueSet) -> ValueSet:
    """Flattened union; drops duplicate members."""
    members: list[ValueSet] = []
    for s in sets:
        for m in s.parts():
            if m not in members:
                members.append(m)
    if len(members) == 1:
        return members[0]
    return Union(tuple(members))


def canonical(s: ValueSet) -> tuple:
    """Normal form used for set equality audits.

    Integers are expanded to a frozenset, real intervals merged, labels
    collected. Only meaningful for sets without expression endpoints.
    """
    ints: set[int] = set()
    cats: set[str] = set()
    reals: list[tuple[float, float, bool, bool]] = []
    exc = False
    for m in s.parts():
        if isinstance(m, ExcOnly):
            exc = True
        elif isinstance(m, (IntRange, IntSet)):
            ints.update(m.values())
        elif isinstance(m, CatSet):
            cats.update(m.labels)
        elif isinstance(m, Interval):
            reals.append((m.lo, m.hi, m.open_lo, m.open_hi))
        else:
            raise TypeError(f"cannot canonicalize {m!r}")
    reals.sort(key=lambda t: (t[0], t[2]))
    merged: list[list] = []
    for lo, hi, olo, ohi in reals:
        if merged:
            cur = merged[-1]
            if lo < cur[1] or (lo == cur[1] and not (cur[3] and olo)):
                if hi > cur[1]:
                    cur[1], cur[3] = hi, ohi
                elif hi == cur[1]:
                    cur[3] = cur[3] and ohi
                continue
        merged.append([lo, hi, olo, ohi])
    return (frozenset(ints), tuple(tuple(m) for m in merged), frozenset(cats), exc)


def _parse_number(x: Any) -> float:
    if isinstance(x, str):
        if x in ("inf", "+inf", "Infinity"):
            return math.inf
        if x in ("-inf", "-Infinity"):
            return -math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise DescriptorError(f"not a number: {x!r}")
    return float(x)


def parse_descriptor(desc: Any) -> ValueSet:
    """Build a value set from its JSON descriptor.

    A JSON list denotes the union of its members.
    """
    if desc == "EXC":
        return ExcOnly()
    if isinstance(desc, list):
        if not desc:
            raise DescriptorError("empty union descriptor")
        return union(*(parse_descriptor(d) for d in desc))
    if not isinstance(desc, dict) or len(desc) == 0:
        raise DescriptorError(f"bad set descriptor: {desc!r}")
    if "interval" in desc:
        lo, hi = desc["interval"]
        open_ = desc.get("open", [False, False])
        return Interval(_parse_number(lo), _parse_number(hi), bool(open_[0]), bool(open_[1]))
    if "ints" in desc:
        vals = desc["ints"]
        if not isinstance(vals, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            raise DescriptorError(f"ints must be a list of integers: {vals!r}")
        return IntSet(tuple(vals))
    if "range" in desc:
        lo, hi = desc["range"]
        if not (isinstance(lo, int) and isinstance(hi, int)):
            raise DescriptorError(f"range bounds must be integers: {desc!r}")
        return IntRange(lo, hi)
    if "cats" in desc:
        labels = desc["cats"]
        if not isinstance(labels, list) or not all(isinstance(v, str) for v in labels):
            raise DescriptorError(f"cats must be a list of strings: {labels!r}")
        if "EXC" in labels:
            raise DescriptorError("'EXC' is reserved and cannot be a label")
        return CatSet(tuple(labels))
    if "interval_expr" in desc:
        lo, hi = desc["interval_expr"]
        return ExprInterval(str(lo), str(hi))
    raise DescriptorError(f"unknown set descriptor: {desc!r}")


def _num_out(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def to_descriptor(s: ValueSet) -> Any:
    if isinstance(s, ExcOnly):
        return "EXC"
    if isinstance(s, Union):
        return [to_descriptor(m) for m in s.members]
    if isinstance(s, Interval):
        out = {"interval": [_num_out(s.lo), _num_out(s.hi)]}
        if s.open_lo or s.open_hi:
            out["open"] = [s.open_lo, s.open_hi]
        return out
    if isinstance(s, IntSet):
        return {"ints": list(s.items)}
    if isinstance(s, IntRange):
        return {"range": [s.lo, s.hi]}
    if isinstance(s, CatSet):
        return {"cats": list(s.labels)}
    if isinstance(s, ExprInterval):
        return {"interval_expr": [s.lo_expr, s.hi_expr]}
    raise TypeError(f"unknown value set {s!r}")


def iter_members(s: ValueSet) -> Iterator[ValueSet]:
    yield from s.parts()
