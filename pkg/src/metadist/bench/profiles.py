"""Convergence test and data profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileRecord:
    """Improvement history of one approach-model on one instance.

    ``points`` are ``(k, rmse)`` pairs with strictly increasing ``k``.
    """

    instance: str
    approach: str
    n_params: int
    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        pts = tuple((int(k), float(v)) for k, v in self.points)
        object.__setattr__(self, "points", pts)
        ks = [k for k, _ in pts]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ProfileError(f"{self.instance}/{self.approach}: evaluation indices must increase")
        if any(not v > 0 for _, v in pts):
            raise ProfileError(f"{self.instance}/{self.approach}: RMSE values must be positive")

    def best_at(self, k: float) -> float:
        """Smallest recorded value at or before evaluation ``k`` (inf if none)."""
        vals = [v for kk, v in self.points if kk <= k]
        return min(vals) if vals else math.inf

    def best(self) -> float:
        return min((v for _, v in self.points), default=math.inf)


def tau_solved_at(record: ProfileRecord, best: float, tau: float, k: float) -> bool:
    if not best > 0:
        raise ProfileError("reference RMSE must be positive")
    value = record.best_at(k)
    return math.isfinite(value) and (value - best) / best <= tau


def first_solved(record: ProfileRecord, best: float, tau: float) -> float:
    """First evaluation index that tau-solves the instance (inf if never)."""
    if not best > 0:
        raise ProfileError("reference RMSE must be positive")
    running = math.inf
    for k, v in record.points:
        running = min(running, v)
        if (running - best) / best <= tau:
            return float(k)
    return math.inf


def data_profile(
    records: Iterable[ProfileRecord],
    tau: float,
    kappas: Sequence[float],
    *,
    approaches: Sequence[str] | None = None,
    best: Mapping[str, float] | None = None,
) -> dict[str, list[float]]:
    """Fraction of instances tau-solved within ``kappa * (n + 1)`` evaluations.

    ``best`` overrides the per-instance reference value, which defaults to
    the smallest value reached by any approach on that instance.
    """
    recs = list(records)
    by_key: dict[tuple[str, str], ProfileRecord] = {}
    for r in recs:
        if (r.instance, r.approach) in by_key:
            raise ProfileError(f"duplicate record for {r.instance}/{r.approach}")
        by_key[(r.instance, r.approach)] = r
    instances = sorted({r.instance for r in recs})
    names = list(approaches) if approaches is not None else sorted({r.approach for r in recs})
    missing = [(p, s) for p in instances for s in names if (p, s) not in by_key]
    if missing:
        raise ProfileError(f"missing records: {missing[:5]}")
    if not instances:
        return {s: [0.0 for _ in kappas] for s in names}
    ref = {}
    for p in instances:
        ref[p] = best[p] if best is not None and p in best else min(by_key[(p, s)].best() for s in names)
    out: dict[str, list[float]] = {}
    for s in names:
        ratios = []
        for p in instances:
            r = by_key[(p, s)]
            ratios.append(first_solved(r, ref[p], tau) / (r.n_params + 1))
        out[s] = [sum(1 for q in ratios if q <= kappa) / len(instances) for kappa in kappas]
    return out


def kappa_grid(max_kappa: float, steps: int) -> list[float]:
    return [max_kappa * i / steps for i in range(steps + 1)]
