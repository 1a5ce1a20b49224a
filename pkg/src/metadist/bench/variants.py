"""The five hyperparameter-domain variants and their dataset sizes."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any

from ..domain import RoleGraph, Signature

SIZES = ("VS", "S", "M", "L")
ARCHITECTURES = ("MLP", "CNN")
VARIANTS = (1, 2, 3, 4, 5)
U_ASGD = (10, 200)
U_ADAM = (25, 300)

# rows keyed by (optimizer, layers); columns VS, S, M, L
TABLE6A: dict[int, dict[tuple[str, int], tuple[int, int, int, int]]] = {
    1: {("ASGD", 1): (20, 30, 40, 50), ("ASGD", 2): (30, 45, 60, 75), ("ASGD", 3): (40, 60, 80, 100)},
    2: {("ASGD", 1): (50, 75, 100, 125), ("ASGD", 2): (60, 90, 120, 150), ("ASGD", 3): (70, 105, 140, 175)},
    3: {
        ("ASGD", 1): (50, 75, 100, 125), ("ASGD", 2): (60, 90, 120, 150),
        ("ADAM", 1): (50, 75, 100, 125), ("ADAM", 2): (60, 90, 120, 150),
    },
    4: {
        ("ASGD", 1): (50, 75, 100, 125), ("ASGD", 2): (60, 90, 120, 150),
        ("ADAM", 1): (50, 75, 100, 125), ("ADAM", 2): (60, 90, 120, 150), ("ADAM", 3): (70, 105, 140, 175),
    },
    5: {
        ("ASGD", 1): (60, 90, 120, 150), ("ASGD", 2): (70, 105, 140, 175),
        ("ADAM", 1): (60, 90, 120, 150), ("ADAM", 2): (70, 105, 140, 175), ("ADAM", 3): (80, 120, 160, 200),
    },
}

TABLE6B: dict[int, tuple[int, int, int, int]] = {
    1: (90, 135, 180, 225),
    2: (180, 270, 360, 450),
    3: (220, 330, 440, 550),
    4: (290, 435, 580, 725),
    5: (340, 510, 680, 850),
}


def _load(name: str) -> dict[str, Any]:
    text = resources.files("metadist.bench").joinpath("variants", name).read_text(encoding="utf-8")
    return json.loads(text)


@lru_cache(maxsize=None)
def build_variant(variant: int) -> RoleGraph:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return RoleGraph.from_dict(_load(f"variant{variant}.json"))


@lru_cache(maxsize=None)
def example_domain(name: str) -> RoleGraph:
    """Shipped worked examples: ``"mlp"`` or ``"dropout"``."""
    return RoleGraph.from_dict(_load(f"{name}_example.json"))


def signature_key(sig: Signature) -> tuple[str, int]:
    """(optimizer, layers) of a variant signature; the optimizer is ASGD when fixed out of the domain."""
    fixed = dict(sig.fixed)
    return str(fixed.get("o", "ASGD")), int(fixed["l"])


def signature_sizes(variant: int, size: str) -> dict[int, int]:
    """Rows per signature index for a variant and size tag."""
    if size not in SIZES:
        raise ValueError(f"unknown size {size!r}; expected one of {SIZES}")
    col = SIZES.index(size)
    g = build_variant(variant)
    return {s.index: TABLE6A[variant][signature_key(s)][col] for s in g.enumerate_signatures()}


def variant_json(variant: int) -> dict[str, Any]:
    return _load(f"variant{variant}.json")
