"""Deterministic stand-in for the score of a trained network.

score = clip(base + offset + interaction + noise, 0, 100) where

* base depends on variables shared by all signatures (learning rate, units);
* offset depends on the optimizer and the number of layers;
* interaction couples the optimizer with its own hyperparameters;
* noise is a smooth Gaussian random field (random Fourier features, std 2)
  over the non-meta coordinates, seeded by the noise seed, so scores stay
  Lipschitz and the perturbation is common to all signatures.

The architecture tag only changes constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np

from ..rng import stream
from ..valuesets import EXC

NOISE_STD = 2.0
NOISE_FEATURES = 64
NOISE_LENGTHSCALE = 0.3
UNIT_SCALE = 300.0

# noise embedding: continuous and unit-count coordinates only, so the noise is
# shared across signatures; EXC and absent variables map to 0
EMBED = ("r", "u1", "u2", "u3", "a1", "a2", "a3", "b1", "b2", "b3", "rho")


@dataclass(frozen=True)
class ArchConstants:
    base: float
    r_center: float
    r_amp: float
    cap_center: float
    cap_amp: float
    opt_offset: tuple[float, float]  # ASGD, ADAM
    depth_offset: tuple[float, float, float]  # l = 1, 2, 3
    alpha_center: float
    beta_center: float
    hp_amp: float
    adam_lr: float
    rho_center: float
    rho_amp: float


ARCH = {
    "MLP": ArchConstants(58.0, 0.30, 16.0, 0.55, 10.0, (-2.0, 3.0), (0.0, 3.0, 1.5), 0.4, 0.6, 5.0, -8.0, 0.15, 30.0),
    "CNN": ArchConstants(50.0, 0.20, 20.0, 0.70, 14.0, (1.0, -1.0), (0.0, 5.0, 7.0), 0.3, 0.5, 6.0, -12.0, 0.25, 40.0),
}


@lru_cache(maxsize=64)
def _noise_field(seed: int, arch: str) -> tuple[np.ndarray, np.ndarray]:
    rng = stream(seed, "noise", list(ARCH).index(arch))
    omega = rng.normal(0.0, 1.0 / NOISE_LENGTHSCALE, size=(NOISE_FEATURES, len(EMBED)))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=NOISE_FEATURES)
    return omega, phase


def _embed(x: Mapping[str, Any]) -> np.ndarray:
    z = np.zeros(len(EMBED))
    for i, name in enumerate(EMBED):
        v = x.get(name, EXC)
        if v is EXC:
            continue
        if name.startswith("u"):
            z[i] = float(v) / UNIT_SCALE
        else:
            z[i] = float(v)
    return z


def _noise(z: np.ndarray, seed: int, arch: str) -> float:
    omega, phase = _noise_field(seed, arch)
    return float(NOISE_STD * math.sqrt(2.0 / NOISE_FEATURES) * np.cos(omega @ z + phase).sum())


def _value(x: Mapping[str, Any], name: str):
    v = x.get(name, EXC)
    return None if v is EXC else v


def raw_score(x: Mapping[str, Any], arch: str, seed: int) -> float:
    """Unclipped surrogate value of a point (or extended point)."""
    if arch not in ARCH:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {tuple(ARCH)}")
    c = ARCH[arch]
    opt = _value(x, "o") or "ASGD"
    layers = int(x["l"])
    r = float(x["r"])
    units = [float(v) / UNIT_SCALE for v in (_value(x, f"u{i}") for i in (1, 2, 3)) if v is not None]
    m = sum(units) / len(units) if units else 0.0
    s = c.base + c.r_amp * math.cos(2.5 * (r - c.r_center))
    s += c.cap_amp * (1.0 - 3.0 * (m - c.cap_center) ** 2)
    s += c.opt_offset[0 if opt == "ASGD" else 1] + c.depth_offset[layers - 1]
    alphas = [float(v) for v in (_value(x, f"a{i}") for i in (1, 2, 3)) if v is not None]
    betas = [float(v) for v in (_value(x, f"b{i}") for i in (1, 2, 3)) if v is not None]
    if alphas:
        s += c.hp_amp * sum(math.cos(3.0 * (a - c.alpha_center)) for a in alphas) / 3.0
    if betas:
        s += c.hp_amp * sum(1.0 - 4.0 * (b - c.beta_center) ** 2 for b in betas) / 3.0
    if opt == "ADAM":
        s += c.adam_lr * r
    rho = _value(x, "rho")
    if rho is not None:
        s -= c.rho_amp * (float(rho) - c.rho_center) ** 2
    return s + _noise(_embed(x), seed, arch)


def surrogate_score(variant: int, arch: str, x: Mapping[str, Any], seed: int) -> float:
    """Score in [0, 100] of a point of the given variant.

    The point is validated against the variant's domain first.
    """
    from .variants import build_variant

    g = build_variant(variant)
    xbar = x if all(n in x for n in g.names) and len(x) == len(g.names) else g.extend(x)
    problems = g.check_extended(xbar)
    if problems:
        raise ValueError("invalid point: " + "; ".join(problems))
    return min(max(raw_score(xbar, arch, seed), 0.0), 100.0)


def surrogate_scores(variant: int, arch: str, points: Sequence[Mapping[str, Any]], seed: int) -> np.ndarray:
    return np.array([surrogate_score(variant, arch, x, seed) for x in points])


def lipschitz_bound(arch: str, seed: int) -> float:
    """Upper bound on |f(x) - f(y)| / ||x - y|| within one signature.

    The norm is the unweighted Euclidean norm over the raw continuous and
    integer coordinates (the Sub distance with unit weights). Every
    coordinate enters the score with scale at most 1, so a bound on the
    gradient in the embedding suffices; it sums the sup of each partial
    derivative of the smooth part and adds the noise field's bound.
    """
    c = ARCH[arch]
    partials = [
        c.r_amp * 2.5 + abs(c.adam_lr),  # r
        *[c.cap_amp * 6.0] * 3,  # u_i / 300, |m - center| <= 1
        *[c.hp_amp] * 3,  # alpha_i
        *[c.hp_amp * 8.0 / 3.0] * 3,  # beta_i, |b - center| <= 1
        c.rho_amp * 2.0,  # rho, |rho - center| <= 1
    ]
    omega, _ = _noise_field(seed, arch)
    noise = NOISE_STD * math.sqrt(2.0 / NOISE_FEATURES) * float(np.linalg.norm(omega, axis=1).sum())
    return float(sum(partials) + noise)
