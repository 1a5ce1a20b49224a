"""Time the compiled distance kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 200,850,2000] [--repeat 5]

Prints one row per (variant, mode, p, n): median seconds for an n x n
distance matrix on each backend, the speedup, and the largest absolute
difference between the two results.
"""

from __future__ import annotations

import argparse
import math
import sys
import timeit

import numpy as np

from metadist import CompiledDistance, DistanceConfig, Encoder, meta_distance
from metadist import kernels
from metadist.bench.variants import build_variant
from metadist.sampling import sample_extended


def _median_time(fn, repeat: int) -> float:
    return float(np.median(timeit.repeat(fn, number=1, repeat=repeat)))


def run(sizes: list[int], variants: list[int], repeat: int, seed: int) -> list[dict]:
    if kernels.compiled_backend is None:
        sys.exit("compiled kernels are not available (build the extension or unset METADIST_PURE_PYTHON)")
    rows = []
    for v in variants:
        g = build_variant(v)
        rng = np.random.default_rng(seed + v)
        pts = [sample_extended(g, rng) for _ in range(max(sizes))]
        X_all = Encoder(g).encode_many(pts)
        for mode in ("meta", "hybrid"):
            for p in (1.0, 2.0, math.inf):
                for n in sizes:
                    X = X_all[:n]
                    fast = CompiledDistance(g, DistanceConfig(), mode=mode, p=p, backend=kernels.compiled_backend)
                    slow = CompiledDistance(g, DistanceConfig(), mode=mode, p=p, backend=kernels.python_backend)
                    diff = float(np.max(np.abs(fast.pairwise(X, X) - slow.pairwise(X, X))))
                    tf = _median_time(lambda: fast.pairwise(X, X), repeat)
                    ts = _median_time(lambda: slow.pairwise(X, X), repeat)
                    rows.append(dict(variant=v, mode=mode, p=p, n=n, compiled=tf, python=ts, speedup=ts / tf,
                                     max_diff=diff))
    return rows


def dict_reference(variant: int, n: int, seed: int) -> tuple[float, float]:
    """Seconds per pair for the per-variable definition and for the compiled kernel."""
    g = build_variant(variant)
    rng = np.random.default_rng(seed)
    pts = [sample_extended(g, rng) for _ in range(n)]
    cfg = DistanceConfig()
    t_dict = timeit.timeit(lambda: [meta_distance(g, cfg, a, b, check=False) for a in pts for b in pts], number=1)
    X = Encoder(g).encode_many(pts)
    cd = CompiledDistance(g, cfg)
    t_arr = _median_time(lambda: cd.pairwise(X, X), 5)
    return t_dict / n**2, t_arr / n**2


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="200,850,2000", help="matrix sizes (comma separated)")
    ap.add_argument("--variants", default="1,5", help="benchmark variants (comma separated)")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats; the median is reported")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)
    sizes = [int(s) for s in a.sizes.split(",")]
    variants = [int(s) for s in a.variants.split(",")]

    print(f"{'var':>3} {'mode':>6} {'p':>4} {'n':>5} {'compiled s':>11} {'python s':>10} {'speedup':>8} {'max diff':>9}")
    for r in run(sizes, variants, a.repeat, a.seed):
        print(f"{r['variant']:>3} {r['mode']:>6} {r['p']:>4g} {r['n']:>5} {r['compiled']:>11.5f} "
              f"{r['python']:>10.5f} {r['speedup']:>8.1f} {r['max_diff']:>9.1e}")
    per_dict, per_arr = dict_reference(variants[-1], 150, a.seed)
    print(f"\nper pair: dict definition {per_dict * 1e6:.2f} us, compiled kernel {per_arr * 1e6:.4f} us")


if __name__ == "__main__":
    main()
