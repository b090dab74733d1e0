"""Compare the compiled and pure-Python union-find kernels.

Both backends decode the same syndromes; the script checks that their
corrections agree bit for bit and reports the mean time per instance.

    python benchmarks/bench_uf.py --size 7,15,31,63 --p 0.05,0.1 --instances 500
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dcqec.lattice import ToricLattice, syndrome_planes
from dcqec.noise import NoiseSpec, sample_depolarizing_planes
from dcqec.uf import BACKEND, uf_decode_planes


def time_backend(backend, vd, pd, lat, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = uf_decode_planes(vd, pd, lat, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best / vd.shape[0] * 1e6, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", default="7,15,31,63")
    parser.add_argument("--p", default="0.05,0.1")
    parser.add_argument("--instances", type=int, default=500)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if BACKEND != "compiled":
        parser.error("the compiled extension is not built; run `pip install -e . --no-build-isolation`")

    print(f"{'L':>5} {'p':>6} {'compiled_us':>12} {'python_us':>12} {'speedup':>8}")
    for L in (int(s) for s in args.size.split(",")):
        lat = ToricLattice(L)
        for p in (float(s) for s in args.p.split(",")):
            x, z = sample_depolarizing_planes(NoiseSpec(p, args.seed), lat, 0, args.instances)
            vd, pd = syndrome_planes(x, z, lat)
            fast, a = time_backend("compiled", vd, pd, lat, args.repeats)
            slow, b = time_backend("python", vd, pd, lat, 1)
            if not (np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])):
                raise SystemExit(f"backends disagree at L={L}, p={p}")
            print(f"{L:>5} {p:>6.3f} {fast:>12.1f} {slow:>12.1f} {slow / fast:>8.1f}")


if __name__ == "__main__":
    main()
