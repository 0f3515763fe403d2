"""Wall-clock comparison of the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py --repeat 3
    python benchmarks/bench_kernels.py --json bench.json
"""

import argparse
import json
import time

import numpy as np

from eden_sim import _accel, kernels
from eden_sim.capacity import CapacitySpec, single_bit_error_stats
from eden_sim.patterns import generate_rademacher_memories


def _cases(N, P, steps):
    xi = generate_rademacher_memories(N, P, seed=0).xi
    v0, s0 = xi[0].copy(), np.zeros(N)
    hc = np.roll(xi, 1, axis=0) @ (0.9 * xi[1])
    spec = CapacitySpec(14, trials=4)
    return {
        f"eden_euler N={N} P={P} steps={steps}":
            lambda: kernels.eden_euler(xi, v0, s0, 0.98, 1.0, 1.0, 20.0, 0.01, steps, 10, True, 10.0),
        f"reference_euler N={N} P={P} steps={steps}":
            lambda: kernels.reference_euler(xi, v0, s0, 0.005, 0.01, 1.0, 20.0, 0.01, steps, 10, True, 10.0),
        f"eden_fixed_point N={N} P={P}":
            lambda: kernels.eden_fixed_point(xi, hc, v0, 0.98, 1e-12, 10000),
        "capacity N=14 P=256 trials=4":
            lambda: single_bit_error_stats(spec, 256),
    }


def bench(backend, N, P, steps, repeat):
    prev = _accel.set_backend(backend)
    try:
        out = {}
        for name, fn in _cases(N, P, steps).items():
            fn()  # compile / warm caches
            times = []
            for _ in range(repeat):
                t0 = time.perf_counter()
                fn()
                times.append(time.perf_counter() - t0)
            out[name] = min(times)
        return out
    finally:
        _accel.set_backend(prev)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--N", type=int, default=100)
    ap.add_argument("--P", type=int, default=5)
    ap.add_argument("--steps", type=int, default=60000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    res = {b: bench(b, args.N, args.P, args.steps, args.repeat) for b in backends}
    width = max(len(k) for k in res["numpy"])
    print(f"{'case':<{width}}  {'numpy [s]':>10}  {'numba [s]':>10}  {'speedup':>8}")
    for name, t_np in res["numpy"].items():
        t_nb = res.get("numba", {}).get(name, float("nan"))
        print(f"{name:<{width}}  {t_np:10.4f}  {t_nb:10.4f}  {t_np / t_nb:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
