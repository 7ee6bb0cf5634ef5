"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Reports best-of-N wall time per kernel and checks that both backends return
identical bytes.
"""
import argparse
import time

import numpy as np

from bridgecast import kernels

CASES = {
    # cells x ensemble size: a 96-step, 7-channel horizon over 32 windows
    "crps n=10": (32 * 96 * 7, 10),
    "crps n=100": (32 * 96 * 7, 100),
    "reverse_update": (32 * 144 * 7, None),
    "reverse_update_noisy": (100 * 144 * 7, None),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def make_call(name, size, n, backend, rng):
    if name.startswith("crps"):
        samples = rng.standard_normal((size, n))
        truth = rng.standard_normal(size)
        return lambda: kernels.crps_energy_cells(samples, truth, backend=backend)
    y, yh, h, z = (rng.standard_normal(size) for _ in range(4))
    if name == "reverse_update":
        return lambda: kernels.reverse_update(y, yh, h, 0.9, 0.1, 0.05, backend=backend)
    return lambda: kernels.reverse_update(y, yh, h, 0.9, 0.1, 0.0, 0.2, z, backend=backend)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy backend is available")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}  identical")
    for name, (size, n) in CASES.items():
        row, outs = {}, {}
        for b in backends:
            fn = make_call(name, size, n, b, np.random.default_rng(0))
            row[b], outs[b] = best_of(fn, args.repeat)
        speed = row["python"] / row["cython"] if "cython" in row else 1.0
        same = all(outs[b].tobytes() == outs["python"].tobytes() for b in backends)
        print(f"{name:<22}" + "".join(f"{row[b] * 1e3:>10.2f}ms" for b in backends) + f"{speed:>9.1f}x  {same}")


if __name__ == "__main__":
    main()
