"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--K 5 20 40] [--T 1000] [--reps 20]

Prints the median wall time per call for each kernel and backend plus the
speed-up of the compiled backend. Both backends are checked to agree first.
"""

import argparse
import time

import numpy as np

from givens_msv import kernels
from givens_msv.givens import n_angles


def median_time(fn, reps):
    fn()
    out = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return float(np.median(out))


def cases(K, T, rng):
    h = rng.normal(0.0, 0.5, (T, K))
    w = rng.uniform(-1.4, 1.4, (T, n_angles(K)))
    R = rng.normal(size=(T, K))
    n = K + n_angles(K)
    phi = rng.uniform(0.8, 0.99, n)
    sig = rng.uniform(0.05, 0.2, n)
    lev = rng.normal(size=n)
    U = rng.normal(size=(n, T))
    Z = rng.normal(size=(n, T))
    return {
        "rotate_transpose": lambda b: b.rotate_transpose(w, R),
        "rotate": lambda b: b.rotate(w, R),
        "logdens_grad": lambda b: b.logdens_grad(h, w, R),
        "reconstruct": lambda b: b.reconstruct(h, w),
        "tridiag_sample": lambda b: b.tridiag_sample(phi, sig, lev, 0.05, U, Z),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, nargs="+", default=[5, 20, 40])
    ap.add_argument("--T", type=int, default=1000, help="slices per call")
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    names = kernels.available_backends()
    backends = {n: kernels.get_backend(n) for n in names}
    if "cython" not in backends:
        print("compiled backend not built; timing the Python kernels only")
    rng = np.random.default_rng(args.seed)
    header = f"{'kernel':<18}{'K':>4}" + "".join(f"{n + ' (ms)':>15}" for n in names)
    if len(names) > 1:
        header += f"{'speed-up':>11}"
    print(header)
    for K in args.K:
        for name, call in cases(K, args.T, rng).items():
            outs = [call(b) for b in backends.values()]
            ref = outs[0] if isinstance(outs[0], tuple) else (outs[0],)
            for o in outs[1:]:
                for a, b in zip(ref, o if isinstance(o, tuple) else (o,)):
                    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)
            t = {n: median_time(lambda b=b: call(b), args.reps) for n, b in backends.items()}
            line = f"{name:<18}{K:>4}" + "".join(f"{1e3 * t[n]:>15.3f}" for n in names)
            if len(names) > 1:
                line += f"{t['python'] / t['cython']:>10.1f}x"
            print(line, flush=True)


if __name__ == "__main__":
    main()
