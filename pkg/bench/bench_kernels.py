"""Time the batch kernels: numba vs numpy vs the per-element big-int path.

    python3 bench/bench_kernels.py [--sizes 1000 100000 1000000] [--repeat 5]

Compilation is excluded (one warm-up call per backend).
"""
import argparse
import time

import numpy as np

from s2pc import kernels
from s2pc.mpc import mult_close
from s2pc.prg import DeterministicRng
from s2pc.ring import gen_prime


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def inputs(n, q, seed=0):
    rng = DeterministicRng(seed)
    beaver = [kernels.uniform_mod_batch(rng, q, n) for _ in range(10)]
    trunc = [kernels.signed_bits_batch(rng, 20, n) for _ in range(2)]
    trunc += [kernels.signed_bits_batch(rng, 24, n) for _ in range(2)]
    trunc += [kernels.signed_bits_batch(rng, 4, n) for _ in range(2)]
    return beaver, trunc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 100_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    q = gen_prime(30, 0).q
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    print(f"q={q} backends={backends}")
    # warm-up (jit compile)
    b, t = inputs(16, q)
    for be in backends:
        kernels.beaver_batch(*b, q, backend=be)
        kernels.trunc_batch(*t, 4, q, backend=be)

    print(f"{'kernel':<8}{'n':>10}" + "".join(f"{be:>12}" for be in backends) + f"{'speedup':>10}")
    for n in args.sizes:
        b, t = inputs(n, q)
        for name, fn in (("beaver", lambda be: kernels.beaver_batch(*b, q, backend=be)),
                         ("trunc", lambda be: kernels.trunc_batch(*t, 4, q, backend=be))):
            secs = {be: best_of(lambda: fn(be), args.repeat) for be in backends}
            sp = secs["numpy"] / secs["numba"] if "numba" in secs else float("nan")
            print(f"{name:<8}{n:>10}" + "".join(f"{secs[be] * 1e3:>10.2f}ms" for be in backends) + f"{sp:>9.1f}x")

    # reference: the per-element python-int closing step used on big moduli
    n = 10_000
    b, _ = inputs(n, q)
    cols = [list(map(int, v)) for v in b]
    t0 = time.perf_counter()
    for j in range(n):
        mult_close(1, cols[0][j], cols[2][j], cols[4][j], cols[6][j], cols[8][j], q)
    per = (time.perf_counter() - t0) / n
    print(f"python-int mult_close: {per * 1e6:.2f} us/element")


if __name__ == "__main__":
    main()
