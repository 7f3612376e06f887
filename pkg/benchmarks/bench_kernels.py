"""Time the numba kernels against their numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py [--blocks 200000] [--repeat 5]

Each kernel is run once to trigger compilation, outputs of the two
backends are compared, then the best of ``--repeat`` timings is shown.
"""

import argparse
import time

import numpy as np

from dsmpa import _kernels
from dsmpa.codebook import Codebook, CodebookConfig
from dsmpa.link import complex_noise


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(blocks, rng):
    for M in (2, 4):
        cb = Codebook(CodebookConfig(M, 3))
        a = True
        y = complex_noise(rng, (blocks, 6), 1.0)
        z = complex_noise(rng, (blocks, 6), 1.0)
        yield (f"structured_ml M={M}", "structured_ml",
               (y, z, cb.perms, cb.constellation, a), blocks)
        F, K = max(1, blocks // 50), 50
        labels = rng.integers(0, cb.size, (F, K))
        sym, pat = cb.parts_from_label(labels)
        h = complex_noise(rng, (F, 6), 1.0)
        args = (h, np.ascontiguousarray(sym), pat, cb.perms, cb.constellation, a)
        yield f"differential_signals M={M}", "differential_signals", args, F * K
    rows = max(1, blocks // 20)
    lam, c2 = rng.random((rows, 6)), rng.random((rows, 6))
    xis = 10 ** rng.uniform(0, 6, (4, 64))
    yield "craig_spectral 4 SNR x 64 nodes", "craig_spectral", (lam, c2, xis, rng.random(64)), rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--blocks", type=int, default=200_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is unavailable (or DSMPA_BACKEND=numpy); nothing to compare")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'items':>9s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for label, name, call_args, items in cases(args.blocks, rng):
        slow = getattr(_kernels, name + "_numpy")
        fast = getattr(_kernels, name + "_numba")
        ref, got = slow(*call_args), fast(*call_args)
        for r, g in zip(ref if isinstance(ref, tuple) else (ref,), got if isinstance(got, tuple) else (got,)):
            if not np.allclose(r, g, rtol=1e-10, atol=1e-12):
                raise SystemExit(f"{label}: backends disagree")
        t_np = best_of(lambda: slow(*call_args), args.repeat)
        t_nb = best_of(lambda: fast(*call_args), args.repeat)
        print(f"{label:34s} {items:9d} {t_np * 1e3:8.1f}ms {t_nb * 1e3:8.1f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
