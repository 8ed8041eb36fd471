"""Time the numba kernels against their numpy fallbacks on identical inputs.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Outputs are checked for equality before timing. The numba column excludes
compilation (one warm-up call per kernel).
"""

import argparse
import time

import numpy as np

from towerbox import _kernels as K
from towerbox.aes import packed_for
from towerbox.attacks import hw_predictions, selection_bits
from towerbox.iso import default_catalog


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, rng):
    packed = packed_for(tuple(default_catalog(32)))
    state = rng.integers(0, 256, (n, 16), dtype=np.uint8)
    x = state[:, 0].copy()
    idx = rng.integers(0, len(packed), n).astype(np.int64)
    pred = hw_predictions(x)
    sel = selection_bits(x)
    traces = rng.normal(size=(n, 10))
    cps = np.arange(50, n + 1, 50, dtype=np.int64)
    p = packed
    return {
        "sbox_layer": (lambda: K.sbox_layer_nb(state, idx, p.phi, p.lam, p.delta, p.dinv, False),
                       lambda: K.sbox_layer_np(state, idx, p.sbox_tables)),
        "tower_points": (lambda: K.tower_points_nb(x, idx, p.phi, p.lam, p.delta, p.dinv),
                         lambda: K.tower_points_np(x, idx, p.point_tables)),
        "matvec": (lambda: K.matvec_nb(x, idx, p.dinv),
                   lambda: K.matvec_np(x, idx, p.dinv_tables)),
        "corr_checkpoints": (lambda: K.corr_checkpoints_nb(pred, traces, cps),
                             lambda: K.corr_checkpoints_np(pred, traces, cps)),
        "dom_checkpoints": (lambda: K.dom_checkpoints_nb(sel, traces, cps),
                            lambda: K.dom_checkpoints_np(sel, traces, cps)),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(u, v) for u, v in zip(a, b))
    if np.issubdtype(np.asarray(a).dtype, np.floating):
        return np.allclose(a, b, rtol=1e-10, atol=1e-12)
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(args.seed)
    print(f"n={args.n}, best of {args.repeat}")
    print(f"{'kernel':<18}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, (nb, np_) in cases(args.n, rng).items():
        if not same(nb(), np_()):
            raise SystemExit(f"{name}: numba and numpy outputs differ")
        t_nb = best_of(nb, args.repeat)
        t_np = best_of(np_, args.repeat)
        print(f"{name:<18}{t_nb * 1e3:>10.2f}{t_np * 1e3:>10.2f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
