"""Compiled vs pure-Python kernels: timing and bit-equality.

    python benchmarks/bench_kernels.py [--batch 2000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from closure.geometry import exp_map, uniform_ball
from closure.kernels import backend_module
from closure.synth import SynthSpec, synth_purse
from closure.purse import DEPTH_FLOOR


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _poses(rng, gt, batch, spread):
    R = np.ascontiguousarray(exp_map(uniform_ball(rng, batch, spread)) @ gt.rotation)
    t = np.ascontiguousarray(gt.translation + uniform_ball(rng, batch, 0.1))
    return R, t


def cases(batch, rng):
    for kind, n in (("3d3d", 100), ("2d3d", 50), ("reg", 10)):
        purse, gt = synth_purse(SynthSpec(kind, n, 0.05, 0.5, None, 1))
        R, t = _poses(rng, gt, batch, 0.05)
        if kind == "3d3d":
            args = (R, t, purse.a, purse.b, purse.U, purse.beta, purse.identity)
        elif kind == "2d3d":
            args = (R, t, purse.z, purse.Z, purse.U, purse.beta, purse.identity, DEPTH_FLOOR)
        else:
            args = (R, t, purse.rotations, purse.translations, purse.UR, purse.beta_R, purse.Ut, purse.beta_t,
                    purse.identity)
        yield f"margins_{kind} (B={batch}, N={n})", f"margins_{kind}", args
    for d, n in ((3, 4000), (4, 4000)):
        P = np.ascontiguousarray(np.unique(rng.uniform(-1, 1, (n, d)), axis=0))
        yield f"miniball_support (n={n}, d={d})", "miniball_support", (P,)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    try:
        cy = backend_module("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    py = backend_module("python")
    print(f"{'kernel':40s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}  identical")
    for label, name, fargs in cases(args.batch, rng):
        tp, op = _best(lambda: getattr(py, name)(*fargs), args.repeat)
        tc, oc = _best(lambda: getattr(cy, name)(*fargs), args.repeat)
        same = all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(op, oc))
        print(f"{label:40s} {1e3 * tp:10.2f} {1e3 * tc:10.2f} {tp / tc:8.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
