"""Command-line entry point: ``closure <subcommand> ...``.

Exit codes: 0 success, 1 domain or input error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import DomainError

THREADS_ENV = "CLOSURE_THREADS"


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"{THREADS_ENV} must be an integer") from None
    return 1


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_json(path):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _walk_setup(args):
    from .init_sampler import InitConfig
    from .walk import WalkParams, profile

    params, n_trials = profile(args.profile)
    if args.params:
        params = WalkParams.from_dict({**params.to_dict(), **_load_json(args.params)})
    if args.n_trials is not None:
        n_trials = args.n_trials
    return params, InitConfig(n_trials, args.seed)


def _write_poses_csv(path, R, t) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"R{i}{j}" for i in range(3) for j in range(3)] + ["tx", "ty", "tz"])
        for r, v in zip(R, t):
            w.writerow([repr(float(x)) for x in r.reshape(-1)] + [repr(float(x)) for x in v])


def _read_rotations_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    return np.array([[float(x) for x in r[:9]] for r in rows]).reshape(-1, 3, 3)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# -- subcommands ---------------------------------------------------------------


def cmd_closure(args) -> int:
    from .pipeline import run_closure
    from .purse import purse_from_dict
    from .walk import write_trace_csv

    purse = purse_from_dict(_load_json(args.purse))
    params, cfg = _walk_setup(args)
    rep = run_closure(purse, cfg, params, args.seed, _threads(args), trace=bool(args.trace), profile=args.profile)
    _write_text(args.out, rep.to_json())
    if args.trace:
        write_trace_csv(rep.rotation_walk, args.trace)
    if args.samples:
        _write_poses_csv(args.samples, rep.rotation_walk.boundary_rotations, rep.translation_walk.boundary_translations)
    if args.timings:
        _write_text(args.timings, json.dumps(rep.timings, indent=1) + "\n")
    return 0


def cmd_sample(args) -> int:
    from .init_sampler import init_sample
    from .purse import purse_from_dict

    purse = purse_from_dict(_load_json(args.purse))
    _, cfg = _walk_setup(args)
    S0 = init_sample(purse, cfg)
    if args.min_samples and len(S0) < args.min_samples:
        print(f"warning: only {len(S0)} initial samples found", file=sys.stderr)
    R = np.array([p.rotation for p in S0]).reshape(-1, 3, 3)
    t = np.array([p.translation for p in S0]).reshape(-1, 3)
    _write_poses_csv(args.out, R, t)
    return 0


def cmd_calibrate(args) -> int:
    from .calibration import calibrate_3d3d, calibrate_reg, records_from_dict

    data = _load_json(args.records)
    recs = records_from_dict(data)
    if data.get("kind") == "reg":
        res = calibrate_reg(recs, args.epsilon, args.order)
    else:
        res = calibrate_3d3d(recs, args.epsilon, args.order)
    _write_text(args.out, json.dumps(res.to_dict(), indent=1) + "\n")
    return 0


def cmd_synth(args) -> int:
    from .purse import purse_to_dict
    from .synth import SynthSpec, synth_purse

    spec = SynthSpec(args.kind, args.n, args.noise, args.slack, None, args.seed)
    purse, gt = synth_purse(spec)
    _write_text(args.out, json.dumps(purse_to_dict(purse)) + "\n")
    if args.truth:
        truth = {"R": gt.rotation.reshape(-1).tolist(), "t": gt.translation.tolist()}
        _write_text(args.truth, json.dumps(truth) + "\n")
    return 0


def cmd_ratio(args) -> int:
    from .miniball import relative_ratio
    from .synth import OuterBound, grid_outer_bound

    rep = _load_json(args.report)
    if args.outer:
        o = _load_json(args.outer)
        try:
            outer = OuterBound(float(o["D_bar"]), float(o["d_bar"]), "external")
        except KeyError as exc:
            raise DomainError(f"outer bound file is missing {exc}") from None
    else:
        if not args.purse:
            raise DomainError("ratio needs --outer or --purse")
        from .init_sampler import init_sample
        from .purse import purse_from_dict

        purse = purse_from_dict(_load_json(args.purse))
        _, cfg = _walk_setup(args)
        S0 = init_sample(purse, cfg)
        if not S0:
            raise DomainError("PURSE appears empty or too small")
        outer = grid_outer_bound(purse, S0, args.resolution, args.seed)
    out = {
        "eta_R": relative_ratio(rep["D_hat"], outer.D_bar),
        "eta_t": relative_ratio(rep["d_hat"], outer.d_bar),
        "D_hat": rep["D_hat"],
        "d_hat": rep["d_hat"],
        "D_bar": outer.D_bar,
        "d_bar": outer.d_bar,
        "method": outer.method,
    }
    _write_text(args.out, json.dumps(out, indent=1) + "\n")
    return 0


def cmd_descent(args) -> int:
    from .descent import DescentParams, subgradient_megb, write_descent_csv
    from .geometry import exp_map, random_rotation, uniform_ball

    if args.samples:
        S = _read_rotations_csv(args.samples)
    else:
        rng = np.random.default_rng(args.seed)
        S = exp_map(uniform_ball(rng, args.n, args.spread)) @ random_rotation(rng)
    tr = subgradient_megb(S, DescentParams(args.n_steps, args.tail, None, args.schedule))
    write_descent_csv(tr, sys.stdout if args.out in (None, "-") else args.out)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(verbose=not args.quiet) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="closure", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def walk_flags(q, purse_required=True):
        q.add_argument("--purse", required=purse_required, help="PURSE JSON file ('-' for stdin)")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--profile", default="lmo", choices=["lmo", "lmo++", "3dmatch", "3dmatch++", "lm", "custom"])
        q.add_argument("--params", help="JSON file overriding walk parameters")
        q.add_argument("--n-trials", type=int, dest="n_trials", help="initial-sampler trials (overrides profile)")

    q = sub.add_parser("closure", help="run the full pipeline on a PURSE")
    walk_flags(q)
    q.add_argument("--out", help="report JSON (default stdout)")
    q.add_argument("--trace", help="per-iteration rotation-walk trace CSV")
    q.add_argument("--samples", help="boundary samples CSV")
    q.add_argument("--timings", help="stage timings JSON")
    q.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    q.set_defaults(func=cmd_closure)

    q = sub.add_parser("sample", help="initial feasible poses as CSV")
    walk_flags(q)
    q.add_argument("--out", required=True)
    q.add_argument("--min-samples", type=int, default=10, dest="min_samples")
    q.set_defaults(func=cmd_sample)

    q = sub.add_parser("calibrate", help="conformal calibration from records JSON")
    q.add_argument("--records", required=True)
    q.add_argument("--epsilon", type=float, default=0.2)
    q.add_argument("--order", default="conformal", choices=["conformal", "descending"])
    q.add_argument("--out")
    q.set_defaults(func=cmd_calibrate)

    q = sub.add_parser("synth", help="synthetic PURSE with known ground truth")
    q.add_argument("--kind", default="3d3d", choices=["2d3d", "3d3d", "reg"])
    q.add_argument("--n", type=int, default=20)
    q.add_argument("--noise", type=float, default=0.1)
    q.add_argument("--slack", type=float, default=0.5)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.add_argument("--truth", help="ground-truth pose JSON")
    q.set_defaults(func=cmd_synth)

    q = sub.add_parser("ratio", help="tightness ratios of a report against an outer bound")
    walk_flags(q, purse_required=False)
    q.add_argument("--report", required=True)
    q.add_argument("--outer", help="external outer radii JSON {D_bar, d_bar}")
    q.add_argument("--resolution", type=float, default=1e-3)
    q.add_argument("--out")
    q.set_defaults(func=cmd_ratio)

    q = sub.add_parser("descent", help="geodesic subgradient trace as CSV")
    q.add_argument("--samples", help="rotation CSV (first 9 columns row-major)")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--n", type=int, default=200)
    q.add_argument("--spread", type=float, default=0.4)
    q.add_argument("--n-steps", type=int, default=1000, dest="n_steps")
    q.add_argument("--tail", type=int, default=10)
    q.add_argument("--schedule", default="harmonic", choices=["harmonic", "strong"])
    q.add_argument("--out")
    q.set_defaults(func=cmd_descent)

    q = sub.add_parser("selftest", help="run the built-in invariant checks")
    q.add_argument("--quiet", action="store_true")
    q.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
