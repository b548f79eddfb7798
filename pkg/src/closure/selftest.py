"""Fast invariant checks run by ``closure selftest``."""

from __future__ import annotations

import math
import sys

import numpy as np

from .geometry import (
    chord_to_geodesic_radius,
    exp_map,
    geodesic_dist_so3,
    is_rotation,
    log_map,
    matrix_from_quat,
    quat_from_matrix,
    random_rotation,
    rot_z,
    uniform_ball,
)
from .kernels import BACKEND


def _geometry(rng):
    v = uniform_ball(rng, 50, 3.0)
    R = exp_map(v)
    assert all(is_rotation(r) for r in R)
    assert np.allclose(exp_map(log_map(R)), R, atol=1e-12)
    q = quat_from_matrix(R)
    assert np.allclose(matrix_from_quat(q), R, atol=1e-12)
    a, b = random_rotation(rng, 20), random_rotation(rng, 20)
    assert np.array_equal(geodesic_dist_so3(a, b), geodesic_dist_so3(b, a))


def _miniball(rng):
    from .miniball import megb_so3, min_enclosing_ball

    P = rng.uniform(-1, 1, (30, 3))
    ball = min_enclosing_ball(P)
    assert np.all(np.linalg.norm(P - ball.center, axis=1) <= ball.radius)
    sub = min_enclosing_ball(P[:15])
    assert sub.radius <= ball.radius + 1e-12
    for th in (0.1, 0.8, 1.5):
        g = megb_so3(np.stack([np.eye(3), rot_z(th)]))
        assert abs(g.radius - th / 2) < 1e-9
        assert geodesic_dist_so3(g.center, rot_z(th / 2)) < 1e-9


def _purse_and_walk(rng):
    from .init_sampler import InitConfig
    from .pipeline import run_closure
    from .purse import PurseReg, batch_in_purse
    from .walk import WalkParams

    R, t = random_rotation(rng), rng.normal(size=3)
    purse = PurseReg.isotropic(R[None], t[None], 0.3, 0.1)
    params = WalkParams(omega0=0.5, v0=0.5, gamma=0.5, theta_p=0.0, t_p=0.1, n_walks=4, n_iters=4,
                        n_perturb=60, n_keep=8, n_steps=8)
    rep = run_closure(purse, InitConfig(50, 1), params)
    ok, _ = batch_in_purse(purse, (rep.rotation_walk.boundary_rotations, rep.rotation_walk.boundary_translations))
    assert ok.all()
    ok, _ = batch_in_purse(purse, (rep.translation_walk.boundary_rotations, rep.translation_walk.boundary_translations))
    assert ok.all()
    assert 0.0 < rep.D_hat <= chord_to_geodesic_radius(0.3) + 1e-9
    assert 0.0 < rep.d_hat <= 0.1 + 1e-9


def _calibration(rng):
    from .calibration import conformal_quantile

    s = np.arange(10, 0, -1, dtype=float)
    assert conformal_quantile(s, 0.2) == 8.0
    assert conformal_quantile(s, 0.2, "descending") == 3.0


def _descent(rng):
    from .descent import grad_sq_dist

    c, s = random_rotation(rng), random_rotation(rng)
    if geodesic_dist_so3(c, s) > math.pi - 0.1:
        return
    g = grad_sq_dist(c, s)
    h = 1e-6
    fd = np.array([
        (geodesic_dist_so3(c @ exp_map(h * e), s) ** 2 - geodesic_dist_so3(c @ exp_map(-h * e), s) ** 2) / (2 * h)
        for e in np.eye(3)
    ])
    assert np.max(np.abs(fd - g)) < 1e-5


CHECKS = [
    ("geometry", _geometry),
    ("miniball", _miniball),
    ("purse+walk", _purse_and_walk),
    ("calibration", _calibration),
    ("descent", _descent),
]


def run_selftest(verbose: bool = True, seed: int = 0) -> bool:
    ok = True
    rng = np.random.default_rng(seed)
    if verbose:
        print(f"backend: {BACKEND}")
    for name, fn in CHECKS:
        try:
            fn(rng)
            status = "ok"
        except Exception as exc:  # report every failure, keep going
            ok = False
            status = f"FAIL ({type(exc).__name__}: {exc})"
        if verbose:
            print(f"{name:12s} {status}")
    if verbose:
        print("selftest passed" if ok else "selftest FAILED", file=sys.stdout)
    return ok
