"""Synthetic PURSE instances with known ground truth, and a grid outer bound.

The grid bound rejection-samples a low-discrepancy cloud over a box in
tangent coordinates around the initial samples, grows the box until no
accepted point touches its surface, then refines around the most extreme
accepted poses at geometrically shrinking scales. Radii are the enclosing
balls of all accepted poses plus the half-diagonal of the finest cell. This
is an outer bound only under a sampling-density assumption.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import DomainError
from .geometry import Pose, exp_map, geodesic_dist_so3, log_map, matmul3, random_rotation, uniform_ball
from .miniball import megb_so3, min_enclosing_ball
from .purse import Purse2D3D, Purse3D3D, PurseReg, WeightedBound, batch_margins

MIN_BETA = 1e-9


@dataclass(frozen=True)
class SynthSpec:
    kind: str = "3d3d"
    n_constraints: int = 20
    noise_scale: float = 0.1
    bound_slack: float = 0.5
    ground_truth: Pose | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("2d3d", "3d3d", "reg"):
            raise DomainError(f"unknown purse kind {self.kind!r}")
        if self.n_constraints < 1:
            raise DomainError("n_constraints must be positive")
        if self.noise_scale < 0 or self.bound_slack < 0:
            raise DomainError("noise_scale and bound_slack must be nonnegative")


@dataclass(frozen=True)
class OuterBound:
    D_bar: float
    d_bar: float
    method: str = "grid"
    n_accepted: int = 0
    inflation_R: float = 0.0
    inflation_t: float = 0.0

    def to_dict(self) -> dict:
        return {"D_bar": self.D_bar, "d_bar": self.d_bar, "method": self.method}


def synth_purse(spec: SynthSpec):
    """Measurements from the ground truth plus noise uniform in the ball of radius ``noise_scale``.

    Every bound is ``noise_scale (1 + bound_slack)`` (floored at 1e-9), so the
    ground truth is always feasible.
    """
    rng = np.random.default_rng(spec.rng_seed)
    gt = spec.ground_truth
    n = spec.n_constraints
    beta = max(spec.noise_scale * (1.0 + spec.bound_slack), MIN_BETA)
    if spec.kind == "3d3d":
        if gt is None:
            gt = Pose(random_rotation(rng), rng.normal(0.0, 0.3, 3))
        a = rng.uniform(-0.5, 0.5, (n, 3)) + [0.0, 0.0, 2.0]
        b = a @ gt.rotation.T + gt.translation + uniform_ball(rng, n, spec.noise_scale)
        purse = Purse3D3D(a, b, [WeightedBound(np.eye(3), beta)] * n)
    elif spec.kind == "2d3d":
        if gt is None:
            gt = Pose(random_rotation(rng), np.array([0.0, 0.0, 1.0]) + rng.normal(0.0, 0.05, 3))
        Z = rng.uniform(-0.1, 0.1, (n, 3))
        cam = Z @ gt.rotation.T + gt.translation
        if np.any(cam[:, 2] <= 0.05):
            raise DomainError("ground truth puts keypoints behind the camera")
        z = cam[:, :2] / cam[:, 2:] + uniform_ball(rng, n, spec.noise_scale, dim=2)
        purse = Purse2D3D(z, Z, [WeightedBound(np.eye(2), beta)] * n)
    else:
        if gt is None:
            gt = Pose(random_rotation(rng), rng.normal(0.0, 0.3, 3))
        # rotation noise sized so the Frobenius chord stays below noise_scale
        ang = 2.0 * np.arcsin(np.minimum(1.0, spec.noise_scale / (2.0 * math.sqrt(2.0))))
        v = uniform_ball(rng, n, 1.0) * ang
        Rh = matmul3(exp_map(v), gt.rotation[None])
        th = gt.translation + uniform_ball(rng, n, spec.noise_scale)
        purse = PurseReg.isotropic(Rh, th, beta, beta)
    return purse, gt


# -- grid outer bound ----------------------------------------------------------


def _frame(R0: np.ndarray, t0: np.ndarray):
    """Center pose and world-frame tangent coordinates of the initial samples."""
    from .walk import mean_pose

    Rc, tc = mean_pose((R0, t0))
    X = np.concatenate([log_map(R0 @ Rc.T).reshape(-1, 3), t0 - tc], axis=1)
    return Rc, tc, X


def _decode(Rc, tc, X):
    R = matmul3(exp_map(X[:, :3]), Rc[None])
    t = tc + X[:, 3:]
    return R, t


def _accept(purse, Rc, tc, X):
    R, t = _decode(Rc, tc, X)
    ok = batch_margins(purse, (R, t)) >= 0.0
    return X[ok]


def _sobol(n_log2: int, seed: int) -> np.ndarray:
    return qmc.Sobol(6, scramble=True, seed=seed).random_base2(n_log2)


def grid_outer_bound(
    purse,
    init_samples,
    resolution: float = 1e-3,
    seed: int = 0,
    n_log2: int = 14,
    local_log2: int = 9,
    n_extreme: int = 16,
    max_doublings: int = 40,
    max_rounds: int = 200,
) -> OuterBound:
    """Heuristic outer radii (``D_bar`` radians, ``d_bar`` meters) of a PURSE.

    ``init_samples`` must be feasible poses; they fix the tangent frame and
    the starting box. ``resolution`` is the finest local half-width relative
    to the converged box.
    """
    if not resolution > 0:
        raise DomainError("resolution must be positive")
    from .walk import _as_arrays

    R0, t0 = _as_arrays(init_samples)
    if len(R0) == 0:
        raise DomainError("grid_outer_bound needs feasible initial samples")
    Rc, tc, X0 = _frame(R0, t0)
    center = np.mean(X0, axis=0)
    h = np.maximum(np.max(np.abs(X0 - center), axis=0) * 1.5, 1e-6)
    base = _sobol(n_log2, seed)
    acc = X0
    for _ in range(max_doublings):
        X = center + (2.0 * base - 1.0) * h
        A = _accept(purse, Rc, tc, X)
        acc = np.concatenate([acc, A])
        hit = np.any(np.abs(A - center) > 0.9 * h, axis=0) if len(A) else np.zeros(6, bool)
        if not hit.any():
            break
        h = np.where(hit, 2.0 * h, h)
        if np.any(h[3:] > 1e6):
            raise DomainError("PURSE appears unbounded")
        h[:3] = np.minimum(h[:3], math.pi)
    else:
        raise DomainError("PURSE appears unbounded")

    local = 2.0 * _sobol(local_log2, seed + 1) - 1.0
    delta = 2.0 * h / (2 ** (n_log2 / 6.0))  # global cell size
    target = resolution * h
    last = (-1.0, -1.0)
    for _ in range(max_rounds):
        R, t = _decode(Rc, tc, acc)
        gb = megb_so3(R)
        bt = min_enclosing_ball(t)
        dr = np.atleast_1d(geodesic_dist_so3(gb.center[None], R))
        dt = np.sqrt(np.sum((t - bt.center) ** 2, axis=1))
        # growth below a tenth of the current cell's half-diagonal is noise at this scale
        cell = 2.0 * delta / (2 ** (local_log2 / 6.0))
        tol_R, tol_t = 0.05 * np.linalg.norm(cell[:3]), 0.05 * np.linalg.norm(cell[3:])
        grew = gb.radius > last[0] + tol_R or bt.radius > last[1] + tol_t
        if not grew:
            # converged at this scale: shrink, or stop at the target scale
            if np.all(delta <= target):
                break
            delta = np.maximum(0.5 * delta, target)
        last = (gb.radius, bt.radius)
        ext = np.unique(
            np.concatenate([np.argsort(-dr, kind="stable")[:n_extreme], np.argsort(-dt, kind="stable")[:n_extreme]])
        )
        new = [_accept(purse, Rc, tc, acc[i] + local * delta) for i in ext]
        acc = np.concatenate([acc] + new)

    R, t = _decode(Rc, tc, acc)
    gb = megb_so3(R)
    bt = min_enclosing_ball(t)
    cell = 2.0 * delta / (2 ** (local_log2 / 6.0))
    inf_R = 0.5 * float(np.linalg.norm(cell[:3]))
    inf_t = 0.5 * float(np.linalg.norm(cell[3:]))
    return OuterBound(gb.radius + inf_R, bt.radius + inf_t, "grid", len(acc), inf_R, inf_t)


def load_outer(path) -> OuterBound:
    with open(path) as fh:
        d = json.load(fh)
    try:
        return OuterBound(float(d["D_bar"]), float(d["d_bar"]), d.get("method", "external"))
    except KeyError as exc:
        raise DomainError(f"outer bound file is missing {exc}") from None
