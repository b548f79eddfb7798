"""Feasible initial poses: RANSAG with minimal solvers and convex combinations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError
from .geometry import Pose, project_so3
from .purse import Purse2D3D, Purse3D3D, PurseReg, batch_in_purse


@dataclass(frozen=True)
class InitConfig:
    n_trials: int = 1500
    rng_seed: int = 0
    combo_size: int = 10

    def __post_init__(self):
        if self.n_trials < 0:
            raise DomainError("n_trials must be nonnegative")
        if self.combo_size < 1:
            raise DomainError("combo_size must be positive")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent substream for one trial, keyed by (seed, trial)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


# -- minimal solvers ---------------------------------------------------------


def arun_solve(a, b) -> Pose:
    """Least-squares rigid transform with ``b ~ R a + t`` (SVD, det(R) = +1)."""
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    if len(a) < 3 or len(a) != len(b):
        raise DomainError("arun_solve needs at least 3 matched pairs")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    A, B = a - ca, b - cb
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-300):
        raise DomainError("degenerate registration")
    U, _, Vt = np.linalg.svd(A.T @ B)
    d = 1.0 if np.linalg.det(Vt.T @ U.T) >= 0 else -1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return Pose(R, cb - R @ ca)


def _bearing(z) -> np.ndarray:
    f = np.array([z[0], z[1], 1.0])
    return f / np.linalg.norm(f)


def _real_roots(coef: np.ndarray) -> np.ndarray:
    coef = np.asarray(coef, dtype=float)
    scale = np.max(np.abs(coef))
    if scale == 0:
        return np.zeros(0)
    coef = npoly.polytrim(coef / scale, 1e-14)
    if len(coef) < 2:
        return np.zeros(0)
    r = npoly.polyroots(coef)
    keep = np.abs(r.imag) <= 1e-7 * np.maximum(1.0, np.abs(r.real))
    return np.sort(r.real[keep])


def p3p_solve(image_points, world_points) -> list[Pose]:
    """All poses mapping three world points onto three normalized image points.

    With bearings ``f_i`` and depths ``s_i`` the law of cosines gives three
    quadratics in ``s``. Writing ``u = s2/s1`` and ``v = s3/s1`` leaves two
    quadratics in ``v`` with coefficients polynomial in ``u``; their resultant
    is a quartic in ``u``. Each real root is polished by Newton steps, the
    points are lifted to the camera frame and the pose follows by rigid
    registration. Only solutions that reproject to within 1e-6 and have
    positive depths are returned.
    """
    z = np.asarray(image_points, dtype=float).reshape(3, 2)
    P = np.asarray(world_points, dtype=float).reshape(3, 3)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(P))):
        raise DomainError("P3P inputs must be finite")
    if 0.5 * np.linalg.norm(np.cross(P[1] - P[0], P[2] - P[0])) <= 1e-9:
        raise DomainError("degenerate P3P")
    f = np.stack([_bearing(zi) for zi in z])
    a2 = float(np.sum((P[1] - P[2]) ** 2))
    b2 = float(np.sum((P[0] - P[2]) ** 2))
    c2 = float(np.sum((P[0] - P[1]) ** 2))
    ca, cb, cg = float(f[1] @ f[2]), float(f[0] @ f[2]), float(f[0] @ f[1])

    # E2: A2 v^2 + A1 v + A0 = 0   and   E1: B2 v^2 + B1 v + B0 = 0
    A2 = np.array([a2 - b2])
    A1 = np.array([-2.0 * a2 * cb, 2.0 * b2 * ca])
    A0 = np.array([a2, 0.0, -b2])
    B2 = np.array([c2])
    B1 = np.array([-2.0 * c2 * cb])
    B0 = np.array([c2 - b2, 2.0 * b2 * cg, -b2])
    mul, sub = npoly.polymul, npoly.polysub
    p = sub(mul(A2, B0), mul(A0, B2))
    q = sub(mul(A2, B1), mul(A1, B2))
    r = sub(mul(A1, B0), mul(A0, B1))
    quartic = sub(mul(p, p), mul(q, r))

    def eqs(u, v):
        e1 = c2 * (1 + v * v - 2 * v * cb) - b2 * (1 + u * u - 2 * u * cg)
        e2 = a2 * (1 + v * v - 2 * v * cb) - b2 * (u * u + v * v - 2 * u * v * ca)
        J = np.array(
            [
                [-b2 * (2 * u - 2 * cg), c2 * (2 * v - 2 * cb)],
                [-b2 * (2 * u - 2 * v * ca), a2 * (2 * v - 2 * cb) - b2 * (2 * v - 2 * u * ca)],
            ]
        )
        return np.array([e1, e2]), J

    out: list[Pose] = []
    for u in _real_roots(quartic):
        qu = npoly.polyval(u, q)
        if abs(qu) > 1e-12 * max(1.0, np.max(np.abs(q))):
            vs = [-npoly.polyval(u, p) / qu]
        else:
            vs = list(_real_roots(np.array([npoly.polyval(u, B0), B1[0], B2[0]])))
        for v in vs:
            for _ in range(5):
                F, J = eqs(u, v)
                try:
                    du, dv = np.linalg.solve(J, -F)
                except np.linalg.LinAlgError:
                    break
                u, v = u + du, v + dv
            den = 1 + u * u - 2 * u * cg
            if den <= 0 or u <= 0 or v <= 0:
                continue
            s1 = math.sqrt(c2 / den)
            X = np.stack([s1 * f[0], u * s1 * f[1], v * s1 * f[2]])
            try:
                pose = arun_solve(P, X)
            except DomainError:
                continue
            cam = P @ pose.rotation.T + pose.translation
            if np.any(cam[:, 2] <= 0):
                continue
            if np.max(np.abs(cam[:, :2] / cam[:, 2:] - z)) < 1e-6:
                out.append(pose)
    return out


# -- samplers ----------------------------------------------------------------


def sample_in_ellipse(rng: np.random.Generator, center, U: np.ndarray, beta: float) -> np.ndarray:
    """Uniform point in ``{x : |U (x - center)| <= beta}`` (``U`` upper triangular)."""
    d = len(center)
    g = rng.standard_normal(d + 2)
    u = g[:d] / np.linalg.norm(g) * beta
    return np.asarray(center, dtype=float) + np.linalg.solve(U, u)


def _filter(purse, poses: list[Pose]) -> list[Pose]:
    if not poses:
        return []
    ok, _ = batch_in_purse(purse, poses)
    return [p for p, k in zip(poses, ok) if k]


def ransag_2d3d(purse: Purse2D3D, cfg: InitConfig) -> list[Pose]:
    N = purse.n_constraints
    if N < 3:
        raise DomainError("RANSAG needs at least 3 constraints")
    cands: list[Pose] = []
    for trial in range(cfg.n_trials):
        rng = trial_rng(cfg.rng_seed, trial)
        idx = rng.choice(N, 3, replace=False)
        zs = [sample_in_ellipse(rng, purse.z[i], purse.U[i], purse.beta[i]) for i in idx]
        try:
            cands.extend(p3p_solve(zs, purse.Z[idx]))
        except DomainError:
            continue
    return _filter(purse, cands)


def ransag_3d3d(purse: Purse3D3D, cfg: InitConfig) -> list[Pose]:
    N = purse.n_constraints
    if N < 3:
        raise DomainError("RANSAG needs at least 3 constraints")
    cands: list[Pose] = []
    for trial in range(cfg.n_trials):
        rng = trial_rng(cfg.rng_seed, trial)
        idx = rng.choice(N, 3, replace=False)
        bs = [sample_in_ellipse(rng, purse.b[i], purse.U[i], purse.beta[i]) for i in idx]
        try:
            cands.append(arun_solve(purse.a[idx], bs))
        except DomainError:
            continue
    return _filter(purse, cands)


def combo_candidate(purse: PurseReg, idx, weights) -> Pose:
    """Weighted chordal mean of the chosen hypotheses."""
    w = np.asarray(weights, dtype=float)
    idx = np.asarray(idx)
    R = project_so3(np.einsum("k,kij->ij", w, purse.rotations[idx]))
    t = w @ purse.translations[idx]
    return Pose(R, t)


def convex_combo_sample(purse: PurseReg, cfg: InitConfig) -> list[Pose]:
    N = purse.n_constraints
    if N < 1:
        raise DomainError("convex_combo_sample needs at least one hypothesis")
    k = min(cfg.combo_size, N)
    cands: list[Pose] = []
    for trial in range(cfg.n_trials):
        rng = trial_rng(cfg.rng_seed, trial)
        idx = np.sort(rng.choice(N, k, replace=False))
        w = rng.dirichlet(np.ones(k))
        try:
            cands.append(combo_candidate(purse, idx, w))
        except DomainError:
            continue
    return _filter(purse, cands)


def init_sample(purse, cfg: InitConfig) -> list[Pose]:
    if isinstance(purse, Purse2D3D):
        return ransag_2d3d(purse, cfg)
    if isinstance(purse, Purse3D3D):
        return ransag_3d3d(purse, cfg)
    if isinstance(purse, PurseReg):
        return convex_combo_sample(purse, cfg)
    raise DomainError(f"unsupported purse type {type(purse).__name__}")
