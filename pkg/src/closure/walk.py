"""Strategic random walks toward the rotation and translation boundaries.

Each walk starts at an initial pose with a fixed outward velocity. Every
iteration perturbs the pose in the *other* component, keeps the perturbations
with the largest boundary margin, tries the velocity step at the scales
``gamma^(m-1)`` and moves to the largest feasible one.

Walks are evaluated in lockstep over a batch, but every floating-point value
of a walk depends only on that walk's inputs and its own random stream, so the
output is identical for any batching or thread count. The random stream of a
walk is keyed by the bytes of its initial pose, the occurrence index of that
pose among exact duplicates, the walk number and the sampler; permuting the
initial set therefore permutes the output, and raising ``N_W`` only appends
walks.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DomainError
from .geometry import (
    Pose,
    _norm3,
    chordal_mean,
    exact_sum,
    exp_map,
    geodesic_dist_so3,
    log_map,
    matmul3,
    random_unit_vector,
    rotation_angle,
)

ROT, TRANS = 0, 1


@dataclass(frozen=True)
class WalkParams:
    omega0: float = 1.0
    v0: float = 2.0
    gamma: float = 0.5
    theta_p: float = 0.2
    t_p: float = 0.1
    n_walks: int = 2
    n_iters: int = 5
    n_perturb: int = 150
    n_keep: int = 10
    n_steps: int = 15
    pca_scaling: bool = False
    translation_via_rotation_walk: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise DomainError("gamma must lie in (0, 1)")
        if min(self.n_walks, self.n_perturb, self.n_keep, self.n_steps) < 1 or self.n_iters < 0:
            raise DomainError("walk counts must be positive")
        if self.n_keep > self.n_perturb:
            raise DomainError("n_keep must not exceed n_perturb")
        if min(self.omega0, self.v0, self.theta_p, self.t_p) < 0:
            raise DomainError("velocities and perturbation scales must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WalkParams":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        extra = set(d) - set(known)
        if extra:
            raise DomainError(f"unknown walk parameters: {sorted(extra)}")
        return cls(**known)


_LMO = WalkParams(omega0=1.0, v0=2.0, gamma=0.5, theta_p=0.2, t_p=0.1, n_walks=2, n_iters=5,
                  n_perturb=150, n_keep=10, n_steps=15, pca_scaling=True)
_3DM = WalkParams(omega0=0.5, v0=0.0, gamma=0.5, theta_p=0.0, t_p=0.1, n_walks=2, n_iters=5,
                  n_perturb=150, n_keep=10, n_steps=15, translation_via_rotation_walk=True)
# v0 = 0.5 rather than 0 so the translation sampler moves on regression sets
_LM = WalkParams(omega0=0.5, v0=0.5, gamma=0.5, theta_p=0.0, t_p=0.1, n_walks=20, n_iters=5,
                 n_perturb=150, n_keep=10, n_steps=10)

PROFILES: dict[str, tuple[WalkParams, int]] = {
    "lmo": (_LMO, 1500),
    "lmo++": (replace(_LMO, n_walks=10, n_iters=10), 1500),
    "3dmatch": (_3DM, 1500),
    "3dmatch++": (replace(_3DM, n_walks=20, n_iters=10), 1500),
    "lm": (_LM, 200),
    "custom": (WalkParams(), 1500),
}


def profile(name: str) -> tuple[WalkParams, int]:
    """Walk parameters and RANSAG trial count of a named profile."""
    try:
        return PROFILES[name]
    except KeyError:
        raise DomainError(f"unknown profile {name!r}") from None


@dataclass
class WalkReport:
    boundary_rotations: np.ndarray
    boundary_translations: np.ndarray
    final_margins: np.ndarray
    initial_margins: np.ndarray
    trace: list[tuple[int, int, float, float, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.boundary_rotations)


# -- helpers -----------------------------------------------------------------


def top_k_indices(values, k: int) -> np.ndarray:
    """Indices of the ``k`` largest values, descending, ties to the lower index."""
    v = np.asarray(values, dtype=float)
    if k > len(v) or k < 0:
        raise DomainError(f"k={k} exceeds {len(v)} values")
    return np.argsort(-v, kind="stable")[:k]


def mean_pose(S0) -> tuple[np.ndarray, np.ndarray]:
    R, t = _as_arrays(S0)
    if len(R) == 0:
        raise DomainError("mean_pose of an empty set")
    return chordal_mean(R), exact_sum(t) / len(t)


def _as_arrays(S0) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(S0, tuple) and len(S0) == 2 and not isinstance(S0[0], Pose):
        return np.asarray(S0[0], dtype=float).reshape(-1, 3, 3), np.asarray(S0[1], dtype=float).reshape(-1, 3)
    S0 = list(S0)
    if not S0:
        return np.zeros((0, 3, 3)), np.zeros((0, 3))
    return np.stack([p.rotation for p in S0]), np.stack([p.translation for p in S0])


def init_angular_velocity(R0, Rbar, omega0: float, rng) -> np.ndarray:
    """``omega0 (u + u~)`` with ``u`` the world-frame axis from ``Rbar`` to ``R0``."""
    rel = np.asarray(R0) @ np.asarray(Rbar).T
    if float(rotation_angle(rel)) < 1e-9:
        u = random_unit_vector(rng)
    else:
        try:
            w = log_map(rel)
        except DomainError:  # at the branch cut any axis of the half-turn works
            from .geometry import axis_angle

            w = axis_angle(rel)[0]
        u = w / float(_norm3(w))
    while True:
        s = u + random_unit_vector(rng)
        if float(_norm3(s)) > 1e-6:
            return omega0 * s


def pca_axes(translations) -> tuple[np.ndarray, np.ndarray]:
    """Principal axes (columns) and scale factors ``sigma_k / sigma_1``."""
    t = np.asarray(translations, dtype=float).reshape(-1, 3)
    mu = exact_sum(t) / len(t)
    d = t - mu
    cov = exact_sum(d[:, :, None] * d[:, None, :]) / len(t)
    ev, V = np.linalg.eigh(cov)
    ev, V = ev[::-1], V[:, ::-1]
    sig = np.sqrt(np.maximum(ev, 0.0))
    if sig[0] <= 0:
        return np.eye(3), np.ones(3)
    return V, sig / sig[0]


def init_center_velocity(t0, tbar, v0: float, rng, pca=None) -> np.ndarray:
    """``v0 ((t0 - tbar)/|t0 - tbar| + v~)``, optionally rescaled along principal axes."""
    d = np.asarray(t0, dtype=float) - np.asarray(tbar, dtype=float)
    n = float(_norm3(d))
    u = random_unit_vector(rng) if n < 1e-12 else d / n
    while True:
        s = u + random_unit_vector(rng)
        if float(_norm3(s)) > 1e-6:
            break
    v = v0 * s
    if pca is not None:
        V, scale = pca
        v = V @ (scale * (V.T @ v))
    return v


def _pose_key(R: np.ndarray, t: np.ndarray) -> int:
    h = hashlib.blake2b(np.ascontiguousarray(R).tobytes() + np.ascontiguousarray(t).tobytes(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def walk_seeds(R0: np.ndarray, t0: np.ndarray, n_walks: int, seed: int, purpose: int) -> list[np.random.SeedSequence]:
    """One seed sequence per walk, ordered by (initial pose, walk number)."""
    seen: dict[int, int] = {}
    out = []
    for R, t in zip(R0, t0):
        key = _pose_key(R, t)
        occ = seen.get(key, 0)
        seen[key] = occ + 1
        for n in range(n_walks):
            out.append(np.random.SeedSequence(entropy=seed, spawn_key=(key, occ, n, purpose)))
    return out


def _ball(draws: np.ndarray, radius: float) -> np.ndarray:
    # (..., 5) Gaussians -> uniform in the radius ball of R^3
    x = draws
    n = np.sqrt(((((x[..., 0] * x[..., 0] + x[..., 1] * x[..., 1]) + x[..., 2] * x[..., 2]) + x[..., 3] * x[..., 3]) + x[..., 4] * x[..., 4]))
    return x[..., :3] / n[..., None] * radius


def _first_true(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the first True along the last axis, and whether any exists."""
    anyf = mask.any(axis=-1)
    return np.argmax(mask, axis=-1), anyf


# -- batched walk core -------------------------------------------------------


def run_walk_batch(purse, R0, t0, velocity, seeds, params: WalkParams, purpose: int, trace_ids=None):
    """Advance a batch of independent walks through all iterations.

    ``velocity`` holds one angular (``purpose == ROT``) or center velocity per
    walk. Returns final rotations, translations, margins and trace rows.
    """
    W = len(R0)
    P, K, T = params.n_perturb, params.n_keep, params.n_steps
    rngs = [np.random.default_rng(s) for s in seeds]
    scales = params.gamma ** np.arange(T, dtype=float)
    Rs = np.array(R0, dtype=float).reshape(W, 3, 3)
    ts = np.array(t0, dtype=float).reshape(W, 3)
    margin = purse.margins(Rs, ts)[0] if W else np.zeros(0)
    trace = []
    if W == 0:
        return Rs, ts, margin, trace
    if purpose == ROT:
        steps = exp_map(velocity[:, None, :] * scales[None, :, None])  # (W,T,3,3)
    else:
        steps = velocity[:, None, :] * scales[None, :, None]  # (W,T,3)
    rows = np.arange(W)
    for it in range(params.n_iters):
        draws = np.stack([rng.standard_normal((P, 5)) for rng in rngs])
        if purpose == ROT:
            pt = ts[:, None, :] + _ball(draws, params.t_p)
            pR = np.broadcast_to(Rs[:, None], (W, P, 3, 3))
        else:
            if params.theta_p > 0:
                pR = matmul3(exp_map(_ball(draws, params.theta_p)), Rs[:, None])
            else:
                pR = np.broadcast_to(Rs[:, None], (W, P, 3, 3))
            pt = np.broadcast_to(ts[:, None, :], (W, P, 3))
        d = purse.margins(np.ascontiguousarray(pR.reshape(-1, 3, 3)), np.ascontiguousarray(pt.reshape(-1, 3)))[0]
        d = d.reshape(W, P)
        keep = np.stack([top_k_indices(d[w], K) for w in range(W)])  # (W,K)
        if purpose == ROT:
            cR = matmul3(steps, Rs[:, None])  # (W,T,3,3)
            candR = np.broadcast_to(cR[:, None], (W, K, T, 3, 3))
            candt = np.broadcast_to(pt[rows[:, None], keep][:, :, None, :], (W, K, T, 3))
        else:
            ct = ts[:, None, :] + steps  # (W,T,3)
            candR = np.broadcast_to(pR[rows[:, None], keep][:, :, None], (W, K, T, 3, 3))
            candt = np.broadcast_to(ct[:, None], (W, K, T, 3))
        cm = purse.margins(
            np.ascontiguousarray(candR.reshape(-1, 3, 3)), np.ascontiguousarray(candt.reshape(-1, 3))
        )[0].reshape(W, K, T)
        feas = cm >= 0.0
        m0, ok = _first_true(feas.any(axis=1))  # smallest m with any feasible k
        k0 = np.argmax(feas[rows, :, m0], axis=1)  # lowest feasible k at m0
        for w in np.flatnonzero(ok):
            Rs[w] = candR[w, k0[w], m0[w]]
            ts[w] = candt[w, k0[w], m0[w]]
            margin[w] = cm[w, k0[w], m0[w]]
        if trace_ids is not None:
            gd = geodesic_dist_so3(np.asarray(R0).reshape(W, 3, 3), Rs)
            td = _norm3(ts - np.asarray(t0).reshape(W, 3))
            for w in range(W):
                trace.append((int(trace_ids[w]), it + 1, float(margin[w]), float(gd[w]), float(td[w])))
    return Rs, ts, margin, trace


def _check_start(purse, R0, t0):
    if len(R0) == 0:
        raise DomainError("initial set is empty")
    m = purse.margins(np.ascontiguousarray(R0), np.ascontiguousarray(t0))[0]
    if np.any(m < 0):
        raise DomainError("initial poses must lie in the PURSE")
    return m


def _walk(purse, S0, params: WalkParams, seed: int, purpose: int, trace: bool, executor=None, chunk: int = 64):
    R0, t0 = _as_arrays(S0)
    m_init = _check_start(purse, R0, t0)
    Rbar, tbar = mean_pose((R0, t0))
    pca = pca_axes(t0) if (purpose == TRANS and params.pca_scaling) else None
    seeds = walk_seeds(R0, t0, params.n_walks, seed, purpose)
    W = len(seeds)
    src = np.repeat(np.arange(len(R0)), params.n_walks)
    vel = np.empty((W, 3))
    # the velocity draw comes first on each walk's stream; run_walk_batch
    # re-creates the generators, so advance them identically there
    for w, s in enumerate(seeds):
        rng = np.random.default_rng(s)
        if purpose == ROT:
            vel[w] = init_angular_velocity(R0[src[w]], Rbar, params.omega0, rng)
        else:
            vel[w] = init_center_velocity(t0[src[w]], tbar, params.v0, rng, pca)
        seeds[w] = s.spawn(1)[0]

    def job(lo, hi):
        ids = np.arange(lo, hi) if trace else None
        return run_walk_batch(purse, R0[src[lo:hi]], t0[src[lo:hi]], vel[lo:hi], seeds[lo:hi], params, purpose, ids)

    bounds = [(lo, min(W, lo + chunk)) for lo in range(0, W, chunk)]
    if executor is None:
        parts = [job(lo, hi) for lo, hi in bounds]
    else:
        parts = list(executor.map(lambda b: job(*b), bounds))
    Rs = np.concatenate([p[0] for p in parts])
    ts = np.concatenate([p[1] for p in parts])
    ms = np.concatenate([p[2] for p in parts])
    rows = [r for p in parts for r in p[3]]
    rows.sort(key=lambda r: (r[0], r[1]))
    return WalkReport(Rs, ts, ms, m_init[src], rows)


def walk_rotation_boundary(S0, purse, params: WalkParams, seed: int = 0, trace: bool = False, executor=None) -> WalkReport:
    """Samples near the rotation boundary; one output per (initial pose, walk)."""
    return _walk(purse, S0, params, seed, ROT, trace, executor)


def walk_translation_boundary(
    S0, purse, params: WalkParams, seed: int = 0, trace: bool = False, executor=None, rotation_report: WalkReport | None = None
) -> WalkReport:
    """Samples near the translation boundary.

    With ``params.translation_via_rotation_walk`` the translations reached by
    the rotation walk are returned instead (reusing ``rotation_report`` when
    given).
    """
    if params.translation_via_rotation_walk:
        if rotation_report is None:
            rotation_report = walk_rotation_boundary(S0, purse, params, seed, trace, executor)
        return rotation_report
    return _walk(purse, S0, params, seed, TRANS, trace, executor)


def write_trace_csv(report: WalkReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["walk_id", "iter", "margin", "geodesic_dist_from_R0", "trans_dist_from_t0"])
        for row in report.trace:
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4])])
