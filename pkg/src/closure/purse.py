"""Pose uncertainty sets built from bounded-noise measurement models.

Three variants share one evaluation surface: ``margins(R, t)`` returns the
boundary margin ``min_i (beta_i - |g_i|_Lambda_i)`` for a batch of poses
together with the index of the binding constraint. Membership is
``margin >= 0``, so the scalar and batch paths agree by construction.

For :class:`PurseReg` the rotation (Frobenius chord) and translation (meters)
families carry different units; each slack is divided by its bound before the
minimum is taken, giving the unitless ``min_i (beta_i - |g_i|) / beta_i``.
Binding indices interleave the families: ``2 i`` is the rotation constraint of
hypothesis ``i`` and ``2 i + 1`` its translation constraint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .geometry import Pose, is_rotation

DEPTH_FLOOR = 1e-9


@dataclass(frozen=True)
class WeightedBound:
    """``|eps|_Lambda <= beta`` with ``Lambda`` symmetric positive definite."""

    lam: np.ndarray
    beta: float
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.ndim == 0:
            lam = lam.reshape(1, 1)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise DomainError("Lambda must be square")
        if np.max(np.abs(lam - lam.T)) > 1e-12 * max(1.0, np.max(np.abs(lam))):
            raise DomainError("Lambda must be symmetric")
        try:
            L = np.linalg.cholesky(lam)
        except np.linalg.LinAlgError:
            raise DomainError("Lambda must be positive definite") from None
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise DomainError("beta must be positive and finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "chol", np.ascontiguousarray(L.T))

    @classmethod
    def isotropic(cls, dim: int, beta: float, scale: float = 1.0) -> "WeightedBound":
        return cls(scale * np.eye(dim), beta)

    def norm(self, eps: np.ndarray) -> float:
        e = self.chol @ np.asarray(eps, dtype=float)
        return float(np.sqrt(e @ e))


@dataclass(frozen=True)
class Margin:
    value: float
    binding_index: int


def _stack_bounds(bounds: Sequence[WeightedBound], dim: int):
    if not bounds:
        return np.zeros((0, dim, dim)), np.zeros(0), True
    for bd in bounds:
        if bd.lam.shape != (dim, dim):
            raise DomainError(f"expected {dim}x{dim} Lambda, got {bd.lam.shape}")
    U = np.ascontiguousarray(np.stack([bd.chol for bd in bounds]))
    beta = np.array([bd.beta for bd in bounds], dtype=float)
    identity = bool(np.all(U == np.eye(dim)))
    return U, beta, identity


def _pose_arrays(poses) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(poses, tuple) and len(poses) == 2 and not isinstance(poses[0], Pose):
        R, t = poses
        R = np.ascontiguousarray(np.asarray(R, dtype=float).reshape(-1, 3, 3))
        t = np.ascontiguousarray(np.asarray(t, dtype=float).reshape(-1, 3))
        return R, t
    poses = list(poses)
    if not poses:
        return np.zeros((0, 3, 3)), np.zeros((0, 3))
    R = np.ascontiguousarray(np.stack([p.rotation for p in poses]))
    t = np.ascontiguousarray(np.stack([p.translation for p in poses]))
    return R, t


class _PurseBase:
    kind = ""

    def __len__(self) -> int:
        return self.n_constraints

    def margins(self, R: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def min_beta(self) -> float:
        raise NotImplementedError


class Purse2D3D(_PurseBase):
    """``|z_i - Pi(R Z_i + t)|_Lambda_i <= beta_i`` for 2D-3D keypoint matches."""

    kind = "2d3d"

    def __init__(self, z, Z, bounds: Sequence[WeightedBound]):
        self.z = np.ascontiguousarray(np.asarray(z, dtype=float).reshape(-1, 2))
        self.Z = np.ascontiguousarray(np.asarray(Z, dtype=float).reshape(-1, 3))
        self.bounds = tuple(bounds)
        if not (len(self.z) == len(self.Z) == len(self.bounds)):
            raise DomainError("measurement and bound counts differ")
        if not (np.all(np.isfinite(self.Z)) and np.all(np.isfinite(self.z))):
            raise DomainError("measurements must be finite")
        self.U, self.beta, self.identity = _stack_bounds(self.bounds, 2)

    @property
    def n_constraints(self) -> int:
        return len(self.Z)

    @property
    def min_beta(self) -> float:
        return float(np.min(self.beta)) if len(self.beta) else 0.0

    def margins(self, R, t):
        R = np.ascontiguousarray(R, dtype=float)
        t = np.ascontiguousarray(t, dtype=float)
        return kernels.margins_2d3d(R, t, self.z, self.Z, self.U, self.beta, self.identity, DEPTH_FLOOR)

    def residual(self, pose: Pose, i: int) -> np.ndarray:
        return self.z[i] - camera_project(pose.rotation @ self.Z[i] + pose.translation)


class Purse3D3D(_PurseBase):
    """``|b_i - R a_i - t|_Lambda_i <= beta_i`` for 3D-3D point matches."""

    kind = "3d3d"

    def __init__(self, a, b, bounds: Sequence[WeightedBound]):
        self.a = np.ascontiguousarray(np.asarray(a, dtype=float).reshape(-1, 3))
        self.b = np.ascontiguousarray(np.asarray(b, dtype=float).reshape(-1, 3))
        self.bounds = tuple(bounds)
        if not (len(self.a) == len(self.b) == len(self.bounds)):
            raise DomainError("measurement and bound counts differ")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise DomainError("measurements must be finite")
        self.U, self.beta, self.identity = _stack_bounds(self.bounds, 3)

    @property
    def n_constraints(self) -> int:
        return len(self.a)

    @property
    def min_beta(self) -> float:
        return float(np.min(self.beta)) if len(self.beta) else 0.0

    def margins(self, R, t):
        R = np.ascontiguousarray(R, dtype=float)
        t = np.ascontiguousarray(t, dtype=float)
        return kernels.margins_3d3d(R, t, self.a, self.b, self.U, self.beta, self.identity)

    def residual(self, pose: Pose, i: int) -> np.ndarray:
        return self.b[i] - pose.rotation @ self.a[i] - pose.translation


class PurseReg(_PurseBase):
    """Intersection of chordal rotation balls and translation balls around pose hypotheses."""

    kind = "reg"

    def __init__(self, rotations, translations, rot_bounds: Sequence[WeightedBound], trans_bounds: Sequence[WeightedBound]):
        self.rotations = np.ascontiguousarray(np.asarray(rotations, dtype=float).reshape(-1, 3, 3))
        self.translations = np.ascontiguousarray(np.asarray(translations, dtype=float).reshape(-1, 3))
        self.rot_bounds = tuple(rot_bounds)
        self.trans_bounds = tuple(trans_bounds)
        n = len(self.rotations)
        if not (len(self.translations) == len(self.rot_bounds) == len(self.trans_bounds) == n):
            raise DomainError("hypothesis and bound counts differ")
        for R in self.rotations:
            if not is_rotation(R):
                raise DomainError("rotation hypotheses must be valid rotations")
        self.UR, self.beta_R, id_r = _stack_bounds(self.rot_bounds, 9)
        self.Ut, self.beta_t, id_t = _stack_bounds(self.trans_bounds, 3)
        self.identity = id_r and id_t

    @classmethod
    def isotropic(cls, rotations, translations, beta_R, beta_t) -> "PurseReg":
        rotations = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
        n = len(rotations)
        beta_R = np.broadcast_to(np.asarray(beta_R, dtype=float), (n,))
        beta_t = np.broadcast_to(np.asarray(beta_t, dtype=float), (n,))
        return cls(
            rotations,
            translations,
            [WeightedBound(np.eye(9), b) for b in beta_R],
            [WeightedBound(np.eye(3), b) for b in beta_t],
        )

    @property
    def n_constraints(self) -> int:
        return len(self.rotations)

    @property
    def min_beta(self) -> float:
        return 1.0

    def margins(self, R, t):
        R = np.ascontiguousarray(R, dtype=float)
        t = np.ascontiguousarray(t, dtype=float)
        return kernels.margins_reg(
            R, t, self.rotations, self.translations, self.UR, self.beta_R, self.Ut, self.beta_t, self.identity
        )

    def residual(self, pose: Pose, i: int) -> tuple[np.ndarray, np.ndarray]:
        return (
            (pose.rotation - self.rotations[i]).reshape(9),
            pose.translation - self.translations[i],
        )


Purse = Purse2D3D | Purse3D3D | PurseReg


def camera_project(v: np.ndarray) -> np.ndarray:
    """Pinhole projection onto the normalized image plane."""
    v = np.asarray(v, dtype=float)
    if not v[2] > DEPTH_FLOOR:
        raise DomainError("point at/behind camera")
    return np.array([v[0] / v[2], v[1] / v[2]])


def residual(purse, pose: Pose, i: int):
    if not 0 <= i < purse.n_constraints:
        raise IndexError(f"constraint index {i} out of range")
    return purse.residual(pose, i)


def boundary_margin(purse, pose: Pose) -> Margin:
    m, idx = purse.margins(pose.rotation[None], pose.translation[None])
    return Margin(float(m[0]), int(idx[0]) if purse.n_constraints else -1)


def in_purse(purse, pose: Pose) -> bool:
    return boundary_margin(purse, pose).value >= 0.0


def batch_margins(purse, poses) -> np.ndarray:
    R, t = _pose_arrays(poses)
    if len(R) == 0:
        return np.zeros(0)
    return purse.margins(R, t)[0]


def batch_in_purse(purse, poses) -> tuple[np.ndarray, np.ndarray]:
    """Membership flags and margins for a list of :class:`Pose` or an ``(R, t)`` array pair."""
    m = batch_margins(purse, poses)
    return m >= 0.0, m


# -- JSON --------------------------------------------------------------------


def _lam_list(bd: WeightedBound) -> list[float]:
    return [float(x) for x in bd.lam.reshape(-1)]


def purse_to_dict(purse) -> dict:
    cons = []
    if purse.kind == "2d3d":
        for z, Z, bd in zip(purse.z, purse.Z, purse.bounds):
            cons.append({"z": z.tolist(), "Z": Z.tolist(), "lambda": _lam_list(bd), "beta": bd.beta})
    elif purse.kind == "3d3d":
        for a, b, bd in zip(purse.a, purse.b, purse.bounds):
            cons.append({"a": a.tolist(), "b": b.tolist(), "lambda": _lam_list(bd), "beta": bd.beta})
    else:
        for R, t, bR, bt in zip(purse.rotations, purse.translations, purse.rot_bounds, purse.trans_bounds):
            cons.append(
                {
                    "R": R.reshape(-1).tolist(),
                    "t": t.tolist(),
                    "lambda": _lam_list(bR),
                    "beta": bR.beta,
                    "lambda_t": _lam_list(bt),
                    "beta_t": bt.beta,
                }
            )
    return {"kind": purse.kind, "constraints": cons}


def _bound(c: dict, key_lam: str, key_beta: str, dim: int) -> WeightedBound:
    lam = c.get(key_lam)
    lam = np.eye(dim) if lam is None else np.asarray(lam, dtype=float).reshape(dim, dim)
    return WeightedBound(lam, float(c[key_beta]))


def purse_from_dict(data: dict):
    kind = data.get("kind")
    cons: Iterable[dict] = data.get("constraints", [])
    try:
        if kind == "2d3d":
            return Purse2D3D(
                [c["z"] for c in cons] or np.zeros((0, 2)),
                [c["Z"] for c in cons] or np.zeros((0, 3)),
                [_bound(c, "lambda", "beta", 2) for c in cons],
            )
        if kind == "3d3d":
            return Purse3D3D(
                [c["a"] for c in cons] or np.zeros((0, 3)),
                [c["b"] for c in cons] or np.zeros((0, 3)),
                [_bound(c, "lambda", "beta", 3) for c in cons],
            )
        if kind == "reg":
            return PurseReg(
                [c["R"] for c in cons] or np.zeros((0, 3, 3)),
                [c["t"] for c in cons] or np.zeros((0, 3)),
                [_bound(c, "lambda", "beta", 9) for c in cons],
                [_bound(c, "lambda_t", "beta_t", 3) for c in cons],
            )
    except KeyError as exc:
        raise DomainError(f"constraint is missing field {exc}") from None
    raise DomainError(f"unknown purse kind {kind!r}")


def save_purse(purse, path) -> None:
    with open(path, "w") as fh:
        json.dump(purse_to_dict(purse), fh, indent=1)
        fh.write("\n")


def load_purse(path):
    with open(path) as fh:
        return purse_from_dict(json.load(fh))
