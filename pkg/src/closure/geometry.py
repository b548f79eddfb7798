"""SO(3) / SE(3) primitives.

Rotations are plain ``(3, 3)`` float arrays and quaternions are ``(4,)``
arrays ordered ``[w, x, y, z]``. Most functions accept a leading batch
dimension. Products and norms are written out elementwise rather than through
BLAS so that a pose evaluated alone or inside any batch yields the same bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SMALL_ANGLE = 1e-10
BRANCH_CUT_MARGIN = 1e-6
SQRT8 = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class Pose:
    """Rotation plus translation in meters, ``x = (R, t)``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise DomainError("translation must be finite")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)


def skew(v: np.ndarray) -> np.ndarray:
    """Hat operator; works on ``(..., 3)``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def matmul3(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Batched 3x3 product with a fixed summation order."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return (
        A[..., :, 0, None] * B[..., None, 0, :]
        + A[..., :, 1, None] * B[..., None, 1, :]
    ) + A[..., :, 2, None] * B[..., None, 2, :]


def apply3(R: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batched ``R @ v`` with a fixed summation order."""
    return (R[..., :, 0] * v[..., None, 0] + R[..., :, 1] * v[..., None, 1]) + R[
        ..., :, 2
    ] * v[..., None, 2]


def _norm3(v: np.ndarray) -> np.ndarray:
    return np.sqrt((v[..., 0] * v[..., 0] + v[..., 1] * v[..., 1]) + v[..., 2] * v[..., 2])


def exp_map(v: np.ndarray) -> np.ndarray:
    """Rodrigues' formula ``exp(v^)``; ``v`` may be ``(3,)`` or ``(..., 3)``."""
    v = np.asarray(v, dtype=float)
    theta = _norm3(v)
    K = skew(v)
    K2 = matmul3(K, K)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0, np.sin(safe) / safe)
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / (safe * safe))
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * K2


def rotation_angle(R: np.ndarray) -> np.ndarray:
    """Angle of ``R`` in ``[0, pi]``, computed with atan2 for accuracy at both ends."""
    R = np.asarray(R, dtype=float)
    w = vee(R - np.swapaxes(R, -1, -2))
    c = ((R[..., 0, 0] + R[..., 1, 1]) + R[..., 2, 2] - 1.0) * 0.5
    s = 0.5 * _norm3(w)
    return np.arctan2(s, c)


def log_map(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`exp_map` on the principal branch (angle < pi)."""
    R = np.asarray(R, dtype=float)
    if R.ndim > 2:
        return np.stack([log_map(r) for r in R.reshape(-1, 3, 3)]).reshape(R.shape[:-2] + (3,))
    theta = float(rotation_angle(R))
    w = vee(R - R.T)
    if theta < SMALL_ANGLE:
        return 0.5 * w
    if theta > math.pi - BRANCH_CUT_MARGIN:
        raise DomainError("angle near branch cut")
    return w * (theta / (2.0 * math.sin(theta)))


def axis_angle(R: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit axis and angle of ``R``. The identity returns the z axis and 0."""
    theta = float(rotation_angle(R))
    if theta < SMALL_ANGLE:
        return np.array([0.0, 0.0, 1.0]), 0.0
    if theta > math.pi - BRANCH_CUT_MARGIN:
        # axis from the symmetric part: R + I = 2 u u^T at theta = pi
        B = 0.5 * (np.asarray(R) + np.eye(3))
        k = int(np.argmax(np.diag(B)))
        u = B[:, k] / math.sqrt(max(B[k, k], 1e-300))
        w = vee(np.asarray(R) - np.asarray(R).T)
        if float(u @ w) < 0:
            u = -u
        return u / np.linalg.norm(u), theta
    v = log_map(R)
    return v / theta, theta


def axis_rotation(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return exp_map(axis / np.linalg.norm(axis) * angle)


def rot_x(angle: float) -> np.ndarray:
    return axis_rotation([1.0, 0.0, 0.0], angle)


def rot_y(angle: float) -> np.ndarray:
    return axis_rotation([0.0, 1.0, 0.0], angle)


def rot_z(angle: float) -> np.ndarray:
    return axis_rotation([0.0, 0.0, 1.0], angle)


def geodesic_dist_so3(a: np.ndarray, b: np.ndarray) -> np.ndarray | float:
    """Angle of ``a^T b`` in radians.

    Evaluated as ``atan2(|vee(M - M^T)|/2, (tr M - 1)/2)``, which equals the
    clamped ``arccos((tr M - 1)/2)`` but keeps full precision near 0 and pi.
    Exactly symmetric in its arguments.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    M = matmul3(np.swapaxes(a, -1, -2), b)
    d = rotation_angle(M)
    return float(d) if np.ndim(d) == 0 else d


def geodesic_dist_so3_arccos(a: np.ndarray, b: np.ndarray) -> float:
    """Textbook form with the arccos argument clamped to [-1, 1]."""
    c = (np.trace(np.asarray(a).T @ np.asarray(b)) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def project_so3(M: np.ndarray) -> np.ndarray:
    """Nearest rotation to ``M`` in Frobenius norm (argmax tr(R^T M))."""
    M = np.asarray(M, dtype=float).reshape(3, 3)
    if not np.all(np.isfinite(M)):
        raise DomainError("degenerate projection")
    U, S, Vt = np.linalg.svd(M)
    if S[-1] <= 1e-12:
        raise DomainError("degenerate projection")
    d = np.sign(np.linalg.det(U @ Vt))
    if d == 0:
        d = 1.0
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def exact_sum(X: np.ndarray) -> np.ndarray:
    """Correctly rounded sum over the first axis; independent of row order."""
    X = np.asarray(X, dtype=float)
    flat = X.reshape(X.shape[0], -1)
    return np.array([math.fsum(col) for col in flat.T]).reshape(X.shape[1:])


def chordal_mean(rotations: np.ndarray) -> np.ndarray:
    """``proj_SO(3)`` of the entrywise sum, summed exactly."""
    rotations = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    if len(rotations) == 0:
        raise DomainError("cannot average an empty rotation set")
    return project_so3(exact_sum(rotations))


def slerp(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Constant-speed geodesic from ``a`` (alpha=0) to ``b`` (alpha=1)."""
    a = np.asarray(a, dtype=float)
    rel = a.T @ np.asarray(b, dtype=float)
    if float(rotation_angle(rel)) > math.pi - BRANCH_CUT_MARGIN:
        raise DomainError("slerp endpoints are near antipodal")
    if alpha == 1.0:
        return np.array(b, dtype=float)
    return a @ exp_map(alpha * log_map(rel))


def chord_to_geodesic_radius(beta: float) -> float:
    """Frobenius chord ``|R - R_i|_F`` to geodesic angle: ``2 asin(beta / 2 sqrt 2)``."""
    if not (0.0 <= beta <= SQRT8 * (1 + 1e-15)):
        raise DomainError(f"chord length {beta} outside [0, 2*sqrt(2)]")
    return 2.0 * math.asin(min(beta / SQRT8, 1.0))


def geodesic_to_chord(theta: float) -> float:
    return SQRT8 * math.sin(0.5 * theta)


# -- quaternions -------------------------------------------------------------


def canonical_quat(q: np.ndarray) -> np.ndarray:
    """Unit quaternion with w >= 0; ties broken by first nonzero component > 0."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    flat = q.reshape(-1, 4).copy()
    nz = flat != 0.0
    first = np.argmax(nz, axis=1)
    lead = flat[np.arange(len(flat)), first]
    flat[nz.any(axis=1) & (lead < 0.0)] *= -1.0
    return flat.reshape(q.shape)


def quat_from_matrix(R: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns the canonical representative."""
    R = np.asarray(R, dtype=float)
    m = R.reshape(-1, 3, 3)
    m00, m11, m22 = m[:, 0, 0], m[:, 1, 1], m[:, 2, 2]
    tr = m00 + m11 + m22
    k = np.argmax(np.stack([tr, m00, m11, m22], axis=1), axis=1)
    d21, d02, d10 = m[:, 2, 1] - m[:, 1, 2], m[:, 0, 2] - m[:, 2, 0], m[:, 1, 0] - m[:, 0, 1]
    s01, s02, s12 = m[:, 0, 1] + m[:, 1, 0], m[:, 0, 2] + m[:, 2, 0], m[:, 1, 2] + m[:, 2, 1]
    out = np.empty((len(m), 4))
    with np.errstate(divide="ignore", invalid="ignore"):
        for case, diag in enumerate((tr, 1.0 + m00 - m11 - m22, 1.0 + m11 - m00 - m22, 1.0 + m22 - m00 - m11)):
            sel = k == case
            if not sel.any():
                continue
            arg = 1.0 + diag[sel] if case == 0 else diag[sel]
            sv = 2.0 * np.sqrt(np.maximum(arg, 0.0))
            cols = {
                0: (0.25 * sv, d21[sel] / sv, d02[sel] / sv, d10[sel] / sv),
                1: (d21[sel] / sv, 0.25 * sv, s01[sel] / sv, s02[sel] / sv),
                2: (d02[sel] / sv, s01[sel] / sv, 0.25 * sv, s12[sel] / sv),
                3: (d10[sel] / sv, s02[sel] / sv, s12[sel] / sv, 0.25 * sv),
            }[case]
            out[sel] = np.stack(cols, axis=1)
    out = canonical_quat(out)
    return out.reshape(R.shape[:-2] + (4,))


def matrix_from_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def stereographic(q: np.ndarray) -> np.ndarray:
    """Project canonical unit quaternions (w >= 0) from (-1, 0, 0, 0) into R^3."""
    q = canonical_quat(q)
    return q[..., 1:] / (1.0 + q[..., :1])


# -- sampling ----------------------------------------------------------------


def random_rotation(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-uniform rotations via normalized Gaussian quaternions."""
    n = 1 if size is None else size
    q = rng.standard_normal((n, 4))
    R = matrix_from_quat(q)
    return R[0] if size is None else R


def uniform_ball(rng: np.random.Generator, n: int, radius: float = 1.0, dim: int = 3) -> np.ndarray:
    """Uniform samples in the ``dim``-ball; one Gaussian draw of ``dim + 2`` per point."""
    x = rng.standard_normal((n, dim + 2))
    nrm = np.sqrt(np.sum(x * x, axis=1))
    return x[:, :dim] / nrm[:, None] * radius


def random_unit_vector(rng, dim: int = 3) -> np.ndarray:
    while True:
        x = np.asarray(rng.standard_normal(dim), dtype=float)
        n = float(np.linalg.norm(x))
        if n > 1e-12:
            return x / n


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and bool(np.all(np.isfinite(R)))
        and float(np.max(np.abs(R.T @ R - np.eye(3)))) <= tol
        and abs(float(np.linalg.det(R)) - 1.0) <= tol
    )
