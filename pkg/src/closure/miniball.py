"""Exact minimum enclosing balls in R^d and the SO(3) MEGB via quaternions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError
from .geometry import chordal_mean, geodesic_dist_so3, matrix_from_quat, quat_from_matrix

HEMISPHERE = 0.5 * math.pi


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    support: np.ndarray

    def contains(self, p, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(np.asarray(p, dtype=float) - self.center)) <= self.radius + tol


@dataclass(frozen=True)
class GeodesicBall:
    center: np.ndarray
    radius: float
    center_quat: np.ndarray


def _circumcenter(S: np.ndarray) -> np.ndarray | None:
    # center of the sphere through every row of S, restricted to their affine hull
    if len(S) == 1:
        return S[0].copy()
    V = S[1:] - S[0]
    G = 2.0 * (V @ V.T)
    rhs = np.einsum("ij,ij->i", V, V)
    diag = np.prod(np.diag(G))
    if not diag > 0 or np.linalg.det(G) <= 1e-12 * diag:
        return None
    lam = np.linalg.solve(G, rhs)
    return S[0] + lam @ V


def _refine(points: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Smallest ball among those through subsets of the support that enclose it."""
    best_c, best_r = None, math.inf
    n = len(support)
    for k in range(1, n + 1):
        for sub in itertools.combinations(range(n), k):
            c = _circumcenter(support[list(sub)])
            if c is None:
                continue
            d = np.sqrt(np.sum((support - c) ** 2, axis=1))
            r = float(np.max(d))
            if r < best_r - 1e-15 * (1.0 + r):
                best_c, best_r = c, r
    return best_c


def min_enclosing_ball(points) -> Ball:
    """Smallest Euclidean ball containing ``points`` (shape ``(n, d)``).

    The input is sorted and deduplicated first, so the result does not depend
    on point order or repetition. The move-to-front search supplies a support
    set; the center is then re-derived from the best subset of that support and
    the radius is the largest distance to any input point, which keeps the
    reported ball enclosing even under round-off.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or len(P) == 0:
        raise DomainError("min_enclosing_ball needs a nonempty (n, d) array")
    if not np.all(np.isfinite(P)):
        raise DomainError("points must be finite")
    U = np.unique(P, axis=0)
    _, _, sup = kernels.miniball_support(np.ascontiguousarray(U))
    S = U[sorted(sup)]
    c = _refine(U, S)
    r = float(np.max(np.sqrt(np.sum((P - c) ** 2, axis=1))))
    return Ball(c, r, S)


def _as_rotations(samples) -> tuple[np.ndarray, np.ndarray | None]:
    X = np.asarray(samples, dtype=float)
    if X.ndim == 2 and X.shape[1] == 4:
        q = X / np.linalg.norm(X, axis=1, keepdims=True)
        return matrix_from_quat(q), q
    if X.ndim == 2 and X.shape == (3, 3):
        X = X[None]
    if X.ndim != 3 or X.shape[1:] != (3, 3):
        raise DomainError("expected (n, 3, 3) rotations or (n, 4) quaternions")
    return X, None


def megb_so3(samples) -> GeodesicBall:
    """Minimum enclosing geodesic ball of a rotation sample set.

    Quaternions are put on the hemisphere of the chordal mean, their Euclidean
    miniball in R^4 is computed, and the normalized center is taken as the
    ball center. The radius is the largest geodesic distance from that center.
    """
    Rs, q = _as_rotations(samples)
    if len(Rs) == 0:
        raise DomainError("megb_so3 needs at least one rotation")
    mean = chordal_mean(Rs)
    if float(np.max(geodesic_dist_so3(mean[None], Rs))) >= HEMISPHERE:
        raise DomainError("samples exceed quarter-sphere spread")
    q0 = quat_from_matrix(mean)
    if q is None:
        q = quat_from_matrix(Rs)
    s = np.where(q @ q0 < 0.0, -1.0, 1.0)
    ball = min_enclosing_ball(q * s[:, None])
    cq = ball.center / np.linalg.norm(ball.center)
    C = matrix_from_quat(cq)
    radius = float(np.max(geodesic_dist_so3(C[None], Rs)))
    return GeodesicBall(C, radius, cq)


def relative_ratio(inner: float, outer: float) -> float:
    """Tightness ratio ``inner / outer`` of an inner against an outer radius."""
    if not outer > 0:
        raise DomainError("outer radius must be positive")
    if inner < 0:
        raise DomainError("inner radius must be nonnegative")
    return float(inner) / float(outer)
