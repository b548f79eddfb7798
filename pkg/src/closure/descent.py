"""Geodesic subgradient descent for the minimum enclosing ball of rotation samples.

Derivatives are taken in body coordinates, ``x -> f(c Exp(x))`` at ``x = 0``.
With ``(w, gamma)`` the axis-angle of ``c^T s``:

* gradient of ``dist^2(c, s)`` is ``-2 gamma w`` (``-gamma w`` for ``dist^2 / 2``)
* Hessian of ``dist^2(c, s)`` is ``2 w w^T + gamma cot(gamma/2) (I - w w^T)``
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import axis_angle, chordal_mean, geodesic_dist_so3, project_so3, slerp

ANTIPODAL_MARGIN = 1e-3


@dataclass(frozen=True)
class DescentParams:
    n_steps: int = 200
    tail_average: int = 10
    rho: float | None = None
    schedule: str = "harmonic"

    def __post_init__(self):
        if self.n_steps < 1 or self.tail_average < 1:
            raise DomainError("n_steps and tail_average must be positive")
        if self.tail_average > self.n_steps:
            raise DomainError("tail_average must not exceed n_steps")
        if self.rho is not None and not 0 < self.rho <= 0.5 * math.pi:
            raise DomainError("rho must lie in (0, pi/2]")
        if self.schedule not in ("harmonic", "strong"):
            raise DomainError(f"unknown schedule {self.schedule!r}")


@dataclass
class DescentTrace:
    iterates: np.ndarray
    f_values: np.ndarray
    center: np.ndarray
    f_final: float
    farthest: list[int] = field(default_factory=list)


def _axis_angle_checked(c, s):
    w, g = axis_angle(np.asarray(c).T @ np.asarray(s))
    if g > math.pi - ANTIPODAL_MARGIN:
        raise DomainError("rotations are near antipodal")
    return w, g


def grad_half_sq_dist(c, s) -> np.ndarray:
    """Gradient of ``dist^2(c, s) / 2``: ``-gamma w``."""
    w, g = _axis_angle_checked(c, s)
    return -g * w


def grad_sq_dist(c, s) -> np.ndarray:
    """Gradient of ``dist^2(c, s)`` at ``c``: ``-2 gamma w``; zero when ``c == s``."""
    return 2.0 * grad_half_sq_dist(c, s)


def gamma_cot_half(g: float) -> float:
    """``g cot(g / 2)`` with its limit 2 at ``g = 0``."""
    if g < 1e-6:
        return 2.0 - g * g / 6.0
    return g / math.tan(0.5 * g)


def hessian_sq_dist(c, s) -> np.ndarray:
    w, g = _axis_angle_checked(c, s)
    P = np.outer(w, w)
    return 2.0 * P + gamma_cot_half(g) * (np.eye(3) - P)


def max_dist_oracle(c, samples) -> tuple[int, float]:
    """Farthest sample from ``c``; ties go to the lowest index."""
    S = np.asarray(samples, dtype=float).reshape(-1, 3, 3)
    if len(S) == 0:
        raise DomainError("max_dist_oracle needs samples")
    d = np.atleast_1d(geodesic_dist_so3(np.asarray(c)[None], S))
    i = int(np.argmax(d))
    return i, float(d[i])


def max_sq_dist(c, samples) -> float:
    return max_dist_oracle(c, samples)[1] ** 2


def strong_convexity(rho: float) -> float:
    """``mu = 2 rho cot(rho)``, the modulus of the max-squared-distance on a ball of radius ``rho``."""
    return 2.0 * rho / math.tan(rho)


def subgradient_megb(samples, params: DescentParams = DescentParams(), start=None) -> DescentTrace:
    """Iterate ``R_i = slerp(R_{i-1}, farthest sample, step_i)``.

    ``schedule="harmonic"`` uses ``step_i = 1/i``. ``schedule="strong"`` uses the
    subgradient step ``eta_i = 2 / (mu (i + 1))`` on ``dist^2``, i.e. a slerp
    fraction ``min(1, 2 eta_i)``. The returned center is the projected sum of
    the last ``tail_average`` iterates.
    """
    S = np.asarray(samples, dtype=float).reshape(-1, 3, 3)
    if len(S) == 0:
        raise DomainError("subgradient_megb needs samples")
    R = chordal_mean(S) if start is None else np.array(start, dtype=float)
    spread = float(np.max(geodesic_dist_so3(R[None], S)))
    if spread >= 0.5 * math.pi:
        raise DomainError("samples must lie within a geodesic ball of radius pi/2")
    rho = params.rho if params.rho is not None else min(0.5 * math.pi - 1e-6, spread + 1e-3)
    mu = strong_convexity(rho) if params.schedule == "strong" else None
    its = np.empty((params.n_steps, 3, 3))
    fs = np.empty(params.n_steps)
    far = []
    for i in range(1, params.n_steps + 1):
        j, _ = max_dist_oracle(R, S)
        far.append(j)
        if mu is None:
            a = 1.0 / i
        else:
            a = min(1.0, 4.0 / (mu * (i + 1)))
        R = slerp(R, S[j], a)
        its[i - 1] = R
        fs[i - 1] = max_sq_dist(R, S)
    tail = its[-params.tail_average :]
    center = project_so3(np.sum(tail, axis=0))
    return DescentTrace(its, fs, center, max_sq_dist(center, S), far)


def loglog_slope(distances, lo: int = 10, hi: int = 100) -> float:
    """Least-squares slope of ``log dist`` against ``log i`` over ``i = lo..hi`` (1-indexed)."""
    d = np.asarray(distances, dtype=float)[lo - 1 : hi]
    i = np.arange(lo, lo + len(d), dtype=float)
    ok = d > 0
    return float(np.polyfit(np.log(i[ok]), np.log(d[ok]), 1)[0])


def write_descent_csv(trace: DescentTrace, dest) -> None:
    """CSV rows ``iter, f, dist_to_final`` to a path or an open text handle."""
    d = np.atleast_1d(geodesic_dist_so3(trace.iterates, trace.center[None]))
    fh = open(dest, "w", newline="") if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__") else dest
    try:
        w = csv.writer(fh)
        w.writerow(["iter", "f", "dist_to_final"])
        for i, (f, di) in enumerate(zip(trace.f_values, d), start=1):
            w.writerow([i, repr(float(f)), repr(float(di))])
    finally:
        if fh is not dest:
            fh.close()
