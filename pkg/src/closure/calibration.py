"""Split-conformal calibration of PURSE bounds.

Scores are computed on held-out records with known poses and a single
quantile of them sets the bound. The default threshold is the
``ceil(N (1 - eps))``-th smallest score, which gives coverage of at least
about ``1 - eps`` on exchangeable test data. ``order="descending"`` instead
takes the score at that rank counted from the largest one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import Pose, exp_map, is_rotation, random_rotation
from .purse import Purse3D3D, PurseReg, WeightedBound


@dataclass(frozen=True)
class CalibRecord3D3D:
    a: np.ndarray
    b: np.ndarray
    weights: np.ndarray
    ground_truth: Pose

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1, 3)
        b = np.asarray(self.b, dtype=float).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not (len(a) == len(b) == len(w)) or len(a) == 0:
            raise DomainError("record needs matching, nonempty a, b and weights")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "weights", w / np.linalg.norm(w))


@dataclass(frozen=True)
class CalibRecordReg:
    rotations: np.ndarray
    translations: np.ndarray
    scores: np.ndarray
    ground_truth: Pose

    def __post_init__(self):
        R = np.asarray(self.rotations, dtype=float).reshape(-1, 3, 3)
        t = np.asarray(self.translations, dtype=float).reshape(-1, 3)
        p = np.asarray(self.scores, dtype=float).reshape(-1)
        if not (len(R) == len(t) == len(p)) or len(R) == 0:
            raise DomainError("record needs matching, nonempty hypotheses and scores")
        if np.any(p < 0) or not p.sum() > 0:
            raise DomainError("scores must be nonnegative with a positive sum")
        object.__setattr__(self, "rotations", R)
        object.__setattr__(self, "translations", t)
        object.__setattr__(self, "scores", p / p.sum())


@dataclass(frozen=True)
class CalibResult:
    alpha: float
    epsilon: float
    n_records: int
    k_R: float | None = None
    k_t: float | None = None

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "k_R": self.k_R, "k_t": self.k_t, "epsilon": self.epsilon, "n_records": self.n_records}


def quantile_rank(n: int, eps: float) -> int:
    """1-indexed rank ``ceil(n (1 - eps))``, clamped to ``[1, n]``."""
    if not 0.0 < eps < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    k = math.ceil(n * (1.0 - eps) - 1e-9)
    return min(max(k, 1), n)


def conformal_quantile(scores, eps: float, order: str = "conformal") -> float:
    s = np.sort(np.asarray(scores, dtype=float))
    k = quantile_rank(len(s), eps)
    if order == "conformal":
        return float(s[k - 1])
    if order == "descending":
        return float(s[::-1][k - 1])
    raise DomainError(f"unknown quantile order {order!r}")


def _check(records, eps):
    if len(records) < 2:
        raise DomainError("calibration needs at least 2 records")
    if not 0.0 < eps < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")


def score_3d3d(rec: CalibRecord3D3D) -> float:
    R, t = rec.ground_truth.rotation, rec.ground_truth.translation
    e = rec.a @ R.T + t - rec.b
    return float(np.max(np.sum(e * e, axis=1) * rec.weights))


def calibrate_3d3d(records, eps: float, order: str = "conformal") -> CalibResult:
    _check(records, eps)
    scores = [score_3d3d(r) for r in records]
    return CalibResult(conformal_quantile(scores, eps, order), eps, len(records))


def build_purse_3d3d(a, b, weights, alpha: float, top_k: int = 50) -> Purse3D3D:
    """Keep the ``top_k`` heaviest pairs; pair ``j`` gets ``beta_j = sqrt(alpha / w_j)``."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    w = w / np.linalg.norm(w)
    keep = np.argsort(-w, kind="stable")[:top_k]
    bounds = [WeightedBound(np.eye(3), math.sqrt(alpha / w[j])) for j in keep]
    return Purse3D3D(a[keep], b[keep], bounds)


def scores_reg(rec: CalibRecordReg) -> tuple[float, float]:
    R, t = rec.ground_truth.rotation, rec.ground_truth.translation
    dR = np.sqrt(np.sum((rec.rotations - R).reshape(-1, 9) ** 2, axis=1))
    dt = np.sqrt(np.sum((rec.translations - t) ** 2, axis=1))
    return float(np.max(rec.scores * dR)), float(np.max(rec.scores * dt))


def calibrate_reg(records, eps: float, order: str = "conformal") -> CalibResult:
    """Two-stage calibration: per-family scales ``k_R``, ``k_t`` then a joint threshold."""
    _check(records, eps)
    s = np.array([scores_reg(r) for r in records])
    k_R = conformal_quantile(s[:, 0], eps, order)
    k_t = conformal_quantile(s[:, 1], eps, order)
    if not (k_R > 0 and k_t > 0):
        raise DomainError("non-informative calibration")
    joint = np.maximum(s[:, 0] / k_R, s[:, 1] / k_t)
    return CalibResult(conformal_quantile(joint, eps, order), eps, len(records), k_R, k_t)


def build_purse_reg(rotations, translations, scores, result: CalibResult, bound_form: str = "inverse") -> PurseReg:
    """Hypothesis ``i`` gets chord bound ``alpha k_R / p_i`` and translation bound ``alpha k_t / p_i``.

    These are the exact inverses of the calibration score, so a pose is in
    the set iff its normalized score is at most ``alpha``. ``bound_form="literal"``
    uses ``alpha / (p_i k)`` instead, which is only calibrated when ``k = 1``.
    Hypotheses with zero score are dropped.
    """
    if result.k_R is None or result.k_t is None or not result.alpha > 0:
        raise DomainError("regression purse needs alpha, k_R and k_t")
    R = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    t = np.asarray(translations, dtype=float).reshape(-1, 3)
    p = np.asarray(scores, dtype=float).reshape(-1)
    keep = np.flatnonzero(p > 0)
    if len(keep) == 0:
        raise DomainError("all hypothesis scores are zero")
    p = p / p.sum()
    for i in keep:
        if not is_rotation(R[i]):
            raise DomainError("hypotheses must be rotations")
    if bound_form == "inverse":
        bR, bt = result.alpha * result.k_R / p[keep], result.alpha * result.k_t / p[keep]
    elif bound_form == "literal":
        bR, bt = result.alpha / (p[keep] * result.k_R), result.alpha / (p[keep] * result.k_t)
    else:
        raise DomainError(f"unknown bound form {bound_form!r}")
    return PurseReg.isotropic(R[keep], t[keep], bR, bt)


# -- synthetic records ---------------------------------------------------------


def _mixture_noise(rng: np.random.Generator, n: int, scale: np.ndarray) -> np.ndarray:
    """Heavy-tailed, non-Gaussian residuals: Laplace core with Student-t outliers."""
    core = rng.laplace(0.0, 1.0, (n, 3))
    tail = rng.standard_t(2.0, (n, 3)) * 3.0
    pick = rng.random(n) < 0.15
    e = np.where(pick[:, None], tail, core)
    return e * scale[:, None]


def synth_record_3d3d(rng: np.random.Generator, n_corr: int = 80) -> CalibRecord3D3D:
    R = random_rotation(rng)
    t = rng.normal(0.0, 0.5, 3) + [0.0, 0.0, 2.0]
    a = rng.uniform(-0.5, 0.5, (n_corr, 3))
    scale = np.exp(rng.uniform(np.log(0.003), np.log(0.03), n_corr))
    b = a @ R.T + t + _mixture_noise(rng, n_corr, scale)
    # weights track the noise level, imperfectly
    w = 1.0 / (scale * np.exp(rng.normal(0.0, 0.3, n_corr))) ** 2
    return CalibRecord3D3D(a, b, w, Pose(R, t))


def synth_record_reg(rng: np.random.Generator, n_hyp: int = 10) -> CalibRecordReg:
    R = random_rotation(rng)
    t = rng.normal(0.0, 0.5, 3)
    scale = np.exp(rng.uniform(np.log(0.02), np.log(0.2), n_hyp))
    rot_noise = _mixture_noise(rng, n_hyp, scale)
    rot_noise = np.clip(rot_noise, -1.0, 1.0)
    Rh = exp_map(rot_noise) @ R
    th = t + _mixture_noise(rng, n_hyp, 0.5 * scale)
    p = np.exp(-scale / 0.05 + rng.normal(0.0, 0.3, n_hyp))
    return CalibRecordReg(Rh, th, p, Pose(R, t))


def synth_records(kind: str, n: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    if kind == "3d3d":
        return [synth_record_3d3d(rng) for _ in range(n)]
    if kind == "reg":
        return [synth_record_reg(rng) for _ in range(n)]
    raise DomainError(f"unknown record kind {kind!r}")


# -- JSON ----------------------------------------------------------------------


def records_to_dict(records) -> dict:
    out = []
    kind = "reg" if records and isinstance(records[0], CalibRecordReg) else "3d3d"
    for r in records:
        gt = {"R": r.ground_truth.rotation.reshape(-1).tolist(), "t": r.ground_truth.translation.tolist()}
        if kind == "3d3d":
            out.append({"a": r.a.tolist(), "b": r.b.tolist(), "weights": r.weights.tolist(), **gt})
        else:
            out.append(
                {
                    "R_hyp": r.rotations.reshape(-1, 9).tolist(),
                    "t_hyp": r.translations.tolist(),
                    "scores": r.scores.tolist(),
                    **gt,
                }
            )
    return {"kind": kind, "records": out}


def records_from_dict(data: dict) -> list:
    kind = data.get("kind")
    recs = []
    try:
        for r in data["records"]:
            gt = Pose(np.asarray(r["R"], dtype=float).reshape(3, 3), r["t"])
            if kind == "3d3d":
                recs.append(CalibRecord3D3D(r["a"], r["b"], r["weights"], gt))
            elif kind == "reg":
                recs.append(CalibRecordReg(r["R_hyp"], r["t_hyp"], r["scores"], gt))
            else:
                raise DomainError(f"unknown record kind {kind!r}")
    except KeyError as exc:
        raise DomainError(f"record is missing field {exc}") from None
    return recs


def load_records(path) -> list:
    with open(path) as fh:
        return records_from_dict(json.load(fh))


def save_records(records, path) -> None:
    with open(path, "w") as fh:
        json.dump(records_to_dict(records), fh)
        fh.write("\n")
