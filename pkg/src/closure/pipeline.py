"""End-to-end pipeline: initial samples, boundary walks, enclosing balls."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .init_sampler import InitConfig, init_sample
from .miniball import megb_so3, min_enclosing_ball
from .walk import WalkParams, WalkReport, walk_rotation_boundary, walk_translation_boundary


@dataclass
class ClosureReport:
    center_rotation: np.ndarray
    center_translation: np.ndarray
    D_hat: float
    d_hat: float
    n_init_samples: int
    n_boundary_rotations: int
    n_boundary_translations: int
    params: WalkParams
    init: InitConfig
    seed: int
    kind: str
    profile: str = "custom"
    timings: dict = field(default_factory=dict)
    rotation_walk: WalkReport | None = field(default=None, repr=False)
    translation_walk: WalkReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        """Everything except timings, so reports compare byte for byte."""
        return {
            "kind": self.kind,
            "center": {
                "R": [float(x) for x in self.center_rotation.reshape(-1)],
                "t": [float(x) for x in self.center_translation],
            },
            "D_hat": self.D_hat,
            "d_hat": self.d_hat,
            "n_init_samples": self.n_init_samples,
            "n_boundary_samples": {"rotation": self.n_boundary_rotations, "translation": self.n_boundary_translations},
            "profile": self.profile,
            "params": self.params.to_dict(),
            "init": {"n_trials": self.init.n_trials, "combo_size": self.init.combo_size},
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def run_closure(
    purse,
    init_cfg: InitConfig,
    params: WalkParams,
    seed: int | None = None,
    threads: int = 1,
    trace: bool = False,
    profile: str = "custom",
) -> ClosureReport:
    """Sample, walk to the boundary and enclose; deterministic given the seeds.

    ``seed`` keys the walks and defaults to ``init_cfg.rng_seed``. The result
    does not depend on ``threads``.
    """
    seed = init_cfg.rng_seed if seed is None else seed
    if threads < 1:
        raise DomainError("threads must be positive")
    timings = {}
    t0 = time.perf_counter()
    S0 = init_sample(purse, init_cfg)
    timings["init"] = time.perf_counter() - t0
    if not S0:
        raise DomainError("PURSE appears empty or too small")

    t0 = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else nullcontext(None)
    with pool as ex:
        rot = walk_rotation_boundary(S0, purse, params, seed, trace, ex)
        trans = walk_translation_boundary(S0, purse, params, seed, trace, ex, rotation_report=rot)
    timings["walk"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    gb = megb_so3(rot.boundary_rotations)
    tb = min_enclosing_ball(trans.boundary_translations)
    timings["miniball"] = time.perf_counter() - t0
    return ClosureReport(
        center_rotation=gb.center,
        center_translation=tb.center,
        D_hat=gb.radius,
        d_hat=tb.radius,
        n_init_samples=len(S0),
        n_boundary_rotations=len(rot),
        n_boundary_translations=len(trans),
        params=params,
        init=init_cfg,
        seed=seed,
        kind=purse.kind,
        profile=profile,
        timings=timings,
        rotation_walk=rot,
        translation_walk=trans,
    )
