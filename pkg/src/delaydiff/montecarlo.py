"""Repeated trials and empirical MSD curves.

Trials are grouped in fixed chunks of :data:`CHUNK_TRIALS`. The chunk
layout never depends on the worker count, and chunk results are reduced
in chunk order, so curves are bit-identical for any level of parallelism.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algorithms import RunConfig, simulate_batch
from .analysis import MsdCurve
from .model import SignalModel
from .topology import DelayProfile, check_combination

__all__ = ["ExperimentPlan", "trial_seed", "estimate_msd", "steady_state_estimate", "CHUNK_TRIALS"]

log = logging.getLogger(__name__)

CHUNK_TRIALS = 25


@dataclass(frozen=True)
class ExperimentPlan:
    """Arms sharing one network and data model.

    `arms` is a sequence of ``(name, RunConfig)`` pairs; all arms must use
    the same horizon.
    """

    arms: tuple
    A: np.ndarray
    delays: DelayProfile
    model: SignalModel
    trials: int
    master_seed: int
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple((str(n), c) for n, c in self.arms))
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if self.master_seed < 0:
            raise ValueError("master seed must be nonnegative")
        check_combination(self.A)
        for name, cfg in self.arms:
            if cfg.horizon != self.horizon:
                raise ValueError(f"arm {name!r} has horizon {cfg.horizon}, plan has {self.horizon}")


def trial_seed(master_seed: int, arm: int, trial: int) -> int:
    """64-bit seed of one trial, mixed from (master seed, arm index, trial index)."""
    ss = np.random.SeedSequence([int(master_seed), int(arm), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_chunk(args):
    cfg, A, delays, model, seeds = args
    res = simulate_batch(cfg, A, delays, model, seeds)
    ok = ~res.diverged
    curves = res.network_msd()[ok]
    return curves.sum(axis=0), (curves ** 2).sum(axis=0), int(ok.sum())


def estimate_msd(plan: ExperimentPlan, workers: int = 1) -> list:
    """Empirical network MSD of every arm, averaged over the plan's trials.

    Diverged trials are left out of the average; their number is recorded
    in ``metadata["diverged"]`` of the arm's curve.
    """
    jobs, owners = [], []
    for a, (name, cfg) in enumerate(plan.arms):
        for lo in range(0, plan.trials, CHUNK_TRIALS):
            seeds = [trial_seed(plan.master_seed, a, t)
                     for t in range(lo, min(lo + CHUNK_TRIALS, plan.trials))]
            jobs.append((cfg, plan.A, plan.delays, plan.model, seeds))
            owners.append(a)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]

    out = []
    for a, (name, cfg) in enumerate(plan.arms):
        s = np.zeros(plan.horizon)
        s2 = np.zeros(plan.horizon)
        kept = 0
        for owner, (cs, cs2, n) in zip(owners, results):
            if owner == a:
                s += cs
                s2 += cs2
                kept += n
        diverged = plan.trials - kept
        if diverged:
            log.warning("arm %s: %d of %d trials diverged and were excluded",
                        name, diverged, plan.trials)
        if kept:
            mean = s / kept
            var = np.maximum(s2 / kept - mean ** 2, 0.0)
            stderr = np.sqrt(var / max(kept - 1, 1))
        else:
            mean = np.full(plan.horizon, np.nan)
            stderr = np.full(plan.horizon, np.nan)
        meta = {
            "arm": name,
            "algorithm": cfg.algorithm,
            "step_sizes": cfg.step_sizes.tolist(),
            "gamma": plan.delays.gamma,
            "master_seed": plan.master_seed,
            "trials": plan.trials,
            "diverged": diverged,
        }
        out.append(MsdCurve(mean, "simulation", meta, stderr))
    return out


def steady_state_estimate(curve, window: int | None = None) -> float:
    """Mean of the last `window` values (default: final 10% of the curve)."""
    values = curve.values if isinstance(curve, MsdCurve) else np.asarray(curve, dtype=float)
    n = values.size
    if window is None:
        window = max(1, n // 10)
    if window < 1 or window > n:
        raise ValueError(f"window {window} outside 1..{n}")
    return float(values[n - window:].mean())
