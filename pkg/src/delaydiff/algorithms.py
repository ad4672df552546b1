"""Adaptive strategies: non-cooperative LMS and ATC diffusion variants.

Two code paths live here. :class:`AgentState`, :func:`adapt_step` and
:func:`combine_delayed` express one agent at a time and keep an explicit
ring buffer of past intermediate estimates. :func:`simulate_batch` runs
the same recursions vectorised over trials and nodes and is what the
Monte Carlo driver uses.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import DataSample, SignalModel, generate_data, node_streams
from .topology import DelayProfile, NetworkTopology, check_combination, partition_combination

__all__ = [
    "ALGORITHMS",
    "RunConfig",
    "AgentState",
    "TrialResult",
    "adapt_step",
    "combine_delayed",
    "simulate_batch",
    "run_trial",
    "trial_data",
]

ALGORITHMS = ("noncooperative", "atc_ideal", "atc_delayed", "atc_synchronous")

# iterations of data drawn per call to the node streams; part of the
# stream layout, so changing it changes every simulated trajectory
DATA_BLOCK = 256


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    step_sizes: np.ndarray
    horizon: int
    w_init: np.ndarray | None = None
    guard: float = 1e9

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        mu = np.array(self.step_sizes, dtype=float)
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise ValueError("step sizes must be finite and nonnegative")
        mu.setflags(write=False)
        object.__setattr__(self, "step_sizes", mu)
        object.__setattr__(self, "horizon", int(self.horizon))
        if self.w_init is not None:
            w0 = np.array(self.w_init, dtype=float).reshape(-1)
            w0.setflags(write=False)
            object.__setattr__(self, "w_init", w0)

    def steps_for(self, num_nodes: int) -> np.ndarray:
        return np.broadcast_to(self.step_sizes, (num_nodes,)).astype(float)


class AgentState:
    """Estimate of one agent plus the history of its intermediate estimates.

    ``psi_history[j]`` holds the intermediate estimate produced ``j``
    iterations ago; slots not yet written hold the initial estimate.
    """

    def __init__(self, w_init, depth: int):
        self.w = np.array(w_init, dtype=float)
        self.psi_history = deque([self.w.copy() for _ in range(depth)], maxlen=depth)
        self.iteration = 0

    @property
    def depth(self) -> int:
        return self.psi_history.maxlen


def adapt_step(state: AgentState, sample: DataSample, mu: float) -> np.ndarray:
    """LMS update of the agent's estimate; pushes the result into its history."""
    x = sample.x
    psi = state.w + mu * x * (sample.d - x @ state.w)
    state.psi_history.appendleft(psi)
    return psi


def combine_delayed(states, A, delays: DelayProfile) -> list:
    """Combine step using the delayed intermediate estimates of the neighbours.

    Node k reads slot ``tau[l, k]`` of the history of every neighbour l.
    The sum is formed as ``psi_k + sum_{l != k} a_lk (psi_l - psi_k)``,
    which equals ``sum_l a_lk psi_l`` for columns summing to one and is
    exact when all combined estimates agree. All agents must have adapted
    for the current iteration.
    """
    A = np.asarray(A, dtype=float)
    new = []
    for k in range(len(states)):
        own = states[k].psi_history[0]
        w = own.copy()
        for l in np.flatnonzero(A[:, k] > 0):
            if l != k:
                w = w + A[l, k] * (states[l].psi_history[delays.tau[l, k]] - own)
        new.append(w)
    for st, w in zip(states, new):
        st.w = w
        st.iteration += 1
    return new


def trial_data(model: SignalModel, seed, horizon: int):
    """The full data record one trial of :func:`simulate_batch` consumes.

    Returns ``x`` of shape (horizon, N, M) and ``d`` of shape (horizon, N).
    """
    streams = node_streams(seed, model.num_nodes)
    blocks = [generate_data(model, streams, min(DATA_BLOCK, horizon - s))
              for s in range(0, horizon, DATA_BLOCK)]
    return np.concatenate([b[0] for b in blocks]), np.concatenate([b[1] for b in blocks])


@dataclass
class TrialResult:
    """Squared deviations ``||w* - w_k,i||^2`` with shape (trials, horizon, N).

    ``estimates`` holds the estimates after the last iteration, shape
    (trials, N, M).
    """

    sq_errors: np.ndarray
    diverged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    estimates: np.ndarray | None = None

    def network_msd(self) -> np.ndarray:
        """Node-averaged squared deviation per trial, shape (trials, horizon)."""
        return self.sq_errors.mean(axis=2)


def simulate_batch(config: RunConfig, A, delays: DelayProfile, model: SignalModel,
                   seeds) -> TrialResult:
    """Run independent trials, one per entry of `seeds`.

    Every trial draws its data from per-node streams derived from its seed,
    so a trial's trajectory does not depend on which batch it ran in.
    """
    A = check_combination(A)
    N, M = model.num_nodes, model.dim
    if A.shape[0] != N:
        raise ValueError(f"combination matrix has {A.shape[0]} nodes, model has {N}")
    seeds = list(seeds)
    nb = len(seeds)
    H = config.horizon
    mu = config.steps_for(N)[:, None]
    w0 = np.zeros(M) if config.w_init is None else config.w_init
    if w0.shape != (M,):
        raise ValueError(f"initial estimate must have length {M}")
    w_star = model.w_star
    guard2 = config.guard ** 2

    alg = config.algorithm
    if alg == "atc_delayed":
        T = partition_combination(A, delays).depth
    else:
        T = delays.depth if alg == "atc_synchronous" else 1
    # directed links l -> k without self-loops, in increment form (see combine_delayed)
    src, dst = np.nonzero((A > 0) & ~np.eye(N, dtype=bool))
    weights = A[src, dst][:, None]
    lag = delays.tau[src, dst] if alg == "atc_delayed" else np.zeros(src.size, dtype=int)
    incidence = np.zeros((N, src.size))
    incidence[dst, np.arange(src.size)] = 1.0

    def combine(psi, hist, ptr):
        nbr = hist[:, (ptr - lag) % T, src] if T > 1 else psi[:, src]
        return psi + incidence @ (weights * (nbr - psi[:, dst]))

    w = np.broadcast_to(w0, (nb, N, M)).copy()
    hist = np.broadcast_to(w0, (nb, T, N, M)).copy()
    psi = w.copy()
    ptr = 0
    sq = np.empty((nb, H, N))
    diverged = np.zeros(nb, dtype=bool)
    streams = [node_streams(s, N) for s in seeds]

    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, H, DATA_BLOCK):
            L = min(DATA_BLOCK, H - start)
            blocks = [generate_data(model, st, L) for st in streams]
            xs = np.stack([b[0] for b in blocks], axis=1)
            ds = np.stack([b[1] for b in blocks], axis=1)
            for j in range(L):
                i = start + j
                x, d = xs[j], ds[j]
                if alg == "atc_synchronous":
                    phase = i % T
                    if phase == 0:
                        e = d - (x * w).sum(axis=-1)
                        psi = w + mu * x * e[..., None]
                    if phase == T - 1:
                        w = combine(psi, psi[:, None], 0)
                else:
                    e = d - (x * w).sum(axis=-1)
                    psi = w + mu * x * e[..., None]
                    if alg == "noncooperative":
                        w = psi
                    elif alg == "atc_ideal":
                        w = combine(psi, psi[:, None], 0)
                    else:
                        ptr = (ptr + 1) % T
                        hist[:, ptr] = psi
                        w = combine(psi, hist, ptr)
                bad = ((w * w).sum(axis=-1) > guard2).any(axis=1) | ~np.isfinite(w).all(axis=(1, 2))
                if bad.any():
                    diverged |= bad
                    w[bad] = w0
                    psi[bad] = w0
                    hist[bad] = w0
                sq[:, i, :] = ((w_star - w) ** 2).sum(axis=-1)
    sq[diverged] = np.nan
    w[diverged] = np.nan
    return TrialResult(sq, diverged, w)


def run_trial(config: RunConfig, topology: NetworkTopology | None, A, delays: DelayProfile,
              model: SignalModel, seed) -> TrialResult:
    """One trial; ``sq_errors`` has shape (horizon, N)."""
    if topology is not None:
        check_combination(A, topology)
    res = simulate_batch(config, A, delays, model, [seed])
    return TrialResult(res.sq_errors[0], res.diverged[0], res.estimates[0])
