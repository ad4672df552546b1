"""Linear regression data model and synthetic data generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

__all__ = [
    "REFERENCE_W_STAR",
    "SignalModel",
    "DataSample",
    "sample_data",
    "generate_data",
    "node_streams",
    "optimal_weights",
    "network_covariance",
    "noise_matrix",
]

# parameter vector of the 30-node reference experiment (M = 10)
REFERENCE_W_STAR = np.array([0.495, -0.134, 0.139, -0.328, 0.367,
                         -0.049, -0.141, -1.858, -0.253, -0.602])


@dataclass(frozen=True)
class SignalModel:
    """Per-node statistics of ``d = x^T w* + v``.

    Attributes
    ----------
    w_star : ndarray, shape (M,)
    covariances : ndarray, shape (N, M, M)
        Regressor covariances ``R_k``, symmetric positive definite.
    noise_vars : ndarray, shape (N,)
        Measurement noise variances. Zero is accepted and gives noiseless data.
    """

    w_star: np.ndarray
    covariances: np.ndarray
    noise_vars: np.ndarray

    def __post_init__(self):
        w = np.array(self.w_star, dtype=float).reshape(-1)
        R = np.array(self.covariances, dtype=float)
        s = np.array(self.noise_vars, dtype=float).reshape(-1)
        if R.ndim != 3 or R.shape[1:] != (w.size, w.size):
            raise ValueError(f"covariances must have shape (N, {w.size}, {w.size}), got {R.shape}")
        if s.shape != (R.shape[0],):
            raise ValueError(f"need one noise variance per node, got {s.shape} for {R.shape[0]} nodes")
        if not np.allclose(R, np.swapaxes(R, 1, 2), atol=1e-12):
            raise ValueError("covariances must be symmetric")
        if np.any(np.linalg.eigvalsh(R)[:, 0] <= 0):
            raise ValueError("covariances must be positive definite")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("noise variances must be finite and nonnegative")
        for name, val in (("w_star", w), ("covariances", R), ("noise_vars", s)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        # symmetric square roots, used to colour standard normal regressors
        lam, vec = np.linalg.eigh(R)
        sq = np.einsum("nij,nj,nkj->nik", vec, np.sqrt(lam), vec)
        sq.setflags(write=False)
        object.__setattr__(self, "_sqrt_cov", sq)

    @property
    def dim(self) -> int:
        return self.w_star.size

    @property
    def num_nodes(self) -> int:
        return self.covariances.shape[0]

    @property
    def is_isotropic(self) -> bool:
        eye = np.eye(self.dim)
        return bool(np.all(self.covariances == self.covariances[:, :1, :1] * eye))

    @classmethod
    def isotropic(cls, w_star, regressor_vars, noise_vars) -> "SignalModel":
        """Model with ``R_k = sigma_x,k^2 I``."""
        w = np.asarray(w_star, dtype=float).reshape(-1)
        sx = np.asarray(regressor_vars, dtype=float).reshape(-1)
        return cls(w, sx[:, None, None] * np.eye(w.size), noise_vars)

    @classmethod
    def random_variances(cls, w_star, num_nodes, rng=None,
                         regressor_range=(0.8, 1.2), noise_range=(0.18, 0.22)) -> "SignalModel":
        """Isotropic model with uniformly drawn per-node variances."""
        rng = np.random.default_rng(rng)
        sx = rng.uniform(*regressor_range, size=num_nodes)
        sv = rng.uniform(*noise_range, size=num_nodes)
        return cls.isotropic(w_star, sx, sv)

    def regressor_sqrt(self, k: int) -> np.ndarray:
        return self._sqrt_cov[k]


@dataclass(frozen=True)
class DataSample:
    x: np.ndarray
    d: float


def sample_data(model: SignalModel, node: int, rng) -> DataSample:
    """Draw one ``(x, d)`` pair for `node` from the stream `rng`."""
    z = rng.standard_normal(model.dim)
    x = model.regressor_sqrt(node) @ z
    v = np.sqrt(model.noise_vars[node]) * rng.standard_normal()
    return DataSample(x, float(x @ model.w_star + v))


def node_streams(seed, num_nodes: int) -> list:
    """One independent generator per node, all derived from the trial seed."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
            for k in range(num_nodes)]


def generate_data(model: SignalModel, streams, length: int):
    """Draw a block of `length` iterations of data for every node.

    Each node consumes its own stream: first ``length * M`` normals for the
    regressors, then ``length`` normals for the noise.

    Returns
    -------
    x : ndarray, shape (length, N, M)
    d : ndarray, shape (length, N)
    """
    N, M = model.num_nodes, model.dim
    x = np.empty((length, N, M))
    v = np.empty((length, N))
    for k, g in enumerate(streams):
        x[:, k, :] = g.standard_normal((length, M)) @ model.regressor_sqrt(k)
        v[:, k] = g.standard_normal(length)
    # same reduction as the filters' a-priori error, so noiseless data are exact
    d = (x * model.w_star).sum(axis=-1) + v * np.sqrt(model.noise_vars)
    return x, d


def optimal_weights(model: SignalModel, cross_covariances=None) -> np.ndarray:
    """Minimiser ``(sum_k R_k)^{-1} sum_k r_dx,k`` of the global MSE cost.

    Without `cross_covariances` the synthetic ``r_dx,k = R_k w*`` is used.
    """
    R = model.covariances
    r = R @ model.w_star if cross_covariances is None else np.asarray(cross_covariances, dtype=float)
    R_sum = R.sum(axis=0)
    if np.linalg.cond(R_sum) > 1e14:
        raise np.linalg.LinAlgError("aggregate regressor covariance is singular")
    return np.linalg.solve(R_sum, r.sum(axis=0))


def network_covariance(model: SignalModel) -> np.ndarray:
    return block_diag(*model.covariances)


def _as_steps(step_sizes, n):
    mu = np.broadcast_to(np.asarray(step_sizes, dtype=float), (n,)).copy()
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValueError("step sizes must be finite and nonnegative")
    return mu


def noise_matrix(model: SignalModel, step_sizes) -> np.ndarray:
    """Gradient-noise covariance ``bdiag{mu_k^2 sigma_v,k^2 R_k}``."""
    mu = _as_steps(step_sizes, model.num_nodes)
    scale = mu ** 2 * model.noise_vars
    return block_diag(*(scale[:, None, None] * model.covariances))
