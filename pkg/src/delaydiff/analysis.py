"""Mean and mean-square behaviour of diffusion LMS with link delays.

All operators act on the extended error vector that stacks the current
estimate errors with the last ``gamma`` intermediate-estimate errors, so
the delayed recursion becomes an ordinary linear one of size ``M*N*T``.
The mean-square results use the small step-size approximation
``F ~= kron(B^T, B^T)``; ``F`` itself is only formed by
:func:`verify_rho_relation`, on small operators.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigs

from .model import SignalModel, network_covariance, noise_matrix
from .topology import DelayProfile, ExtendedCombination, partition_combination

__all__ = [
    "ExtendedOperators",
    "MsdCurve",
    "StabilityReport",
    "SteadyState",
    "RhoRelation",
    "build_operators",
    "build_mean_matrix",
    "build_noise_operator",
    "operators_for",
    "network_weighting",
    "stepsize_bounds",
    "block_max_norm",
    "spectral_radius",
    "check_mean_stability",
    "mean_error_trajectory",
    "transient_msd",
    "steady_state_msd",
    "verify_rho_relation",
]

DENSE_EIG_LIMIT = 2000
KRON_LIMIT = 60
# a spectral radius within this distance of 1 counts as marginal, not stable
RHO_TOL = 1e-10


@dataclass(frozen=True)
class ExtendedOperators:
    """Extended-state matrices for one (combination, delays, model, mu) setup.

    ``B`` drives the mean error, ``G`` is the noise contribution to the
    weighted variance recursion and ``Sigma_bar`` selects the block of
    current estimates.
    """

    B: np.ndarray
    G: np.ndarray
    Sigma_bar: np.ndarray
    M_mat: np.ndarray
    R: np.ndarray
    R_ext: np.ndarray
    num_nodes: int
    dim: int
    depth: int


@dataclass
class MsdCurve:
    """Network MSD per iteration, linear scale."""

    values: np.ndarray
    source: str
    metadata: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.source not in ("theory", "simulation"):
            raise ValueError(f"unknown curve source {self.source!r}")

    def __len__(self):
        return self.values.size

    def db(self) -> np.ndarray:
        return 10.0 * np.log10(self.values)


@dataclass(frozen=True)
class StabilityReport:
    block_norm: float
    block_max_norm_condition: bool
    spectral_radius: float
    stable: bool


@dataclass(frozen=True)
class SteadyState:
    value: float
    converged: bool
    terms: int
    stable: bool = True


@dataclass(frozen=True)
class RhoRelation:
    rho_B: float
    rho_F: float
    holds: bool


def _steps(step_sizes, n):
    mu = np.broadcast_to(np.asarray(step_sizes, dtype=float), (n,)).copy()
    if np.any(mu < 0):
        raise ValueError("step sizes must be nonnegative")
    return mu


def network_weighting(num_nodes: int, dim: int, depth: int) -> np.ndarray:
    """``bdiag{I_MN, 0, ..., 0}`` of size ``M*N*T``."""
    mn = num_nodes * dim
    S = np.zeros((mn * depth, mn * depth))
    S[:mn, :mn] = np.eye(mn)
    return S


def build_operators(ext: ExtendedCombination, model: SignalModel, step_sizes) -> ExtendedOperators:
    N, M, T = ext.num_nodes, model.dim, ext.depth
    if model.num_nodes != N:
        raise ValueError(f"combination has {N} nodes, model has {model.num_nodes}")
    mu = _steps(step_sizes, N)
    mn, n = M * N, M * N * T
    Ae = ext.lifted(M)
    M_mat = np.kron(np.diag(mu), np.eye(M))
    R = network_covariance(model)
    R_ext = np.zeros((n, n))
    R_ext[:mn, :mn] = M_mat @ R
    B = Ae @ (np.eye(n) - R_ext)
    S_ext = np.zeros((n, n))
    S_ext[:mn, :mn] = noise_matrix(model, mu)
    G = Ae @ S_ext @ Ae.T
    G = 0.5 * (G + G.T)
    return ExtendedOperators(B, G, network_weighting(N, M, T), M_mat, R, R_ext, N, M, T)


def build_mean_matrix(ext: ExtendedCombination, model: SignalModel, step_sizes) -> np.ndarray:
    return build_operators(ext, model, step_sizes).B


def build_noise_operator(ext: ExtendedCombination, model: SignalModel, step_sizes) -> np.ndarray:
    return build_operators(ext, model, step_sizes).G


def operators_for(algorithm: str, A, delays: DelayProfile, model: SignalModel,
                  step_sizes) -> ExtendedOperators:
    """Operators of the recursion an algorithm follows.

    Non-cooperative LMS is diffusion with ``A = I``; ideal ATC ignores the
    delays. The synchronous baseline has no mean-square model.
    """
    N = model.num_nodes
    if algorithm == "noncooperative":
        A, tau = np.eye(N), np.zeros((N, N), dtype=int)
    elif algorithm == "atc_ideal":
        tau = np.zeros((N, N), dtype=int)
    elif algorithm == "atc_delayed":
        tau = delays.tau
    else:
        raise ValueError(f"no theory available for {algorithm!r}")
    ext = partition_combination(A, DelayProfile.from_matrix(tau))
    return build_operators(ext, model, step_sizes)


def stepsize_bounds(model: SignalModel) -> np.ndarray:
    """Per-node mean-stability limits ``2 / lambda_max(R_k)``."""
    return 2.0 / np.linalg.eigvalsh(model.covariances)[:, -1]


def block_max_norm(X, block: int) -> float:
    """Largest row sum of the spectral norms of the ``block x block`` blocks."""
    X = np.asarray(X)
    n = X.shape[0] // block
    if X.shape != (n * block, n * block):
        raise ValueError(f"matrix of shape {X.shape} is not made of {block}x{block} blocks")
    blocks = X.reshape(n, block, n, block).transpose(0, 2, 1, 3)
    return float(np.linalg.norm(blocks, ord=2, axis=(2, 3)).sum(axis=1).max())


def spectral_radius(X) -> float:
    if sparse.issparse(X) or X.shape[0] > DENSE_EIG_LIMIT:
        if X.shape[0] <= DENSE_EIG_LIMIT:
            X = X.toarray()
        else:
            vals = eigs(sparse.csr_array(X), k=1, which="LM", tol=1e-10,
                        return_eigenvectors=False)
            return float(np.abs(vals).max())
    return float(np.abs(np.linalg.eigvals(np.asarray(X))).max())


def check_mean_stability(B, model: SignalModel, step_sizes) -> StabilityReport:
    """Spectral radius of `B` together with the block-norm sufficient condition."""
    mu = _steps(step_sizes, model.num_nodes)
    M = model.dim
    I_minus_MR = np.eye(M * model.num_nodes) - np.kron(np.diag(mu), np.eye(M)) @ network_covariance(model)
    norm = block_max_norm(I_minus_MR, M)
    rho = spectral_radius(B)
    return StabilityReport(norm, norm < 1.0, rho, rho < 1.0 - RHO_TOL)


def mean_error_trajectory(B, w_star, horizon: int) -> np.ndarray:
    """``E w~e_i`` for ``i = 0 .. horizon-1`` starting from ``1 (x) w*``.

    Returns an array of shape (horizon, dim(B)).
    """
    w_star = np.asarray(w_star, dtype=float).reshape(-1)
    n = B.shape[0]
    u = np.tile(w_star, n // w_star.size)
    out = np.empty((horizon, n))
    for i in range(horizon):
        u = B @ u
        out[i] = u
    return out


def _as_operator(B):
    if sparse.issparse(B):
        return sparse.csr_array(B)
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    if n >= 200 and np.count_nonzero(B) < 0.2 * n * n:
        return sparse.csr_array(B)
    return B


def _noise_factor(G) -> np.ndarray:
    """Tall matrix ``C`` with ``C C^T = G`` for a PSD `G`."""
    G = G.toarray() if sparse.issparse(G) else np.asarray(G, dtype=float)
    lam, vec = np.linalg.eigh(0.5 * (G + G.T))
    top = max(lam[-1], 0.0) if lam.size else 0.0
    keep = lam > top * G.shape[0] * np.finfo(float).eps
    return vec[:, keep] * np.sqrt(lam[keep])


def transient_msd(B, G, w_star, horizon: int, num_nodes: int, metadata=None) -> MsdCurve:
    """Network MSD ``zeta_i`` for ``i = 0 .. horizon-1``, trace form.

    Uses ``Tr(u u^T P^T S P) = ||S P u||^2`` and ``Tr(P^T S P G) =
    ||S P C||_F^2`` with ``G = C C^T``, where ``P = B^i`` is carried as
    the running products ``B^i u`` and ``B^i C`` (one product per step).
    """
    w_star = np.asarray(w_star, dtype=float).reshape(-1)
    mn = num_nodes * w_star.size
    n = B.shape[0]
    if n % mn:
        raise ValueError(f"operator of size {n} does not match {num_nodes} nodes of dimension {w_star.size}")
    Bop = _as_operator(B)
    rho = spectral_radius(Bop)
    if rho >= 1.0 - RHO_TOL:
        warnings.warn(f"mean-error matrix is not stable (rho = {rho:.6g}); "
                      "the predicted MSD diverges", RuntimeWarning, stacklevel=2)
    u = np.tile(w_star, n // w_star.size)
    Z = _noise_factor(G)
    prev = float(u[:mn] @ u[:mn])
    zeta = prev / num_nodes
    values = np.empty(horizon)
    for i in range(horizon):
        u = Bop @ u
        cur = float(u[:mn] @ u[:mn])
        noise = float(np.sum(Z[:mn] ** 2))
        zeta = zeta + (cur - prev + noise) / num_nodes
        values[i] = zeta
        prev = cur
        Z = Bop @ Z
    meta = {"rho_B": rho}
    meta.update(metadata or {})
    return MsdCurve(values, "theory", meta)


def steady_state_msd(B, G, num_nodes: int, dim: int, tol: float = 1e-13,
                     max_terms: int = 10**6, window: int = 8) -> SteadyState:
    """Truncated series ``(1/N) sum_t Tr((B^t)^T Sigma_bar B^t G)``.

    Terms decay like ``r^t`` with ``r = rho(B)^2``, so the tail left after a
    term is about ``term * r / (1 - r)``. Summation stops once that estimate
    stays below `tol` relative to the running sum for `window` consecutive
    terms. An unstable `B` is reported through ``stable=False`` and a NaN
    value.
    """
    Bop = _as_operator(B)
    rho = spectral_radius(Bop)
    if rho >= 1.0 - RHO_TOL:
        return SteadyState(float("nan"), False, 0, stable=False)
    tail = max(1.0, rho ** 2 / (1.0 - rho ** 2))
    mn = num_nodes * dim
    Z = _noise_factor(G)
    if Z.shape[1] == 0:
        return SteadyState(0.0, True, 0)
    total, comp = 0.0, 0.0
    quiet = 0
    t = 0
    while t < max_terms:
        term = float(np.sum(Z[:mn] ** 2)) / num_nodes
        # compensated summation keeps long geometric tails exact to ~eps
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
        t += 1
        if term * tail <= tol * abs(total):
            quiet += 1
            if quiet >= window:
                return SteadyState(total, True, t)
        else:
            quiet = 0
        Z = Bop @ Z
    return SteadyState(total, False, t)


def _check_small(B):
    B = B.toarray() if sparse.issparse(B) else np.asarray(B, dtype=float)
    if B.shape[0] > KRON_LIMIT:
        raise ValueError(f"operator of size {B.shape[0]} too large for the Kronecker form "
                         f"(limit {KRON_LIMIT})")
    return B


def verify_rho_relation(B, rtol: float = 1e-8) -> RhoRelation:
    """Compare ``rho(kron(B^T, B^T))`` with ``rho(B)^2`` on a small operator."""
    B = _check_small(B)
    rho_B = spectral_radius(B)
    rho_F = spectral_radius(np.kron(B.T, B.T))
    return RhoRelation(rho_B, rho_F, abs(rho_F - rho_B ** 2) <= rtol * max(1.0, rho_B ** 2))
