"""Reference computations used only by the tests.

Each one follows a different route from the library code it checks:
explicit Kronecker-form recursions, dense linear solves and power
iteration.
"""

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from delaydiff.model import SignalModel
from delaydiff.topology import DelayProfile, NetworkTopology


def vec(X):
    return np.asarray(X).reshape(-1, order="F")


def kron_transient_msd(B, G, w_star, horizon, num_nodes, Sigma_bar):
    """``zeta_i`` from the weighted-variance recursion with ``F = kron(B^T, B^T)``."""
    n = B.shape[0]
    F = np.kron(B.T, B.T)
    u = np.tile(w_star, n // len(w_star))
    g = vec(G.T)
    sigma = vec(Sigma_bar)
    acc = np.zeros(n * n)       # sum_{j<=i} F^j sigma
    Fs = sigma.copy()           # F^i sigma
    out = np.empty(horizon)
    for i in range(horizon):
        acc += Fs
        Fs = F @ Fs
        Sig = Fs.reshape(n, n, order="F")
        out[i] = (u @ Sig @ u + g @ acc) / num_nodes
    return out


def kron_steady_state_msd(B, G, num_nodes, Sigma_bar):
    """``vec(G^T)^T (I - F)^{-1} vec(Sigma_bar) / N`` by a dense solve."""
    n = B.shape[0]
    F = np.kron(B.T, B.T)
    sigma = np.linalg.solve(np.eye(n * n) - F, vec(Sigma_bar) / num_nodes)
    return float(vec(G.T) @ sigma)


def lyapunov_steady_state_msd(B, G, num_nodes, Sigma_bar):
    """Same quantity through ``X = B^T X B + Sigma_bar``."""
    X = solve_discrete_lyapunov(B.T, Sigma_bar)
    return float(np.trace(G @ X)) / num_nodes


def power_lambda_max(R, iters=20000, seed=0):
    """Largest eigenvalue of an SPD matrix by power iteration."""
    v = np.random.default_rng(seed).standard_normal(R.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = R @ v
        new = float(np.linalg.norm(w))
        v = w / new
        if abs(new - lam) <= 1e-15 * new:
            break
        lam = new
    return float(v @ R @ v)


def random_spd(rng, m, cond=20.0):
    Q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    lam = rng.uniform(1.0, cond, m) * rng.uniform(0.2, 1.0)
    return (Q * lam) @ Q.T


def random_instance(rng, max_nodes=10, max_dim=5, max_gamma=10, nodes=None, dim=None,
                    gamma=None, step_fraction=(0.0, 1.0)):
    """Random network, delays, general SPD covariances and step sizes.

    Step sizes are ``mu_k = f * 2 / lambda_max(R_k)`` with ``f`` drawn from
    `step_fraction` (open interval at 0).
    """
    N = nodes or int(rng.integers(1, max_nodes + 1))
    M = dim or int(rng.integers(1, max_dim + 1))
    G = int(rng.integers(0, max_gamma + 1)) if gamma is None else gamma
    p = rng.uniform(0.2, 0.9)
    edges = [(l, k) for l in range(N) for k in range(l + 1, N) if rng.random() < p]
    topo = NetworkTopology.from_edges(N, edges)
    raw = rng.uniform(0.05, 1.0, (N, N))
    A = np.where(topo.adjacency, raw, 0.0)
    A /= A.sum(axis=0, keepdims=True)
    tau = np.where(topo.adjacency & ~np.eye(N, dtype=bool), rng.integers(0, G + 1, (N, N)), 0)
    if edges and G > 0:
        l, k = edges[int(rng.integers(len(edges)))]
        tau[l, k] = G
    delays = DelayProfile.from_matrix(tau, topo.adjacency)
    R = np.array([random_spd(rng, M) for _ in range(N)])
    model = SignalModel(rng.standard_normal(M), R, rng.uniform(0.01, 0.5, N))
    lo, hi = step_fraction
    frac = rng.uniform(lo, hi, N)
    frac = np.where(frac <= 0, 0.5 * hi, frac)
    mu = frac * 2.0 / np.linalg.eigvalsh(R)[:, -1]
    return topo, A, delays, model, mu
