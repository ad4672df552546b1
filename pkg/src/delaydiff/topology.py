"""Network topologies, combination matrices and link delay profiles.

Matrices follow the column convention used throughout the package:
``A[l, k]`` is the weight node ``k`` assigns to the estimate received from
node ``l``, so every column of a combination matrix sums to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "NetworkTopology",
    "DelayProfile",
    "ExtendedCombination",
    "build_uniform_combination",
    "check_combination",
    "build_delay_profile",
    "partition_combination",
]


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected network with mandatory self-loops.

    Attributes
    ----------
    adjacency : ndarray of bool, shape (N, N)
        Symmetric neighbourhood relation, ``adjacency[l, k]`` is True when
        ``l`` belongs to the neighbourhood of ``k``. The diagonal is True.
    positions : ndarray, shape (N, 2), optional
        Planar node coordinates, only needed for distance-based delays.
    """

    adjacency: np.ndarray
    positions: np.ndarray | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got shape {adj.shape}")
        if not np.all(np.diag(adj)):
            raise ValueError("every node must be its own neighbour")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", _frozen(adj))
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=float)
            if pos.shape != (adj.shape[0], 2):
                raise ValueError(f"positions must have shape ({adj.shape[0]}, 2), got {pos.shape}")
            object.__setattr__(self, "positions", _frozen(pos))

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, k: int) -> np.ndarray:
        """Indices of the neighbourhood of node `k`, including `k`."""
        return np.flatnonzero(self.adjacency[:, k])

    def degrees(self) -> np.ndarray:
        """Neighbourhood sizes ``|N_k|`` (self included)."""
        return self.adjacency.sum(axis=0)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges ``(l, k)`` with ``l < k``."""
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(r), int(c)) for r, c in zip(rows, cols)]

    def is_connected(self) -> bool:
        n_comp, _ = connected_components(self.adjacency, directed=False)
        return n_comp == 1

    @classmethod
    def from_edges(cls, num_nodes: int, edges, positions=None) -> "NetworkTopology":
        if num_nodes < 1:
            raise ValueError("num_nodes must be positive")
        adj = np.eye(num_nodes, dtype=bool)
        for l, k in edges:
            if not (0 <= l < num_nodes and 0 <= k < num_nodes):
                raise ValueError(f"edge ({l}, {k}) references a missing node")
            adj[l, k] = adj[k, l] = True
        return cls(adj, positions)

    @classmethod
    def random_geometric(cls, num_nodes: int, radius: float, rng=None,
                         max_tries: int = 1000) -> "NetworkTopology":
        """Nodes uniform in the unit square, linked when closer than `radius`.

        Positions are redrawn until the graph is connected.
        """
        rng = np.random.default_rng(rng)
        for _ in range(max_tries):
            pos = rng.uniform(0.0, 1.0, size=(num_nodes, 2))
            dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
            topo = cls(dist <= radius, pos)
            if topo.is_connected():
                return topo
        raise RuntimeError(f"no connected geometric graph with radius {radius} "
                           f"after {max_tries} draws")


def build_uniform_combination(topology: NetworkTopology) -> np.ndarray:
    """Uniform rule ``a_lk = 1/|N_k|`` on the neighbourhood of each node."""
    adj = topology.adjacency.astype(float)
    return adj / adj.sum(axis=0, keepdims=True)


def check_combination(A, topology: NetworkTopology | None = None, atol: float = 1e-12) -> np.ndarray:
    """Validate a left-stochastic combination matrix and return it as an array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"combination matrix must be square, got shape {A.shape}")
    if np.any(A < 0):
        raise ValueError("combination weights must be nonnegative")
    if not np.allclose(A.sum(axis=0), 1.0, rtol=0, atol=atol):
        raise ValueError("columns of the combination matrix must sum to one")
    if topology is not None:
        if A.shape[0] != topology.num_nodes:
            raise ValueError("combination matrix and topology disagree on node count")
        if np.any((A > 0) & ~topology.adjacency):
            raise ValueError("combination matrix has weight outside the neighbourhoods")
    return A


@dataclass(frozen=True)
class DelayProfile:
    """Integer link delays, ``tau[l, k]`` iterations from node l to node k."""

    tau: np.ndarray
    gamma: int

    @property
    def depth(self) -> int:
        """Extended-state depth ``T = gamma + 1``."""
        return self.gamma + 1

    @classmethod
    def from_matrix(cls, tau, links=None) -> "DelayProfile":
        raw = np.asarray(tau)
        if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
            raise ValueError(f"delay matrix must be square, got shape {raw.shape}")
        if not np.all(np.isfinite(raw.astype(float))):
            raise ValueError("delays must be finite")
        if np.any(raw.astype(float) != np.round(raw.astype(float))):
            raise ValueError("delays must be integers")
        tau = raw.astype(np.int64)
        if np.any(tau < 0):
            raise ValueError("delays must be nonnegative")
        if np.any(np.diag(tau) != 0):
            raise ValueError("self-delays tau[k, k] must be zero")
        if links is None:
            links = np.ones(tau.shape, dtype=bool)
        gamma = int(tau[np.asarray(links, dtype=bool)].max(initial=0))
        return cls(_frozen(tau), gamma)


def build_delay_profile(topology: NetworkTopology, mode: str = "constant", *,
                        scale: float | None = None, matrix=None, delay: int = 0) -> DelayProfile:
    """Delay profile over the links of `topology`.

    Parameters
    ----------
    mode : {"distance_proportional", "explicit", "constant"}
        ``distance_proportional`` sets ``tau = ceil(dist / scale)`` on every
        link; ``explicit`` validates `matrix`; ``constant`` puts `delay` on
        every cross link.
    """
    n = topology.num_nodes
    links = topology.adjacency
    off = links & ~np.eye(n, dtype=bool)
    if mode == "distance_proportional":
        if topology.positions is None:
            raise ValueError("distance-proportional delays need node positions")
        if scale is None or scale <= 0:
            raise ValueError("delay scale must be positive")
        pos = topology.positions
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        tau = np.where(off, np.ceil(dist / scale), 0).astype(np.int64)
    elif mode == "explicit":
        if matrix is None:
            raise ValueError("explicit delay mode needs a matrix")
        prof = DelayProfile.from_matrix(matrix, links)
        if prof.tau.shape != (n, n):
            raise ValueError(f"delay matrix must have shape ({n}, {n})")
        return prof
    elif mode == "constant":
        if int(delay) != delay or delay < 0:
            raise ValueError("constant delay must be a nonnegative integer")
        tau = np.where(off, int(delay), 0).astype(np.int64)
    else:
        raise ValueError(f"unknown delay mode {mode!r}")
    return DelayProfile.from_matrix(tau, links)


@dataclass(frozen=True)
class ExtendedCombination:
    """Delay-sorted split of a combination matrix and its extended form.

    ``parts[t]`` keeps the entries of A whose link delay equals ``t``.
    ``matrix`` is the node-level ``NT x NT`` extended combination matrix;
    the full operator is ``kron(matrix, I_M)``.
    """

    parts: tuple
    matrix: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.parts[0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.parts)

    def lifted(self, dim: int) -> np.ndarray:
        return np.kron(self.matrix, np.eye(dim))


def partition_combination(A, delays: DelayProfile) -> ExtendedCombination:
    A = np.asarray(A, dtype=float)
    tau = delays.tau
    if A.shape != tau.shape:
        raise ValueError(f"combination matrix {A.shape} and delay matrix {tau.shape} disagree")
    n = A.shape[0]
    support = A > 0
    gamma = int(tau[support].max(initial=0))
    parts = tuple(_frozen(np.where(support & (tau == t), A, 0.0)) for t in range(gamma + 1))
    T = gamma + 1
    ext = np.zeros((n * T, n * T))
    for t, part in enumerate(parts):
        ext[:n, t * n:(t + 1) * n] = part.T
    ext[n:, :n * gamma] = np.eye(n * gamma)
    return ExtendedCombination(parts, _frozen(ext))
