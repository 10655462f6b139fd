"""Connectivity graphs and the Laplacian-based consensus mixing matrix.

Nodes are 0-based internally. The edge-list file format uses 1-based
indices so node ``0`` is written as ``1``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, FormatError, TopologyError

Edge = tuple[int, int]


def _norm_edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class ConnectivityGraph:
    """Undirected graph of ``K`` devices placed in the plane (meters)."""

    node_count: int
    positions: np.ndarray
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(self.node_count, 2)
        object.__setattr__(self, "positions", pos)
        edges = frozenset(_norm_edge(int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise TopologyError(f"edge ({i}, {j}) out of range")
        object.__setattr__(self, "edges", edges)

    @property
    def K(self) -> int:
        return self.node_count

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return _norm_edge(i, j) in self.edges

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for e in self.edges if i in e for j in e if j != i)

    def neighbor_lists(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, j in self.sorted_edges():
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(n) for n in nbrs]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.node_count else 0

    def distance(self, i: int, j: int) -> float:
        return float(np.hypot(*(self.positions[i] - self.positions[j])))

    def distances(self) -> dict[Edge, float]:
        return {e: self.distance(*e) for e in self.sorted_edges()}

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    def laplacian(self) -> np.ndarray:
        adj = self.adjacency()
        return np.diag(adj.sum(axis=1)) - adj

    def is_connected(self) -> bool:
        if self.node_count <= 1:
            return True
        nbrs = self.neighbor_lists()
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.node_count

    def with_edges(self, edges: Iterable[Edge]) -> "ConnectivityGraph":
        return ConnectivityGraph(self.node_count, self.positions, frozenset(edges))


def from_edges(K: int, edges: Iterable[Edge], positions=None) -> ConnectivityGraph:
    """Graph with given edges; default positions put nodes on a unit-spaced line."""
    if positions is None:
        positions = np.column_stack([np.arange(K, dtype=float), np.zeros(K)])
    return ConnectivityGraph(K, positions, frozenset(edges))


def generate_star_extended(seed, K: int, p: float, d_min: float = 20.0,
                           d_max: float = 200.0) -> ConnectivityGraph:
    """Star around node 0 plus random leaf-leaf edges with probability ``p``.

    Leaf radii are uniform on ``(d_min, d_max]`` and angles uniform on
    ``[0, 2*pi)``.
    """
    if K < 2:
        raise ConfigurationError(f"need at least 2 devices, got K={K}")
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"edge probability must be in [0, 1], got {p}")
    if not 0.0 < d_min < d_max:
        raise ConfigurationError(f"need 0 < d_min < d_max, got ({d_min}, {d_max})")
    rng = np.random.default_rng(seed)
    radius = d_max - (d_max - d_min) * rng.random(K - 1)
    angle = 2.0 * np.pi * rng.random(K - 1)
    positions = np.zeros((K, 2))
    positions[1:, 0] = radius * np.cos(angle)
    positions[1:, 1] = radius * np.sin(angle)

    edges = {(0, i) for i in range(1, K)}
    for i in range(1, K):
        for j in range(i + 1, K):
            if rng.random() < p:
                edges.add((i, j))
    return ConnectivityGraph(K, positions, frozenset(edges))


def generate_blockage_graph(seed, base: ConnectivityGraph, block_prob,
                            protected: Iterable[Edge] = ()) -> ConnectivityGraph:
    """Drop each base edge independently with its blockage probability.

    ``block_prob`` is a scalar or a ``K x K`` table. Edges listed in
    ``protected`` are never blocked.
    """
    K = base.node_count
    table = np.broadcast_to(np.asarray(block_prob, dtype=float), (K, K))
    if np.any(table < 0) or np.any(table > 1):
        raise ConfigurationError("blockage probabilities must lie in [0, 1]")
    keep = {_norm_edge(*e) for e in protected}
    rng = np.random.default_rng(seed)
    survivors = []
    for i, j in base.sorted_edges():
        # one draw per edge regardless of protection keeps streams aligned
        blocked = rng.random() < table[i, j]
        if (i, j) in keep or not blocked:
            survivors.append((i, j))
    return base.with_edges(survivors)


def jacobi_eigh(S: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as columns. Iterates until the
    Frobenius norm of the off-diagonal part falls below ``tol``.
    """
    a = np.array(S, dtype=float, copy=True)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T):
        raise ValueError("jacobi_eigh needs a square symmetric matrix")
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                vp = c * v[:, p] - s * v[:, q]
                vq = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vp, vq
    else:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


@dataclass(frozen=True)
class MixingMatrix:
    weights: np.ndarray
    alpha: float

    @property
    def W(self) -> np.ndarray:
        return self.weights

    def self_weight(self, i: int) -> float:
        return float(self.weights[i, i])


def consensus_alpha(graph: ConnectivityGraph) -> float:
    """Uniform edge weight ``2 / (lambda_max + lambda_{K-1})`` of the Laplacian."""
    eig, _ = jacobi_eigh(graph.laplacian())
    if graph.node_count == 1:
        return 1.0
    return 2.0 / (eig[0] + eig[graph.node_count - 2])


def build_mixing_matrix(graph: ConnectivityGraph) -> MixingMatrix:
    if not graph.is_connected():
        raise TopologyError("graph is disconnected; consensus cannot reach all nodes")
    alpha = consensus_alpha(graph)
    K = graph.node_count
    W = alpha * graph.adjacency()
    deg = graph.degrees()
    W[np.arange(K), np.arange(K)] = 1.0 - deg * alpha
    return MixingMatrix(W, float(alpha))


def write_edge_list(graph: ConnectivityGraph, path) -> None:
    lines = [str(graph.node_count)]
    for i, j in graph.sorted_edges():
        lines.append(f"{i + 1} {j + 1} {graph.distance(i, j):.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> tuple[int, dict[Edge, float]]:
    """Parse an edge-list file into ``(K, {(i, j): distance})`` with 0-based nodes.

    Positions are not part of the format, so the caller gets distances only.
    """
    raw = Path(path).read_bytes()
    text = raw.decode("ascii")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError("missing node count", 0)
    try:
        K = int(lines[0])
    except ValueError:
        raise FormatError(f"bad node count {lines[0]!r}", 0) from None
    out: dict[Edge, float] = {}
    offset = len(lines[0]) + 1
    for line in lines[1:]:
        if line.strip():
            parts = line.split()
            try:
                i, j, d = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
            except (ValueError, IndexError):
                raise FormatError(f"bad edge line {line!r}", offset) from None
            if not (0 <= i < K and 0 <= j < K) or i == j:
                raise FormatError(f"invalid edge {line!r}", offset)
            out[_norm_edge(i, j)] = d
        offset += len(line) + 1
    return K, out
