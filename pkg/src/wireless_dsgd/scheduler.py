"""Interference-free slot assignment for the digital and analog protocols.

Digital: greedy coloring of the conflict graph (graph plus two-hop edges),
one slot per color. Analog: repeated star-center selection on the residual
graph, two slots per round (AirComp reception, then broadcast).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .topology import ConnectivityGraph, Edge


@dataclass(frozen=True)
class Coloring:
    color_of: dict[int, int]

    @property
    def num_colors(self) -> int:
        return 1 + max(self.color_of.values()) if self.color_of else 0

    def classes(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for node in sorted(self.color_of):
            out.setdefault(self.color_of[node], []).append(node)
        return out


@dataclass(frozen=True)
class DigitalSchedule:
    slot_of: tuple[int, ...]
    num_slots: int

    def slots(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_slots)]
        for node, s in enumerate(self.slot_of):
            out[s].append(node)
        return out


@dataclass(frozen=True)
class AnalogRound:
    centers: frozenset
    active_edges: frozenset

    def transmitters_of(self, center: int) -> list[int]:
        """Nodes that send to ``center`` over the AirComp slot of this round."""
        return sorted(j for e in self.active_edges if center in e for j in e if j != center)

    def broadcasting_centers(self) -> list[int]:
        return sorted(c for c in self.centers if self.transmitters_of(c))


@dataclass(frozen=True)
class AnalogSchedule:
    node_count: int
    rounds: tuple[AnalogRound, ...] = field(default_factory=tuple)

    @property
    def num_slots(self) -> int:
        return 2 * len(self.rounds)

    def role_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-node ``(n_c, n_b)``.

        ``n_c`` counts the star centers a node transmits to over AirComp,
        ``n_b`` whether the node broadcasts as a center.
        """
        n_c = np.zeros(self.node_count, dtype=int)
        n_b = np.zeros(self.node_count, dtype=int)
        for rnd in self.rounds:
            for c in rnd.centers:
                tx = rnd.transmitters_of(c)
                if tx:
                    n_b[c] += 1
                for j in tx:
                    n_c[j] += 1
        return n_c, n_b


def _neighbor_sets(nodes: Sequence[int], edges) -> dict[int, set[int]]:
    nbrs = {v: set() for v in nodes}
    for i, j in edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    return nbrs


def build_conflict_graph(graph: ConnectivityGraph) -> ConnectivityGraph:
    nbrs = graph.neighbor_lists()
    edges = set(graph.edges)
    for k in range(graph.node_count):
        for a in range(len(nbrs[k])):
            for b in range(a + 1, len(nbrs[k])):
                i, j = nbrs[k][a], nbrs[k][b]
                edges.add((min(i, j), max(i, j)))
    return graph.with_edges(edges)


def _greedy(nodes: Sequence[int], nbrs: dict[int, set[int]]) -> dict[int, int]:
    color_of: dict[int, int] = {}
    for v in nodes:
        taken = {color_of[u] for u in nbrs[v] if u in color_of}
        c = 0
        while c in taken:
            c += 1
        color_of[v] = c
    return color_of


def greedy_color(graph: ConnectivityGraph, order: Sequence[int] | None = None) -> Coloring:
    """Color nodes in ``order``; each takes the smallest color unused by colored neighbors."""
    if order is None:
        order = range(graph.node_count)
    order = list(order)
    if sorted(order) != list(range(graph.node_count)):
        raise ValueError("order must be a permutation of all nodes")
    nbrs = _neighbor_sets(range(graph.node_count), graph.edges)
    return Coloring(_greedy(order, nbrs))


def make_digital_schedule(graph: ConnectivityGraph) -> DigitalSchedule:
    coloring = greedy_color(build_conflict_graph(graph))
    slot_of = tuple(coloring.color_of[v] for v in range(graph.node_count))
    return DigitalSchedule(slot_of, coloring.num_colors)


def make_analog_schedule(graph: ConnectivityGraph) -> AnalogSchedule:
    """Rounds of non-adjacent star centers picked by the degree-maximizing color.

    Ties between color classes go to the class with fewer members, then to
    the smaller color index.
    """
    residual = set(graph.edges)
    rounds = []
    while residual:
        nodes = sorted({v for e in residual for v in e})
        nbrs = _neighbor_sets(nodes, residual)
        color_of = _greedy(nodes, nbrs)
        members: dict[int, list[int]] = {}
        for v in nodes:
            members.setdefault(color_of[v], []).append(v)
        best = min(members, key=lambda c: (-sum(len(nbrs[v]) for v in members[c]),
                                           len(members[c]), c))
        centers = frozenset(v for v in members[best] if nbrs[v])
        active = frozenset(e for e in residual if e[0] in centers or e[1] in centers)
        rounds.append(AnalogRound(centers, active))
        residual -= active
    return AnalogSchedule(graph.node_count, tuple(rounds))


def format_digital_schedule(schedule: DigitalSchedule) -> str:
    """One line per slot listing its 1-based transmitters."""
    return "\n".join(" ".join(str(v + 1) for v in slot) for slot in schedule.slots()) + "\n"


def format_analog_schedule(schedule: AnalogSchedule) -> str:
    """One line per round: ``centers | i-j i-j ...`` with 1-based nodes."""
    lines = []
    for rnd in schedule.rounds:
        centers = " ".join(str(c + 1) for c in sorted(rnd.centers))
        edges = " ".join(f"{i + 1}-{j + 1}" for i, j in sorted(rnd.active_edges))
        lines.append(f"{centers} | {edges}")
    return "\n".join(lines) + ("\n" if lines else "")


def schedule_edges(schedule: AnalogSchedule) -> list[Edge]:
    """All active edges over all rounds, duplicates kept."""
    return [e for rnd in schedule.rounds for e in sorted(rnd.active_edges)]
