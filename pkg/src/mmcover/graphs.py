"""Neighborhood intersection graphs, client filtering and 3-net hierarchies."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import InputError
from .metric import DemandProfile, NeighborhoodIndex


@dataclass(frozen=True, eq=False)
class IntersectionGraph:
    """Undirected simple graph on a subset of clients.

    ``adjacency`` is a boolean matrix over *all* clients; rows and columns of
    clients outside ``vertices`` are empty.
    """

    level: int
    vertices: tuple[int, ...]
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=bool)
        if a.shape[0] != a.shape[1]:
            raise InputError("adjacency must be square")
        if np.any(a != a.T) or np.any(np.diag(a)):
            raise InputError("adjacency must be symmetric and loop-free")
        outside = np.ones(a.shape[0], dtype=bool)
        outside[list(self.vertices)] = False
        if np.any(a[outside]):
            raise InputError("edges touch clients outside the vertex set")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "vertices", tuple(sorted(int(v) for v in self.vertices)))

    @classmethod
    def from_edges(cls, level: int, vertices: Iterable[int], edges: Iterable[tuple[int, int]], size: int | None = None):
        vertices = tuple(vertices)
        size = size if size is not None else (max(vertices) + 1 if vertices else 0)
        a = np.zeros((size, size), dtype=bool)
        for u, v in edges:
            a[u, v] = a[v, u] = True
        return cls(level, vertices, a)

    def neighbors(self, v: int) -> list[int]:
        return [int(u) for u in np.flatnonzero(self.adjacency[v])]

    def edges(self) -> set[tuple[int, int]]:
        us, vs = np.nonzero(np.triu(self.adjacency, 1))
        return {(int(u), int(v)) for u, v in zip(us, vs)}

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u, v])

    def hop_distances(self, source: int) -> dict[int, int]:
        """BFS hop distances from ``source`` to every reachable vertex."""
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for w in np.flatnonzero(self.adjacency[u]):
                w = int(w)
                if w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    def within(self, hops: int) -> np.ndarray:
        """reach[u, v] is True iff v is at most ``hops`` edges from u."""
        n = self.adjacency.shape[0]
        step = self.adjacency | np.eye(n, dtype=bool)
        reach = np.eye(n, dtype=bool)
        for _ in range(hops):
            reach = (reach.astype(np.int64) @ step.astype(np.int64)) > 0
        return reach

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "vertices": list(self.vertices),
            "adjacency": {str(v): self.neighbors(v) for v in self.vertices},
        }


def _intersection_adjacency(masks: np.ndarray, active: np.ndarray) -> np.ndarray:
    m = masks.astype(np.int64)
    adj = (m @ m.T) > 0
    adj &= active[:, None] & active[None, :]
    np.fill_diagonal(adj, False)
    return adj


def build_gi(idx: NeighborhoodIndex, i: int) -> IntersectionGraph:
    """Clients adjacent iff their ``i``-neighborhoods share a server."""
    if not 1 <= i <= idx.n_servers:
        raise InputError(f"level {i} outside [1, {idx.n_servers}]")
    n = idx.n_clients
    adj = _intersection_adjacency(idx.rank < i, np.ones(n, dtype=bool))
    return IntersectionGraph(i, tuple(range(n)), adj)


def reduced_demands(dem: DemandProfile, i: int) -> np.ndarray:
    """max(0, kappa(x) - (i - 1)) for every client."""
    return np.maximum(0, dem.as_array() - (i - 1))


def build_gtilde(
    idx: NeighborhoodIndex,
    dem: DemandProfile,
    i: int,
    vertices: Sequence[int] | None = None,
) -> IntersectionGraph:
    """Demand-gated intersection graph at iteration ``i``.

    Edge (x, x') iff both i <= ceil(kappa/2) and the (kappa - (i-1))-neighborhoods
    meet.  With ``vertices`` given, the graph is the induced subgraph.
    """
    if not 1 <= i <= dem.kmax:
        raise InputError(f"level {i} outside [1, {dem.kmax}]")
    kappa = dem.as_array()
    n = idx.n_clients
    active = i <= (kappa + 1) // 2
    if vertices is not None:
        keep = np.zeros(n, dtype=bool)
        keep[list(vertices)] = True
        active = active & keep
    else:
        vertices = range(n)
    sizes = reduced_demands(dem, i)
    adj = _intersection_adjacency(idx.rank < sizes[:, None], active)
    return IntersectionGraph(i, tuple(vertices), adj)


def threatens(idx: NeighborhoodIndex, dem: DemandProfile, x2: int, x1: int) -> bool:
    """Whether client ``x2`` threatens client ``x1``."""
    k1, k2 = dem[x1], dem[x2]
    if not k1 > k2:
        return False
    return idx.neighborhoods_meet(x1, k1 - k2 // 2, x2, k2 - k2 // 2)


@dataclass(frozen=True)
class FilteredClients:
    kept: tuple[int, ...]
    representative: dict[int, int]  # dropped client -> kept client it threatens


def client_order(dem: DemandProfile) -> list[int]:
    """Clients by demand descending, then position ascending."""
    return sorted(range(len(dem)), key=lambda x: (-dem[x], x))


def filter_clients(idx: NeighborhoodIndex, dem: DemandProfile) -> FilteredClients:
    marked: dict[int, int] = {}
    kept = []
    for x in client_order(dem):
        if x in marked:
            continue
        kept.append(x)
        for z in range(len(dem)):
            if z not in marked and z != x and threatens(idx, dem, z, x):
                marked[z] = x
    return FilteredClients(tuple(sorted(kept)), dict(sorted(marked.items())))


def check_filtering(idx: NeighborhoodIndex, dem: DemandProfile, f: FilteredClients) -> list[str]:
    """Violations of the two filtering properties (empty list when sound)."""
    problems = []
    kept = set(f.kept)
    for a in kept:
        for b in kept:
            if a != b and threatens(idx, dem, a, b):
                problems.append(f"kept client {a} threatens kept client {b}")
    for x in range(len(dem)):
        if x in kept:
            continue
        rep = f.representative.get(x)
        if rep is None or rep not in kept or not threatens(idx, dem, x, rep):
            problems.append(f"dropped client {x} has no valid representative ({rep})")
    return problems


def build_hi(idx: NeighborhoodIndex, dem: DemandProfile, filtered: FilteredClients, i: int) -> IntersectionGraph:
    return build_gtilde(idx, dem, i, vertices=filtered.kept)


@dataclass(frozen=True)
class NetHierarchy:
    """Nested 3-nets, coarsest graph first.

    ``levels[j]`` is the level label of the j-th graph and ``nets[j]`` its net;
    ``nets[j]`` contains ``nets[j-1]``.  ``threshold[x]`` is the label of the
    first level whose net contains ``x``.
    """

    levels: tuple[int, ...]
    nets: tuple[tuple[int, ...], ...]
    threshold: dict[int, int]

    def net(self, level: int) -> tuple[int, ...]:
        return self.nets[self.levels.index(level)]

    def to_json(self) -> dict:
        return {
            "levels": list(self.levels),
            "nets": {str(lv): list(net) for lv, net in zip(self.levels, self.nets)},
            "threshold": {str(x): th for x, th in self.threshold.items()},
        }


def _extend_net(g: IntersectionGraph, seed: Sequence[int]) -> list[int]:
    net = list(seed)
    reach2 = g.within(2)
    marked = np.zeros(g.adjacency.shape[0], dtype=bool)
    for v in net:
        marked |= reach2[v]
    for v in g.vertices:
        if not marked[v]:
            net.append(v)
            marked |= reach2[v]
    return sorted(net)


def compute_net_hierarchy(graphs: Sequence[IntersectionGraph]) -> NetHierarchy:
    """Greedy nested 3-nets over graphs whose edge sets shrink along the sequence.

    Each level starts from the previous net and repeatedly adds the
    lowest-index vertex more than two hops from the current net.
    """
    if not graphs:
        raise InputError("need at least one graph")
    verts = graphs[0].vertices
    for prev, cur in zip(graphs, graphs[1:]):
        if cur.vertices != verts:
            raise InputError("all graphs in a hierarchy must share one vertex set")
        if np.any(cur.adjacency & ~prev.adjacency):
            raise InputError(
                f"graph at level {cur.level} has edges missing from level {prev.level}; "
                "graphs must be ordered coarse to fine"
            )
    nets = []
    threshold: dict[int, int] = {}
    current: list[int] = []
    for g in graphs:
        current = _extend_net(g, current)
        nets.append(tuple(current))
        for v in current:
            threshold.setdefault(v, g.level)
    return NetHierarchy(tuple(g.level for g in graphs), tuple(nets), dict(sorted(threshold.items())))


def is_three_net(g: IntersectionGraph, net: Iterable[int]) -> list[str]:
    """Violations of the 3-net conditions for ``net`` in ``g``."""
    net = sorted(net)
    problems = []
    for a in net:
        dist = g.hop_distances(a)
        for b in net:
            if b != a and dist.get(b, 3) < 3:
                problems.append(f"net vertices {a} and {b} are {dist[b]} hops apart")
    covered = set()
    for a in net:
        covered.update(v for v, h in g.hop_distances(a).items() if h <= 2)
    for v in g.vertices:
        if v not in covered:
            problems.append(f"vertex {v} is more than 2 hops from the net")
    return problems


def uniform_graphs(idx: NeighborhoodIndex, k: int) -> list[IntersectionGraph]:
    """G_k, G_{k-1}, ..., G_l with l = ceil(k/2): coarse to fine."""
    lo = ceil(k / 2)
    return [build_gi(idx, i) for i in range(k, lo - 1, -1)]


def nonuniform_graphs(idx: NeighborhoodIndex, dem: DemandProfile, filtered: FilteredClients) -> list[IntersectionGraph]:
    """H_1, H_2, ..., H_kmax: coarse to fine."""
    return [build_hi(idx, dem, filtered, i) for i in range(1, dem.kmax + 1)]
