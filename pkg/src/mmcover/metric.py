"""Instances, neighborhoods, radius assignments, cost and feasibility.

Points are addressed by position. Client ``x`` is row ``x`` of the client list
and server ``y`` is position ``y`` of the server list; the original labels are
kept on the instance for I/O only.  In the combined distance matrix clients come
first, so server ``y`` is point ``n_clients + y``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DemandRangeError,
    MetricError,
    SchemaError,
    SymmetryError,
    TriangleError,
    UnknownPointError,
)

# Relative slack for the triangle check; path sums and sqrt round differently.
TRIANGLE_RTOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def validate_metric(d: np.ndarray, check_triangle: bool = True) -> None:
    """Raise if ``d`` is not a finite, symmetric, zero-diagonal metric."""
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise SchemaError(f"distance matrix must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise MetricError("distance matrix has non-finite entries")
    if np.any(d < 0):
        i, j = np.argwhere(d < 0)[0]
        raise MetricError(f"negative distance d({i},{j}) = {d[i, j]}")
    if np.any(np.diag(d) != 0):
        i = int(np.flatnonzero(np.diag(d) != 0)[0])
        raise MetricError(f"d({i},{i}) = {d[i, i]} is not zero")
    asym = d != d.T
    if np.any(asym):
        i, j = np.argwhere(asym)[0]
        raise SymmetryError(f"d({i},{j}) = {d[i, j]} differs from d({j},{i}) = {d[j, i]}")
    if not check_triangle or d.shape[0] < 3:
        return
    slack = TRIANGLE_RTOL * max(1.0, float(d.max()))
    for k in range(d.shape[0]):
        via = d[:, k][:, None] + d[k, :][None, :]
        bad = d > via + slack
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise TriangleError(
                f"triangle inequality fails: d({i},{j}) = {d[i, j]} > "
                f"d({i},{k}) + d({k},{j}) = {via[i, j]}"
            )


@dataclass(frozen=True, eq=False)
class MetricInstance:
    """Clients, servers, the metric over their union and the exponent alpha."""

    clients: tuple
    servers: tuple
    dist: np.ndarray
    alpha: float
    coords: np.ndarray | None = None

    def __post_init__(self):
        n, m = len(self.clients), len(self.servers)
        if n == 0:
            raise SchemaError("instance needs at least one client")
        if m == 0:
            raise SchemaError("instance needs at least one server")
        labels = list(self.clients) + list(self.servers)
        if len(set(labels)) != len(labels):
            raise SchemaError("client and server ids must be unique across X and Y")
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha)):
            raise SchemaError(f"alpha must be a finite real, got {self.alpha!r}")
        if self.alpha < 1:
            raise SchemaError(f"alpha must be >= 1, got {self.alpha}")
        if self.dist.shape != (n + m, n + m):
            raise SchemaError(f"distance matrix shape {self.dist.shape} != {(n + m, n + m)}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "dist", _freeze(self.dist))

    @classmethod
    def from_coords(cls, clients: Sequence, servers: Sequence, coords, alpha: float) -> MetricInstance:
        pts = np.asarray(coords, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] != len(clients) + len(servers):
            raise SchemaError("need one coordinate row per client and server")
        if not np.all(np.isfinite(pts)):
            raise MetricError("coordinates must be finite")
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        # exact symmetry regardless of summation order
        d = np.minimum(d, d.T)
        np.fill_diagonal(d, 0.0)
        return cls(tuple(clients), tuple(servers), d, alpha, coords=_freeze(pts))

    @classmethod
    def from_matrix(cls, clients: Sequence, servers: Sequence, d, alpha: float) -> MetricInstance:
        d = np.asarray(d, dtype=np.float64)
        validate_metric(d)
        return cls(tuple(clients), tuple(servers), d, alpha)

    @classmethod
    def from_edges(cls, clients: Sequence, servers: Sequence, edges: Iterable, alpha: float) -> MetricInstance:
        """Close a weighted undirected graph under shortest paths.

        Edge endpoints that are neither clients nor servers are treated as
        intermediate vertices and dropped after the closure.
        """
        labels = list(clients) + list(servers)
        pos = {lab: i for i, lab in enumerate(labels)}
        if len(pos) != len(labels):
            raise SchemaError("client and server ids must be unique across X and Y")
        triples = []
        for e in edges:
            if not isinstance(e, (list, tuple)) or len(e) != 3:
                raise SchemaError(f"edge must be [u, v, weight], got {e!r}")
            u, v, w = e
            w = float(w)
            if not math.isfinite(w) or w < 0:
                raise MetricError(f"edge weight must be finite and nonnegative, got {w}")
            for p in (u, v):
                if p not in pos:
                    pos[p] = len(pos)
            triples.append((pos[u], pos[v], w))
        d = graph_closure(triples, len(pos))[: len(labels), : len(labels)]
        if not np.all(np.isfinite(d)):
            raise MetricError("graph is disconnected: some client/server pair has no path")
        validate_metric(d)
        return cls(tuple(clients), tuple(servers), d, alpha)

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    @property
    def n_servers(self) -> int:
        return len(self.servers)

    @cached_property
    def dxy(self) -> np.ndarray:
        """Client-to-server distances, shape (n_clients, n_servers)."""
        return _freeze(self.dist[: self.n_clients, self.n_clients :])

    @cached_property
    def dyy(self) -> np.ndarray:
        return _freeze(self.dist[self.n_clients :, self.n_clients :])

    def server_point(self, y: int) -> int:
        return self.n_clients + y

    def check_client(self, x: int) -> int:
        if not (isinstance(x, (int, np.integer)) and 0 <= x < self.n_clients):
            raise UnknownPointError(f"unknown client {x!r}")
        return int(x)

    def check_server(self, y: int) -> int:
        if not (isinstance(y, (int, np.integer)) and 0 <= y < self.n_servers):
            raise UnknownPointError(f"unknown server {y!r}")
        return int(y)


def graph_closure(edges: Iterable[tuple[int, int, float]], size: int) -> np.ndarray:
    """All-pairs shortest path distances of an undirected weighted graph.

    scipy treats stored zeros as missing edges, so zero-length edges are
    contracted first and their endpoints share one row of the result.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import shortest_path

    parent = list(range(size))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = list(edges)
    for u, v, w in edges:
        if w == 0.0:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[max(ru, rv)] = min(ru, rv)
    root = np.array([find(a) for a in range(size)], dtype=int)
    best: dict[tuple[int, int], float] = {}
    for u, v, w in edges:
        a, b = sorted((int(root[u]), int(root[v])))
        if a != b:
            best[a, b] = min(w, best.get((a, b), math.inf))
    r = np.array([e[0] for e in best], dtype=int)
    c = np.array([e[1] for e in best], dtype=int)
    w = np.array(list(best.values()), dtype=np.float64)
    g = coo_matrix((w, (r, c)), shape=(size, size)).tocsr()
    full = shortest_path(g, method="D", directed=False)
    d = full[np.ix_(root, root)]
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True)
class DemandProfile:
    """Per-client coverage demands."""

    demands: tuple[int, ...]

    def __post_init__(self):
        if not self.demands:
            raise SchemaError("demand profile is empty")
        object.__setattr__(self, "demands", tuple(int(k) for k in self.demands))

    @classmethod
    def for_instance(cls, inst: MetricInstance, demands: int | Sequence[int]) -> DemandProfile:
        if isinstance(demands, (int, np.integer)) and not isinstance(demands, bool):
            vals = (int(demands),) * inst.n_clients
        else:
            vals = tuple(demands)
            if len(vals) != inst.n_clients:
                raise SchemaError(f"expected {inst.n_clients} demands, got {len(vals)}")
            for v in vals:
                if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                    raise SchemaError(f"demands must be integers, got {v!r}")
        for x, v in enumerate(vals):
            if not 1 <= v <= inst.n_servers:
                raise DemandRangeError(
                    f"demand {v} of client {x} outside [1, {inst.n_servers}]"
                )
        return cls(vals)

    @property
    def kmax(self) -> int:
        return max(self.demands)

    @property
    def uniform(self) -> bool:
        return len(set(self.demands)) == 1

    def __getitem__(self, x: int) -> int:
        return self.demands[x]

    def __len__(self) -> int:
        return len(self.demands)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.demands, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class NeighborhoodIndex:
    """Servers sorted per client by (distance, server position)."""

    order: np.ndarray  # order[x, j] = (j+1)-th nearest server of x
    rank: np.ndarray  # rank[x, y] = position of y in order[x]
    sorted_dist: np.ndarray

    @property
    def n_clients(self) -> int:
        return self.order.shape[0]

    @property
    def n_servers(self) -> int:
        return self.order.shape[1]

    def yj(self, x: int, j: int) -> int:
        """The j-th closest server to ``x`` (1-based)."""
        self._check_size(j, allow_zero=False)
        return int(self.order[x, j - 1])

    def N(self, x: int, i: int) -> frozenset[int]:
        """The ``i`` nearest servers of ``x``."""
        self._check_size(i)
        return frozenset(int(y) for y in self.order[x, :i])

    def mask(self, x: int, i: int) -> np.ndarray:
        return self.rank[x] < i

    def nbr_radius(self, x: int, i: int) -> float:
        """d(x, y_i(x)); zero for ``i == 0``."""
        self._check_size(i)
        return 0.0 if i == 0 else float(self.sorted_dist[x, i - 1])

    def in_neighborhood(self, x: int, i: int, y: int) -> bool:
        return bool(self.rank[x, y] < i)

    def neighborhoods_meet(self, x: int, i: int, x2: int, j: int) -> bool:
        return bool(np.any((self.rank[x] < i) & (self.rank[x2] < j)))

    def _check_size(self, i: int, allow_zero: bool = True) -> None:
        lo = 0 if allow_zero else 1
        if not lo <= i <= self.n_servers:
            raise ValueError(f"neighborhood size {i} outside [{lo}, {self.n_servers}]")


def build_neighborhood_index(inst: MetricInstance) -> NeighborhoodIndex:
    d = inst.dxy
    m = inst.n_servers
    tie = np.broadcast_to(np.arange(m), d.shape)
    order = np.lexsort((tie, d), axis=1)
    rank = np.empty_like(order)
    rows = np.arange(d.shape[0])[:, None]
    rank[rows, order] = np.arange(m)[None, :]
    sorted_dist = np.take_along_axis(d, order, axis=1)
    for a in (order, rank):
        a.setflags(write=False)
    return NeighborhoodIndex(order, rank, _freeze(sorted_dist))


@dataclass(frozen=True)
class RadiusAssignment:
    """Server -> radius. A server without an entry has radius 0.

    The set of servers with an entry is the *support*; it only matters for
    server-budgeted problems, where an absent server is not open at all.
    """

    radii: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for y, r in dict(self.radii).items():
            r = float(r)
            if not math.isfinite(r) or r < 0:
                raise ValueError(f"radius of server {y} must be finite and >= 0, got {r}")
            clean[int(y)] = r
        object.__setattr__(self, "radii", dict(sorted(clean.items())))

    def __getitem__(self, y: int) -> float:
        return self.radii.get(y, 0.0)

    def get(self, y: int, default: float = 0.0) -> float:
        return self.radii.get(y, default)

    def __len__(self) -> int:
        return len(self.radii)

    def __iter__(self):
        return iter(self.radii)

    def items(self):
        return self.radii.items()

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.radii)

    def cost(self, alpha: float) -> float:
        return math.fsum(r**alpha for r in self.radii.values())

    def as_array(self, n_servers: int) -> np.ndarray:
        out = np.zeros(n_servers)
        for y, r in self.radii.items():
            out[y] = r
        return out

    def merged(self, other: RadiusAssignment) -> RadiusAssignment:
        overlap = self.support & other.support
        if overlap:
            raise ValueError(f"assignments overlap on servers {sorted(overlap)}")
        return RadiusAssignment({**self.radii, **other.radii})

    def scaled(self, c: float) -> RadiusAssignment:
        return RadiusAssignment({y: c * r for y, r in self.radii.items()})


@dataclass(frozen=True)
class Ball:
    """Closed ball around a point of X ∪ Y (combined point index)."""

    center: int
    radius: float

    def contains(self, inst: MetricInstance, p: int) -> bool:
        return bool(inst.dist[self.center, p] <= self.radius)


def coverage_counts(inst: MetricInstance, r: RadiusAssignment, support_only: bool = False) -> np.ndarray:
    """Number of server balls containing each client."""
    if support_only:
        ys = np.fromiter(r.support, dtype=int, count=len(r.support))
        if ys.size == 0:
            return np.zeros(inst.n_clients, dtype=int)
        rad = np.array([r[y] for y in ys])
        return (inst.dxy[:, ys] <= rad[None, :]).sum(axis=1)
    rad = r.as_array(inst.n_servers)
    return (inst.dxy <= rad[None, :]).sum(axis=1)


def coverage_count(inst: MetricInstance, r: RadiusAssignment, x: int, support_only: bool = False) -> int:
    x = inst.check_client(x)
    return int(coverage_counts(inst, r, support_only)[x])


def is_feasible(
    inst: MetricInstance,
    dem: DemandProfile,
    r: RadiusAssignment,
    support_only: bool = False,
) -> bool:
    """True iff every client lies in at least its demanded number of balls.

    With ``support_only`` only servers present in ``r`` count, which is the
    reading used for server-budgeted solutions.
    """
    return bool(np.all(coverage_counts(inst, r, support_only) >= dem.as_array()))


def solution_cost(inst: MetricInstance, r: RadiusAssignment) -> float:
    return r.cost(inst.alpha)
