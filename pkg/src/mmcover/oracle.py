"""Exact optima for micro-instances.

Radii are restricted to 0 and client distances, which loses nothing: shrinking
a ball to its farthest covered client keeps coverage and lowers cost.  The
search is a DP over servers whose state is the vector of residual demands,
encoded in mixed radix, so equal sub-problems reached along different radius
choices are solved once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import GuardError, InfeasibleError, InputError
from .metric import DemandProfile, MetricInstance, RadiusAssignment, is_feasible

DEFAULT_NODE_GUARD = 10**7


@dataclass(frozen=True)
class OracleResult:
    cost: float
    assignment: RadiusAssignment
    nodes: int
    near_guard: bool

    def to_json(self, inst: MetricInstance | None = None) -> dict:
        radii = self.assignment.items()
        if inst is not None:
            radii = {str(inst.servers[y]): r for y, r in radii}
        else:
            radii = {str(y): r for y, r in radii}
        return {"cost": self.cost, "radii": radii, "nodes": self.nodes, "near_guard": self.near_guard}


def candidate_radii(inst: MetricInstance, y: int) -> list[float]:
    return sorted({0.0, *inst.dxy[:, y].tolist()})


class _StateSpace:
    """Residual demand vectors, ``digit[s, x]`` in 0..kappa(x)."""

    def __init__(self, kappa: np.ndarray):
        self.radix = kappa + 1
        self.weight = np.concatenate(([1], np.cumprod(self.radix)[:-1])).astype(np.int64)
        self.size = int(np.prod(self.radix))
        s = np.arange(self.size, dtype=np.int64)
        self.digit = (s[:, None] // self.weight[None, :]) % self.radix[None, :]
        self.full = int(np.dot(kappa, self.weight))

    def after(self, covered: np.ndarray) -> np.ndarray:
        nd = np.maximum(self.digit - covered.astype(np.int64)[None, :], 0)
        return nd @ self.weight


def _options(inst: MetricInstance, y: int):
    out = []
    for r in candidate_radii(inst, y):
        out.append((r, inst.dxy[:, y] <= r, r**inst.alpha))
    return out


def _guard(nodes: int, max_nodes: int) -> None:
    if nodes > max_nodes:
        raise GuardError(f"exact search needs {nodes} DP cells, guard is {max_nodes}", count=nodes)


def exact_mmc(inst: MetricInstance, dem: DemandProfile | int, max_nodes: int = DEFAULT_NODE_GUARD) -> OracleResult:
    """Minimum-cost cover meeting every demand; every server may take radius 0."""
    if not isinstance(dem, DemandProfile):
        dem = DemandProfile.for_instance(inst, dem)
    if len(dem) != inst.n_clients:
        raise InputError("demand profile does not match the instance")
    if dem.kmax > inst.n_servers:
        raise InfeasibleError(f"demand {dem.kmax} exceeds {inst.n_servers} servers")
    space = _StateSpace(dem.as_array())
    m = inst.n_servers
    nodes = space.size * (m + 1)
    _guard(nodes, max_nodes)
    f = np.full(space.size, np.inf)
    f[0] = 0.0
    tables = []
    for y in reversed(range(m)):
        opts = _options(inst, y)
        stack = np.stack([c + f[space.after(cov)] for _, cov, c in opts])
        choice = np.argmin(stack, axis=0)
        f = np.take_along_axis(stack, choice[None], axis=0)[0]
        tables.append((opts, choice))
    tables.reverse()
    if not np.isfinite(f[space.full]):
        raise InfeasibleError("no feasible cover")
    state = space.full
    radii = {}
    for y, (opts, choice) in enumerate(tables):
        r, cov, _ = opts[int(choice[state])]
        if r > 0:
            radii[y] = r
        state = int(space.after(cov)[state])
    out = RadiusAssignment(radii)
    assert is_feasible(inst, dem, out)
    return OracleResult(out.cost(inst.alpha), out, nodes, nodes > max_nodes // 2)


def exact_tmmc(inst: MetricInstance, k: int, t: int, max_nodes: int = DEFAULT_NODE_GUARD) -> OracleResult:
    """Minimum-cost k-cover opening at most ``t`` servers (radius-0 openings count)."""
    if not 1 <= k <= inst.n_servers:
        raise InfeasibleError(f"k = {k} outside [1, {inst.n_servers}]")
    if t < k:
        raise InfeasibleError(f"budget t = {t} is below k = {k}")
    t = min(t, inst.n_servers)
    dem = DemandProfile.for_instance(inst, k)
    space = _StateSpace(dem.as_array())
    m = inst.n_servers
    nodes = space.size * (t + 1) * (m + 1)
    _guard(nodes, max_nodes)
    f = np.full((t + 1, space.size), np.inf)
    f[:, 0] = 0.0
    tables = []
    for y in reversed(range(m)):
        opts = [(None, np.zeros(inst.n_clients, dtype=bool), 0.0)] + _options(inst, y)
        shifted = np.full_like(f, np.inf)
        shifted[1:] = f[:-1]
        cands = []
        for r, cov, c in opts:
            nxt = space.after(cov)
            cands.append(f[:, nxt] if r is None else c + shifted[:, nxt])
        stack = np.stack(cands)
        choice = np.argmin(stack, axis=0)
        f = np.take_along_axis(stack, choice[None], axis=0)[0]
        tables.append((opts, choice))
    tables.reverse()
    if not np.isfinite(f[t, space.full]):
        raise InfeasibleError("no feasible budgeted cover")
    state, b = space.full, t
    radii = {}
    for y, (opts, choice) in enumerate(tables):
        r, cov, _ = opts[int(choice[b, state])]
        if r is not None:
            radii[y] = r
            b -= 1
            state = int(space.after(cov)[state])
    out = RadiusAssignment(radii)
    assert is_feasible(inst, dem, out, support_only=True) and len(out) <= t
    return OracleResult(out.cost(inst.alpha), out, nodes, nodes > max_nodes // 2)


def naive_mmc(inst: MetricInstance, dem: DemandProfile) -> float:
    """Full enumeration over the candidate-radius grid, no pruning or sharing."""
    grids = [candidate_radii(inst, y) for y in range(inst.n_servers)]
    need = dem.as_array()
    best = math.inf
    for combo in itertools.product(*grids):
        rad = np.array(combo)
        if np.all((inst.dxy <= rad[None, :]).sum(axis=1) >= need):
            best = min(best, math.fsum(r**inst.alpha for r in combo))
    return best


def naive_tmmc(inst: MetricInstance, k: int, t: int) -> float:
    """Enumerate every opened server set of size <= t and every radius choice."""
    best = math.inf
    for size in range(1, min(t, inst.n_servers) + 1):
        for ys in itertools.combinations(range(inst.n_servers), size):
            grids = [candidate_radii(inst, y) for y in ys]
            sub = inst.dxy[:, list(ys)]
            for combo in itertools.product(*grids):
                rad = np.array(combo)
                if np.all((sub <= rad[None, :]).sum(axis=1) >= k):
                    best = min(best, math.fsum(r**inst.alpha for r in combo))
    return best
