"""Extraction of pairwise-disjoint server subsets, with availability auditing.

Both extractors walk a net hierarchy and let every net client claim up to two
still-available servers per iteration: a *shared* server (the farthest
available one in a large neighborhood) and a *private* server (the nearest
available one among its closest ``ceil(k/2)`` servers).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .errors import AvailabilityError
from .graphs import (
    FilteredClients,
    NetHierarchy,
    build_gi,
    build_gtilde,
    compute_net_hierarchy,
    filter_clients,
    nonuniform_graphs,
    reduced_demands,
    uniform_graphs,
)
from .metric import DemandProfile, MetricInstance, NeighborhoodIndex

SHARED = "shared"
PRIVATE = "private"


@dataclass(frozen=True)
class FamilyMember:
    level: int
    kind: str
    servers: frozenset[int]

    def to_json(self) -> dict:
        return {"level": self.level, "kind": self.kind, "servers": sorted(self.servers)}


@dataclass(frozen=True)
class Decision:
    iteration: int
    client: int
    server: int
    kind: str
    size: int  # size of the neighborhood searched

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "client": self.client,
            "server": self.server,
            "kind": self.kind,
            "size": self.size,
        }


@dataclass(frozen=True)
class AvailabilityLog:
    mode: str
    k: int
    l: int
    iterations: tuple[int, ...]
    hierarchy: NetHierarchy
    decisions: tuple[Decision, ...]

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "k": self.k,
            "l": self.l,
            "iterations": list(self.iterations),
            "hierarchy": self.hierarchy.to_json(),
            "decisions": [d.to_json() for d in self.decisions],
        }


@dataclass(frozen=True)
class ServerFamily:
    mode: str
    k: int
    l: int
    entries: tuple[FamilyMember, ...]
    log: AvailabilityLog
    filtered: FilteredClients | None = None

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def member(self, level: int, kind: str) -> FamilyMember:
        for e in self.entries:
            if e.level == level and e.kind == kind:
                return e
        raise KeyError((level, kind))

    def to_json(self) -> dict:
        out = {
            "mode": self.mode,
            "k": self.k,
            "l": self.l,
            "entries": [e.to_json() for e in self.entries],
        }
        if self.filtered is not None:
            out["kept_clients"] = list(self.filtered.kept)
        return out


@dataclass
class AvailabilityState:
    available: np.ndarray
    decisions: list[Decision] = field(default_factory=list)

    @classmethod
    def fresh(cls, n_servers: int) -> AvailabilityState:
        return cls(np.ones(n_servers, dtype=bool))

    def take(self, idx: NeighborhoodIndex, iteration: int, x: int, size: int, kind: str) -> int:
        cands = idx.order[x, :size]
        if kind == SHARED:
            # farthest in neighborhood order, so ties follow the same ranking
            cands = cands[::-1]
        for y in cands:
            if self.available[y]:
                y = int(y)
                self.available[y] = False
                self.decisions.append(Decision(iteration, x, y, kind, size))
                return y
        raise AvailabilityError(
            f"no available {kind} server in the {size}-neighborhood of client {x} "
            f"at iteration {iteration}",
            report=[d.to_json() for d in self.decisions],
        )


def compute_server_subsets_uniform(inst: MetricInstance, idx: NeighborhoodIndex, k: int) -> ServerFamily:
    if not 1 <= k <= inst.n_servers:
        raise ValueError(f"k = {k} outside [1, {inst.n_servers}]")
    l = ceil(k / 2)
    hierarchy = compute_net_hierarchy(uniform_graphs(idx, k))
    state = AvailabilityState.fresh(inst.n_servers)
    picked: dict[tuple[int, str], set[int]] = {}
    iterations = tuple(range(k, l - 1, -1))
    for i in iterations:
        for xc in hierarchy.net(i):
            if i > l:
                picked.setdefault((i, SHARED), set()).add(state.take(idx, i, xc, i, SHARED))
            if i > l or k % 2 == 1:
                picked.setdefault((i, PRIVATE), set()).add(state.take(idx, i, xc, l, PRIVATE))
    entries = []
    for i in range(k, l, -1):
        entries.append(FamilyMember(i, SHARED, frozenset(picked.get((i, SHARED), ()))))
        entries.append(FamilyMember(i, PRIVATE, frozenset(picked.get((i, PRIVATE), ()))))
    if k % 2 == 1:
        entries.append(FamilyMember(l, PRIVATE, frozenset(picked.get((l, PRIVATE), ()))))
    log = AvailabilityLog("uniform", k, l, iterations, hierarchy, tuple(state.decisions))
    return ServerFamily("uniform", k, l, tuple(entries), log)


def compute_server_subsets_nonuniform(
    inst: MetricInstance,
    idx: NeighborhoodIndex,
    dem: DemandProfile,
    filtered: FilteredClients | None = None,
    nets: NetHierarchy | None = None,
) -> ServerFamily:
    k = dem.kmax
    l = ceil(k / 2)
    if filtered is None:
        filtered = filter_clients(idx, dem)
    if nets is None:
        nets = compute_net_hierarchy(nonuniform_graphs(idx, dem, filtered))
    state = AvailabilityState.fresh(inst.n_servers)
    picked: dict[tuple[int, str], set[int]] = {}
    iterations = tuple(range(1, l + 1))
    for i in iterations:
        for xc in nets.net(i):
            kc = dem[xc]
            if kc >= 2 * i:
                picked.setdefault((i, SHARED), set()).add(state.take(idx, i, xc, kc - (i - 1), SHARED))
            if kc >= 2 * i - 1:
                picked.setdefault((i, PRIVATE), set()).add(state.take(idx, i, xc, ceil(kc / 2), PRIVATE))
    entries = []
    for i in iterations:
        if k % 2 == 0 or i < l:
            entries.append(FamilyMember(i, SHARED, frozenset(picked.get((i, SHARED), ()))))
        entries.append(FamilyMember(i, PRIVATE, frozenset(picked.get((i, PRIVATE), ()))))
    log = AvailabilityLog("nonuniform", k, l, iterations, nets, tuple(state.decisions))
    return ServerFamily("nonuniform", k, l, tuple(entries), log, filtered)


# --- verification -----------------------------------------------------------


def _disjointness(family: ServerFamily) -> list[str]:
    problems = []
    owner: dict[int, tuple[int, str]] = {}
    for e in family.entries:
        for y in e.servers:
            if y in owner:
                problems.append(f"server {y} in both {owner[y]} and {(e.level, e.kind)}")
            owner[y] = (e.level, e.kind)
    return problems


def expected_layout(mode: str, k: int) -> list[tuple[int, str]]:
    l = ceil(k / 2)
    if mode == "uniform":
        out = [(i, kind) for i in range(k, l, -1) for kind in (SHARED, PRIVATE)]
        if k % 2 == 1:
            out.append((l, PRIVATE))
        return out
    out = []
    for i in range(1, l + 1):
        if k % 2 == 0 or i < l:
            out.append((i, SHARED))
        out.append((i, PRIVATE))
    return out


def verify_family_uniform(idx: NeighborhoodIndex, family: ServerFamily) -> list[str]:
    """Structure, disjointness and the two-hop hitting property."""
    k = family.k
    problems = []
    layout = [(e.level, e.kind) for e in family.entries]
    if layout != expected_layout("uniform", k):
        problems.append(f"family layout {layout} does not match k = {k}")
    if len(family.entries) != k:
        problems.append(f"family has {len(family.entries)} sets, expected {k}")
    problems += _disjointness(family)
    for e in family.entries:
        g = build_gi(idx, e.level)
        ys = np.fromiter(e.servers, dtype=int, count=len(e.servers))
        hit = (idx.rank[:, ys] < e.level).any(axis=1) if ys.size else np.zeros(idx.n_clients, bool)
        ok = (g.within(2) & hit[None, :]).any(axis=1)
        for x in np.flatnonzero(~ok):
            problems.append(f"client {x} has no 2-hop neighbor hit by {(e.level, e.kind)}")
    return problems


def obligated_clients(dem: DemandProfile, level: int, kind: str) -> list[int]:
    """Clients a non-uniform family member must 1-cover."""
    need = 2 * level if kind == SHARED else 2 * level - 1
    return [x for x in range(len(dem)) if dem[x] >= need]


def verify_family_nonuniform(idx: NeighborhoodIndex, dem: DemandProfile, family: ServerFamily) -> list[str]:
    """Structure, disjointness and the three-hop hitting property."""
    problems = []
    layout = [(e.level, e.kind) for e in family.entries]
    if layout != expected_layout("nonuniform", dem.kmax):
        problems.append(f"family layout {layout} does not match kmax = {dem.kmax}")
    problems += _disjointness(family)
    for e in family.entries:
        g = build_gtilde(idx, dem, e.level)
        sizes = reduced_demands(dem, e.level)
        ys = np.fromiter(e.servers, dtype=int, count=len(e.servers))
        if ys.size:
            hit = (idx.rank[:, ys] < sizes[:, None]).any(axis=1)
        else:
            hit = np.zeros(idx.n_clients, dtype=bool)
        reach = g.within(3)
        for x in obligated_clients(dem, e.level, e.kind):
            if not (reach[x] & hit).any():
                problems.append(f"client {x} has no 3-hop neighbor hit by {(e.level, e.kind)}")
    return problems


# --- availability audit -----------------------------------------------------


@dataclass(frozen=True)
class AuditVerdict:
    ok: bool
    checks: int
    violations: tuple[str, ...]
    min_slack: int | None = None  # smallest |A(x,i)| minus its lower bound

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checks": self.checks,
            "violations": list(self.violations),
            "min_slack": self.min_slack,
        }


def _replay(log: AvailabilityLog, idx: NeighborhoodIndex, problems: list[str]) -> dict[int, np.ndarray]:
    """Availability at the start of each iteration; checks every recorded choice."""
    avail = np.ones(idx.n_servers, dtype=bool)
    begin: dict[int, np.ndarray] = {}
    by_iter: dict[int, list[Decision]] = {}
    for d in log.decisions:
        by_iter.setdefault(d.iteration, []).append(d)
    for i in log.iterations:
        begin[i] = avail.copy()
        for d in by_iter.pop(i, []):
            if not avail[d.server]:
                problems.append(f"server {d.server} chosen twice (iteration {i}, client {d.client})")
                continue
            if idx.rank[d.client, d.server] >= d.size:
                problems.append(f"server {d.server} outside the {d.size}-neighborhood of client {d.client}")
            if d.kind == SHARED:
                cand = [int(y) for y in idx.order[d.client, : d.size] if avail[y]]
                if cand[-1] != d.server:
                    problems.append(
                        f"shared pick {d.server} for client {d.client} at iteration {i} "
                        f"is not the farthest available ({cand[-1]})"
                    )
            avail[d.server] = False
    for i in by_iter:
        problems.append(f"decision recorded for unknown iteration {i}")
    return begin


def audit_availability(log: AvailabilityLog, idx: NeighborhoodIndex, dem: DemandProfile | None = None) -> AuditVerdict:
    """Replay a partition run and check the availability lower bounds.

    For every net client and every iteration in which it belongs to the net,
    the number of available servers in its working neighborhood is compared
    against the proven bound; consecutive iterations may lose at most two of
    them, and when two are lost one must be the farthest.
    """
    problems: list[str] = []
    begin = _replay(log, idx, problems)
    checks = 0
    slack: list[int] = []

    def available_in(i: int, x: int, size: int) -> list[int]:
        return [int(y) for y in idx.order[x, :size] if begin[i][y]]

    th = log.hierarchy.threshold
    if log.mode == "uniform":
        k, l = log.k, log.l
        for x, t in th.items():
            if t < l:
                continue
            for i in range(t, l - 1, -1):
                a = available_in(i, x, i)
                checks += 1
                slack.append(len(a) - (2 * i - k))
                if len(a) < 2 * i - k:
                    problems.append(f"|A({x},{i})| = {len(a)} < {2 * i - k}")
                if i == t:
                    priv = sum(1 for y in a if idx.rank[x, y] < l)
                    checks += 1
                    if priv < l - (k - i):
                        problems.append(f"|A({x},{i}) ∩ N({x},{l})| = {priv} < {l - (k - i)}")
                if i >= l + 1:
                    below = available_in(i - 1, x, i - 1)
                    checks += 1
                    problems += _two_loss_check(x, i, a, below)
    else:
        if dem is None:
            raise ValueError("non-uniform audit needs the demand profile")
        for x, t in th.items():
            lx = ceil(dem[x] / 2)
            if t > lx:
                continue
            for i in range(t, lx + 1):
                size = dem[x] - (i - 1)
                a = available_in(i, x, size)
                bound = dem[x] - 2 * (i - 1)
                checks += 1
                slack.append(len(a) - bound)
                if len(a) < bound:
                    problems.append(f"|A({x},{i})| = {len(a)} < {bound}")
                if i == t:
                    priv = sum(1 for y in a if idx.rank[x, y] < lx)
                    checks += 1
                    if priv < lx - (i - 1):
                        problems.append(f"|A({x},{i}) ∩ N({x},{lx})| = {priv} < {lx - (i - 1)}")
                if i < lx:
                    nxt = available_in(i + 1, x, size - 1)
                    checks += 1
                    problems += _two_loss_check(x, i, a, nxt)
    return AuditVerdict(not problems, checks, tuple(problems), min(slack) if slack else None)


def _two_loss_check(x: int, i: int, before: list[int], after: list[int]) -> list[str]:
    """``before`` is in neighborhood order, so its last element is the farthest."""
    lost = set(before) - set(after)
    if not set(after) <= set(before):
        return [f"availability of client {x} grew between iterations around {i}"]
    if len(lost) > 2:
        return [f"client {x} lost {len(lost)} servers around iteration {i}"]
    if len(lost) == 2 and before[-1] not in lost:
        return [f"client {x} lost two servers around iteration {i} without losing its farthest"]
    return []
