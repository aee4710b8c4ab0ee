"""Outer covers: validation, extraction from a k-cover, server bounding and hosting.

An outer cover with per-client requirement ``req`` is a radius assignment in
which every client ``x`` with ``req[x] > 0`` lies in some ball whose radius is
at least the distance from ``x`` to its ``req[x]``-th nearest server.  Such a
ball *serves* ``x``.  A uniform outer cover of level ``i`` has ``req == i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .errors import HostingError, InputError, InvariantViolation
from .graphs import IntersectionGraph
from .metric import (
    DemandProfile,
    MetricInstance,
    NeighborhoodIndex,
    RadiusAssignment,
    coverage_counts,
    is_feasible,
)

REL_TOL = 1e-9


def _leq(a: float, b: float) -> bool:
    return a <= b * (1 + REL_TOL) + 1e-12


@dataclass(frozen=True)
class OuterCover:
    assignment: RadiusAssignment
    requirement: tuple[int, ...]  # 0 means the client imposes nothing
    level: int | None = None  # set for uniform covers
    witness: dict[int, int] = field(default_factory=dict)

    @classmethod
    def of_level(cls, inst: MetricInstance, assignment: RadiusAssignment, level: int) -> OuterCover:
        if not 1 <= level <= inst.n_servers:
            raise InputError(f"level {level} outside [1, {inst.n_servers}]")
        return cls(assignment, (level,) * inst.n_clients, level)

    @classmethod
    def of_profile(cls, assignment: RadiusAssignment, requirement) -> OuterCover:
        return cls(assignment, tuple(int(v) for v in requirement))

    def with_witness(self, witness: dict[int, int]) -> OuterCover:
        return OuterCover(self.assignment, self.requirement, self.level, dict(witness))

    @property
    def servers_used(self) -> int:
        return len(self.assignment)

    def cost(self, alpha: float) -> float:
        return self.assignment.cost(alpha)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "requirement": list(self.requirement),
            "radii": {str(y): r for y, r in self.assignment.items()},
            "witness": {str(x): y for x, y in self.witness.items()},
        }


def required_radii(idx: NeighborhoodIndex, requirement) -> np.ndarray:
    """d(x, y_req(x)(x)) per client, 0 where the requirement is 0."""
    req = np.asarray(requirement, dtype=np.int64)
    out = np.zeros(len(req))
    on = req > 0
    rows = np.flatnonzero(on)
    out[on] = idx.sorted_dist[rows, req[on] - 1]
    return out


def serve_matrix(inst: MetricInstance, idx: NeighborhoodIndex, oc: OuterCover) -> tuple[np.ndarray, np.ndarray]:
    """(servers, serves) with serves[x, j] true iff the ball at servers[j] serves x."""
    ys = np.array(sorted(oc.assignment.support), dtype=int)
    rad = np.array([oc.assignment[y] for y in ys])
    need = required_radii(idx, oc.requirement)
    req = np.asarray(oc.requirement)
    if ys.size == 0:
        return ys, np.zeros((inst.n_clients, 0), dtype=bool)
    inside = inst.dxy[:, ys] <= rad[None, :]
    large = rad[None, :] >= need[:, None]
    return ys, inside & large & (req[:, None] > 0)


@dataclass(frozen=True)
class OuterCoverVerdict:
    ok: bool
    witness: dict[int, int]
    client: int | None = None
    contained: bool | None = None
    radius: float | None = None  # largest radius among balls containing the client
    required: float | None = None

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "witness": {str(x): y for x, y in self.witness.items()},
            "client": self.client,
            "contained": self.contained,
            "radius": self.radius,
            "required": self.required,
        }


def validate_outer_cover(inst: MetricInstance, idx: NeighborhoodIndex, oc: OuterCover) -> OuterCoverVerdict:
    """Check every obligated client is served; the witness is its largest serving ball."""
    if len(oc.requirement) != inst.n_clients:
        raise InputError("requirement length does not match the client count")
    ys, serves = serve_matrix(inst, idx, oc)
    rad = np.array([oc.assignment[y] for y in ys])
    need = required_radii(idx, oc.requirement)
    witness = {}
    for x in range(inst.n_clients):
        if oc.requirement[x] <= 0:
            continue
        cols = np.flatnonzero(serves[x])
        if cols.size == 0:
            inside = inst.dxy[x, ys] <= rad if ys.size else np.zeros(0, dtype=bool)
            best = float(rad[inside].max()) if inside.any() else None
            return OuterCoverVerdict(False, witness, x, bool(inside.any()), best, float(need[x]))
        j = min(cols, key=lambda c: (-rad[c], ys[c]))
        witness[x] = int(ys[j])
    return OuterCoverVerdict(True, witness)


# --- extraction ---------------------------------------------------------------


def _balls_meet(inst: MetricInstance, a: tuple[int, float], b: tuple[int, float]) -> bool:
    """Closed balls at two servers share a point of X ∪ Y."""
    pa, pb = inst.server_point(a[0]), inst.server_point(b[0])
    return bool(np.any((inst.dist[pa] <= a[1]) & (inst.dist[pb] <= b[1])))


def _largest_key(ball: tuple[int, float]):
    return (-ball[1], ball[0])


@dataclass(frozen=True)
class OuterCoverBundle:
    """Disjoint ball sets peeled off a feasible cover, one per level.

    ``labels[j]`` names the j-th extracted level: the uniform level ``k - j``
    when extracted with an integer ``k``, else ``j + 1``, the step whose
    requirement is ``max(0, demand - j)``.  ``covers[label]`` is the 3x
    expansion of ``balls[label]`` and ``mu_hat[label]`` its cost.
    """

    mode: str
    labels: tuple[int, ...]
    balls: dict[int, RadiusAssignment]
    covers: dict[int, OuterCover]
    mu_hat: dict[int, float]
    source_cost: float

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "labels": list(self.labels),
            "levels": {
                str(lab): {
                    "balls": {str(y): r for y, r in self.balls[lab].items()},
                    "cost": self.mu_hat[lab],
                    "requirement": list(self.covers[lab].requirement),
                }
                for lab in self.labels
            },
            "source_cost": self.source_cost,
        }


def extract_outer_covers(
    inst: MetricInstance,
    idx: NeighborhoodIndex,
    r: RadiusAssignment,
    demands: int | DemandProfile,
    support_only: bool = False,
) -> OuterCoverBundle:
    """Peel per-level disjoint ball sets off a feasible cover.

    An integer ``demands`` means a uniform k-cover and labels levels k..1;
    a DemandProfile labels steps 1..kmax.  Pass ``support_only`` when only
    servers present in ``r`` are open; otherwise every server contributes a
    ball (radius 0 when absent).
    """
    uniform = not isinstance(demands, DemandProfile)
    dem = DemandProfile.for_instance(inst, demands) if uniform else demands
    if not is_feasible(inst, dem, r, support_only):
        raise InputError("extract_outer_covers needs a feasible cover")
    k = dem.kmax
    kappa = dem.as_array()
    servers = sorted(r.support) if support_only else range(inst.n_servers)
    pool = {y: r[y] for y in servers}
    labels, balls, covers, mu = [], {}, {}, {}
    for j in range(1, k + 1):
        req = np.maximum(0, kappa - (j - 1))
        label = k - j + 1 if uniform else j
        candidates = set()
        for x in np.flatnonzero(req > 0):
            inside = [(y, rad) for y, rad in pool.items() if inst.dxy[x, y] <= rad]
            if not inside:
                raise InvariantViolation(f"client {x} has no remaining ball at extraction step {j}")
            candidates.add(min(inside, key=_largest_key))
        chosen = {}
        rest = sorted(candidates, key=_largest_key)
        while rest:
            b = rest[0]
            chosen[b[0]] = b[1]
            rest = [c for c in rest[1:] if not _balls_meet(inst, b, c)]
        for y in chosen:
            del pool[y]
        ra = RadiusAssignment(chosen)
        labels.append(label)
        balls[label] = ra
        covers[label] = OuterCover(ra.scaled(3.0), tuple(int(v) for v in req), label if uniform else None)
        mu[label] = covers[label].cost(inst.alpha)
    return OuterCoverBundle(
        "uniform" if uniform else "nonuniform",
        tuple(labels),
        balls,
        covers,
        mu,
        r.cost(inst.alpha),
    )


def check_bundle(inst: MetricInstance, idx: NeighborhoodIndex, bundle: OuterCoverBundle) -> list[str]:
    """Disjointness, cost accounting and per-level validity of an extracted bundle."""
    problems = []
    alpha = inst.alpha
    owner: dict[int, int] = {}
    for lab in bundle.labels:
        ball_list = list(bundle.balls[lab].items())
        for y, _ in ball_list:
            if y in owner:
                problems.append(f"server {y} used at levels {owner[y]} and {lab}")
            owner[y] = lab
        for a in range(len(ball_list)):
            for b in range(a + 1, len(ball_list)):
                if _balls_meet(inst, ball_list[a], ball_list[b]):
                    problems.append(f"balls at {ball_list[a][0]} and {ball_list[b][0]} meet at level {lab}")
        v = validate_outer_cover(inst, idx, bundle.covers[lab])
        if not v.ok:
            problems.append(f"expanded level {lab} does not serve client {v.client}")
    total_b = math.fsum(bundle.balls[lab].cost(alpha) for lab in bundle.labels)
    if not _leq(total_b, bundle.source_cost):
        problems.append(f"sum of level costs {total_b} exceeds source cost {bundle.source_cost}")
    total_mu = math.fsum(bundle.mu_hat.values())
    if not _leq(total_mu, 3**alpha * bundle.source_cost):
        problems.append(f"sum of expanded costs {total_mu} exceeds 3^alpha * {bundle.source_cost}")
    return problems


# --- server bounding ------------------------------------------------------------


def bound_outer_cover_servers(
    inst: MetricInstance,
    idx: NeighborhoodIndex,
    oc: OuterCover,
    r1: RadiusAssignment,
) -> OuterCover:
    """Re-center an outer cover on the servers of a 1-cover.

    Each ball of ``r1`` (in server order) absorbs the not yet absorbed balls of
    ``oc`` that serve some client it covers; the result is a ball at the
    ``r1`` server with three times the largest radius involved.  Balls of
    ``r1`` that absorb nothing are dropped.
    """
    v = validate_outer_cover(inst, idx, oc)
    if not v.ok:
        raise InputError(f"outer cover does not serve client {v.client}")
    obligated = np.asarray(oc.requirement) > 0
    counts = coverage_counts(inst, r1, support_only=True)
    if np.any(obligated & (counts < 1)):
        x = int(np.flatnonzero(obligated & (counts < 1))[0])
        raise InputError(f"1-cover misses client {x}")
    ys, serves = serve_matrix(inst, idx, oc)
    unmarked = {int(ys[j]) for j in range(len(ys)) if serves[:, j].any()}
    col = {int(y): j for j, y in enumerate(ys)}
    out = {}
    for yp in sorted(r1.support):
        covered = inst.dxy[:, yp] <= r1[yp]
        absorbed = [y for y in sorted(unmarked) if np.any(serves[:, col[y]] & covered)]
        if not absorbed:
            continue
        big = max([r1[yp]] + [oc.assignment[y] for y in absorbed])
        out[yp] = 3.0 * big
        unmarked.difference_update(absorbed)
    if unmarked:
        raise InvariantViolation(f"balls at {sorted(unmarked)} were never absorbed")
    res = OuterCover(RadiusAssignment(out), oc.requirement, oc.level)
    check = validate_outer_cover(inst, idx, res)
    if not check.ok:
        raise InvariantViolation(f"server-bounded cover does not serve client {check.client}", check.to_json())
    return res.with_witness(check.witness)


# --- hosting ---------------------------------------------------------------------


def host_outer_cover(
    inst: MetricInstance,
    idx: NeighborhoodIndex,
    oc: OuterCover,
    servers,
    hop_bound: int,
    expansion: float,
    graph: IntersectionGraph,
    clients=None,
) -> RadiusAssignment:
    """Turn an outer cover into a 1-cover that opens only ``servers``.

    Every ball is grown by ``expansion``; a grown ball containing one of
    ``servers`` moves to the lowest such server with radius ``2 * expansion``
    times the original.  ``clients`` defaults to those with positive
    requirement.  The hitting precondition (some client within ``hop_bound``
    hops in ``graph`` whose requirement-neighborhood meets ``servers``) is
    checked first.
    """
    target = np.array(sorted({inst.check_server(y) for y in servers}), dtype=int)
    req = np.asarray(oc.requirement)
    if clients is None:
        clients = [int(x) for x in np.flatnonzero(req > 0)]
    clients = sorted(clients)
    if not clients:
        return RadiusAssignment({})
    if target.size == 0:
        raise HostingError("no servers to host on", client=clients[0])
    hit = (idx.rank[:, target] < req[:, None]).any(axis=1)
    reach = graph.within(hop_bound)
    for x in clients:
        if not (reach[x] & hit).any():
            raise HostingError(f"client {x} has no client within {hop_bound} hops hit by the server set", client=x)
    hosted: dict[int, float] = {}
    for y, rho in oc.assignment.items():
        near = target[inst.dyy[y, target] <= expansion * rho]
        if near.size == 0:
            continue
        yh = int(near[0])
        hosted[yh] = max(hosted.get(yh, 0.0), 2 * expansion * rho)
    out = RadiusAssignment(hosted)
    counts = coverage_counts(inst, out, support_only=True)
    for x in clients:
        if counts[x] < 1:
            raise HostingError(f"hosted cover misses client {x}", client=x, report=out.radii)
    bound = (2 * expansion) ** inst.alpha * oc.cost(inst.alpha)
    if not _leq(out.cost(inst.alpha), bound):
        raise InvariantViolation(f"hosted cost {out.cost(inst.alpha)} exceeds {bound}")
    return out


# --- server-budgeted lower bound ------------------------------------------------------


@dataclass(frozen=True)
class BudgetedOuterCovers:
    """Outer covers of levels ``levels`` whose server counts fit the budget.

    ``partner[i]`` is the extracted level whose cover acted as the 1-cover when
    bounding level ``i``; ``allowance[i]`` is its server count.
    """

    bundle: OuterCoverBundle
    levels: tuple[int, ...]
    covers: dict[int, OuterCover]
    partner: dict[int, int]
    allowance: dict[int, int]
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def tmmc_outer_covers(
    inst: MetricInstance,
    idx: NeighborhoodIndex,
    r: RadiusAssignment,
    k: int,
    t: int,
) -> BudgetedOuterCovers:
    """Budget-respecting outer covers from a cover that opens at most ``t`` servers."""
    if len(r) > t:
        raise InputError(f"cover opens {len(r)} servers, budget is {t}")
    bundle = extract_outer_covers(inst, idx, r, k, support_only=True)
    l = ceil(k / 2)
    # fewest servers gets the highest level
    by_count = sorted(bundle.labels, key=lambda lab: (bundle.covers[lab].servers_used, -lab))
    partner = {k - m: lab for m, lab in enumerate(by_count)}
    levels = tuple(range(k, l, -1)) + ((l,) if k % 2 == 1 else ())
    covers, allowance = {}, {}
    problems = []
    for i in levels:
        p = bundle.covers[partner[i]]
        allowance[i] = p.servers_used
        covers[i] = bound_outer_cover_servers(inst, idx, bundle.covers[i], p.assignment)
        if covers[i].servers_used > allowance[i]:
            problems.append(f"level {i} uses {covers[i].servers_used} > {allowance[i]} servers")
    alpha = inst.alpha
    total = math.fsum(c.cost(alpha) for c in covers.values())
    if not _leq(total, 2 * 9**alpha * r.cost(alpha)):
        problems.append(f"total cost {total} exceeds 2 * 9^alpha * {r.cost(alpha)}")
    used = sum(2 * allowance[i] for i in levels if i > l) + (allowance[l] if k % 2 == 1 else 0)
    if used > t:
        problems.append(f"server allowance {used} exceeds budget {t}")
    return BudgetedOuterCovers(bundle, levels, covers, partner, allowance, tuple(problems))
