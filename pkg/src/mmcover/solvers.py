"""Top-level solvers: uniform, non-uniform and server-budgeted multi-cover.

Each solver splits the servers into disjoint subsets and 1-covers the relevant
clients with every subset separately; the union of those covers is the answer.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .errors import InfeasibleError, InputError, InvariantViolation
from .metric import (
    DemandProfile,
    MetricInstance,
    NeighborhoodIndex,
    RadiusAssignment,
    build_neighborhood_index,
    is_feasible,
)
from .onecover import OneCoverProblem, bounded_cover_table, cover
from .partition import (
    AuditVerdict,
    ServerFamily,
    audit_availability,
    compute_server_subsets_nonuniform,
    compute_server_subsets_uniform,
    obligated_clients,
    verify_family_nonuniform,
    verify_family_uniform,
)

SUBROUTINES = ("greedy", "exact")


@dataclass(frozen=True)
class SubCover:
    level: int
    kind: str
    clients: tuple[int, ...]
    servers: tuple[int, ...]
    assignment: RadiusAssignment
    cost: float

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "kind": self.kind,
            "clients": list(self.clients),
            "servers": list(self.servers),
            "radii": {str(y): r for y, r in self.assignment.items()},
            "cost": self.cost,
        }


@dataclass(frozen=True)
class TmmcPlan:
    """Budget table after the prefix-min envelope and the chosen per-subset budgets.

    ``table[i][b - 1]`` is the cheapest cover of subset ``i`` found with at most
    ``b`` servers; ``source[i][b - 1]`` is the budget that produced it.
    """

    budget: int
    table: tuple[tuple[float, ...], ...]
    source: tuple[tuple[int, ...], ...]
    chosen: tuple[int, ...]
    objective: float

    def to_json(self) -> dict:
        return {
            "budget": self.budget,
            "table": [list(row) for row in self.table],
            "source": [list(row) for row in self.source],
            "chosen": list(self.chosen),
            "objective": self.objective,
        }


@dataclass(frozen=True)
class SolveReport:
    mode: str
    subroutine: str
    assignment: RadiusAssignment
    cost: float
    parts: tuple[SubCover, ...]
    family: ServerFamily
    audit: AuditVerdict | None
    family_violations: tuple[str, ...]
    wall_time: float
    plan: TmmcPlan | None = None

    def to_json(self, inst: MetricInstance | None = None) -> dict:
        radii = self.assignment.items()
        if inst is not None:
            radii = {str(inst.servers[y]): r for y, r in radii}
        else:
            radii = {str(y): r for y, r in radii}
        out = {
            "mode": self.mode,
            "subroutine": self.subroutine,
            "cost": self.cost,
            "radii": radii,
            "parts": [p.to_json() for p in self.parts],
            "family": self.family.to_json(),
            "audit": self.audit.to_json() if self.audit is not None else None,
            "family_violations": list(self.family_violations),
        }
        if self.plan is not None:
            out["plan"] = self.plan.to_json()
        return out


def _check_subroutine(name: str) -> None:
    if name not in SUBROUTINES:
        raise InputError(f"unknown subroutine {name!r}; expected one of {SUBROUTINES}")


def _union(parts) -> RadiusAssignment:
    out = RadiusAssignment({})
    for p in parts:
        out = out.merged(p.assignment)
    return out


def _finish(family, audit, violations):
    if audit is not None and not audit.ok:
        raise InvariantViolation("availability audit failed: " + "; ".join(audit.violations[:3]), audit.to_json())
    if violations:
        raise InvariantViolation("server family check failed: " + "; ".join(violations[:3]), violations)


def solve_mmc(
    inst: MetricInstance,
    k: int,
    subroutine: str = "greedy",
    idx: NeighborhoodIndex | None = None,
    audit: bool = True,
    **guard,
) -> SolveReport:
    """k-cover every client by 1-covering them once per server subset."""
    _check_subroutine(subroutine)
    start = time.perf_counter()
    if not 1 <= k <= inst.n_servers:
        raise InfeasibleError(f"k = {k} outside [1, {inst.n_servers}]")
    idx = idx or build_neighborhood_index(inst)
    family = compute_server_subsets_uniform(inst, idx, k)
    verdict = audit_availability(family.log, idx) if audit else None
    violations = tuple(verify_family_uniform(idx, family)) if audit else ()
    _finish(family, verdict, violations)
    everyone = tuple(range(inst.n_clients))
    parts = []
    for e in family.entries:
        ra = cover(OneCoverProblem(inst, everyone, tuple(e.servers)), subroutine, **guard)
        parts.append(SubCover(e.level, e.kind, everyone, tuple(sorted(e.servers)), ra, ra.cost(inst.alpha)))
    r = _union(parts)
    if not is_feasible(inst, DemandProfile.for_instance(inst, k), r):
        raise InvariantViolation("union of subset covers is not a k-cover")
    return SolveReport(
        "uniform", subroutine, r, r.cost(inst.alpha), tuple(parts), family, verdict, violations,
        time.perf_counter() - start,
    )


def solve_nonuniform(
    inst: MetricInstance,
    dem: DemandProfile,
    subroutine: str = "greedy",
    idx: NeighborhoodIndex | None = None,
    audit: bool = True,
    **guard,
) -> SolveReport:
    """Cover every client ``x`` at least ``dem[x]`` times."""
    _check_subroutine(subroutine)
    start = time.perf_counter()
    if dem.kmax > inst.n_servers:
        raise InfeasibleError(f"demand {dem.kmax} exceeds {inst.n_servers} servers")
    idx = idx or build_neighborhood_index(inst)
    family = compute_server_subsets_nonuniform(inst, idx, dem)
    verdict = audit_availability(family.log, idx, dem) if audit else None
    violations = tuple(verify_family_nonuniform(idx, dem, family)) if audit else ()
    _finish(family, verdict, violations)
    parts = []
    for e in family.entries:
        clients = tuple(obligated_clients(dem, e.level, e.kind))
        if not clients:
            ra = RadiusAssignment({})
        elif not e.servers:
            raise InvariantViolation(f"subset ({e.level}, {e.kind}) is empty but has clients to cover")
        else:
            ra = cover(OneCoverProblem(inst, clients, tuple(e.servers)), subroutine, **guard)
        parts.append(SubCover(e.level, e.kind, clients, tuple(sorted(e.servers)), ra, ra.cost(inst.alpha)))
    r = _union(parts)
    if not is_feasible(inst, dem, r):
        raise InvariantViolation("union of subset covers misses some demand")
    return SolveReport(
        "nonuniform", subroutine, r, r.cost(inst.alpha), tuple(parts), family, verdict, violations,
        time.perf_counter() - start,
    )


def envelope(costs: list[float], budget: int) -> tuple[list[float], list[int]]:
    """Prefix minimum over budgets 1..budget; entries past len(costs) repeat the last."""
    best, src = [], []
    cur, arg = math.inf, 0
    for b in range(1, budget + 1):
        if b <= len(costs) and costs[b - 1] < cur:
            cur, arg = costs[b - 1], b
        best.append(cur)
        src.append(arg)
    return best, src


def choose_budgets(table: list[list[float]], t: int) -> tuple[float, tuple[int, ...]]:
    """Minimize sum_i table[i][t_i - 1] over t_i >= 1 with sum t_i <= t.

    f[i][b] is the best total for the first i subsets within b servers; each
    subset after the first i leaves room for one server per later subset.
    Rows may be shorter than t; budgets past a row's end are not tried.
    Ties go to the smaller t_i.
    """
    k = len(table)
    if t < k:
        raise InfeasibleError(f"budget t = {t} is below k = {k}")
    f = [[0.0] * (t + 1)] + [[math.inf] * (t + 1) for _ in range(k)]
    pick = [[0] * (t + 1) for _ in range(k + 1)]
    for i in range(1, k + 1):
        row = table[i - 1]
        for b in range(i, t + 1):
            for ti in range(1, min(len(row), b - (i - 1)) + 1):
                v = row[ti - 1] + f[i - 1][b - ti]
                if v < f[i][b]:
                    f[i][b], pick[i][b] = v, ti
    chosen = []
    b = t
    for i in range(k, 0, -1):
        chosen.append(pick[i][b])
        b -= pick[i][b]
    return f[k][t], tuple(reversed(chosen))


def solve_tmmc(
    inst: MetricInstance,
    k: int,
    t: int,
    subroutine: str = "greedy",
    idx: NeighborhoodIndex | None = None,
    audit: bool = True,
    **guard,
) -> SolveReport:
    """k-cover opening at most ``t`` servers, splitting the budget across subsets."""
    _check_subroutine(subroutine)
    start = time.perf_counter()
    if not 1 <= k <= inst.n_servers:
        raise InfeasibleError(f"k = {k} outside [1, {inst.n_servers}]")
    if t < k:
        raise InfeasibleError(f"budget t = {t} is below k = {k}")
    idx = idx or build_neighborhood_index(inst)
    family = compute_server_subsets_uniform(inst, idx, k)
    verdict = audit_availability(family.log, idx) if audit else None
    violations = tuple(verify_family_uniform(idx, family)) if audit else ()
    _finish(family, verdict, violations)
    everyone = tuple(range(inst.n_clients))
    cap = t - (k - 1)
    covers, table, source = [], [], []
    for e in family.entries:
        tab = bounded_cover_table(inst, everyone, tuple(e.servers), min(cap, len(e.servers)), subroutine, **guard)
        costs = [ra.cost(inst.alpha) for ra in tab]
        best, src = envelope(costs, t)
        covers.append(tab)
        table.append(best)
        source.append(src)
    objective, chosen = choose_budgets(table, t)
    parts = []
    for e, tab, src, ti in zip(family.entries, covers, source, chosen):
        ra = tab[src[ti - 1] - 1]
        parts.append(SubCover(e.level, e.kind, everyone, tuple(sorted(e.servers)), ra, ra.cost(inst.alpha)))
    r = _union(parts)
    if len(r) > t or not is_feasible(inst, DemandProfile.for_instance(inst, k), r, support_only=True):
        raise InvariantViolation("budgeted union is not a k-cover within the budget")
    plan = TmmcPlan(t, tuple(map(tuple, table)), tuple(map(tuple, source)), chosen, objective)
    return SolveReport(
        "tmmc", subroutine, r, r.cost(inst.alpha), tuple(parts), family, verdict, violations,
        time.perf_counter() - start, plan,
    )
