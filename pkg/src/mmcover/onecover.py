"""1-cover subroutines: greedy, exact and server-budgeted.

Every 1-cover here places balls only at candidate radii, i.e. 0 or a distance
from the server to one of the clients being covered.  Shrinking a ball to its
farthest covered client never loses coverage and never raises cost, so an
optimal cover always exists on this grid.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GuardError, InfeasibleError, InputError
from .metric import MetricInstance, RadiusAssignment

DEFAULT_MAX_CLIENTS = 10
DEFAULT_MAX_SERVERS = 10


@dataclass(frozen=True, eq=False)
class OneCoverProblem:
    inst: MetricInstance
    clients: tuple[int, ...]
    servers: tuple[int, ...]
    budget: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "clients", tuple(sorted({self.inst.check_client(x) for x in self.clients})))
        object.__setattr__(self, "servers", tuple(sorted({self.inst.check_server(y) for y in self.servers})))
        if self.clients and not self.servers:
            raise InfeasibleError("cannot cover clients with an empty server set")
        if self.budget is not None and not 1 <= self.budget <= max(1, len(self.servers)):
            raise InputError(f"budget {self.budget} outside [1, {len(self.servers)}]")

    @property
    def alpha(self) -> float:
        return self.inst.alpha

    @cached_property
    def dist(self) -> np.ndarray:
        """Server-by-client distances restricted to the subproblem."""
        return self.inst.dxy[np.ix_(self.clients, self.servers)].T if self.clients else np.zeros((len(self.servers), 0))

    @cached_property
    def balls(self) -> CandidateBallSet:
        return CandidateBallSet.build(self)


@dataclass(frozen=True)
class CandidateBallSet:
    """(server, radius, covered-client bitmask) for every candidate radius.

    Bit ``j`` of a mask stands for ``problem.clients[j]``.  Balls of one server
    are listed by increasing radius, so their masks are nested.
    """

    balls: tuple[tuple[int, float, int], ...]

    @classmethod
    def build(cls, p: OneCoverProblem) -> CandidateBallSet:
        out = []
        for s, y in enumerate(p.servers):
            row = p.dist[s]
            for r in sorted({0.0, *row.tolist()}):
                mask = 0
                for j in np.flatnonzero(row <= r):
                    mask |= 1 << int(j)
                out.append((y, float(r), mask))
        return cls(tuple(out))

    def for_server(self, y: int) -> list[tuple[float, int]]:
        return [(r, m) for s, r, m in self.balls if s == y]


def _full(n: int) -> int:
    return (1 << n) - 1


def cover_greedy(p: OneCoverProblem) -> RadiusAssignment:
    """Greedy set cover by cost per newly covered client.

    Ties go to the smaller radius, then the lower server.  Balls picked at the
    same server are merged into the largest one.  No approximation guarantee.
    """
    if p.budget is not None:
        raise InputError("cover_greedy does not take a budget; use cover_bounded")
    uncovered = _full(len(p.clients))
    chosen: dict[int, float] = {}
    alpha = p.alpha
    while uncovered:
        best = None
        for y, r, mask in p.balls.balls:
            gain = (mask & uncovered).bit_count()
            if gain == 0:
                continue
            key = (r**alpha / gain, r, y)
            if best is None or key < best[0]:
                best = (key, y, r, mask)
        if best is None:
            raise InfeasibleError("greedy cover stalled")
        _, y, r, mask = best
        chosen[y] = max(chosen.get(y, 0.0), r)
        uncovered &= ~mask
    return RadiusAssignment(chosen)


def _check_guard(p: OneCoverProblem, max_clients: int, max_servers: int) -> None:
    if len(p.clients) > max_clients or len(p.servers) > max_servers:
        raise GuardError(
            f"exact 1-cover limited to {max_clients} clients x {max_servers} servers, "
            f"got {len(p.clients)} x {len(p.servers)}",
            count=len(p.clients) * len(p.servers),
        )


def _exact_tables(p: OneCoverProblem, max_budget: int | None):
    """Backward DP over servers and uncovered-client bitmasks.

    Returns per-server option lists and choice tables; with ``max_budget`` the
    tables carry a leading budget axis.  Option 0 is "server not used".
    """
    n = len(p.clients)
    states = np.arange(1 << n)
    alpha = p.alpha
    options = []
    for y in p.servers:
        opts = [(None, 0, 0.0)]
        for r, mask in p.balls.for_server(y):
            if mask:
                opts.append((r, mask, r**alpha))
        options.append(opts)
    if max_budget is None:
        f = np.full(1 << n, np.inf)
        f[0] = 0.0
    else:
        f = np.full((max_budget + 1, 1 << n), np.inf)
        f[:, 0] = 0.0
    choices = []
    for opts in reversed(options):
        cands = []
        for r, mask, c in opts:
            nxt = states & ~mask
            if max_budget is None:
                cands.append(c + f[nxt])
            elif r is None:
                cands.append(f[:, nxt])
            else:
                shifted = np.full_like(f, np.inf)
                shifted[1:] = f[:-1]
                cands.append(c + shifted[:, nxt])
        stack = np.stack(cands)
        choice = np.argmin(stack, axis=0)
        f = np.take_along_axis(stack, choice[None], axis=0)[0]
        choices.append(choice)
    choices.reverse()
    return options, choices, f


def _reconstruct(p: OneCoverProblem, options, choices, budget: int | None) -> RadiusAssignment:
    state = _full(len(p.clients))
    radii = {}
    b = budget
    for y, opts, choice in zip(p.servers, options, choices):
        o = int(choice[state] if b is None else choice[b, state])
        r, mask, _ = opts[o]
        if r is not None:
            radii[y] = r
            state &= ~mask
            if b is not None:
                b -= 1
    assert state == 0
    return RadiusAssignment(radii)


def cover_exact(
    p: OneCoverProblem,
    max_clients: int = DEFAULT_MAX_CLIENTS,
    max_servers: int = DEFAULT_MAX_SERVERS,
) -> RadiusAssignment:
    """Minimum-cost 1-cover; among optima, the lexicographically smallest radii."""
    if not p.clients:
        return RadiusAssignment({})
    _check_guard(p, max_clients, max_servers)
    budget = p.budget
    options, choices, f = _exact_tables(p, budget)
    full = _full(len(p.clients))
    if budget is None:
        if not np.isfinite(f[full]):
            raise InfeasibleError("no 1-cover exists")
        return _reconstruct(p, options, choices, None)
    if not np.isfinite(f[budget, full]):
        raise InfeasibleError(f"no 1-cover with at most {budget} servers")
    return _reconstruct(p, options, choices, budget)


def _merge_down(p: OneCoverProblem, radii: dict[int, float], budget: int) -> list[dict[int, float]]:
    """Merge the cheapest pair of balls until at most ``budget`` remain.

    Returns the assignment after every merge (first entry: no merge).
    """
    col = {y: s for s, y in enumerate(p.servers)}
    alpha = p.alpha
    cur = dict(radii)
    trail = [dict(cur)]
    while len(cur) > budget:
        centers = sorted(cur)
        pts = {y: p.dist[col[y]] <= cur[y] for y in centers}
        best = None
        for ai, a in enumerate(centers):
            for b in centers[ai + 1 :]:
                union = pts[a] | pts[b]
                for c in (a, b):
                    r = float(p.dist[col[c], union].max()) if union.any() else 0.0
                    delta = r**alpha - cur[a] ** alpha - cur[b] ** alpha
                    key = (delta, a, b, c)
                    if best is None or key < best[0]:
                        best = (key, a, b, c, r)
        _, a, b, c, r = best
        del cur[a], cur[b]
        cur[c] = r
        trail.append(dict(cur))
    return trail


def cover_bounded(p: OneCoverProblem, backend: str = "exact", **guard) -> RadiusAssignment:
    """1-cover opening at most ``p.budget`` servers (radius-0 balls count as open)."""
    if p.budget is None:
        raise InputError("cover_bounded needs a budget")
    if not p.clients:
        return RadiusAssignment({})
    if backend == "exact":
        return cover_exact(p, **guard)
    if backend == "greedy":
        base = cover_greedy(OneCoverProblem(p.inst, p.clients, p.servers))
        return RadiusAssignment(_merge_down(p, dict(base.items()), p.budget)[-1])
    raise InputError(f"unknown 1-cover backend {backend!r}")


def bounded_cover_table(
    inst: MetricInstance,
    clients: Sequence[int],
    servers: Sequence[int],
    max_budget: int,
    backend: str = "exact",
    **guard,
) -> list[RadiusAssignment]:
    """``out[b-1]`` is the ``cover_bounded`` result for budget ``b``, b = 1..max_budget.

    Same answers as calling ``cover_bounded`` once per budget, computed in one pass.
    """
    p = OneCoverProblem(inst, tuple(clients), tuple(servers))
    max_budget = min(max_budget, len(p.servers))
    if not p.clients:
        return [RadiusAssignment({})] * max_budget
    if backend == "exact":
        _check_guard(p, guard.get("max_clients", DEFAULT_MAX_CLIENTS), guard.get("max_servers", DEFAULT_MAX_SERVERS))
        options, choices, f = _exact_tables(p, max_budget)
        return [_reconstruct(p, options, choices, b) for b in range(1, max_budget + 1)]
    if backend == "greedy":
        base = dict(cover_greedy(p).items())
        trail = _merge_down(p, base, 1)
        out = []
        for b in range(1, max_budget + 1):
            # trail[j] has len(base) - j balls
            j = max(0, len(base) - b)
            out.append(RadiusAssignment(trail[j]))
        return out
    raise InputError(f"unknown 1-cover backend {backend!r}")


def cover(p: OneCoverProblem, backend: str = "greedy", **guard) -> RadiusAssignment:
    """Dispatch to the named backend."""
    if p.budget is not None:
        return cover_bounded(p, backend, **guard)
    if backend == "greedy":
        return cover_greedy(p)
    if backend == "exact":
        return cover_exact(p, **guard)
    raise InputError(f"unknown 1-cover backend {backend!r}")
