import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from mmcover.errors import GuardError, InfeasibleError, InputError
from mmcover.metric import MetricInstance
from mmcover.onecover import (
    CandidateBallSet,
    OneCoverProblem,
    bounded_cover_table,
    cover_bounded,
    cover_exact,
    cover_greedy,
)


def brute_force(inst, clients, servers, budget=None):
    """Cheapest 1-cover by full enumeration of opened sets and radii."""
    best = math.inf
    sizes = range(1, (budget or len(servers)) + 1)
    for size in sizes:
        for ys in itertools.combinations(servers, size):
            grids = [sorted({0.0, *inst.dxy[list(clients), y].tolist()}) for y in ys]
            for combo in itertools.product(*grids):
                ok = all(any(inst.dxy[x, y] <= r for y, r in zip(ys, combo)) for x in clients)
                if ok:
                    best = min(best, math.fsum(r**inst.alpha for r in combo))
    return best


def covers(inst, clients, ra):
    return all(any(inst.dxy[x, y] <= r for y, r in ra.items()) for x in clients)


def test_candidate_balls_nested(f2):
    p = OneCoverProblem(f2, (0, 1, 2), (0, 1, 2, 3))
    for y in p.servers:
        balls = p.balls.for_server(y)
        radii = [r for r, _ in balls]
        assert radii == sorted(set(radii)) and radii[0] == 0.0
        for (_, a), (_, b) in zip(balls, balls[1:]):
            assert a & ~b == 0
    assert isinstance(p.balls, CandidateBallSet)


def test_greedy_examples(f1, f2):
    assert cover_greedy(OneCoverProblem(f1, (0, 1), (1,))).radii == {1: 1.0}
    assert cover_greedy(OneCoverProblem(f1, (1,), (1,))).radii == {1: 0.0}
    assert cover_greedy(OneCoverProblem(f2, (0, 1, 2), (1,))).radii == {1: 4.0}


def test_exact_examples(f1, f2):
    # each client sits on a server, so zero balls already cover both
    assert brute_force(f1, (0, 1), (0, 1)) == 0.0
    assert cover_exact(OneCoverProblem(f1, (0, 1), (0, 1))).cost(1.0) == 0.0
    far = MetricInstance.from_coords(["x1", "x2"], ["y1", "y2"], [[0.0], [1.0], [-1.0], [2.0]], 1.0)
    assert cover_exact(OneCoverProblem(far, (0, 1), (0, 1))).cost(1.0) == 2.0
    r = cover_exact(OneCoverProblem(f2, (0, 1, 2), (0, 1, 2)))
    assert brute_force(f2, (0, 1, 2), (0, 1, 2)) == 2.0
    assert r.cost(1.0) == 2.0
    assert r.radii == {0: 1.0, 1: 0.0, 2: 1.0}


def test_exact_single_server_tie(f1):
    # x1 alone: either server works, the zero ball at y1 is cheapest
    assert cover_exact(OneCoverProblem(f1, (0,), (0, 1))).cost(1.0) == 0.0
    assert cover_exact(OneCoverProblem(f1, (0, 1), (1,))).radii == {1: 1.0}


def test_bounded_examples(f1, f2):
    r = cover_bounded(OneCoverProblem(f1, (0, 1), (0, 1), budget=1))
    assert len(r) == 1 and r.cost(1.0) == 1.0
    assert brute_force(f2, (0, 1, 2), (0, 1, 2, 3), budget=1) == 4.0
    r = cover_bounded(OneCoverProblem(f2, (0, 1, 2), (0, 1, 2, 3), budget=1))
    assert r.radii == {1: 4.0}
    g = cover_bounded(OneCoverProblem(f2, (0, 1, 2), (0, 1, 2, 3), budget=1), backend="greedy")
    assert len(g) == 1 and covers(f2, (0, 1, 2), g)


def test_budget_slack_matches_unbounded(f2):
    full = (0, 1, 2, 3)
    a = cover_bounded(OneCoverProblem(f2, (0, 1, 2), full, budget=4))
    assert a.cost(1.0) == cover_exact(OneCoverProblem(f2, (0, 1, 2), full)).cost(1.0)
    g = cover_bounded(OneCoverProblem(f2, (0, 1, 2), full, budget=4), backend="greedy")
    assert g == cover_greedy(OneCoverProblem(f2, (0, 1, 2), full))


def test_errors(f1):
    with pytest.raises(InfeasibleError):
        OneCoverProblem(f1, (0,), ())
    with pytest.raises(InputError):
        OneCoverProblem(f1, (0,), (0,), budget=2)
    with pytest.raises(InputError):
        cover_greedy(OneCoverProblem(f1, (0,), (0,), budget=1))
    with pytest.raises(InputError):
        cover_bounded(OneCoverProblem(f1, (0,), (0,)))
    big = MetricInstance.from_coords(list(range(11)), ["y"], np.arange(12.0), 1.0)
    with pytest.raises(GuardError):
        cover_exact(OneCoverProblem(big, tuple(range(11)), (0,)))
    assert cover_exact(OneCoverProblem(big, tuple(range(11)), (0,)), max_clients=11).radii == {0: 11.0}


def test_empty_client_set(f1):
    assert cover_exact(OneCoverProblem(f1, (), (0,))).radii == {}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 4, grid=int(rng.choice([3, 100])))
    xs = tuple(range(inst.n_clients))
    ys = tuple(range(inst.n_servers))
    e = cover_exact(OneCoverProblem(inst, xs, ys))
    assert covers(inst, xs, e)
    assert math.isclose(e.cost(inst.alpha), brute_force(inst, xs, ys), rel_tol=1e-12, abs_tol=1e-12)
    g = cover_greedy(OneCoverProblem(inst, xs, ys))
    assert covers(inst, xs, g)
    assert e.cost(inst.alpha) <= g.cost(inst.alpha) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_bounded_table_matches_single_calls_and_brute_force(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 4, grid=int(rng.choice([3, 100])))
    xs = tuple(range(inst.n_clients))
    ys = tuple(range(inst.n_servers))
    for backend in ("exact", "greedy"):
        table = bounded_cover_table(inst, xs, ys, len(ys), backend)
        for b, ra in enumerate(table, start=1):
            assert len(ra) <= b and covers(inst, xs, ra)
            assert ra == cover_bounded(OneCoverProblem(inst, xs, ys, budget=b), backend)
            if backend == "exact":
                assert math.isclose(ra.cost(inst.alpha), brute_force(inst, xs, ys, b), rel_tol=1e-12, abs_tol=1e-12)
    exact = [ra.cost(inst.alpha) for ra in bounded_cover_table(inst, xs, ys, len(ys))]
    assert all(a >= b - 1e-12 for a, b in zip(exact, exact[1:]))


def test_concentric_dedupe_keeps_feasibility():
    rng = np.random.default_rng(2)
    for _ in range(50):
        inst = random_instance(rng, 8, 5, grid=4)
        xs = tuple(range(inst.n_clients))
        r = cover_greedy(OneCoverProblem(inst, xs, tuple(range(inst.n_servers))))
        assert covers(inst, xs, r)
