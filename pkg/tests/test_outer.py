import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_demands, random_instance
from mmcover.errors import HostingError, InputError
from mmcover.graphs import build_gi, build_gtilde
from mmcover.metric import MetricInstance, RadiusAssignment, build_neighborhood_index, coverage_counts
from mmcover.onecover import OneCoverProblem, cover_exact
from mmcover.oracle import exact_mmc, exact_tmmc
from mmcover.outer import (
    OuterCover,
    bound_outer_cover_servers,
    check_bundle,
    extract_outer_covers,
    host_outer_cover,
    tmmc_outer_covers,
    validate_outer_cover,
)
from mmcover.partition import compute_server_subsets_nonuniform, compute_server_subsets_uniform, obligated_clients


def test_validate_examples(f0, f1, idx1):
    idx0 = build_neighborhood_index(f0)
    assert validate_outer_cover(f0, idx0, OuterCover.of_level(f0, RadiusAssignment({0: 0, 1: 0, 2: 0}), 3)).ok
    v = validate_outer_cover(f1, idx1, OuterCover.of_level(f1, RadiusAssignment({0: 1.0}), 2))
    assert v.ok and v.witness == {0: 0, 1: 0}
    bad = validate_outer_cover(f1, idx1, OuterCover.of_level(f1, RadiusAssignment({0: 0.5}), 1))
    assert not bad.ok and bad.client == 1 and bad.contained is False


def test_validate_reports_small_ball(f1, idx1):
    # x1 lies in ball(y1, 0) but its second neighbor sits at distance 1
    v = validate_outer_cover(f1, idx1, OuterCover.of_level(f1, RadiusAssignment({0: 0.0, 1: 1.0}), 2))
    assert v.ok and v.witness == {0: 1, 1: 1}
    v = validate_outer_cover(f1, idx1, OuterCover.of_level(f1, RadiusAssignment({0: 0.0}), 2))
    assert not v.ok and v.client == 0 and v.contained and v.radius == 0.0 and v.required == 1.0


def test_zero_requirement_imposes_nothing(f1, idx1):
    oc = OuterCover.of_profile(RadiusAssignment({}), (0, 0))
    assert validate_outer_cover(f1, idx1, oc).ok
    with pytest.raises(InputError):
        validate_outer_cover(f1, idx1, OuterCover.of_profile(RadiusAssignment({}), (1,)))


def test_extract_on_line(f1, idx1):
    b = extract_outer_covers(f1, idx1, RadiusAssignment({0: 1, 1: 1}), 2)
    assert b.labels == (2, 1)
    assert b.balls[2].radii == {0: 1.0}
    assert b.balls[1].radii == {1: 1.0}
    assert math.fsum(b.balls[i].cost(1.0) for i in b.labels) == 2.0
    assert check_bundle(f1, idx1, b) == []


def test_extract_colocated(f0):
    idx = build_neighborhood_index(f0)
    b = extract_outer_covers(f0, idx, RadiusAssignment({}), 3)
    assert b.labels == (3, 2, 1)
    assert [len(b.balls[i]) for i in b.labels] == [1, 1, 1]
    assert set().union(*(b.balls[i].support for i in b.labels)) == {0, 1, 2}
    assert all(v == 0.0 for v in b.mu_hat.values())
    assert check_bundle(f0, idx, b) == []


def test_extract_rejects_infeasible(f1, idx1):
    with pytest.raises(InputError):
        extract_outer_covers(f1, idx1, RadiusAssignment({0: 1}), 2)


def test_bound_servers_on_line(f1, idx1):
    oc = OuterCover.of_level(f1, RadiusAssignment({0: 1.0}), 2)
    out = bound_outer_cover_servers(f1, idx1, oc, RadiusAssignment({1: 1.0}))
    assert out.assignment.radii == {1: 3.0}
    assert out.servers_used == 1
    assert validate_outer_cover(f1, idx1, out).ok


def test_bound_servers_zero_cost_one_cover():
    # every client sits on a server, so zero balls form a 1-cover
    pts = [[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]
    inst = MetricInstance.from_coords(["a", "b", "c"], ["p", "q", "r"], pts + pts, 1.0)
    idx = build_neighborhood_index(inst)
    oc = OuterCover.of_level(inst, RadiusAssignment({0: 3.0, 2: 5.0}), 2)
    out = bound_outer_cover_servers(inst, idx, oc, RadiusAssignment({0: 0.0, 1: 0.0, 2: 0.0}))
    assert out.assignment.radii == {0: 15.0}
    assert validate_outer_cover(inst, idx, out).ok
    assert out.cost(1.0) <= 3 * oc.cost(1.0)


def test_host_on_line(f1, idx1):
    oc = OuterCover.of_level(f1, RadiusAssignment({0: 1.0}), 2)
    out = host_outer_cover(f1, idx1, oc, {1}, 2, 6.0, build_gi(idx1, 2))
    assert out.radii == {1: 12.0}
    assert (coverage_counts(f1, out, support_only=True) >= 1).all()
    assert out.cost(1.0) <= 12.0 * oc.cost(1.0)


def test_host_self_hit(f1, idx1):
    oc = OuterCover.of_level(f1, RadiusAssignment({0: 1.0}), 2)
    out = host_outer_cover(f1, idx1, oc, {0}, 2, 6.0, build_gi(idx1, 2))
    assert out.radii == {0: 12.0}


def test_host_precondition_failure(f1, idx1):
    # at level 1 no client has y1 among its nearest server except x1, which is 2 hops from nobody
    oc = OuterCover.of_level(f1, RadiusAssignment({0: 0.0, 1: 0.0}), 1)
    with pytest.raises(HostingError) as err:
        host_outer_cover(f1, idx1, oc, {0}, 2, 6.0, build_gi(idx1, 1))
    assert err.value.client == 1


def test_host_nonuniform_f4(f4):
    inst, dem = f4
    idx = build_neighborhood_index(inst)
    fam = compute_server_subsets_nonuniform(inst, idx, dem)
    opt = exact_mmc(inst, dem)
    bundle = extract_outer_covers(inst, idx, opt.assignment, dem)
    assert check_bundle(inst, idx, bundle) == []
    shared = fam.member(1, "shared").servers
    clients = obligated_clients(dem, 1, "shared")
    assert clients == [0]
    oc = bundle.covers[1]
    out = host_outer_cover(inst, idx, oc, shared, 3, 8.0, build_gtilde(idx, dem, 1), clients)
    assert set(out.support) <= set(shared)
    assert (coverage_counts(inst, out, support_only=True)[clients] >= 1).all()
    assert out.cost(inst.alpha) <= 16**inst.alpha * oc.cost(inst.alpha) * (1 + 1e-9)


def test_tmmc_outer_covers_on_line(f1, idx1):
    r = exact_tmmc(f1, 2, 2).assignment
    res = tmmc_outer_covers(f1, idx1, r, 2, 2)
    assert res.ok and res.levels == (2,)
    assert res.covers[2].servers_used <= res.allowance[2]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([None, 3]))
def test_uniform_pipeline_random(seed, grid):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 5, grid=grid)
    idx = build_neighborhood_index(inst)
    k = int(rng.integers(1, min(inst.n_servers, 3) + 1))
    opt = exact_mmc(inst, k)
    bundle = extract_outer_covers(inst, idx, opt.assignment, k)
    assert check_bundle(inst, idx, bundle) == []
    fam = compute_server_subsets_uniform(inst, idx, k)
    for e in fam.entries:
        oc = bundle.covers[e.level]
        out = host_outer_cover(inst, idx, oc, e.servers, 2, 6.0, build_gi(idx, e.level))
        assert set(out.support) <= set(e.servers)
        assert out.cost(inst.alpha) <= 12**inst.alpha * oc.cost(inst.alpha) * (1 + 1e-9) + 1e-12


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_nonuniform_pipeline_random(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 5, grid=int(rng.choice([3, 50])))
    idx = build_neighborhood_index(inst)
    dem = random_demands(rng, inst, hi=3)
    opt = exact_mmc(inst, dem)
    bundle = extract_outer_covers(inst, idx, opt.assignment, dem)
    assert check_bundle(inst, idx, bundle) == []
    fam = compute_server_subsets_nonuniform(inst, idx, dem)
    for e in fam.entries:
        clients = obligated_clients(dem, e.level, e.kind)
        oc = bundle.covers[e.level]
        out = host_outer_cover(inst, idx, oc, e.servers, 3, 8.0, build_gtilde(idx, dem, e.level), clients)
        assert (coverage_counts(inst, out, support_only=True)[clients] >= 1).all()
        assert out.cost(inst.alpha) <= 16**inst.alpha * oc.cost(inst.alpha) * (1 + 1e-9) + 1e-12


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_server_bounding_random(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 5, 5, grid=int(rng.choice([3, 50])))
    idx = build_neighborhood_index(inst)
    i = int(rng.integers(1, inst.n_servers + 1))
    opt = exact_mmc(inst, i)
    oc = extract_outer_covers(inst, idx, opt.assignment, i).covers[i]
    ys = tuple(int(y) for y in rng.choice(inst.n_servers, int(rng.integers(1, inst.n_servers + 1)), replace=False))
    r1 = cover_exact(OneCoverProblem(inst, tuple(range(inst.n_clients)), ys))
    r1 = RadiusAssignment({y: r1[y] for y in ys if y in r1.support} or {ys[0]: float(inst.dxy[:, ys[0]].max())})
    if not (coverage_counts(inst, r1, support_only=True) >= 1).all():
        return
    out = bound_outer_cover_servers(inst, idx, oc, r1)
    assert set(out.assignment.support) <= set(r1.support)
    assert validate_outer_cover(inst, idx, out).ok
    bound = 3**inst.alpha * (oc.cost(inst.alpha) + r1.cost(inst.alpha))
    assert out.cost(inst.alpha) <= bound * (1 + 1e-9) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_tmmc_outer_covers_random(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 5, grid=int(rng.choice([3, 50])))
    idx = build_neighborhood_index(inst)
    k = int(rng.integers(1, min(inst.n_servers, 3) + 1))
    t = int(rng.integers(k, inst.n_servers + 1))
    r = exact_tmmc(inst, k, t).assignment
    res = tmmc_outer_covers(inst, idx, r, k, t)
    assert res.ok, res.violations
