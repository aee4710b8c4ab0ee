import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_f1
from mmcover.errors import (
    DemandRangeError,
    MetricError,
    SchemaError,
    SymmetryError,
    TriangleError,
    UnknownPointError,
)
from mmcover.metric import (
    DemandProfile,
    MetricInstance,
    RadiusAssignment,
    build_neighborhood_index,
    coverage_count,
    is_feasible,
    solution_cost,
    validate_metric,
)


def test_coverage_count_colocated(f0):
    r = RadiusAssignment({0: 0, 1: 0, 2: 0})
    assert coverage_count(f0, r, 0) == 3
    # absent servers still have a radius-0 ball
    assert coverage_count(f0, RadiusAssignment({}), 0) == 3
    assert coverage_count(f0, RadiusAssignment({}), 0, support_only=True) == 0


def test_coverage_count_line(f1):
    assert coverage_count(f1, RadiusAssignment({0: 1, 1: 1}), 0) == 2
    assert coverage_count(f1, RadiusAssignment({0: 0.5, 1: 0}), 1) == 1
    # x2 sits on y2, so a zero ball still covers it; only y1 at 0.5 misses
    f1_far = MetricInstance.from_coords(["x1", "x2"], ["y1", "y2"], [[0.0], [1.0], [0.0], [1.5]], 1.0)
    assert coverage_count(f1_far, RadiusAssignment({0: 0.5, 1: 0}), 1) == 0


def test_coverage_count_unknown_client(f1):
    with pytest.raises(UnknownPointError):
        coverage_count(f1, RadiusAssignment({}), 5)


def test_is_feasible_examples(f0, f1):
    two = DemandProfile.for_instance(f1, 2)
    assert is_feasible(f1, two, RadiusAssignment({0: 1, 1: 1}))
    assert not is_feasible(f1, two, RadiusAssignment({0: 1, 1: 0.9}))
    assert is_feasible(f0, DemandProfile.for_instance(f0, 3), RadiusAssignment({}))


def test_cost_examples(f1):
    assert solution_cost(f1, RadiusAssignment({0: 1, 1: 1})) == 2.0
    assert solution_cost(make_f1(alpha=2.0), RadiusAssignment({0: 1, 1: 0})) == 1.0
    assert solution_cost(f1, RadiusAssignment({})) == 0.0


def test_neighborhoods(f0, f1, f2):
    i1 = build_neighborhood_index(f1)
    assert i1.N(0, 1) == {0}
    assert i1.N(0, 2) == {0, 1}
    # equidistant servers are ranked by position
    assert build_neighborhood_index(f0).N(0, 2) == {0, 1}
    i2 = build_neighborhood_index(f2)
    assert i2.N(0, 2) == {0, 1}
    assert i2.nbr_radius(0, 3) == 5.0
    assert i2.yj(0, 4) == 2
    assert i2.nbr_radius(0, 0) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_neighborhoods_nested(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 6)), int(rng.integers(1, 7))
    inst = MetricInstance.from_coords(list(range(n)), list(range(n, n + m)), rng.integers(0, 3, (n + m, 2)), 1.0)
    idx = build_neighborhood_index(inst)
    for x in range(n):
        for i in range(m):
            assert idx.N(x, i) < idx.N(x, i + 1)
            assert len(idx.N(x, i + 1)) == i + 1
            assert idx.nbr_radius(x, i) <= idx.nbr_radius(x, i + 1)


def test_validate_metric_errors():
    with pytest.raises(SymmetryError):
        validate_metric(np.array([[0, 1.0], [2.0, 0]]))
    with pytest.raises(MetricError):
        validate_metric(np.array([[0, -1.0], [-1.0, 0]]))
    with pytest.raises(MetricError):
        validate_metric(np.array([[1.0, 1.0], [1.0, 0]]))
    with pytest.raises(TriangleError):
        validate_metric(np.array([[0, 1, 5.0], [1, 0, 1.0], [5.0, 1, 0]]))
    with pytest.raises(SchemaError):
        validate_metric(np.zeros((2, 3)))


def test_instance_errors():
    with pytest.raises(SchemaError):
        MetricInstance.from_coords([], ["y"], [[0.0]], 1.0)
    with pytest.raises(SchemaError):
        MetricInstance.from_coords(["x"], ["y"], [[0.0], [1.0]], 0.5)
    with pytest.raises(SchemaError):
        MetricInstance.from_coords(["p"], ["p"], [[0.0], [1.0]], 1.0)


def test_demand_range(f1):
    with pytest.raises(DemandRangeError):
        DemandProfile.for_instance(f1, 3)
    with pytest.raises(DemandRangeError):
        DemandProfile.for_instance(f1, [0, 1])
    with pytest.raises(SchemaError):
        DemandProfile.for_instance(f1, [1.5, 1])
    assert DemandProfile.for_instance(f1, [2, 1]).kmax == 2


def test_graph_closure_and_zero_edges():
    inst = MetricInstance.from_edges(["a"], ["b", "c"], [["a", "hub", 0.0], ["hub", "b", 2.0], ["b", "c", 1.0], ["a", "c", 5.0]], 1.0)
    assert inst.dist[0, 1] == 2.0
    assert inst.dist[0, 2] == 3.0
    with pytest.raises(MetricError):
        MetricInstance.from_edges(["a"], ["b"], [], 1.0)


def test_duplicate_edges_keep_shortest():
    inst = MetricInstance.from_edges(["a"], ["b"], [["a", "b", 3.0], ["b", "a", 1.0]], 1.0)
    assert inst.dist[0, 1] == 1.0


def test_radius_assignment_rejects_bad_radii():
    with pytest.raises(ValueError):
        RadiusAssignment({0: -1})
    with pytest.raises(ValueError):
        RadiusAssignment({0: math.inf})


def test_shrinking_to_farthest_covered_client_keeps_feasibility():
    """Optimal radii can be taken from {0} and client distances."""
    rng = np.random.default_rng(3)
    for _ in range(50):
        inst = MetricInstance.from_coords(list(range(4)), list(range(4, 9)), rng.random((9, 2)), 2.0)
        dem = DemandProfile.for_instance(inst, [int(v) for v in rng.integers(1, 4, size=4)])
        r = RadiusAssignment({y: float(rng.random()) * 1.5 for y in range(5)})
        if not is_feasible(inst, dem, r):
            continue
        shrunk = {}
        for y, rad in r.items():
            inside = inst.dxy[:, y][inst.dxy[:, y] <= rad]
            shrunk[y] = float(inside.max()) if inside.size else 0.0
        s = RadiusAssignment(shrunk)
        assert is_feasible(inst, dem, s)
        assert s.cost(inst.alpha) <= r.cost(inst.alpha)
