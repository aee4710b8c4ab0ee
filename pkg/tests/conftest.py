import pytest

from mmcover.metric import DemandProfile, MetricInstance, build_neighborhood_index


def make_f0(alpha=1.0):
    """One client and three servers, all at the origin."""
    return MetricInstance.from_coords(["a"], ["s1", "s2", "s3"], [[0.0, 0.0]] * 4, alpha)


def make_f1(alpha=1.0):
    """Clients at 0 and 1 on a line, one server on each."""
    return MetricInstance.from_coords(["x1", "x2"], ["y1", "y2"], [[0.0], [1.0], [0.0], [1.0]], alpha)


def make_f2(alpha=1.0):
    pts = [[0, 0], [4, 0], [8, 0], [1, 0], [4, 0], [7, 0], [4, 3]]
    return MetricInstance.from_coords(["x1", "x2", "x3"], ["y1", "y2", "y3", "y4"], pts, alpha)


def random_instance(rng, n_max, m_max, alpha=None, grid=None, n_min=1, m_min=1):
    """Points in the unit square, or on a small integer grid to force ties."""
    n = int(rng.integers(n_min, n_max + 1))
    m = int(rng.integers(m_min, m_max + 1))
    if alpha is None:
        alpha = float(rng.choice([1.0, 2.0]))
    pts = rng.integers(0, grid, (n + m, 2)) if grid else rng.random((n + m, 2))
    return MetricInstance.from_coords(list(range(n)), list(range(n, n + m)), pts, alpha)


def random_demands(rng, inst, hi=None):
    hi = inst.n_servers if hi is None else min(hi, inst.n_servers)
    return DemandProfile.for_instance(inst, [int(v) for v in rng.integers(1, hi + 1, size=inst.n_clients)])


@pytest.fixture
def f0():
    return make_f0()


@pytest.fixture
def f1():
    return make_f1()


@pytest.fixture
def f2():
    return make_f2()


@pytest.fixture
def f4(f1):
    return f1, DemandProfile.for_instance(f1, [2, 1])


@pytest.fixture
def idx1(f1):
    return build_neighborhood_index(f1)
