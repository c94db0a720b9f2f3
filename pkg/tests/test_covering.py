import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaincontrol.engine import DomainSpec, build_covering
from chaincontrol.engine.covering import box_count, default_depth_max, hemisphere_mask
from chaincontrol.errors import BudgetError, ConfigError, InputError


def unit_vectors(d, count, seed):
    v = np.random.default_rng(seed).normal(size=(count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def inside(cov, boxes, pts):
    return np.all((cov.lo[boxes] <= pts) & (pts <= cov.hi[boxes]), axis=1)


def test_counts():
    assert len(build_covering(DomainSpec.sphere(1), 0)) == 4
    assert len(build_covering(DomainSpec.projective(1), 0)) == 2
    w = build_covering(DomainSpec.window([[0, 1], [0, 1]]), 3)
    assert len(w) == 64
    assert np.allclose(w.radii, 1 / 16)


@pytest.mark.parametrize("n,depth", [(1, 4), (2, 3), (3, 2)])
def test_sphere_count_and_diameter(n, depth):
    cov = build_covering(DomainSpec.sphere(n), depth)
    assert len(cov) == box_count(DomainSpec.sphere(n), depth) == 2 * (n + 1) * 2 ** (n * depth)
    # cube faces have edge 2, radial projection does not expand
    assert cov.max_diameter <= 2.0 ** (1 - depth) + 1e-15


@pytest.mark.parametrize("n,depth", [(1, 5), (2, 4), (3, 2)])
def test_sphere_covered(n, depth):
    cov = build_covering(DomainSpec.sphere(n), depth)
    pts = unit_vectors(n + 1, 2000, n)
    b = cov.locate(pts)
    assert np.all(b >= 0) and np.all(inside(cov, b, pts))


@given(st.lists(st.floats(-4, 8), min_size=2, max_size=2))
def test_window_covered(p):
    p = np.array([[min(max(p[0], -4), 8), min(max(p[1], -4), 4)]])
    cov = build_covering(DomainSpec.window([[-4, 8], [-4, 4]]), 5)
    b = cov.locate(p)
    assert b[0] >= 0 and inside(cov, b, p)[0]


def test_window_outside_is_minus_one():
    cov = build_covering(DomainSpec.window([[0, 1]]), 3)
    assert cov.locate(np.array([[1.5], [-0.1]])).tolist() == [-1, -1]


@pytest.mark.parametrize("n", [1, 2])
def test_antipode_involution_exact(n):
    cov = build_covering(DomainSpec.sphere(n), 3)
    a = cov.antipode
    assert np.array_equal(a[a], np.arange(len(cov)))
    assert np.array_equal(cov.lo[a], -cov.hi) and np.array_equal(cov.centers[a], -cov.centers)


def test_projective_pairs():
    sph = build_covering(DomainSpec.sphere(2), 3)
    pro = build_covering(DomainSpec.projective(2), 3)
    assert len(pro) * 2 == len(sph)
    m = pro.members
    assert np.array_equal(sph.antipode[m[:, 0]], m[:, 1])
    first = np.array([c[np.flatnonzero(c)[0]] for c in pro.centers])
    assert np.all(first > 0)


def test_hemisphere_filters():
    sph = build_covering(DomainSpec.sphere(2), 3)
    closed = build_covering(DomainSpec.hemisphere(2, 1, True), 3)
    open_ = build_covering(DomainSpec.hemisphere(2, 1, False), 3)
    assert len(closed) == np.count_nonzero(hemisphere_mask(sph, 1, True))
    assert len(open_) < len(closed) < len(sph)
    assert np.all(open_.lo[:, -1] > 0) and np.all(closed.centers[:, -1] >= 0)


def test_hemisphere_mask_antipodal():
    sph = build_covering(DomainSpec.sphere(2), 3)
    north = hemisphere_mask(sph, 1, False)
    south = hemisphere_mask(sph, -1, False)
    assert np.array_equal(north[sph.antipode], south)


def test_budget_and_depth_limits():
    with pytest.raises(BudgetError):
        build_covering(DomainSpec.sphere(2), 7, budget=1000)
    with pytest.raises(ConfigError):
        build_covering(DomainSpec.sphere(3), 9)
    assert default_depth_max(2) == 12 and default_depth_max(3) == 8


def test_domain_validation():
    with pytest.raises(ConfigError):
        DomainSpec.sphere(0)
    with pytest.raises(ConfigError):
        DomainSpec.window([[1, 0]])


def test_check_box():
    cov = build_covering(DomainSpec.window([[0, 1]]), 2)
    with pytest.raises(InputError):
        cov.check_box(4)
