import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_edges, nontrivial, successor_dict, tarjan

from chaincontrol.compactification import embed_h
from chaincontrol.engine import (
    DomainSpec,
    JumpSpec,
    build_covering,
    build_transition_graph,
    graph_from_samples,
    sample_flow,
)
from chaincontrol.engine.graph import FlowSamples
from chaincontrol.errors import ConfigError, InputError
from chaincontrol.scenarios import example2_scenario, scalar_hyperbolic_scenario, shear_flow_scenario
from chaincontrol.systems import AffineSystem, ControlRange

SHEAR = shear_flow_scenario().system
SCALAR = scalar_hyperbolic_scenario().system
EX2 = example2_scenario().system
STATIC = AffineSystem([[[0.0]]], [[0.0]], ControlRange.empty())
TINY = JumpSpec.constant(1e-9, inflation=0.0)


def edge_set(g):
    return {tuple(e) for e in g.edges().tolist()}


def partition(g):
    return sorted((sorted(c.tolist()) for c in g.scc().components()), key=lambda c: c[0])


def handmade(arrivals, n_boxes, jump=TINY):
    """Graph on a 1-D window whose box ``b`` lands on the centers listed in ``arrivals[b]``."""
    cov = build_covering(DomainSpec.window([[0.0, float(n_boxes)]]), int(np.log2(n_boxes)))
    pts, start = [], [0]
    for b in range(n_boxes):
        pts += [[cov.centers[t, 0]] for t in arrivals[b]]
        start.append(len(pts))
    pts = np.array(pts, dtype=float)
    S = FlowSamples(cov, 1.0, np.zeros((1, 0)), 1, 0.01, 0, pts, cov.locate(pts), np.array(start))
    return graph_from_samples(cov, S, jump)


@pytest.fixture(scope="module")
def small_graphs():
    out = {}
    win = build_covering(DomainSpec.window([[-3, 3], [-3, 3]]), 4)
    out["shear"] = build_transition_graph(win, SHEAR, 1.0, jump=JumpSpec.constant(0.3))
    out["scalar"] = build_transition_graph(
        build_covering(DomainSpec.window([[-3, 3]]), 6), SCALAR, 1.0, [[-1.0], [0.0], [1.0]],
        JumpSpec.constant(0.05),
    )
    out["ex2"] = build_transition_graph(
        build_covering(DomainSpec.window([[-4, 8], [-4, 4]]), 4), EX2, 1.0, jump=JumpSpec.constant(0.1),
    )
    sph = build_covering(DomainSpec.sphere(2), 3)
    out["sphere"] = build_transition_graph(sph, EX2, 0.5, jump=JumpSpec.constant(0.05))
    out["hemi"] = build_transition_graph(
        build_covering(DomainSpec.hemisphere(2, 1, True), 3), SHEAR, 1.0,
        jump=JumpSpec.weighted(0.3, "equator_height"),
    )
    out["circle"] = build_transition_graph(
        build_covering(DomainSpec.sphere(1), 5), SCALAR, 2.0, jump=JumpSpec.constant(0.01),
    )
    return out


# ---- exactness against slow oracles ------------------------------------------

@pytest.mark.parametrize("name", ["shear", "scalar", "ex2", "sphere", "hemi", "circle"])
def test_edges_match_brute_force(small_graphs, name):
    g = small_graphs[name]
    assert edge_set(g) == brute_edges(g)
    assert g.edge_count() == len(g.edges())


@pytest.mark.parametrize("name", ["shear", "scalar", "ex2", "sphere", "hemi", "circle"])
def test_scc_matches_tarjan(small_graphs, name):
    g = small_graphs[name]
    edges = brute_edges(g)
    nodes = np.flatnonzero(g.active).tolist()
    ref = tarjan(successor_dict(edges, g.sink), nodes)
    assert partition(g) == ref
    res = g.scc()
    got = [sorted(c.tolist()) for c, flag in zip(res.components(), res.nontrivial) if flag]
    assert got == nontrivial(ref, edges)


def test_projective_edges_match_brute_force(small_graphs):
    from chaincontrol.engine import projective_quotient

    q = projective_quotient(small_graphs["sphere"])
    assert edge_set(q) == brute_edges(q)


def test_edge_provenance_witnesses(small_graphs):
    g = small_graphs["shear"]
    for src, dst in g.edges()[::37]:
        assert g.edge_provenance(int(src), int(dst))


# ---- worked examples ----------------------------------------------------------

def test_static_field_self_loops_only():
    cov = build_covering(DomainSpec.window([[0, 1]]), 4)
    g = build_transition_graph(cov, STATIC, 1.0, jump=TINY)
    e = g.edges()
    assert np.array_equal(e[:, 0], e[:, 1]) and len(e) == len(cov)
    assert all(len(c) == 1 for c in g.scc().components())


def test_shear_edge_example():
    cov = build_covering(DomainSpec.window([[-3, 3], [-3, 3]]), 5)
    g = build_transition_graph(cov, SHEAR, 1.0, jump=JumpSpec.constant(0.5))
    src = cov.locate(np.array([[0.0, 2.0]]))[0]
    succ = set(g.successors(src).tolist())
    targets = cov.locate(np.array([[2.0, 2.0], [2.0, 2.45], [2.0, 1.55]]))
    assert set(targets.tolist()) <= succ


def test_weighted_jump_near_equator_keeps_containing_box():
    cov = build_covering(DomainSpec.hemisphere(2, 1, True), 4)
    v = np.array([0.3, 0.2, 0.0])
    p = np.append(v[:2], 1e-6)
    p /= np.linalg.norm(p)
    b0 = cov.locate(p[None])[0]
    pts = cov.centers.copy()
    pts[0] = p
    S = FlowSamples(cov, 1.0, np.zeros((1, 0)), 1, 0.01, 0, pts, cov.locate(pts), np.arange(len(cov) + 1))
    g = graph_from_samples(cov, S, JumpSpec.weighted(0.1, "equator_height"))
    assert g.radius[0] < 1e-6
    assert g.successors(0).tolist() == [b0]


def test_three_cycle_and_loner():
    g = handmade([[1], [2], [0], [3]], 4)
    assert partition(g) == [[0, 1, 2], [3]]
    assert g.scc().nontrivial.tolist() == [True, True]


def test_two_cycles_one_way():
    g = handmade([[1], [0, 2], [3], [2]], 4)
    assert partition(g) == [[0, 1], [2, 3]]
    assert g.reachable([0])[3] and not g.reachable([2])[0]


def test_directed_chain_reachability():
    from chaincontrol.engine import chain_reachable_set

    g = handmade([[1], [2], [2], [3]], 4)
    assert chain_reachable_set(g, 0).tolist() == [0, 1, 2]
    assert chain_reachable_set(g, 3).tolist() == [3]
    with pytest.raises(InputError):
        chain_reachable_set(g, 9)


def test_escapes_route_to_sink():
    cov = build_covering(DomainSpec.window([[-1, 1]]), 3)
    grow = AffineSystem([[[1.0]]], [[0.0]], ControlRange.empty())
    g = build_transition_graph(cov, grow, 2.0, jump=JumpSpec.constant(0.01))
    assert g.sink in g.successors(0)
    assert g.samples.escape_fraction > 0


# ---- invariants -----------------------------------------------------------------

@pytest.mark.parametrize("name", ["shear", "scalar", "sphere", "hemi"])
def test_flow_edge_always_present(small_graphs, name):
    g = small_graphs[name]
    S = g.samples
    ptr, idx = g.successor_lists()
    nodes = np.flatnonzero(g.active)
    assert np.all(np.diff(ptr) >= 1)
    for i, v in enumerate(nodes):
        b = g.node_boxes[g.node_start[v]]
        c = S.contain[S.start[b]]
        target = g.sink if c < 0 else g.box_to_node[c]
        if target >= 0:
            assert target in idx[ptr[i]:ptr[i + 1]]


def _contained(small, big):
    lab = big.scc().labels
    return all(np.unique(lab[c]).size == 1 for c in small.scc().components())


@pytest.mark.parametrize("name,lo,hi", [("shear", 0.05, 0.3), ("scalar", 0.01, 0.05)])
def test_eps_monotone(small_graphs, name, lo, hi):
    base = small_graphs[name]
    a, b = base.with_jump(JumpSpec.constant(lo)), base.with_jump(JumpSpec.constant(hi))
    assert edge_set(a) <= edge_set(b)
    assert _contained(a, b)


@given(st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_eps_monotone_property(e1, e2):
    lo, hi = sorted((e1, e2))
    base = _shear_base()
    a, b = base.with_jump(JumpSpec.constant(lo)), base.with_jump(JumpSpec.constant(hi))
    assert edge_set(a) <= edge_set(b) and _contained(a, b)


_BASE = {}


def _shear_base():
    if "g" not in _BASE:
        cov = build_covering(DomainSpec.window([[-3, 3], [-3, 3]]), 3)
        _BASE["g"] = build_transition_graph(cov, SHEAR, 1.0, jump=JumpSpec.constant(0.1))
    return _BASE["g"]


@pytest.mark.parametrize("weight", ["equator_height", "unit"])
def test_delta_monotone(small_graphs, weight):
    base = small_graphs["hemi"]
    ladder = [base.with_jump(JumpSpec.weighted(d, weight)) for d in (0.5, 0.1, 0.02)]
    for fine, coarse in zip(ladder[1:], ladder[:-1]):
        assert edge_set(fine) <= edge_set(coarse)
        assert _contained(fine, coarse)


def test_unit_weight_equals_constant(small_graphs):
    base = small_graphs["shear"]
    a = base.with_jump(JumpSpec.weighted(0.2, "unit"))
    b = base.with_jump(JumpSpec.constant(0.2))
    assert np.array_equal(a.edges(), b.edges())


def test_antipodal_edge_symmetry(small_graphs):
    g = small_graphs["sphere"]
    a = np.append(g.covering.antipode, g.sink)
    e = edge_set(g)
    assert {(int(a[s]), int(a[t])) for s, t in e} == e


def test_circle_antipodal_edge_symmetry(small_graphs):
    g = small_graphs["circle"]
    a = np.append(g.covering.antipode, g.sink)
    e = edge_set(g)
    assert {(int(a[s]), int(a[t])) for s, t in e} == e


@pytest.mark.parametrize("domain", ["window", "sphere"])
def test_thread_count_is_irrelevant(domain):
    if domain == "window":
        cov, sys_ = build_covering(DomainSpec.window([[-3, 3], [-3, 3]]), 5), SHEAR
    else:
        cov, sys_ = build_covering(DomainSpec.sphere(2), 4), EX2
    one = sample_flow(cov, sys_, 1.0, threads=1)
    many = sample_flow(cov, sys_, 1.0, threads=8)
    assert np.array_equal(one.points, many.points, equal_nan=True)
    jump = JumpSpec.constant(0.1)
    g1, g8 = graph_from_samples(cov, one, jump), graph_from_samples(cov, many, jump)
    assert np.array_equal(g1.edges(), g8.edges())
    assert np.array_equal(g1.scc().labels, g8.scc().labels)


def test_north_pole_sample_is_center():
    cov = build_covering(DomainSpec.sphere(2), 2)
    b = cov.locate(embed_h([0.0, 0.0]).coords[None])[0]
    assert np.all(cov.lo[b] <= cov.centers[b]) and np.all(cov.centers[b] <= cov.hi[b])


# ---- configuration errors ---------------------------------------------------------

def test_config_errors():
    cov = build_covering(DomainSpec.window([[-3, 3]]), 3)
    with pytest.raises(ConfigError):
        build_transition_graph(cov, SCALAR, 0.0, jump=TINY)
    with pytest.raises(ConfigError):
        build_transition_graph(cov, SCALAR, 1.0, jump=None)
    with pytest.raises(ConfigError):
        build_transition_graph(cov, SCALAR, 1.0, [[2.0]], TINY)
    with pytest.raises(ConfigError):
        build_transition_graph(cov, SHEAR, 1.0, jump=TINY)
    with pytest.raises(ConfigError):
        JumpSpec.constant(-1.0)
    with pytest.raises(ConfigError):
        JumpSpec.weighted(0.1, "nope")
    other = build_covering(DomainSpec.window([[-3, 3]]), 2)
    with pytest.raises(ConfigError):
        graph_from_samples(other, sample_flow(cov, SCALAR, 1.0), TINY)
