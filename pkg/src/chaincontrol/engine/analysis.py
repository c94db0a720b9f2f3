"""Chain control sets, reachability, jump ladders, and sphere-specific analyses.

All reported sets are sampled approximations at the resolution of the
covering; each result records the graph parameters it was computed with.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ConfigError, InputError
from .covering import (
    EUCLIDEAN,
    PROJECTIVE,
    SPHERE,
    BoxCovering,
    _projective_covering,
    hemisphere_mask,
)
from .graph import (
    DEFAULT_ENGINE_STEP,
    DEFAULT_SEED,
    TransitionGraph,
    graph_from_samples,
    sample_flow,
)
from .jumps import JumpSpec

CHAIN = "chain"
STRONG = "strong_chain_approx"


@dataclass(frozen=True)
class LadderLevel:
    delta: float
    component: int  # index among that level's nontrivial components
    size: int


@dataclass(frozen=True)
class ChainSetResult:
    set_id: int
    boxes: np.ndarray
    classification: str = CHAIN
    touches_equator: bool = False
    hemisphere_sign: str = "n/a"
    antipodal_class: str = "n/a"
    antipodal_partner: int | None = None
    ladder: tuple[LadderLevel, ...] | None = None
    resolution: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.boxes.size)

    def flags(self) -> dict:
        out = {
            "touches_equator": self.touches_equator,
            "hemisphere_sign": self.hemisphere_sign,
            "antipodal_class": self.antipodal_class,
        }
        if self.antipodal_partner is not None:
            out["antipodal_partner"] = self.antipodal_partner
        return out

    def to_dict(self) -> dict:
        out = {
            "set_id": self.set_id,
            "size": self.size,
            "classification": self.classification,
            "approximation": True,
            **self.flags(),
            "resolution": self.resolution,
        }
        if self.ladder is not None:
            out["ladder"] = [vars(lv) for lv in self.ladder]
        return out


def _resolution(graph: TransitionGraph) -> dict:
    return {
        "depth": graph.covering.depth,
        "T": graph.T,
        "jump": graph.jump.to_dict(),
        "max_box_diameter": graph.covering.max_diameter,
    }


def _geometry_flags(cov: BoxCovering, boxes: np.ndarray) -> dict:
    if cov.domain.kind == EUCLIDEAN:
        return {}
    lo = cov.lo[boxes, -1]
    hi = cov.hi[boxes, -1]
    touches = bool(np.any((lo <= 0.0) & (hi >= 0.0)))
    if cov.domain.kind == PROJECTIVE:
        return {"touches_equator": touches}
    north = bool(np.any(hi > 0.0))
    south = bool(np.any(lo < 0.0))
    sign = "both" if north and south else ("north" if north else ("south" if south else "equator"))
    return {"touches_equator": touches, "hemisphere_sign": sign}


def strongly_connected_components(graph: TransitionGraph) -> list[np.ndarray]:
    """Exact SCC partition of the active nodes, ordered by smallest member."""
    return graph.scc().components()


def chain_control_sets(graph: TransitionGraph) -> list[ChainSetResult]:
    """Nontrivial SCCs (an internal edge exists), sink excluded."""
    res = graph.scc()
    comps = res.components()
    out = []
    res_info = _resolution(graph)
    for c in np.flatnonzero(res.nontrivial):
        boxes = comps[c]
        out.append(ChainSetResult(
            len(out), boxes, resolution=res_info, **_geometry_flags(graph.covering, boxes),
        ))
    return out


def chain_reachable_set(graph: TransitionGraph, from_box: int) -> np.ndarray:
    """Forward closure of ``from_box`` (sink excluded)."""
    b = graph.covering.check_box(from_box)
    if not graph.active[b]:
        raise InputError(f"box {b} is not part of this graph")
    seen = graph.reachable([b])
    return np.flatnonzero(seen[:graph.node_count])


def set_reaches(graph: TransitionGraph, src: np.ndarray, dst: np.ndarray) -> bool:
    """Does some path lead from a box of ``src`` to a box of ``dst``?"""
    seen = graph.reachable(np.asarray(src, dtype=np.int64))
    return bool(np.any(seen[np.asarray(dst, dtype=np.int64)]))


def center_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Sup-norm Hausdorff distance between two point clouds."""
    if len(a) == 0 or len(b) == 0:
        return float("inf") if len(a) != len(b) else 0.0
    da = cKDTree(b).query(a, p=np.inf)[0].max()
    db = cKDTree(a).query(b, p=np.inf)[0].max()
    return float(max(da, db))


@dataclass(frozen=True)
class LadderResult:
    survivors: list[ChainSetResult]
    non_strong: list[tuple[float, np.ndarray]]
    levels: list[list[np.ndarray]]
    deltas: tuple[float, ...]
    weight: str
    stabilized: bool
    graphs: list[TransitionGraph] = field(repr=False, default_factory=list)

    def __iter__(self):
        return iter(self.survivors)

    def __len__(self) -> int:
        return len(self.survivors)


def _match_parent(child: np.ndarray, parents: list[np.ndarray], owner: np.ndarray) -> int:
    """Index of the parent set holding more than half of ``child`` (-1 if none)."""
    if not parents:
        return -1
    lab = owner[child]
    lab = lab[lab >= 0]
    if lab.size == 0:
        return -1
    counts = np.bincount(lab, minlength=len(parents))
    best = int(np.argmax(counts))
    return best if counts[best] * 2 > child.size else -1


def _owner(sets: list[np.ndarray], size: int) -> np.ndarray:
    own = np.full(size, -1, dtype=np.int64)
    for i, s in enumerate(sets):
        own[s] = i
    return own


def strong_chain_ladder(
    covering: BoxCovering,
    dynamics,
    T: float,
    weight: str,
    delta_ladder,
    control_samples=None,
    samples_per_box: int | None = None,
    step: float = DEFAULT_ENGINE_STEP,
    seed: int = DEFAULT_SEED,
    threads: int | None = None,
    samples=None,
    inflation: float = 1.0,
) -> LadderResult:
    """Nontrivial SCCs along a decreasing ladder of weighted jumps.

    Components are matched between consecutive levels by box overlap above
    50% of the finer component.  A finest-level component whose ancestry
    reaches the coarsest level survives, with the intersection of its
    ancestry as box set.  Components without a match on the next finer level
    are reported as non-strong.
    """
    deltas = tuple(float(d) for d in delta_ladder)
    if len(deltas) < 2:
        raise ConfigError("delta ladder needs at least two entries")
    if any(not d > 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("delta ladder must be positive and strictly decreasing")
    if samples is None:
        samples = sample_flow(covering, dynamics, T, control_samples, samples_per_box, step, seed, threads)
    graphs, levels = [], []
    for d in deltas:
        g = graph_from_samples(covering, samples, JumpSpec.weighted(d, weight, inflation))
        graphs.append(g)
        levels.append([s.boxes for s in chain_control_sets(g)])
    V = len(covering)
    owners = [_owner(sets, V) for sets in levels]
    parent = [
        [_match_parent(child, levels[i - 1], owners[i - 1]) for child in levels[i]] if i else []
        for i in range(len(levels))
    ]
    non_strong = []
    for i in range(len(levels) - 1):
        has_child = np.zeros(len(levels[i]), dtype=bool)
        for p in parent[i + 1]:
            if p >= 0:
                has_child[p] = True
        non_strong += [(deltas[i], levels[i][j]) for j in np.flatnonzero(~has_child)]
    survivors = []
    last = len(levels) - 1
    res_info = _resolution(graphs[-1])
    for j, child in enumerate(levels[last]):
        chain = [j]
        i, cur = last, j
        while i > 0:
            cur = parent[i][cur]
            if cur < 0:
                break
            chain.append(cur)
            i -= 1
        if i > 0:
            non_strong.append((deltas[last], child))
            continue
        chain.reverse()
        boxes = levels[0][chain[0]]
        for lv, c in enumerate(chain[1:], start=1):
            boxes = np.intersect1d(boxes, levels[lv][c])
        record = tuple(LadderLevel(deltas[lv], int(c), int(levels[lv][c].size)) for lv, c in enumerate(chain))
        survivors.append(ChainSetResult(
            len(survivors), boxes, STRONG, ladder=record, resolution=res_info,
            **_geometry_flags(covering, boxes),
        ))
    union = [np.concatenate(lv) if lv else np.zeros(0, np.int64) for lv in levels[-2:]]
    c = covering.centers
    stabilized = center_hausdorff(c[union[0]], c[union[1]]) <= covering.max_diameter
    return LadderResult(survivors, non_strong, levels, deltas, weight, bool(stabilized), graphs)


def _require_sphere(graph: TransitionGraph) -> BoxCovering:
    cov = graph.covering
    if cov.domain.kind != SPHERE or cov.antipode is None:
        raise ConfigError("operation needs a graph on a full sphere covering")
    return cov


@dataclass(frozen=True)
class AntipodalResult:
    kind: str  # "one" or "two"
    partner: int | None
    consistent: bool  # for "two": the partner set equals the negated box set


def antipodal_classification(
    graph: TransitionGraph,
    chain_set: ChainSetResult,
    chain_sets: list[ChainSetResult] | None = None,
) -> AntipodalResult:
    cov = _require_sphere(graph)
    b = int(chain_set.boxes.min())
    a = int(cov.antipode[b])
    if graph.reachable([b])[a]:
        return AntipodalResult("one", None, True)
    target = np.sort(cov.antipode[chain_set.boxes])
    for other in chain_sets or chain_control_sets(graph):
        if other.boxes.size == target.size and np.array_equal(np.sort(other.boxes), target):
            return AntipodalResult("two", other.set_id, True)
    owner = graph.scc().labels[a]
    partner = None
    for other in chain_sets or []:
        if graph.scc().labels[other.boxes[0]] == owner:
            partner = other.set_id
    return AntipodalResult("two", partner, False)


def classify_antipodal(graph: TransitionGraph, sets: list[ChainSetResult]) -> list[ChainSetResult]:
    """Copies of ``sets`` with antipodal flags filled in."""
    out = []
    for s in sets:
        r = antipodal_classification(graph, s, sets)
        out.append(replace(s, antipodal_class=r.kind, antipodal_partner=r.partner))
    return out


def projective_quotient(graph: TransitionGraph) -> TransitionGraph:
    """Graph on antipodal pairs; ``p -> q`` iff some member of ``p`` links to some member of ``q``."""
    cov = _require_sphere(graph)
    if not np.all(graph.active):
        raise ConfigError("projective quotient needs an unrestricted sphere graph")
    key = "projective_covering"
    if key not in cov._cache:
        cov._cache[key] = _projective_covering(cov.domain.dim, cov.depth, cov)
    return graph_from_samples(cov._cache[key], graph.samples, graph.jump)


def central_sets(proj_graph: TransitionGraph) -> list[ChainSetResult]:
    """Projective chain sets not contained in the equator."""
    cov = proj_graph.covering
    out = []
    for s in chain_control_sets(proj_graph):
        lo = cov.lo[s.boxes, -1]
        hi = cov.hi[s.boxes, -1]
        if np.any((lo > 0.0) | (hi < 0.0)):
            out.append(s)
    return out


@dataclass(frozen=True)
class ContainmentEntry:
    central_id: int
    contained: list[int]
    violations: list[int]


def equator_points(points) -> np.ndarray:
    """Embed points of ``S^{n-1}`` as equator points ``(v, 0)`` of ``S^n``."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    p = p / np.linalg.norm(p, axis=1, keepdims=True)
    return np.hstack([p, np.zeros((p.shape[0], 1))])


def equator_containment(
    sphere_graph: TransitionGraph,
    central: list[ChainSetResult],
    homogeneous: list[np.ndarray],
) -> list[ContainmentEntry]:
    """Which embedded homogeneous sets lie inside each equator-touching central set.

    ``homogeneous`` holds point clouds on ``S^{n-1}``.  A homogeneous set is
    contained in a central set when every embedded point is within one box
    diameter (sup-norm) of a box hull of the set; touching it only partly is a
    violation.
    """
    cov = sphere_graph.covering
    slack = cov.max_diameter
    emb = [equator_points(h) for h in homogeneous]
    out = []
    for s in central:
        if not s.touches_equator:
            continue
        lo = cov.lo[s.boxes]
        hi = cov.hi[s.boxes]
        contained, violations = [], []
        for i, pts in enumerate(emb):
            gaps = np.array([
                np.min(np.max(np.maximum(np.maximum(lo - p, p - hi), 0.0), axis=1)) for p in pts
            ])
            near = gaps <= slack
            if near.all():
                contained.append(i)
            elif near.any():
                violations.append(i)
        out.append(ContainmentEntry(s.set_id, contained, violations))
    return out


@dataclass(frozen=True)
class RestrictionResult:
    graph: TransitionGraph
    sets: list[ChainSetResult]


def hemisphere_restriction(graph: TransitionGraph, sign: int, closed: bool) -> RestrictionResult:
    """Induced subgraph on one hemisphere with its chain sets."""
    cov = graph.covering
    if cov.domain.kind == EUCLIDEAN or cov.sphere is not None:
        raise ConfigError("hemisphere restriction needs a sphere graph")
    if sign not in (1, -1):
        raise ConfigError("hemisphere sign must be +1 or -1")
    sub = graph.with_active(hemisphere_mask(cov, sign, closed))
    return RestrictionResult(sub, chain_control_sets(sub))
