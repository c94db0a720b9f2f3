"""Sampled-control transition graphs on box coverings.

Every source box contributes its center plus antipodally paired
low-discrepancy offsets; each sample is flowed for time ``T`` under each
constant control sample.  An arrival ``p`` links the source box to the box
containing ``p`` and to every box ``b'`` with ``d(p, b') < radius(p)``.
Arrivals that diverge or leave the domain link to the sink node instead.

The arrivals themselves are the stored graph; successor lists are
enumerated on demand by the compiled kernels, and materialized only when
asked for.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .._flow import rk4_rows
from ..errors import ConfigError, InputError
from ..compactification import LinearSphereSystem
from ..systems import AffineSystem, ExtendedBilinearSystem, _check_control, extend
from . import _kernels as K
from .covering import EUCLIDEAN, BoxCovering
from .jumps import JumpSpec

DEFAULT_ENGINE_STEP = 0.01
DEFAULT_SEED = 20240611
OFFSET_SCALE = 0.9


def default_samples_per_box(covering: BoxCovering) -> int:
    return 1 + 2 * _grid_dim(covering)


def _grid_dim(covering: BoxCovering) -> int:
    return covering.domain.dim


def sample_offsets(n: int, samples_per_box: int, seed: int) -> np.ndarray:
    """Unit-box offsets ``0, +v_1, -v_1, +v_2, -v_2, ...`` in ``[-1, 1]^n``."""
    if samples_per_box < 1 or samples_per_box % 2 == 0:
        raise ConfigError("samples_per_box must be a positive odd integer (center plus +/- pairs)")
    pairs = (samples_per_box - 1) // 2
    out = np.zeros((samples_per_box, n))
    if pairs:
        q = qmc.Halton(d=n, scramble=True, seed=seed).random(pairs)
        v = OFFSET_SCALE * (2.0 * q - 1.0)
        out[1::2] = v
        out[2::2] = -v
    return out


def sample_points(covering: BoxCovering, samples_per_box: int, seed: int) -> np.ndarray:
    """Start points, shape ``(boxes, samples_per_box, ambient_dim)``."""
    base = covering.base
    off = sample_offsets(_grid_dim(base), samples_per_box, seed)
    if base.domain.kind == EUCLIDEAN:
        half = 0.5 * (base.hi - base.lo)
        return base.centers[:, None, :] + off[None, :, :] * half[:, None, :]
    N = base.cells_per_axis
    n1 = base.centers.shape[1]
    # negative-face boxes reuse the computation of their antipodal positive
    # box and negate it, so antipodal samples agree bit for bit
    sgn = np.where(base.face % 2 == 0, 1.0, -1.0)
    amid = (2.0 * base.cells + 1.0 - N) / N
    pos_amid = sgn[:, None] * amid
    k = base.face // 2
    a = pos_amid[:, None, :] + off[None, :, :] / N
    cube = np.empty(a.shape[:2] + (n1,))
    for kk in range(n1):
        rows = np.flatnonzero(k == kk)
        others = [j for j in range(n1) if j != kk]
        blk = np.empty((rows.size, a.shape[1], n1))
        blk[:, :, kk] = 1.0
        blk[:, :, others] = a[rows]
        cube[rows] = blk
    pts = cube / np.linalg.norm(cube, axis=2, keepdims=True)
    return sgn[:, None, None] * pts


@dataclass(frozen=True, eq=False)
class FlowSamples:
    """Arrivals of all box samples under all control samples.

    Arrivals of box ``b`` occupy ``start[b]:start[b+1]``, ordered by sample
    then control.  Non-finite arrivals are NaN rows with ``contain = -1``.
    """

    covering: BoxCovering
    T: float
    controls: np.ndarray
    samples_per_box: int
    step: float
    seed: int
    points: np.ndarray
    contain: np.ndarray
    start: np.ndarray

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def source(self) -> np.ndarray:
        return np.repeat(np.arange(self.start.size - 1), np.diff(self.start))

    @property
    def escape_fraction(self) -> float:
        return float(np.mean(self.contain < 0)) if self.count else 0.0

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "controls": self.controls.tolist(),
            "samples_per_box": self.samples_per_box,
            "step": self.step,
            "seed": self.seed,
        }


def _flow_data(covering: BoxCovering, dynamics):
    if covering.domain.is_spherical:
        if isinstance(dynamics, AffineSystem):
            dynamics = extend(dynamics)
        if not isinstance(dynamics, (ExtendedBilinearSystem, LinearSphereSystem)):
            raise ConfigError("sphere coverings need an affine or bilinear system")
        if dynamics.n_ext != covering.centers.shape[1]:
            raise ConfigError("system dimension does not match the sphere covering")
        return dynamics.omega, (lambda u: (dynamics.matrix(u), np.zeros(dynamics.n_ext))), 1
    if not isinstance(dynamics, AffineSystem):
        raise ConfigError("window coverings need an affine system")
    if dynamics.n != covering.domain.dim:
        raise ConfigError("system dimension does not match the window")
    return dynamics.omega, dynamics.coefficients, 0


def _run_rows(M, a, mode, X, h, n_steps, threads):
    rows = X.shape[0]
    if threads <= 1 or rows < 2048:
        return rk4_rows(M, a, mode, X, h, n_steps)[0]
    bounds = np.linspace(0, rows, 4 * threads + 1).astype(int)
    parts = [X[s:e] for s, e in zip(bounds[:-1], bounds[1:]) if e > s]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        outs = list(pool.map(lambda P: rk4_rows(M, a, mode, P, h, n_steps)[0], parts))
    return np.concatenate(outs, axis=0)


def sample_flow(
    covering: BoxCovering,
    dynamics,
    T: float,
    controls=None,
    samples_per_box: int | None = None,
    step: float = DEFAULT_ENGINE_STEP,
    seed: int = DEFAULT_SEED,
    threads: int | None = None,
) -> FlowSamples:
    if not (np.isfinite(T) and T > 0):
        raise ConfigError("T must be positive")
    if not (np.isfinite(step) and step > 0):
        raise ConfigError("step must be positive")
    omega, coeffs, mode = _flow_data(covering, dynamics)
    U = omega.default_samples() if controls is None else np.asarray(controls, dtype=np.float64)
    U = U.reshape(-1, omega.dim) if omega.dim else np.zeros((1, 0))
    if U.shape[0] == 0:
        raise ConfigError("control sample set is empty")
    for u in U:
        try:
            _check_control(omega, u)
        except InputError as exc:
            raise ConfigError(str(exc)) from exc
    spb = default_samples_per_box(covering.base) if samples_per_box is None else int(samples_per_box)
    threads = threads or min(8, os.cpu_count() or 1)
    starts = sample_points(covering, spb, seed)
    B, S, d = starts.shape
    X = np.ascontiguousarray(starts.reshape(-1, d))
    n_steps = max(1, int(np.ceil(T / step - 1e-9)))
    h = T / n_steps
    Kc = U.shape[0]
    out = np.empty((B * S, Kc, d))
    for j, u in enumerate(U):
        M, a = coeffs(u)
        out[:, j, :] = _run_rows(np.ascontiguousarray(M), np.ascontiguousarray(a), mode, X, h, n_steps, threads)
    pts = out.reshape(-1, d)
    base = covering.base
    contain = base.locate(pts)
    start = np.arange(B + 1, dtype=np.int64) * (S * Kc)
    return FlowSamples(base, float(T), U, spb, float(step), int(seed), pts, contain, start)


@dataclass(frozen=True)
class SCCResult:
    labels: np.ndarray  # per node, -1 for inactive nodes; ordered by smallest node id
    count: int
    sizes: np.ndarray
    selfloop: np.ndarray
    to_sink: np.ndarray
    nontrivial: np.ndarray  # per component

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def components(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        lab = self.labels[order]
        cut = np.searchsorted(lab, np.arange(self.count + 1))
        return [order[cut[i]:cut[i + 1]] for i in range(self.count)]


@dataclass(frozen=True, eq=False)
class TransitionGraph:
    """Implicit graph whose nodes index ``covering``; node ``len(covering)`` is the sink."""

    covering: BoxCovering
    samples: FlowSamples
    jump: JumpSpec
    radius: np.ndarray
    box_to_node: np.ndarray
    node_start: np.ndarray
    node_boxes: np.ndarray
    active: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def T(self) -> float:
        return self.samples.T

    @property
    def control_samples(self) -> np.ndarray:
        return self.samples.controls

    @property
    def node_count(self) -> int:
        return len(self.covering)

    @property
    def sink(self) -> int:
        return self.node_count

    def _geometry(self):
        base = self.samples.covering
        if base.domain.kind == EUCLIDEAN:
            b = base.domain.bounds
            glo = np.ascontiguousarray(b[:, 0])
            gh = (b[:, 1] - b[:, 0]) / base.cells_per_axis
            kind, n = 0, base.domain.dim
        else:
            glo = np.zeros(1)
            gh = np.array([float(np.max(base.hi - base.lo))])
            kind, n = 1, base.domain.dim
        return (
            kind, base.cells_per_axis, glo, gh, base.lo, base.hi, base.grid_to_box,
            self.samples.start, self.samples.contain, self.samples.points, self.radius,
            self.box_to_node, self.node_start, self.node_boxes,
        ), n

    def _call(self, fn, *head):
        geo, n = self._geometry()
        frames = K._frames(self.node_count if fn is K._tarjan else 1, n)
        return fn(*head, *frames, *geo)

    def scc(self) -> SCCResult:
        if "scc" not in self._cache:
            roots = np.flatnonzero(self.active).astype(np.int64)
            comp, ncomp, selfloop, to_sink = self._call(K._tarjan, roots, self.node_count)
            self._cache["scc"] = _order_components(comp, ncomp, selfloop, to_sink)
        return self._cache["scc"]

    def reachable(self, starts, forbid=None) -> np.ndarray:
        """Boolean mask over nodes plus sink reachable from ``starts`` (inclusive)."""
        s = np.atleast_1d(np.asarray(starts, dtype=np.int64))
        if s.size and (s.min() < 0 or s.max() >= self.node_count):
            raise InputError("start box outside covering")
        fb = np.zeros(self.node_count, dtype=bool) if forbid is None else np.asarray(forbid, bool)
        fb = fb | ~self.active
        return self._call(K._reach, s, self.node_count, fb)

    def successor_lists(self, nodes=None) -> tuple[np.ndarray, np.ndarray]:
        """Deduplicated sorted successors as CSR ``(indptr, indices)``; sink = ``node_count``."""
        v = np.flatnonzero(self.active) if nodes is None else np.asarray(nodes, dtype=np.int64)
        v = v.astype(np.int64)
        indptr = np.zeros(v.size + 1, dtype=np.int64)
        self._call(K._collect, v, self.node_count, True, indptr, np.zeros(0, np.int64))
        indices = np.empty(indptr[-1], dtype=np.int64)
        self._call(K._collect, v, self.node_count, False, indptr, indices)
        return indptr, indices

    def successors(self, node: int) -> np.ndarray:
        node = self.covering.check_box(node)
        ptr, idx = self.successor_lists([node])
        return idx

    def edges(self) -> np.ndarray:
        """All edges as an ``(E, 2)`` array sorted lexicographically; sink = ``node_count``."""
        if "edges" not in self._cache:
            v = np.flatnonzero(self.active).astype(np.int64)
            ptr, idx = self.successor_lists(v)
            src = np.repeat(v, np.diff(ptr))
            self._cache["edges"] = np.stack([src, idx], axis=1)
        return self._cache["edges"]

    def edge_count(self) -> int:
        """Edge count without storing the edges."""
        v = np.flatnonzero(self.active).astype(np.int64)
        indptr = np.zeros(v.size + 1, dtype=np.int64)
        self._call(K._collect, v, self.node_count, True, indptr, np.zeros(0, np.int64))
        return int(indptr[-1])

    def edge_provenance(self, src: int, dst: int) -> list[dict]:
        """Arrivals of ``src`` witnessing the edge ``src -> dst``."""
        out = []
        for b in self.node_boxes[self.node_start[src]:self.node_start[src + 1]]:
            S = self.samples
            for k in range(S.start[b], S.start[b + 1]):
                p = S.points[k]
                c = S.contain[k]
                hit = (dst == self.sink and c < 0) or (c >= 0 and self.box_to_node[c] == dst)
                if not hit and dst != self.sink and np.all(np.isfinite(p)):
                    gap = np.maximum(np.maximum(self.samples.covering.lo - p, p - self.samples.covering.hi), 0.0)
                    members = self.node_boxes[self.node_start[dst]:self.node_start[dst + 1]]
                    hit = bool(np.any(np.max(gap[members], axis=1) < self.radius[k]))
                if hit:
                    local = k - S.start[b]
                    kc = S.controls.shape[0]
                    out.append({
                        "box": int(b),
                        "sample": int(local // kc),
                        "control": S.controls[local % kc].tolist(),
                        "arrival": p.tolist(),
                        "radius": float(self.radius[k]),
                    })
        return out

    def with_active(self, mask: np.ndarray) -> "TransitionGraph":
        """Induced subgraph on ``mask`` (edges leaving the mask are dropped)."""
        mask = np.asarray(mask, dtype=bool) & self.active
        keep_box = np.zeros_like(self.box_to_node, dtype=bool)
        keep_box[self.node_boxes] = np.repeat(mask, np.diff(self.node_start))
        b2n = np.where(keep_box, self.box_to_node, -1)
        return TransitionGraph(
            self.covering, self.samples, self.jump, self.radius,
            b2n, self.node_start, self.node_boxes, mask,
        )

    def with_jump(self, jump: JumpSpec) -> "TransitionGraph":
        """Same arrivals, different jump radii."""
        return TransitionGraph(
            self.covering, self.samples, jump, _radii(self.samples, jump),
            self.box_to_node, self.node_start, self.node_boxes, self.active,
        )


def _radii(samples: FlowSamples, jump: JumpSpec) -> np.ndarray:
    base = samples.covering
    infl = np.repeat(base.diameters, np.diff(samples.start))
    return jump.radii(samples.points, infl, base.domain.is_spherical)


def _order_components(comp, ncomp, selfloop, to_sink) -> SCCResult:
    valid = comp >= 0
    nodes = np.flatnonzero(valid)
    first = np.full(ncomp, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first, comp[valid], nodes)
    order = np.argsort(first, kind="stable")
    rank = np.empty(ncomp, dtype=np.int64)
    rank[order] = np.arange(ncomp)
    labels = np.full(comp.shape, -1, dtype=np.int64)
    labels[valid] = rank[comp[valid]]
    sizes = np.bincount(labels[valid], minlength=ncomp)
    loops = np.zeros(ncomp, dtype=bool)
    np.logical_or.at(loops, labels[valid], selfloop[valid])
    nontrivial = (sizes > 1) | loops
    return SCCResult(labels, ncomp, sizes, selfloop, to_sink, nontrivial)


def graph_from_samples(covering: BoxCovering, samples: FlowSamples, jump: JumpSpec) -> TransitionGraph:
    """Transition graph on ``covering`` reusing precomputed arrivals."""
    if samples.covering is not covering.base:
        raise ConfigError("flow samples were computed on a different covering")
    V = len(covering)
    if covering.sphere is not None:
        b2n = covering.sphere_to_pair.copy()
        node_start = np.arange(0, 2 * V + 1, 2, dtype=np.int64)
        node_boxes = covering.members.reshape(-1).astype(np.int64)
    else:
        b2n = np.arange(V, dtype=np.int64)
        node_start = np.arange(V + 1, dtype=np.int64)
        node_boxes = np.arange(V, dtype=np.int64)
    return TransitionGraph(
        covering, samples, jump, _radii(samples, jump),
        b2n, node_start, node_boxes, np.ones(V, dtype=bool),
    )


def build_transition_graph(
    covering: BoxCovering,
    dynamics,
    T: float,
    control_samples=None,
    jump: JumpSpec | None = None,
    samples_per_box: int | None = None,
    step: float = DEFAULT_ENGINE_STEP,
    seed: int = DEFAULT_SEED,
    threads: int | None = None,
) -> TransitionGraph:
    if jump is None:
        raise ConfigError("a jump specification is required")
    samples = sample_flow(covering, dynamics, T, control_samples, samples_per_box, step, seed, threads)
    return graph_from_samples(covering, samples, jump)
