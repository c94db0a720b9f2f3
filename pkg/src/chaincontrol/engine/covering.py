"""Box coverings of windows, spheres, hemispheres and projective spaces.

Sphere kinds use the cube-sphere chart: face ``(k, sigma)`` of ``[-1, 1]^{n+1}``
carries a uniform ``N^n`` grid in the remaining coordinates, radially projected
onto the unit sphere.  Each spherical patch stores its exact axis-aligned hull
in ambient coordinates, so sup-norm distances to a box are exact lower bounds
over the patch.  Negative faces are produced by negating and mirroring the
positive ones, which keeps every geometric quantity antipodally symmetric bit
for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BudgetError, ConfigError, InputError

EUCLIDEAN = "euclidean"
SPHERE = "sphere"
HEMISPHERE = "hemisphere"
PROJECTIVE = "projective"

DEFAULT_BOX_BUDGET = 2_000_000


def default_depth_max(n: int) -> int:
    if n <= 2:
        return 12
    if n == 3:
        return 8
    return 6


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    dim: int
    bounds: np.ndarray | None = None
    sign: int = 1
    closed: bool = True

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, SPHERE, HEMISPHERE, PROJECTIVE):
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        if self.kind == EUCLIDEAN:
            b = np.array(self.bounds, dtype=np.float64)
            if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] < 1:
                raise ConfigError("window bounds must have shape (n, 2)")
            if not np.all(np.isfinite(b)) or np.any(b[:, 0] >= b[:, 1]):
                raise ConfigError("window bounds must be finite with lower < upper")
            b.setflags(write=False)
            object.__setattr__(self, "bounds", b)
            object.__setattr__(self, "dim", b.shape[0])
        else:
            if int(self.dim) < 1:
                raise ConfigError("sphere dimension must be at least 1")
            object.__setattr__(self, "dim", int(self.dim))
            object.__setattr__(self, "bounds", None)
        if self.sign not in (1, -1):
            raise ConfigError("hemisphere sign must be +1 or -1")

    @classmethod
    def window(cls, bounds) -> "DomainSpec":
        return cls(EUCLIDEAN, 0, bounds)

    @classmethod
    def sphere(cls, n: int) -> "DomainSpec":
        return cls(SPHERE, n)

    @classmethod
    def hemisphere(cls, n: int, sign: int = 1, closed: bool = True) -> "DomainSpec":
        return cls(HEMISPHERE, n, sign=sign, closed=closed)

    @classmethod
    def projective(cls, n: int) -> "DomainSpec":
        return cls(PROJECTIVE, n)

    @property
    def is_spherical(self) -> bool:
        return self.kind != EUCLIDEAN

    @property
    def ambient_dim(self) -> int:
        return self.dim if self.kind == EUCLIDEAN else self.dim + 1

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == EUCLIDEAN:
            out["bounds"] = self.bounds.tolist()
        if self.kind == HEMISPHERE:
            out["sign"] = self.sign
            out["closed"] = self.closed
        return out


@dataclass(frozen=True, eq=False)
class BoxCovering:
    """Indexed boxes of a domain.

    ``lo``/``hi`` are ambient-coordinate hulls, ``centers`` the box centers
    (projected patch centers on spheres).  ``grid_ids`` locate each box in the
    underlying grid and ``grid_to_box`` inverts that map (``-1`` = not in the
    covering).  Projective coverings keep the full sphere covering in
    ``sphere`` and list the two sphere boxes of each pair in ``members``.
    """

    domain: DomainSpec
    depth: int
    cells_per_axis: int
    centers: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    grid_ids: np.ndarray
    grid_to_box: np.ndarray
    face: np.ndarray | None = None
    cells: np.ndarray | None = None
    antipode: np.ndarray | None = None
    sphere: "BoxCovering | None" = None
    members: np.ndarray | None = None
    sphere_to_pair: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return self.centers.shape[0]

    @property
    def size(self) -> int:
        return len(self)

    @property
    def radii(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    @property
    def diameters(self) -> np.ndarray:
        """Sup-norm diameter of each box hull."""
        return np.max(self.hi - self.lo, axis=1)

    @property
    def max_diameter(self) -> float:
        return float(self.diameters.max())

    @property
    def base(self) -> "BoxCovering":
        """Covering whose boxes carry flow samples (the sphere for projective)."""
        return self.sphere if self.sphere is not None else self

    def check_box(self, b: int) -> int:
        b = int(b)
        if not 0 <= b < len(self):
            raise InputError(f"box id {b} outside covering of {len(self)} boxes")
        return b

    def locate(self, points) -> np.ndarray:
        """Box id containing each point (``-1`` outside the covering)."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.sphere is not None:
            return self.sphere_to_pair[self.sphere.locate(p)]
        if self.domain.kind == EUCLIDEAN:
            gid = _euclid_grid_ids(self, p)
        else:
            gid = _sphere_grid_ids(p, self.cells_per_axis)
        out = np.full(p.shape[0], -1, dtype=np.int64)
        ok = gid >= 0
        out[ok] = self.grid_to_box[gid[ok]]
        if self.domain.kind == HEMISPHERE:
            miss = np.flatnonzero((out < 0) & ok & self.in_domain(p))
            for i in miss:
                out[i] = self._nearest_containing(p[i])
        return out

    def in_domain(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        fin = np.all(np.isfinite(p), axis=1)
        if self.domain.kind == EUCLIDEAN:
            b = self.domain.bounds
            with np.errstate(invalid="ignore"):
                return fin & np.all((p >= b[:, 0]) & (p <= b[:, 1]), axis=1)
        if self.domain.kind == HEMISPHERE:
            with np.errstate(invalid="ignore"):
                h = self.domain.sign * p[:, -1]
                return fin & ((h >= 0.0) if self.domain.closed else (h > 0.0))
        return fin

    def _nearest_containing(self, p: np.ndarray) -> int:
        # grid-boundary point whose lookup landed in an excluded neighbour
        gap = np.max(np.maximum(np.maximum(self.lo - p, p - self.hi), 0.0), axis=1)
        b = int(np.argmin(gap))
        return b if gap[b] == 0.0 else -1

    def to_nodes(self) -> list[dict]:
        out = []
        for b in range(len(self)):
            node = {"id": b, "center": self.centers[b].tolist(), "radius": self.radii[b].tolist()}
            if self.face is not None:
                node["face"] = int(self.face[b])
            out.append(node)
        return out


def _euclid_grid_ids(cov: BoxCovering, p: np.ndarray) -> np.ndarray:
    b = cov.domain.bounds
    N = cov.cells_per_axis
    h = (b[:, 1] - b[:, 0]) / N
    with np.errstate(invalid="ignore"):
        inside = np.all((p >= b[:, 0]) & (p <= b[:, 1]), axis=1)
        q = np.where(np.isfinite(p), p, b[:, 0])
        idx = np.floor((q - b[:, 0]) / h).astype(np.int64)
    idx = np.clip(idx, 0, N - 1)
    # the division can round across a cell edge; settle on the hull that holds q
    idx -= (q < b[:, 0] + idx * h) & (idx > 0)
    idx += (q > b[:, 0] + (idx + 1) * h) & (idx < N - 1)
    gid = np.ravel_multi_index(tuple(idx.T), (N,) * p.shape[1])
    return np.where(inside, gid, -1)


def _sphere_grid_ids(p: np.ndarray, N: int) -> np.ndarray:
    n1 = p.shape[1]
    fin = np.all(np.isfinite(p), axis=1)
    q = np.where(fin[:, None], p, 1.0)
    k = np.argmax(np.abs(q), axis=1)
    rows = np.arange(q.shape[0])
    pk = q[rows, k]
    face = 2 * k + (pk < 0)
    others = np.array([[j for j in range(n1) if j != kk] for kk in range(n1)])[k]
    a = q[rows[:, None], others] / np.abs(pk)[:, None]
    idx = np.clip(np.floor((a + 1.0) * 0.5 * N).astype(np.int64), 0, N - 1)
    gid = face.astype(np.int64)
    for j in range(n1 - 1):
        gid = gid * N + idx[:, j]
    return np.where(fin, gid, -1)


def _window_covering(domain: DomainSpec, depth: int) -> BoxCovering:
    b = domain.bounds
    n = domain.dim
    N = 2 ** depth
    h = (b[:, 1] - b[:, 0]) / N
    idx = np.indices((N,) * n).reshape(n, -1).T
    lo = b[:, 0] + idx * h
    hi = b[:, 0] + (idx + 1) * h
    hi[idx == N - 1] = np.broadcast_to(b[:, 1], idx.shape)[idx == N - 1]
    centers = 0.5 * (lo + hi)
    gid = np.arange(idx.shape[0], dtype=np.int64)
    return BoxCovering(domain, depth, N, centers, lo, hi, gid, gid.copy(), cells=idx)


def _positive_face(k: int, n1: int, N: int):
    """Centers and exact hulls of all cells on face ``(k, +)``."""
    n = n1 - 1
    idx = np.indices((N,) * n).reshape(n, -1).T if n else np.zeros((1, 0), np.int64)
    alo = -1.0 + 2.0 * idx / N
    ahi = -1.0 + 2.0 * (idx + 1) / N
    amid = -1.0 + (2.0 * idx + 1.0) / N
    sq_lo = np.where((alo <= 0) & (ahi >= 0), 0.0, np.minimum(alo ** 2, ahi ** 2))
    sq_hi = np.maximum(alo ** 2, ahi ** 2)
    tot_lo = sq_lo.sum(axis=1)
    tot_hi = sq_hi.sum(axis=1)
    M = idx.shape[0]
    lo = np.empty((M, n1))
    hi = np.empty((M, n1))
    cen = np.empty((M, n1))
    lo[:, k] = 1.0 / np.sqrt(1.0 + tot_hi)
    hi[:, k] = 1.0 / np.sqrt(1.0 + tot_lo)
    cen_norm = np.sqrt(1.0 + np.sum(amid ** 2, axis=1))
    cen[:, k] = 1.0 / cen_norm
    others = [j for j in range(n1) if j != k]
    for jj, ax in enumerate(others):
        rest_lo = tot_lo - sq_lo[:, jj]
        rest_hi = tot_hi - sq_hi[:, jj]
        top = ahi[:, jj]
        bot = alo[:, jj]
        hi[:, ax] = top / np.sqrt(1.0 + top ** 2 + np.where(top >= 0, rest_lo, rest_hi))
        lo[:, ax] = bot / np.sqrt(1.0 + bot ** 2 + np.where(bot >= 0, rest_hi, rest_lo))
        cen[:, ax] = amid[:, jj] / cen_norm
    return idx, cen, lo, hi


def _sphere_covering(n: int, depth: int) -> BoxCovering:
    n1 = n + 1
    N = 2 ** depth
    per_face = N ** n
    mirror = per_face - 1 - np.arange(per_face)
    cen_l, lo_l, hi_l, face_l, cells_l = [], [], [], [], []
    for k in range(n1):
        idx, cen, lo, hi = _positive_face(k, n1, N)
        cen_l += [cen, -cen[mirror]]
        lo_l += [lo, -hi[mirror]]
        hi_l += [hi, -lo[mirror]]
        cells_l += [idx, idx]
        face_l += [np.full(per_face, 2 * k), np.full(per_face, 2 * k + 1)]
    B = 2 * n1 * per_face
    gid = np.arange(B, dtype=np.int64)
    face = np.concatenate(face_l)
    local = gid % per_face
    anti = np.where(face % 2 == 0, gid + per_face, gid - per_face)
    anti = anti - local + (per_face - 1 - local)
    return BoxCovering(
        DomainSpec.sphere(n), depth, N,
        np.concatenate(cen_l), np.concatenate(lo_l), np.concatenate(hi_l),
        gid, gid.copy(), face=face, cells=np.concatenate(cells_l), antipode=anti,
    )


def _subset(full: BoxCovering, keep: np.ndarray, domain: DomainSpec) -> BoxCovering:
    ids = np.flatnonzero(keep)
    g2b = np.full(full.grid_to_box.shape[0], -1, dtype=np.int64)
    g2b[full.grid_ids[ids]] = np.arange(ids.size)
    anti = None
    if full.antipode is not None:
        a = g2b[full.grid_ids[full.antipode[ids]]]
        anti = a if np.all(a >= 0) else None
    return BoxCovering(
        domain, full.depth, full.cells_per_axis,
        full.centers[ids], full.lo[ids], full.hi[ids], full.grid_ids[ids], g2b,
        face=full.face[ids], cells=full.cells[ids], antipode=anti,
    )


def hemisphere_mask(cov: BoxCovering, sign: int, closed: bool) -> np.ndarray:
    """Closed: ``sign * center_{n+1} >= 0``; open: the whole hull has ``sign * s_{n+1} > 0``."""
    if closed:
        return sign * cov.centers[:, -1] >= 0.0
    low = cov.lo[:, -1] if sign > 0 else -cov.hi[:, -1]
    return low > 0.0


def _projective_covering(n: int, depth: int, sphere: BoxCovering) -> BoxCovering:
    anti = sphere.antipode
    B = len(sphere)
    canon = np.empty(B, dtype=bool)
    for b in range(B):
        c = sphere.centers[b]
        nz = np.flatnonzero(c != 0.0)
        canon[b] = c[nz[0]] > 0.0
    reps = np.flatnonzero(canon)
    if reps.size * 2 != B or not np.all(~canon[anti[reps]]):
        raise ConfigError("antipodal pairing of sphere boxes is not an involution")
    members = np.stack([reps, anti[reps]], axis=1)
    s2p = np.empty(B, dtype=np.int64)
    s2p[reps] = np.arange(reps.size)
    s2p[anti[reps]] = np.arange(reps.size)
    gid = np.arange(reps.size, dtype=np.int64)
    return BoxCovering(
        DomainSpec.projective(n), depth, sphere.cells_per_axis,
        sphere.centers[reps], sphere.lo[reps], sphere.hi[reps], gid, gid.copy(),
        face=sphere.face[reps], cells=sphere.cells[reps],
        sphere=sphere, members=members, sphere_to_pair=s2p,
    )


def box_count(domain: DomainSpec, depth: int) -> int:
    """Boxes in the full grid before hemisphere filtering or quotienting."""
    N = 2 ** depth
    if domain.kind == EUCLIDEAN:
        return N ** domain.dim
    return 2 * (domain.dim + 1) * N ** domain.dim


def build_covering(
    domain: DomainSpec,
    depth: int,
    depth_max: int | None = None,
    budget: int = DEFAULT_BOX_BUDGET,
) -> BoxCovering:
    depth = int(depth)
    if depth < 0:
        raise ConfigError("depth must be non-negative")
    limit = default_depth_max(domain.dim) if depth_max is None else depth_max
    if depth > limit:
        raise ConfigError(f"depth {depth} exceeds depth_max {limit}")
    count = box_count(domain, depth)
    if count > budget:
        raise BudgetError(f"covering needs {count} boxes, budget is {budget}")
    if domain.kind == EUCLIDEAN:
        return _window_covering(domain, depth)
    sphere = _sphere_covering(domain.dim, depth)
    if domain.kind == SPHERE:
        return sphere
    if domain.kind == HEMISPHERE:
        return _subset(sphere, hemisphere_mask(sphere, domain.sign, domain.closed), domain)
    return _projective_covering(domain.dim, depth, sphere)


