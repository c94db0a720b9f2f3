"""Poincare sphere embedding and the projected dynamics on S^n.

``R^n`` is placed on the open northern hemisphere by
``h(x) = (x, 1) / ||(x, 1)||``; the equator ``s_{n+1} = 0`` carries the
points at infinity.  The lifted bilinear system induces the sphere field
``[A' - (s^T A' s) I] s`` with ``A' = A'_0 + sum u_i A'_i``.  Distances on the
sphere use the max-coordinate metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, EquatorError, InputError
from .systems import (
    DEFAULT_STEP,
    AffineSystem,
    ControlSignal,
    ExtendedBilinearSystem,
    _check_control,
    extend,
    integrate,
)

TOL_SIGN = 1e-12
TOL_EQUATOR = 1e-12


@dataclass(frozen=True)
class SpherePoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64).reshape(-1)
        nrm = np.linalg.norm(c)
        if c.size < 2 or not np.isfinite(nrm) or nrm == 0.0:
            raise ConstructionError("sphere point needs a finite nonzero vector of length >= 2")
        c = c / nrm
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        """Dimension ``n`` of the sphere (ambient dimension minus one)."""
        return self.coords.shape[0] - 1

    def __neg__(self) -> "SpherePoint":
        return antipode(self)

    def to_json(self) -> list:
        return self.coords.tolist()


@dataclass(frozen=True)
class ProjectivePoint:
    rep: SpherePoint

    def to_json(self) -> list:
        return self.rep.to_json()


def _finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise InputError("point must be finite")
    return x


def embed_h(x) -> SpherePoint:
    """``(x, 1) / ||(x, 1)||`` on the northern hemisphere."""
    x = _finite(x)
    return SpherePoint(np.append(x, 1.0))


def embed_h_minus(x) -> SpherePoint:
    """Southern counterpart ``-h(x)``."""
    return antipode(embed_h(x))


def h_inverse(s: SpherePoint, tol_equator: float = TOL_EQUATOR) -> np.ndarray:
    """Chart ``(s_1/s_{n+1}, ..., s_n/s_{n+1})``; fails on the equator."""
    c = s.coords
    if abs(c[-1]) <= tol_equator:
        raise EquatorError("point lies on the equator (at infinity)")
    return c[:-1] / c[-1]


def antipode(s: SpherePoint) -> SpherePoint:
    """Exact negation (no renormalization, so the map is an involution bit for bit)."""
    out = object.__new__(SpherePoint)
    c = -s.coords
    c.setflags(write=False)
    object.__setattr__(out, "coords", c)
    return out


def equator_height(s: SpherePoint) -> float:
    return float(s.coords[-1])


def projective_canonical(s: SpherePoint, tol_sign: float = TOL_SIGN) -> ProjectivePoint:
    """Representative whose first coordinate with ``|value| > tol_sign`` is positive."""
    c = s.coords
    big = np.flatnonzero(np.abs(c) > tol_sign)
    if big.size and c[big[0]] < 0:
        return ProjectivePoint(antipode(s))
    return ProjectivePoint(s)


def sphere_distance(s, t) -> float:
    """Max-coordinate distance between two sphere points (or raw arrays)."""
    a = s.coords if isinstance(s, SpherePoint) else np.asarray(s)
    b = t.coords if isinstance(t, SpherePoint) else np.asarray(t)
    return float(np.max(np.abs(a - b)))


def projective_distance(p: ProjectivePoint, q: ProjectivePoint) -> float:
    a, b = p.rep.coords, q.rep.coords
    return min(float(np.max(np.abs(a - b))), float(np.max(np.abs(a + b))))


def projected_field(M: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``[M - (s^T M s) I] s`` for batched ``s`` of shape ``(..., n+1)``."""
    Ms = s @ M.T
    return Ms - np.sum(s * Ms, axis=-1, keepdims=True) * s


def sphere_field(ext: ExtendedBilinearSystem, s, u) -> np.ndarray:
    """Tangent vector of the projected bilinear dynamics at ``s``."""
    c = s.coords if isinstance(s, SpherePoint) else np.asarray(s, dtype=np.float64)
    if c.shape[-1] != ext.n_ext:
        raise ConstructionError(f"sphere point has dimension {c.shape[-1]}, expected {ext.n_ext}")
    u = _check_control(ext.omega, u)
    return projected_field(ext.matrix(u), c)


class SphereField:
    """Projected field of an extended system as a callable ``f(s, u)``."""

    mode = 1

    def __init__(self, ext: ExtendedBilinearSystem):
        self.ext = ext

    def __call__(self, s, u):
        return sphere_field(self.ext, s, u)

    def frozen(self, u) -> tuple[np.ndarray, np.ndarray]:
        u = _check_control(self.ext.omega, u)
        return self.ext.matrix(u), np.zeros(self.ext.n_ext)


def sphere_integrate(
    ext: ExtendedBilinearSystem,
    s0,
    u: ControlSignal,
    t0: float,
    t1: float,
    step: float = DEFAULT_STEP,
) -> SpherePoint:
    """RK4 on the sphere field, renormalized after every step."""
    c = s0.coords if isinstance(s0, SpherePoint) else np.asarray(s0, dtype=np.float64)
    if c.shape != (ext.n_ext,):
        raise ConstructionError(f"start point has shape {c.shape}, expected ({ext.n_ext},)")
    return SpherePoint(integrate(SphereField(ext), c, u, t0, t1, step))


def conjugacy_residual(
    sys: AffineSystem,
    x,
    u: ControlSignal,
    t: float,
    step: float = DEFAULT_STEP,
) -> float:
    """Distance between ``h`` of the planar trajectory and the sphere trajectory of ``h(x)``."""
    x = _finite(x)
    planar = integrate(sys.field(), x, u, 0.0, t, step)
    on_sphere = sphere_integrate(extend(sys), embed_h(x), u, 0.0, t, step)
    return sphere_distance(embed_h(planar), on_sphere)


@dataclass(frozen=True)
class LinearSphereSystem:
    """Bilinear system ``x' = A(u) x`` projected onto the unit sphere of its own space.

    Used for the homogeneous part on ``S^{n-1}``, whose chain control sets
    sit on the equator of ``S^n``.
    """

    matrices: np.ndarray  # (m+1, n, n)
    omega: object

    @property
    def n_ext(self) -> int:
        return self.matrices.shape[1]

    def matrix(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        return self.matrices[0] + np.tensordot(u, self.matrices[1:], axes=1)


def homogeneous_sphere_system(sys: AffineSystem) -> LinearSphereSystem:
    mats = np.array(sys.matrices, dtype=np.float64)
    mats.setflags(write=False)
    return LinearSphereSystem(mats, sys.omega)
