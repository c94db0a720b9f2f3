"""Control-affine systems, their bilinear lift, and trajectory tools.

A control-affine system on R^n reads

    x' = A_0 x + a_0 + sum_i u_i (A_i x + a_i),   u(t) in Omega,

with ``Omega`` a compact box around the origin of R^m.  Controls are
piecewise constant (:class:`ControlSignal`) and trajectories are computed by
fixed-step classical Runge-Kutta with the step grid aligned to the control
switching times.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConstructionError, DivergenceError, InputError

DEFAULT_STEP = 1e-3
TOL_EIG = 1e-6
TOL_PER = 1e-6

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ControlRange:
    """Box ``prod [lower_i, upper_i]`` containing 0."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower)).reshape(-1)
        hi = _frozen(np.atleast_1d(self.upper)).reshape(-1)
        if lo.shape != hi.shape:
            raise ConstructionError("lower and upper bounds differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConstructionError("control bounds must be finite")
        if np.any(lo >= hi):
            raise ConstructionError("control range needs lower < upper componentwise")
        if np.any(lo > 0) or np.any(hi < 0):
            raise ConstructionError("control range must contain 0")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def empty(cls) -> "ControlRange":
        """Range of a control-free system (m = 0)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "lower", _frozen(np.zeros(0)))
        object.__setattr__(obj, "upper", _frozen(np.zeros(0)))
        return obj

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        if u.shape != (self.dim,):
            return False
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def vertices(self) -> np.ndarray:
        """Corners of the box in lexicographic order (lower before upper)."""
        if self.dim == 0:
            return np.zeros((1, 0))
        corners = itertools.product(*[(l, h) for l, h in zip(self.lower, self.upper)])
        return np.array(list(corners), dtype=np.float64)

    def default_samples(self) -> np.ndarray:
        """All vertices plus the origin, sorted lexicographically."""
        pts = self.vertices()
        if self.dim:
            pts = np.vstack([pts, np.zeros((1, self.dim))])
        return _lexsorted(np.unique(pts, axis=0))

    def grid_samples(self, count: int) -> np.ndarray:
        """``count`` evenly spaced values per axis (endpoints included), plus 0."""
        if count < 2:
            raise InputError("grid sampling needs at least two values per axis")
        if self.dim == 0:
            return np.zeros((1, 0))
        axes = [np.linspace(l, h, count) for l, h in zip(self.lower, self.upper)]
        pts = np.array(list(itertools.product(*axes)), dtype=np.float64)
        pts = np.vstack([pts, np.zeros((1, self.dim))])
        return _lexsorted(np.unique(pts, axis=0))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def _lexsorted(pts: np.ndarray) -> np.ndarray:
    if pts.shape[1] == 0:
        return pts
    order = np.lexsort(pts.T[::-1])
    return pts[order]


@dataclass(frozen=True)
class AffineSystem:
    """``x' = A_0 x + a_0 + sum_i u_i (A_i x + a_i)`` with ``u`` in ``omega``."""

    matrices: np.ndarray  # (m+1, n, n)
    offsets: np.ndarray  # (m+1, n)
    omega: ControlRange

    def __post_init__(self):
        try:
            mats = _frozen(self.matrices)
            offs = _frozen(self.offsets)
        except ValueError as exc:
            raise ConstructionError(f"ragged system data: {exc}") from None
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ConstructionError(f"matrices must be square and stacked, got {mats.shape}")
        if offs.ndim != 2 or offs.shape != mats.shape[:2]:
            raise ConstructionError(
                f"offsets shape {offs.shape} does not match matrices {mats.shape}"
            )
        if mats.shape[0] != self.omega.dim + 1:
            raise ConstructionError(
                f"{mats.shape[0]} matrices given for a {self.omega.dim}-dimensional control"
            )
        if not (np.all(np.isfinite(mats)) and np.all(np.isfinite(offs))):
            raise ConstructionError("system data must be finite")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "offsets", offs)

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def m(self) -> int:
        return self.omega.dim

    def coefficients(self, u) -> tuple[np.ndarray, np.ndarray]:
        """Matrix and offset of the frozen-control field ``A(u) x + a(u)``."""
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        A = self.matrices[0] + np.tensordot(u, self.matrices[1:], axes=1)
        a = self.offsets[0] + u @ self.offsets[1:]
        return A, a

    def field(self) -> "AffineField":
        """Callable ``f(x, u)`` evaluating the right-hand side; ``x`` may be batched."""
        return AffineField(self)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "matrices": self.matrices.tolist(),
            "offsets": self.offsets.tolist(),
            "omega": self.omega.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AffineSystem":
        try:
            n = int(doc["n"])
            omega_doc = doc.get("omega") or {"lower": [], "upper": []}
            lower, upper = omega_doc["lower"], omega_doc["upper"]
            omega = ControlRange(lower, upper) if len(lower) else ControlRange.empty()
            mats = np.array(doc["matrices"], dtype=np.float64)
            offs = np.array(doc["offsets"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConstructionError(f"malformed system document: {exc}") from None
        if mats.ndim == 3 and mats.shape[1:] != (n, n):
            raise ConstructionError(f"declared n={n} but matrices are {mats.shape[1:]}")
        return cls(mats, offs, omega)


def load_system(path) -> AffineSystem:
    with open(Path(path), encoding="utf-8") as fh:
        return AffineSystem.from_dict(json.load(fh))


def dump_system(sys: AffineSystem, path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sys.to_dict(), fh, indent=2)
        fh.write("\n")


def _check_control(omega: ControlRange, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape != (omega.dim,):
        raise ConstructionError(f"control has dimension {u.shape[0]}, expected {omega.dim}")
    if not omega.contains(u):
        raise InputError(f"control {u.tolist()} lies outside the control range")
    return u


def affine_field(sys: AffineSystem, x, u) -> np.ndarray:
    """Right-hand side ``A_0 x + a_0 + sum_i u_i (A_i x + a_i)``.

    ``x`` has shape ``(..., n)``.  Raises :class:`InputError` when ``u`` lies
    outside the control range.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (sys.n,):
        raise ConstructionError(f"state has shape {x.shape}, expected (..., {sys.n})")
    u = _check_control(sys.omega, u)
    A, a = sys.coefficients(u)
    return x @ A.T + a


class AffineField:
    """Right-hand side of an :class:`AffineSystem` as a callable ``f(x, u)``.

    Exposes :meth:`frozen` so :func:`integrate` can use the compiled stepper.
    """

    mode = 0

    def __init__(self, sys: AffineSystem):
        self.sys = sys

    def __call__(self, x, u):
        return affine_field(self.sys, x, u)

    def frozen(self, u) -> tuple[np.ndarray, np.ndarray]:
        u = _check_control(self.sys.omega, u)
        return self.sys.coefficients(u)


@dataclass(frozen=True)
class ExtendedBilinearSystem:
    """Homogeneous lift on R^{n+1} with block matrices ``[[A_i, a_i], [0, 0]]``."""

    matrices: np.ndarray  # (m+1, n+1, n+1)
    omega: ControlRange

    def __post_init__(self):
        mats = _frozen(self.matrices)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ConstructionError(f"matrices must be square and stacked, got {mats.shape}")
        if np.any(mats[:, -1, :] != 0.0):
            raise ConstructionError("last row of every lifted matrix must vanish")
        if mats.shape[0] != self.omega.dim + 1:
            raise ConstructionError("number of lifted matrices does not match control dimension")
        object.__setattr__(self, "matrices", mats)

    @property
    def n_ext(self) -> int:
        return self.matrices.shape[1]

    def matrix(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        return self.matrices[0] + np.tensordot(u, self.matrices[1:], axes=1)


def extend(sys: AffineSystem) -> ExtendedBilinearSystem:
    """Lift to the bilinear system on R^{n+1} acting on ``(x, z)``."""
    k, n = sys.m + 1, sys.n
    lifted = np.zeros((k, n + 1, n + 1))
    lifted[:, :n, :n] = sys.matrices
    lifted[:, :n, n] = sys.offsets
    return ExtendedBilinearSystem(lifted, sys.omega)


def homogeneous_part(sys: AffineSystem) -> AffineSystem:
    """The bilinear system obtained by dropping every offset."""
    return AffineSystem(sys.matrices, np.zeros_like(sys.offsets), sys.omega)


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant, right-continuous control.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``; outside
    ``[breakpoints[0], breakpoints[-1])`` the signal equals ``default``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    default: np.ndarray
    omega: Optional[ControlRange] = field(default=None, compare=False)

    def __post_init__(self):
        bps = _frozen(np.atleast_1d(self.breakpoints)).reshape(-1)
        default = _frozen(np.atleast_1d(self.default)).reshape(-1)
        vals = np.array(self.values, dtype=np.float64)
        if vals.size == 0:
            vals = vals.reshape(0, default.shape[0])
        vals = _frozen(vals.reshape(-1, default.shape[0]) if vals.ndim < 2 else vals)
        if bps.size == 1 or (bps.size == 0 and vals.shape[0]):
            raise ConstructionError("need at least two breakpoints for a nonempty schedule")
        if bps.size and vals.shape[0] != bps.size - 1:
            raise ConstructionError("one control value per breakpoint interval is required")
        if vals.shape[1] != default.shape[0]:
            raise ConstructionError("control values and default differ in dimension")
        if np.any(np.diff(bps) <= 0):
            raise ConstructionError("breakpoints must be strictly increasing")
        if self.omega is not None:
            for v in list(vals) + [default]:
                if not self.omega.contains(v):
                    raise InputError(f"control value {v.tolist()} outside the control range")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "default", default)

    @classmethod
    def constant(cls, u, omega: Optional[ControlRange] = None) -> "ControlSignal":
        u = np.atleast_1d(np.asarray(u, dtype=np.float64)).reshape(-1)
        return cls(np.zeros(0), np.zeros((0, u.shape[0])), u, omega)

    @property
    def dim(self) -> int:
        return self.default.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        if self.breakpoints.size == 0:
            return self.default
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        if 0 <= i < self.values.shape[0]:
            return self.values[i]
        return self.default

    def switching_times(self, t0: float, t1: float) -> np.ndarray:
        lo, hi = min(t0, t1), max(t0, t1)
        b = self.breakpoints
        return b[(b > lo) & (b < hi)]

    def shifted(self, s: float) -> "ControlSignal":
        """The control ``u(s + .)``."""
        return ControlSignal(self.breakpoints - s, self.values, self.default, self.omega)


def _rk4_step(f, x, u, h):
    k1 = f(x, u)
    k2 = f(x + 0.5 * h * k1, u)
    k3 = f(x + 0.5 * h * k2, u)
    k4 = f(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    field: Field,
    x0,
    u: ControlSignal,
    t0: float,
    t1: float,
    step: float = DEFAULT_STEP,
    post_step: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """State at ``t1`` of ``x' = field(x, u(t))`` started at ``x0`` at ``t0``.

    Classical RK4.  Every interval between consecutive control switches is
    split into equally sized steps no longer than ``step``, so the control is
    constant within each step.  ``t1 < t0`` integrates backward in time.
    ``post_step`` is applied after every step (used for projections).

    Raises
    ------
    DivergenceError
        If the state becomes non-finite; ``escape_time`` is the last time the
        state was finite.
    """
    if not step > 0:
        raise InputError("step must be positive")
    x = np.array(x0, dtype=np.float64)
    if t1 == t0:
        return x
    direction = 1.0 if t1 > t0 else -1.0
    nodes = [t0, *sorted(u.switching_times(t0, t1), reverse=direction < 0), t1]
    if hasattr(field, "frozen"):
        return _integrate_compiled(field, x, u, nodes, step)
    t = t0
    with np.errstate(over="ignore", invalid="ignore"):
        for a, b in zip(nodes[:-1], nodes[1:]):
            n_steps = max(1, math.ceil(abs(b - a) / step - 1e-9))
            h = (b - a) / n_steps
            uval = u(0.5 * (a + b))
            for k in range(n_steps):
                x_new = _rk4_step(field, x, uval, h)
                if post_step is not None:
                    x_new = post_step(x_new)
                if not np.all(np.isfinite(x_new)):
                    raise DivergenceError(f"trajectory diverged after t={t:.6g}", escape_time=t)
                x = x_new
                t = a + (k + 1) * h
    return x


def _integrate_compiled(field, x, u, nodes, step):
    from ._flow import rk4_rows

    row = x.reshape(1, -1)
    for a, b in zip(nodes[:-1], nodes[1:]):
        n_steps = max(1, math.ceil(abs(b - a) / step - 1e-9))
        h = (b - a) / n_steps
        M, off = field.frozen(u(0.5 * (a + b)))
        row, escaped = rk4_rows(M, off, field.mode, row, h, n_steps)
        if escaped[0] >= 0:
            t = a + escaped[0] * h
            raise DivergenceError(f"trajectory diverged after t={t:.6g}", escape_time=t)
    return row.reshape(x.shape)


@dataclass(frozen=True)
class MonodromyReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    has_unit_eigenvalue: bool
    unit_eigvec: Optional[np.ndarray]


def monodromy(
    sys: AffineSystem,
    u: ControlSignal,
    tau: float,
    step: float = DEFAULT_STEP,
    tol_eig: float = TOL_EIG,
) -> MonodromyReport:
    """Fundamental solution ``X_u(tau, 0)`` of the homogeneous part and its spectrum."""
    if not tau > 0:
        raise InputError("tau must be positive")
    hom = homogeneous_part(sys).field()
    cols = [integrate(hom, e, u, 0.0, tau, step) for e in np.eye(sys.n)]
    X = np.column_stack(cols)
    eig, vecs = np.linalg.eig(X)
    gap = np.abs(eig - 1.0)
    has_unit = bool(np.any(gap < tol_eig))
    vec = None
    if has_unit:
        v = np.real(vecs[:, int(np.argmin(gap))])
        v = v / np.linalg.norm(v)
        pivot = np.flatnonzero(np.abs(v) > 1e-12)[0]
        vec = v if v[pivot] > 0 else -v
    return MonodromyReport(X, eig, has_unit, vec)


@dataclass(frozen=True)
class UnboundednessReport:
    is_periodic_orbit: bool
    unbounded_flag: bool
    direction: Optional[np.ndarray]


def check_unbounded_strong_set(
    sys: AffineSystem,
    u: ControlSignal,
    tau: float,
    x,
    step: float = DEFAULT_STEP,
    tol_per: float = TOL_PER,
    tol_eig: float = TOL_EIG,
) -> UnboundednessReport:
    """Sufficient test for an unbounded strong chain control set through ``x``.

    ``x`` must return to itself after ``tau`` under ``u``; the flag is raised
    when in addition 1 is an eigenvalue of the monodromy matrix.  The
    returned direction spans (part of) the affine line of periodic points.
    """
    x = np.asarray(x, dtype=np.float64)
    end = integrate(sys.field(), x, u, 0.0, tau, step)
    periodic = bool(np.linalg.norm(end - x) < tol_per)
    if not periodic:
        return UnboundednessReport(False, False, None)
    rep = monodromy(sys, u, tau, step, tol_eig)
    if not rep.has_unit_eigenvalue:
        return UnboundednessReport(True, False, None)
    return UnboundednessReport(True, True, rep.unit_eigvec)


def basis_function(j: int, t: np.ndarray) -> np.ndarray:
    """Scalar member ``j >= 1`` of the test family for the control metric.

    ``1[|t| <= 2**ceil(j/2)] * t**k / k!`` with ``k = (j - 1) mod 4``.
    """
    t = np.asarray(t, dtype=np.float64)
    k = (j - 1) % 4
    half = 2.0 ** math.ceil(j / 2)
    return np.where(np.abs(t) <= half, t**k / math.factorial(k), 0.0)


def _basis_index(i: int, m: int) -> tuple[int, int]:
    # vector family: scalar member j carried by coordinate c
    return (i - 1) // m + 1, (i - 1) % m


def _pieces(u: ControlSignal, v: ControlSignal, a: float, b: float):
    cuts = np.union1d(u.switching_times(a, b), v.switching_times(a, b))
    nodes = np.concatenate([[a], cuts, [b]])
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        mid = 0.5 * (lo + hi)
        yield lo, hi, u(mid) - v(mid)


def control_distance(u: ControlSignal, v: ControlSignal, num_terms: int, horizon: float) -> float:
    """Truncated weak* distance ``sum_i 2^-i |I_i| / (1 + |I_i|)``.

    ``I_i`` integrates ``<u - v, y_i>`` over ``[-horizon, horizon]``.  For
    ``m > 1`` the scalar family is cycled through the coordinates.  The
    integrals are evaluated exactly on each constant piece.
    """
    if num_terms < 1:
        raise InputError("num_terms must be at least 1")
    if u.dim != v.dim:
        raise InputError("controls differ in dimension")
    m = max(u.dim, 1)
    if u.dim == 0:
        return 0.0
    total = 0.0
    for i in range(1, num_terms + 1):
        j, c = _basis_index(i, m)
        k = (j - 1) % 4
        half = 2.0 ** math.ceil(j / 2)
        a, b = -min(horizon, half), min(horizon, half)
        integral = 0.0
        for lo, hi, diff in _pieces(u, v, a, b):
            if diff[c] != 0.0:
                integral += diff[c] * (hi ** (k + 1) - lo ** (k + 1)) / math.factorial(k + 1)
        total += 2.0**-i * abs(integral) / (1.0 + abs(integral))
    return total
