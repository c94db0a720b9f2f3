"""Constant and state-dependent jump radii."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

CONSTANT = "constant"
WEIGHTED = "weighted"
WEIGHTS = ("unit", "equator_height", "inverse_norm")


def weight_values(name: str, points: np.ndarray, spherical: bool) -> np.ndarray:
    """Evaluate a named weight at window points or ambient sphere points.

    On windows ``equator_height`` is the height of ``h(x)``, i.e.
    ``1/||(x, 1)||``.  On spheres ``inverse_norm`` is read through the chart,
    ``|s_{n+1}| / (|s_{n+1}| + ||(s_1..s_n)||)``, which equals
    ``1/(1 + ||x||)`` at ``s = h(x)`` and vanishes on the equator.
    """
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if name == "unit":
        return np.ones(p.shape[0])
    if name == "equator_height":
        if spherical:
            return np.abs(p[:, -1])
        return 1.0 / np.sqrt(1.0 + np.sum(p * p, axis=1))
    if name == "inverse_norm":
        if spherical:
            z = np.abs(p[:, -1])
            return z / (z + np.linalg.norm(p[:, :-1], axis=1))
        return 1.0 / (1.0 + np.linalg.norm(p, axis=1))
    raise ConfigError(f"unknown weight {name!r}; choose from {', '.join(WEIGHTS)}")


@dataclass(frozen=True)
class JumpSpec:
    kind: str
    size: float
    weight: str = "unit"
    inflation: float = 1.0  # multiple of the source-box diameter added to the jump

    def __post_init__(self):
        if self.kind not in (CONSTANT, WEIGHTED):
            raise ConfigError(f"unknown jump kind {self.kind!r}")
        if not (np.isfinite(self.size) and self.size > 0):
            raise ConfigError("jump size must be a positive real")
        if self.weight not in WEIGHTS:
            raise ConfigError(f"unknown weight {self.weight!r}; choose from {', '.join(WEIGHTS)}")
        if not (np.isfinite(self.inflation) and self.inflation >= 0):
            raise ConfigError("inflation must be a nonnegative real")
        if self.kind == CONSTANT and self.weight != "unit":
            raise ConfigError("constant jumps take no weight")

    @classmethod
    def constant(cls, eps: float, inflation: float = 1.0) -> "JumpSpec":
        return cls(CONSTANT, float(eps), inflation=float(inflation))

    @classmethod
    def weighted(cls, delta: float, weight: str, inflation: float = 1.0) -> "JumpSpec":
        return cls(WEIGHTED, float(delta), weight, float(inflation))

    def evaluate(self, points, spherical: bool = False) -> np.ndarray:
        """Jump length at each point: ``eps`` or ``delta * w(x)``."""
        return self.size * weight_values(self.weight, points, spherical)

    def radii(self, points: np.ndarray, diameter: np.ndarray, spherical: bool) -> np.ndarray:
        """Edge-acceptance radius per arrival.

        ``diameter`` is the source-box diameter, scaled by ``self.inflation``.
        Constant jumps accept boxes within ``eps + inflation``.  Weighted jumps
        scale the inflated radius, ``w(p) * (delta + inflation)``, so the
        acceptance region shrinks with the weight instead of bottoming out at
        one box diameter.  Non-finite arrivals get radius 0.
        """
        p = np.asarray(points, dtype=np.float64)
        fin = np.all(np.isfinite(p), axis=1)
        q = np.where(fin[:, None], p, 1.0)
        w = weight_values(self.weight, q, spherical)
        r = w * (self.size + self.inflation * diameter)
        return np.where(fin, r, 0.0)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "size": self.size}
        if self.kind == WEIGHTED:
            out["weight"] = self.weight
        out["inflation"] = self.inflation
        return out
