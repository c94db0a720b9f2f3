"""Worked example systems with analytic oracles and recommended engine settings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError
from .systems import AffineSystem, ControlRange, dump_system

EXAMPLE2_RHO = 1.1
EXAMPLE2_D = 0.5


@dataclass(frozen=True)
class Scenario:
    name: str
    system: AffineSystem
    window: tuple[tuple[float, float], ...]
    recommended: dict
    oracle: dict = field(default_factory=dict)
    tolerance: float = 1e-8
    equilibrium: Callable[[np.ndarray], np.ndarray] | None = None
    parameters: dict = field(default_factory=dict)

    @property
    def window_bounds(self) -> np.ndarray:
        return np.array(self.window, dtype=np.float64)

    def equilibria(self, controls) -> np.ndarray:
        """Oracle equilibria for each constant control (rows)."""
        if self.equilibrium is None:
            raise ConfigError(f"scenario {self.name} has no equilibrium oracle")
        U = np.atleast_2d(np.asarray(controls, dtype=np.float64))
        return np.array([self.equilibrium(u) for u in U])

    def sidecar(self) -> dict:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "window": [list(w) for w in self.window],
            "recommended": self.recommended,
            "oracle": self.oracle,
        }

    def export(self, directory) -> tuple[Path, Path]:
        """Write ``<name>.system.json`` and ``<name>.params.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        sys_path = d / f"{self.name}.system.json"
        par_path = d / f"{self.name}.params.json"
        dump_system(self.system, sys_path)
        par_path.write_text(json.dumps(self.sidecar(), indent=2) + "\n", encoding="utf-8")
        return sys_path, par_path


def shear_flow_scenario() -> Scenario:
    """``x' = y, y' = 0``: equilibria on the x-axis, plane chain transitive at coarse jumps."""
    sys = AffineSystem(np.array([[[0.0, 1.0], [0.0, 0.0]]]), np.zeros((1, 2)), ControlRange.empty())
    return Scenario(
        "shear_flow",
        sys,
        ((-3.0, 3.0), (-3.0, 3.0)),
        recommended={
            "hemisphere": {"depth": 7, "T": 1.0, "eps": 0.2, "sign": 1, "closed": True},
            "strong_ladder": {
                "domain": "hemisphere", "depth": 7, "T": 1.0,
                "delta_ladder": [0.5, 0.1, 0.02], "weight": "equator_height",
            },
            "step": 0.01,
        },
        oracle={
            "equilibria": "x-axis {y = 0}",
            "strong_chain_recurrent_set": "x-axis {y = 0}",
            "flow": "phi(t, (x, y)) = (x + t y, y)",
        },
        equilibrium=lambda u: np.array([0.0, 0.0]),
    )


def shear_flow(t: float, x) -> np.ndarray:
    """Closed-form shear flow."""
    x = np.asarray(x, dtype=np.float64)
    return np.array([x[0] + t * x[1], x[1]])


def linear_3d_scenario() -> Scenario:
    """``x' = y, y' = 0, z' = z + u`` with ``u`` in ``[-1, 1]``."""
    A0 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    mats = np.stack([A0, np.zeros((3, 3))])
    offs = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    sys = AffineSystem(mats, offs, ControlRange([-1.0], [1.0]))
    return Scenario(
        "linear_3d",
        sys,
        ((-8.0, 8.0), (-4.0, 4.0), (-3.0, 3.0)),
        recommended={
            "strong_ladder": {
                "domain": "euclidean", "depth": 6, "T": 1.0,
                "delta_ladder": [0.5, 0.2, 0.1], "weight": "inverse_norm",
                "samples_per_box": 1,
            },
            "coarse": {"domain": "euclidean", "depth": 6, "T": 1.0, "eps": 1.0, "samples_per_box": 1},
            "monodromy": {"u": [0.0], "tau": 1.0},
            "step": 0.01,
        },
        oracle={
            "strong_chain_control_set": "R x {0} x [-1, 1]",
            "chain_control_set": "R^2 x [-1, 1]",
            "control_set": "{(0, 0)} x (-1, 1)",
            "monodromy_u0_tau1": "eigenvalues {1, 1, e}",
        },
        equilibrium=lambda u: np.array([0.0, 0.0, -float(np.asarray(u).reshape(-1)[0])]),
    )


def example2_scenario(rho: float = EXAMPLE2_RHO, d: float = EXAMPLE2_D) -> Scenario:
    """Planar system with two unbounded equilibrium continua meeting at infinity.

    ``x' = y``, ``y' = -(1 + u) x - 3 y + u + d`` with ``u`` in ``[-rho, rho]``,
    ``rho`` in ``(1, 5/4)`` and ``d < 1``.
    """
    rho = float(rho)
    d = float(d)
    if not (1.0 < rho < 1.25):
        raise ConfigError(f"rho must lie in the open interval (1, 5/4), got {rho}")
    if not d < 1.0:
        raise ConfigError(f"d must be below 1, got {d}")
    mats = np.array([
        [[0.0, 1.0], [-1.0, -3.0]],
        [[0.0, 0.0], [-1.0, 0.0]],
    ])
    offs = np.array([[0.0, d], [0.0, 1.0]])
    sys = AffineSystem(mats, offs, ControlRange([-rho], [rho]))
    c1_end = (d - rho) / (1.0 - rho)
    c2_end = (d + rho) / (1.0 + rho)
    return Scenario(
        "example2",
        sys,
        ((-4.0, 8.0), (-4.0, 4.0)),
        recommended={
            "euclidean": {"depth": 8, "T": 1.0, "eps": 0.05},
            "projective": {"depth": 7, "T": 0.5, "eps": 0.05},
            "sphere": {"depth": 7, "T": 0.5, "eps": 0.05},
            "conjugacy": {"samples": 100, "t_max": 5.0, "step": 1e-3},
            "step": 0.01,
        },
        oracle={
            "equilibrium": "((d + u) / (1 + u), 0) for u != -1",
            "eigenvalues": "-3/2 +- sqrt(5/4 - u)",
            "C1": f"u in [-rho, -1): x in [{c1_end}, inf)",
            "C2": f"u in (-1, rho]: x in (-inf, {c2_end}]",
            "planar_chain_sets": "two, disjoint",
            "projective_central_sets": "one",
            "equator_contact": "P(1, 0, 0)",
        },
        equilibrium=lambda u: example2_equilibrium(u, d),
        parameters={"rho": rho, "d": d},
    )


def example2_equilibrium(u, d: float = EXAMPLE2_D) -> np.ndarray:
    u = float(np.asarray(u, dtype=np.float64).reshape(-1)[0])
    if u == -1.0:
        raise ConfigError("no equilibrium for u = -1")
    return np.array([(d + u) / (1.0 + u), 0.0])


def example2_eigenvalues(u) -> tuple[complex, complex]:
    """``-3/2 -+ sqrt(5/4 - u)``, smaller real part first."""
    u = float(np.asarray(u, dtype=np.float64).reshape(-1)[0])
    disc = 1.25 - u
    root = math.sqrt(disc) if disc >= 0 else 1j * math.sqrt(-disc)
    return (-1.5 - root, -1.5 + root)


def scalar_hyperbolic_scenario() -> Scenario:
    """``x' = -x + u`` with ``u`` in ``[-1, 1]``: unique compact chain control set ``[-1, 1]``."""
    sys = AffineSystem(np.array([[[-1.0]], [[0.0]]]), np.array([[0.0], [1.0]]), ControlRange([-1.0], [1.0]))
    return Scenario(
        "scalar_hyperbolic",
        sys,
        ((-3.0, 3.0),),
        recommended={
            "euclidean": {"depth": 8, "T": 3.0, "eps": 0.001, "controls": 9, "samples_per_box": 1},
            "sphere": {"depth": 8, "T": 3.0, "eps": 0.001, "controls": 9, "samples_per_box": 1},
            "step": 0.01,
        },
        oracle={
            "chain_control_set": "[-1, 1]",
            "central_sphere_set_min_height": "1/sqrt(2)",
        },
        equilibrium=lambda u: np.array([float(np.asarray(u).reshape(-1)[0])]),
    )


SCENARIOS = {
    "shear_flow": shear_flow_scenario,
    "linear_3d": linear_3d_scenario,
    "example2": example2_scenario,
    "scalar_hyperbolic": scalar_hyperbolic_scenario,
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(sorted(SCENARIOS))}") from None
