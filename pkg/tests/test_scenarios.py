import json
import math

import numpy as np
import pytest

from chaincontrol.errors import ConfigError
from chaincontrol.scenarios import (
    SCENARIOS,
    example2_eigenvalues,
    example2_equilibrium,
    example2_scenario,
    get_scenario,
    linear_3d_scenario,
    scalar_hyperbolic_scenario,
    shear_flow,
    shear_flow_scenario,
)
from chaincontrol.systems import ControlSignal, affine_field, integrate, load_system


@pytest.mark.parametrize("name", ["example2", "scalar_hyperbolic", "linear_3d"])
@pytest.mark.parametrize("u", [-1.0, -0.5, 0.0, 0.7, 1.0])
def test_equilibria_are_fixed_points(name, u):
    if name == "example2" and u == -1.0:
        pytest.skip("no equilibrium at u = -1")
    sc = get_scenario(name)
    x0 = sc.equilibria([u])[0]
    assert np.allclose(affine_field(sc.system, x0, [u]), 0.0, atol=1e-12)
    x = integrate(sc.system.field(), x0, ControlSignal.constant([u]), 0.0, 10.0, 1e-2)
    assert np.max(np.abs(x - x0)) < 1e-8


def test_example2_equilibrium_values():
    assert np.allclose(example2_equilibrium(0.0, 0.5), [0.5, 0.0])
    rho = 1.1
    assert math.isclose(example2_equilibrium(-rho, 0.5)[0], 6.0)
    assert math.isclose(example2_equilibrium(rho, 0.5)[0], 1.6 / 2.1)
    with pytest.raises(ConfigError):
        example2_equilibrium(-1.0)


@pytest.mark.parametrize("u,expected", [(-1.0, (-3.0, 0.0)), (1.0, (-2.0, -1.0))])
def test_example2_eigenvalues(u, expected):
    assert np.allclose(example2_eigenvalues(u), expected)
    A = example2_scenario().system.coefficients([u])[0]
    assert np.allclose(np.sort(np.linalg.eigvals(A).real), expected)


@pytest.mark.parametrize("rho,d", [(1.0, 0.5), (1.25, 0.5), (1.1, 1.0), (0.9, 0.0)])
def test_example2_parameter_range(rho, d):
    with pytest.raises(ConfigError):
        example2_scenario(rho, d)


def test_shear_flow_formula():
    assert np.allclose(shear_flow(2.0, [1.0, 1.0]), [3.0, 1.0])
    sys_ = shear_flow_scenario().system
    x = integrate(sys_.field(), np.array([1.0, 1.0]), ControlSignal.constant([]), 0.0, 2.0)
    assert np.allclose(x, [3.0, 1.0], atol=1e-12)


def test_linear_3d_structure():
    sc = linear_3d_scenario()
    assert sc.system.n == 3 and sc.system.m == 1
    assert np.array_equal(sc.window_bounds, [[-8, 8], [-4, 4], [-3, 3]])


def test_scalar_windows_and_registry():
    assert np.array_equal(scalar_hyperbolic_scenario().window_bounds, [[-3, 3]])
    assert set(SCENARIOS) == {"shear_flow", "linear_3d", "example2", "scalar_hyperbolic"}
    with pytest.raises(ConfigError):
        get_scenario("nope")


def test_shear_origin_is_equilibrium():
    sc = shear_flow_scenario()
    assert np.array_equal(sc.equilibria(np.zeros((1, 0)))[0], [0.0, 0.0])


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_export_roundtrip(tmp_path, name):
    sc = get_scenario(name)
    sys_path, par_path = sc.export(tmp_path)
    back = load_system(sys_path)
    assert np.array_equal(back.matrices, sc.system.matrices)
    assert np.array_equal(back.offsets, sc.system.offsets)
    doc = json.loads(par_path.read_text())
    assert doc["name"] == name and doc["window"] == [list(w) for w in sc.window]
