import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xiga.errors import ConfigurationError
from xiga.geometry import (
    ON_INTERFACE,
    Circle,
    LevelSetField,
    Material,
    MaterialTable,
    PhaseMap,
    Plane,
    RotatedBox,
    eval_levelset,
    phase_index,
    phase_indices,
    snap_values,
)
from xiga.splines import TensorBSplineBasis


def test_constant_coefficients_give_constant_field():
    b = TensorBSplineBasis.uniform(2, ((0, 0), (2, 1)), (4, 2))
    f = LevelSetField(b, np.full(b.n_basis, 0.7))
    rng = np.random.default_rng(0)
    pts = rng.uniform((0, 0), (2, 1), (50, 2))
    np.testing.assert_allclose(f(pts), 0.7, atol=1e-14)


def test_linear_field_reproduces_plane():
    b = TensorBSplineBasis.uniform(1, ((0, 0), (2, 1)), (4, 3))
    plane = lambda p: 0.3 * p[:, 0] - 1.2 * p[:, 1] + 0.1
    f = LevelSetField.interpolate_nodes(b, plane)
    rng = np.random.default_rng(1)
    pts = rng.uniform((0, 0), (2, 1), (50, 2))
    np.testing.assert_allclose(f(pts), plane(pts), atol=1e-13)


def test_linear_field_interpolates_nodes():
    b = TensorBSplineBasis.uniform(1, ((0, 0), (1, 1)), (2, 2))
    coef = np.arange(9.0)
    f = LevelSetField(b, coef)
    assert eval_levelset(f, (0.5, 0.5)) == pytest.approx(4.0)
    assert eval_levelset(f, (1.0, 1.0)) == pytest.approx(8.0)


def test_coefficient_count_checked():
    b = TensorBSplineBasis.uniform(1, ((0, 0), (1, 1)), (2, 2))
    with pytest.raises(ValueError):
        LevelSetField(b, np.zeros(8))


def test_analytic_shapes():
    assert eval_levelset(Plane((2.0, 0.0), (1.0, 0.0)), (3.0, 5.0)) == pytest.approx(2.0)
    assert eval_levelset(Circle((0, 0), 1.0), (0, 0)) == pytest.approx(-1.0)
    box = RotatedBox((0, 0), (1.0, 0.5), np.pi / 2)
    assert eval_levelset(box, (0.0, 0.9)) < 0 < eval_levelset(box, (0.9, 0.0))


@pytest.mark.parametrize("values,P", [((-1, -1), 0), ((1, -1), 1), ((-1, 1), 2), ((1, 1), 3)])
def test_phase_index(values, P):
    assert phase_index(values, 0.0) == P


def test_phase_index_on_interface():
    assert phase_index((1e-10, -1.0), 0.0, eps=1e-8) == ON_INTERFACE


def test_snapping_moves_values_off_iso():
    v = snap_values([0.0, 1e-9, -1e-9, 0.5], 0.0, 1e-8)
    np.testing.assert_allclose(v, [1e-8, 1e-8, 1e-8, 0.5])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=6), st.floats(-0.5, 0.5))
def test_vectorised_phase_index_matches_scalar(vals, iso):
    v = snap_values(np.array(vals), iso, 1e-9)
    assert phase_indices(v[:, None], iso)[0] == phase_index(v, iso)


def test_phase_map_lookup():
    pm = PhaseMap.from_dict(2, {0: 1, 1: 1, 2: 2, 3: 3})
    assert pm.material_of(1) == 1
    pm0 = PhaseMap(2, (1, 1, 0, 3))
    assert pm0.material_of(2) == 0
    with pytest.raises(ConfigurationError):
        pm.material_of(4)


def test_phase_map_validation():
    with pytest.raises(ConfigurationError):
        PhaseMap(2, (1, 2, 3))
    with pytest.raises(ConfigurationError, match="phase 2"):
        PhaseMap.from_dict(2, {0: 1, 1: 1, 3: 1})
    table = MaterialTable({1: Material(E=10.0)})
    with pytest.raises(ConfigurationError, match="phase 1"):
        PhaseMap(1, (1, 2)).validate(table)
    pm = PhaseMap.from_function(2, lambda bits: 1 + bits[0])
    assert pm.table == (1, 2, 1, 2)


def test_material_validation():
    with pytest.raises(ConfigurationError):
        Material(E=-1.0)
    with pytest.raises(ConfigurationError):
        Material(nu=0.5)
    with pytest.raises(ConfigurationError):
        MaterialTable({0: Material()})
    with pytest.raises(ConfigurationError):
        MaterialTable({1: Material()})[2]
