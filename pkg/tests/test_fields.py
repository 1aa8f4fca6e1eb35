import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nvres.errors import OutOfRangeError
from nvres.fields import (BeamModel, FieldGrid, ParametricB1, b1_at, beam_waist, laser_intensity,
                          load_field_grid, rayleigh_range, save_field_grid, spot_radius,
                          synthetic_field_grid)


def test_beam_waist_and_rayleigh_range():
    beam = BeamModel()
    # exact rational arithmetic with sympy
    assert beam_waist(beam) == pytest.approx(2.30074385733644, rel=1e-12)
    assert rayleigh_range(beam) == pytest.approx(31.9803396169765, rel=1e-12)
    assert spot_radius(beam, rayleigh_range(beam) * 1e-3) == pytest.approx(np.sqrt(2) * beam_waist(beam))


def test_beam_waist_scales_with_m_squared():
    assert beam_waist(BeamModel(ellipticity_m=2.0)) == pytest.approx(4 * beam_waist(BeamModel()))


def test_beam_rejects_bad_parameters():
    with pytest.raises(ValueError):
        BeamModel(d_collimated=0)
    with pytest.raises(ValueError):
        BeamModel(ellipticity_m=0.5)


@pytest.mark.parametrize("z", [0.0, 0.02, 0.1])
def test_intensity_integral_is_the_same_in_every_plane(z):
    beam = BeamModel()
    w = spot_radius(beam, z) * 1e-3  # mm
    val, _ = integrate.dblquad(lambda y, x: laser_intensity(beam, x, y, z),
                               -6 * w, 6 * w, -6 * w, 6 * w, epsabs=1e-14, epsrel=1e-10)
    w0 = beam_waist(beam) * 1e-3
    assert val == pytest.approx(np.pi * w0**2 / 2, rel=1e-8)


def test_intensity_peaks_at_displaced_centre():
    beam = BeamModel().displaced(mu_x=0.3)
    assert laser_intensity(beam, 0.3, 0.0, 0.0) == pytest.approx(1.0)
    assert laser_intensity(beam, 0.0, 0.0, 0.0) < 1e-10


def test_parametric_profile_values():
    src = ParametricB1(10.0)
    assert src.profile(0.0) == 1.0
    assert src.profile(0.5) == pytest.approx(0.625, abs=1e-12)
    assert src.profile(0.2) == pytest.approx(0.932097909954202, abs=1e-12)
    assert src.profile(5.0) == 0.0
    assert np.linalg.norm(src.direction) == pytest.approx(1.0)
    assert np.degrees(np.arccos(src.direction[2])) == pytest.approx(3.723)


def test_calibrated_amplitude():
    assert ParametricB1.calibrated().b1_center == pytest.approx(13.078145549585157, rel=1e-12)


def test_b1_scales_with_sqrt_power():
    src = ParametricB1(10.0)
    p = np.array([0.1, 0.0, 0.0])
    assert np.allclose(b1_at(src, p, 4.0), 2 * b1_at(src, p, 1.0))
    assert b1_at(src, np.zeros((5, 3))).shape == (5, 3)
    with pytest.raises(ValueError):
        b1_at(src, p, -1.0)


def _linear_grid():
    a = np.array([[1.0, -2.0, 0.5], [0.3, 0.7, -1.0], [2.0, 0.0, 4.0]])
    c = np.array([0.1, 0.2, 0.3])
    axes = [np.linspace(-1, 1, 5), np.linspace(-1, 1, 4), np.linspace(-0.1, 0.1, 3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vec = pts @ a.T + c
    grid = FieldGrid((-1, -1, -0.1), (0.5, 2 / 3, 0.1), vec)
    return grid, a, c


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-0.1, 0.1))
def test_trilinear_reproduces_linear_fields(x, y, z):
    grid, a, c = _linear_grid()
    p = np.array([x, y, z])
    assert np.allclose(grid(p)[0], a @ p + c, atol=1e-12)


def test_grid_out_of_range():
    grid, _, _ = _linear_grid()
    with pytest.raises(OutOfRangeError):
        grid(np.array([1.5, 0, 0]))
    with pytest.raises(ValueError):
        FieldGrid((0, 0, 0), (1, 1, 1), np.zeros((1, 2, 2, 3)))


def test_grid_round_trip(tmp_path):
    grid, _, _ = _linear_grid()
    save_field_grid(grid, tmp_path / "g.json")
    back = load_field_grid(tmp_path / "g.json")
    assert back.dims == grid.dims
    assert np.allclose(back.vectors, grid.vectors, rtol=1e-9)
    assert np.allclose(back.bounds, grid.bounds)


def test_synthetic_grid_matches_parametric_source():
    src = ParametricB1.calibrated()
    grid = synthetic_field_grid(src)
    assert np.allclose(grid(np.array([0.0, 0.0, 0.0]))[0], src(np.zeros(3))[0])
    # off-node: linear interpolation of a smooth profile, close but not exact
    p = np.array([0.33, -0.21, 0.01])
    assert np.allclose(grid(p)[0], src(p)[0], rtol=2e-3)


def test_shipped_grid_fixture_loads():
    from importlib.resources import files
    grid = load_field_grid(files("nvres") / "data" / "b1_grid_reconstructed.json")
    assert grid.dims == (41, 41, 3)
    assert "reconstructed" in grid.label
