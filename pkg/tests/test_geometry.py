import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mssense.config import SystemConfig
from mssense.errors import DegeneratePositionError, DomainError
from mssense.geometry import (
    build_geometry,
    center_distance,
    edge_distance,
    local_axis_positions,
    local_target_angle,
    local_target_angle_exact,
    rotation_matrix,
    sector_angles,
    sector_rotation_angle,
    wrap_angle,
    wrap_diff,
)

from conftest import sym


@pytest.mark.parametrize(
    "l, L, expected",
    [(1, 4, 3 * np.pi / 4), (1, 2, np.pi), (3, 3, np.pi / 6), (2, 2, 0.0)],
)
def test_sector_rotation_angle(l, L, expected):
    assert_allclose(sector_rotation_angle(l, L), expected, atol=1e-15)


@pytest.mark.parametrize("l, L", [(0, 4), (5, 4), (1, 1)])
def test_sector_rotation_angle_out_of_range(l, L):
    with pytest.raises(DomainError):
        sector_rotation_angle(l, L)


def test_local_axis_positions():
    assert_allclose(local_axis_positions(2), [-0.5, 0.5])
    assert_allclose(local_axis_positions(4), [-1.5, -0.5, 0.5, 1.5])
    for M in range(1, 12):
        assert abs(local_axis_positions(M).sum()) < 1e-12
    with pytest.raises(DomainError):
        local_axis_positions(0)


def test_center_distance():
    assert center_distance(24, 4) == pytest.approx(12.0)
    assert center_distance(7, 2) == 0.0


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_rotations_are_proper(L):
    geom = build_geometry(sym(L, 6 * L))
    for R, Rl in zip(geom.rot, geom.rot_local):
        assert_allclose(R @ Rl, np.eye(2), atol=1e-15)
        assert_allclose(np.linalg.det(R), 1.0)


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_column_mean_is_center(L):
    cfg = SystemConfig(L=L, M_I=5, M_S=7)
    geom = build_geometry(cfg)
    h = center_distance(cfg.M, L)
    assert_allclose(np.linalg.norm(geom.centers, axis=1), h, atol=1e-12)
    assert_allclose(geom.pos_is.mean(axis=2), geom.centers, atol=1e-12)
    assert_allclose(geom.pos_sensor.mean(axis=2), geom.centers, atol=1e-12)


def test_l2_arrays_on_y_axis():
    geom = build_geometry(sym(2, 24))
    assert_allclose(geom.pos_is[:, 0, :], 0.0, atol=1e-15)
    assert_allclose(geom.pos_sensor[:, 0, :], 0.0, atol=1e-15)


@pytest.mark.parametrize("L", [3, 4, 5, 6])
def test_rotational_symmetry_permutes_sectors(L):
    geom = build_geometry(sym(L, 4 * L))
    R = rotation_matrix(2 * np.pi / L)
    for l in range(L):
        assert_allclose(R @ geom.pos_is[l], geom.pos_is[(l + 1) % L], atol=1e-12)


def test_positions_are_read_only():
    geom = build_geometry(sym(4, 8))
    with pytest.raises(ValueError):
        geom.pos_is[0, 0, 0] = 1.0


def test_local_target_angle_boresight_and_edge():
    geom = build_geometry(sym(4, 24))
    for l in range(1, 5):
        assert abs(local_target_angle(geom.phi[l - 1], l, geom)) < 1e-15
        x = local_target_angle(geom.phi[l - 1] + np.pi / 2, l, geom)
        assert abs(np.cos(x)) < 1e-15


def test_exact_local_angle_agrees_in_far_field():
    cfg = sym(4, 24)
    geom = build_geometry(cfg)
    rho_hw = 519.0 / (cfg.wavelength / 2)
    for theta in np.linspace(0, 2 * np.pi, 37):
        for l in range(1, 5):
            exact = local_target_angle_exact(theta, rho_hw, l, geom)
            assert abs(wrap_diff(exact - local_target_angle(theta, l, geom))) < 1e-2


def test_exact_local_angle_degenerate():
    geom = build_geometry(sym(4, 24))
    rho = np.linalg.norm(geom.centers[0])
    theta = np.arctan2(geom.centers[0, 1], geom.centers[0, 0])
    with pytest.raises(DegeneratePositionError):
        local_target_angle_exact(theta, rho, 1, geom)


def test_edges_of_l4():
    assert_allclose(edge_distance(np.pi / 4, 4), 0.0, atol=1e-15)
    assert_allclose(edge_distance(np.pi / 2, 4), np.pi / 4)


@given(st.floats(-1e3, 1e3))
def test_wrap_ranges(x):
    w = wrap_angle(x)
    assert 0.0 <= w < 2 * np.pi
    d = float(wrap_diff(x))
    assert -np.pi < d <= np.pi
    assert abs(np.sin(d) - np.sin(x)) < 1e-9 and abs(np.cos(w) - np.cos(x)) < 1e-9


def test_wrap_tiny_negative():
    assert wrap_angle(-1e-18) == 0.0
    assert wrap_diff(np.pi) == np.pi


def test_sector_angles_cover_circle():
    for L in range(2, 7):
        phi = np.sort(sector_angles(L))
        assert_allclose(np.diff(phi), 2 * np.pi / L, atol=1e-12)
