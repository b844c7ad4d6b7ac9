"""Prism geometry: sector rotations and element/sensor positions.

Positions are in half-wavelength units. Sector indices in the public
functions are 1-based (``l = 1..L``); array axes are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import DegeneratePositionError, DomainError

TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Map angles to [0, 2*pi)."""
    # np.mod can return exactly 2*pi for tiny negative inputs
    out = np.mod(theta, TWO_PI)
    out = np.where(out >= TWO_PI, 0.0, out)
    return out if out.ndim else float(out)


def wrap_diff(delta):
    """Map angular differences to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(delta, dtype=float), TWO_PI)


def sector_rotation_angle(l: int, L: int) -> float:
    if L < 2:
        raise DomainError(f"need L >= 2, got {L}")
    if not 1 <= l <= L:
        raise DomainError(f"sector index {l} outside 1..{L}")
    return wrap_angle(np.pi / 2 + (2 * l - 1) * np.pi / L)


def sector_angles(L: int) -> np.ndarray:
    return np.array([sector_rotation_angle(l, L) for l in range(1, L + 1)])


def local_axis_positions(M: int) -> np.ndarray:
    """Symmetric ULA coordinates along the sector's y axis."""
    if M < 1:
        raise DomainError(f"element count must be >= 1, got {M}")
    return np.arange(M) - (M - 1) / 2.0


def center_distance(M: int, L: int) -> float:
    """Distance from the prism origin to each sector center.

    For L = 2 the offset collapses to zero (tan(pi/2) is infinite).
    """
    if L == 2:
        return 0.0
    return M / (2.0 * np.tan(np.pi / L))


def rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SectorGeometry:
    """Immutable sector layout.

    ``rot[l]`` maps local coordinates to global ones and ``rot_local[l]``
    is its inverse, so ``rot_local[l] @ u(theta) = [cos(theta - phi_l),
    sin(theta - phi_l)]``.
    """

    L: int
    phi: np.ndarray          # (L,)
    rot: np.ndarray          # (L, 2, 2)
    rot_local: np.ndarray    # (L, 2, 2)
    centers: np.ndarray      # (L, 2)
    pos_is: np.ndarray       # (L, 2, M_I)
    pos_sensor: np.ndarray   # (L, 2, M_S)

    @property
    def offset(self) -> float:
        return float(np.linalg.norm(self.centers[0]))


def _global_positions(M_elem: int, offset: float, rot_local: np.ndarray) -> np.ndarray:
    local = np.vstack([np.zeros(M_elem), local_axis_positions(M_elem)])
    origin_local = np.array([-offset, 0.0])
    return rot_local.T @ (local - origin_local[:, None])


def build_geometry(cfg: SystemConfig) -> SectorGeometry:
    L = cfg.L
    phi = sector_angles(L)
    rot = np.stack([rotation_matrix(p) for p in phi])
    rot_local = np.transpose(rot, (0, 2, 1))
    offset = center_distance(cfg.M, L)
    centers = offset * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    pos_is = np.stack([_global_positions(cfg.M_I, offset, rot_local[i]) for i in range(L)])
    pos_sensor = np.stack([_global_positions(cfg.M_S, offset, rot_local[i]) for i in range(L)])
    for arr in (phi, rot, rot_local, centers, pos_is, pos_sensor):
        arr.setflags(write=False)
    return SectorGeometry(L, phi, rot, rot_local, centers, pos_is, pos_sensor)


def direction(theta):
    """Unit vector(s) u(theta); output shape ``theta.shape + (2,)``."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def local_target_angle(theta, l: int, geom: SectorGeometry):
    """Far-field local angle theta - phi_l, wrapped to (-pi, pi]."""
    if not 1 <= l <= geom.L:
        raise DomainError(f"sector index {l} outside 1..{geom.L}")
    return wrap_diff(np.asarray(theta, dtype=float) - geom.phi[l - 1])


def local_target_angle_exact(theta: float, rho_hw: float, l: int, geom: SectorGeometry) -> float:
    """Signed local angle of the target seen from the sector center.

    ``rho_hw`` is the target range in half-wavelength units.
    """
    if not 1 <= l <= geom.L:
        raise DomainError(f"sector index {l} outside 1..{geom.L}")
    rel = rho_hw * direction(theta) - geom.centers[l - 1]
    local = geom.rot_local[l - 1] @ rel
    if np.linalg.norm(local) == 0.0:
        raise DegeneratePositionError("target sits on the sector center")
    return float(np.arctan2(local[1], local[0]))


def sector_edges(L: int) -> np.ndarray:
    """Angles where some sector's half-space boundary lies, in [0, 2*pi)."""
    phi = sector_angles(L)
    return np.sort(wrap_angle(np.concatenate([phi + np.pi / 2, phi - np.pi / 2])))


def edge_distance(theta, L: int):
    """Angular distance from ``theta`` to the nearest sector edge."""
    theta = np.asarray(theta, dtype=float)
    d = np.abs(wrap_diff(theta[..., None] - sector_edges(L)))
    return d.min(axis=-1)


def interior_mask(theta, L: int, margin: float):
    """True where ``theta`` is at least ``margin`` away from every sector edge."""
    return edge_distance(theta, L) >= margin
