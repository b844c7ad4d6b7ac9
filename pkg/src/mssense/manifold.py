"""Steering vectors, pattern-weighted manifolds and the noiseless echo.

Every function accepts a scalar angle or an array of angles; array inputs
add leading axes to the outputs.

The echo is kept factored: ``mu(theta) = c (x) d`` with ``d = F_S a`` the
pattern-weighted receive manifold and ``c = X^T (F_I b)^*`` the codebook
seen through the transmit manifold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .antenna import PatternSpec, illuminated, sector_amplitudes
from .config import SystemConfig
from .errors import DomainError
from .geometry import SectorGeometry, build_geometry, center_distance, direction
from .waveform import Codebook, build_codebook


def _projections(theta, pos):
    """(u . p, u' . p) for every element; shapes theta.shape + pos.shape[::2]."""
    theta = np.asarray(theta, dtype=float)
    u = direction(theta)
    du = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    proj = np.einsum("...k,lkm->...lm", u, pos)
    dproj = np.einsum("...k,lkm->...lm", du, pos)
    return proj, dproj


def _sector(theta, pos, l, sign):
    if not 1 <= l <= pos.shape[0]:
        raise DomainError(f"sector index {l} outside 1..{pos.shape[0]}")
    proj, dproj = _projections(theta, pos[l - 1 : l])
    vec = np.exp(sign * 1j * np.pi * proj[..., 0, :])
    return vec, sign * 1j * np.pi * dproj[..., 0, :] * vec


def steering_rx(theta, geom: SectorGeometry, l: int) -> np.ndarray:
    """Receive steering vector of sector ``l``: exp(j*pi*P_S^T u)."""
    return _sector(theta, geom.pos_sensor, l, +1)[0]


def steering_rx_derivative(theta, geom: SectorGeometry, l: int) -> np.ndarray:
    return _sector(theta, geom.pos_sensor, l, +1)[1]


def steering_tx(theta, geom: SectorGeometry, l: int) -> np.ndarray:
    """Transmit steering vector of sector ``l``: exp(-j*pi*P_I^T u)."""
    return _sector(theta, geom.pos_is, l, -1)[0]


def steering_tx_derivative(theta, geom: SectorGeometry, l: int) -> np.ndarray:
    return _sector(theta, geom.pos_is, l, -1)[1]


@dataclass(frozen=True)
class ResponseBundle:
    """Manifolds and echo factors at one angle (or a batch of angles).

    Stacked vectors run sector by sector. ``dF_*``, ``da_p``, ``db_p`` and
    ``dc`` are ``None`` when derivatives were not requested.
    """

    theta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    F_S: np.ndarray
    F_I: np.ndarray
    a_p: np.ndarray
    b_p: np.ndarray
    c: np.ndarray
    dF_S: np.ndarray | None = None
    dF_I: np.ndarray | None = None
    da_p: np.ndarray | None = None
    db_p: np.ndarray | None = None
    dc: np.ndarray | None = None

    @property
    def d(self) -> np.ndarray:
        return self.a_p

    @property
    def dd(self) -> np.ndarray:
        return self.da_p

    @property
    def mu(self) -> np.ndarray:
        """Materialized c (x) d of length Q*N_S (column-major vec of d c^T)."""
        return _kron_rows(self.c, self.a_p)

    @property
    def dmu(self) -> np.ndarray:
        return _kron_rows(self.dc, self.a_p) + _kron_rows(self.c, self.da_p)


def _kron_rows(x, y):
    out = x[..., :, None] * y[..., None, :]
    return out.reshape(out.shape[:-2] + (-1,))


def _stack(per_sector):
    return per_sector.reshape(per_sector.shape[:-2] + (-1,))


def response(
    theta,
    cfg: SystemConfig,
    geom: SectorGeometry | None = None,
    codebook: Codebook | None = None,
    derivatives: bool = True,
) -> ResponseBundle:
    geom = geom if geom is not None else build_geometry(cfg)
    codebook = codebook if codebook is not None else build_codebook(cfg)
    theta = np.asarray(theta, dtype=float)
    spec = PatternSpec.from_config(cfg)
    F, dF = sector_amplitudes(spec, theta, derivative=derivatives)

    proj_s, dproj_s = _projections(theta, geom.pos_sensor)
    proj_i, dproj_i = _projections(theta, geom.pos_is)
    a_l = np.exp(1j * np.pi * proj_s)
    b_l = np.exp(-1j * np.pi * proj_i)
    a_p = _stack(F[..., None] * a_l)
    b_p = _stack(F[..., None] * b_l)
    X = codebook.X
    c = np.conj(b_p) @ X
    fields = dict(theta=theta, a=_stack(a_l), b=_stack(b_l), F_S=F, F_I=F, a_p=a_p, b_p=b_p, c=c)
    if derivatives:
        da_l = 1j * np.pi * dproj_s * a_l
        db_l = -1j * np.pi * dproj_i * b_l
        da_p = _stack(dF[..., None] * a_l + F[..., None] * da_l)
        db_p = _stack(dF[..., None] * b_l + F[..., None] * db_l)
        fields.update(dF_S=dF, dF_I=dF, da_p=da_p, db_p=db_p, dc=np.conj(db_p) @ X)
    return ResponseBundle(**fields)


@dataclass(frozen=True)
class AsymptoticProducts:
    da_a: complex
    a_a: float
    da_da: float


def asymptotic_inner_products(theta: float, cfg: SystemConfig) -> AsymptoticProducts:
    """Large-M closed forms of da_p^H a_p, a_p^H a_p and da_p^H da_p.

    Pattern-derivative terms are dropped (they are lower order in M_S).
    """
    spec = PatternSpec.from_config(cfg)
    F, _ = sector_amplitudes(spec, theta, derivative=False)
    x = theta - build_geometry(cfg).phi
    M = cfg.M_S
    h = center_distance(cfg.M, cfg.L)
    F2 = F**2
    da_a = complex(np.sum(1j * np.pi * F2 * M * h * np.sin(x)))
    a_a = float(np.sum(F2) * M)
    da_da = float(np.sum(np.pi**2 * F2 * (np.cos(x) ** 2 * M**3 / 12.0 + np.sin(x) ** 2 * M * h**2)))
    return AsymptoticProducts(da_a, a_a, da_da)


@dataclass(frozen=True)
class CrossSectorDecay:
    beta1: float
    beta2: float
    bound: float
    actual: float


def cross_sector_decay(
    theta: float, l1: int, l2: int, cfg: SystemConfig, geom: SectorGeometry | None = None
) -> CrossSectorDecay:
    """Normalized overlap between the receive manifolds of two sectors.

    The overlap is normalized by the squared norm of whichever of the two
    sectors has the larger pattern amplitude, which is the ordering the
    1/(M sin(pi |beta2|)) bound assumes.
    """
    if l1 == l2:
        raise DomainError("need two distinct sectors")
    geom = geom if geom is not None else build_geometry(cfg)
    spec = PatternSpec.from_config(cfg)
    lit = illuminated(spec, theta)
    if not (lit[l1 - 1] and lit[l2 - 1]):
        raise DomainError(f"sectors {l1} and {l2} do not both illuminate theta={theta}")
    F, _ = sector_amplitudes(spec, theta, derivative=False)
    if F[l2 - 1] > F[l1 - 1]:
        l1, l2 = l2, l1
    ap1 = F[l1 - 1] * steering_rx(theta, geom, l1)
    ap2 = F[l2 - 1] * steering_rx(theta, geom, l2)
    actual = abs(np.vdot(ap1, ap2)) / np.vdot(ap1, ap1).real
    x1, x2 = theta - geom.phi[l1 - 1], theta - geom.phi[l2 - 1]
    tan_term = np.inf if cfg.L == 2 else np.tan(np.pi / cfg.L)
    beta1 = (np.cos(x1) - np.cos(x2)) / tan_term / 2.0
    beta2 = (np.sin(x1) - np.sin(x2)) / 2.0
    s = np.sin(np.pi * abs(beta2))
    bound = np.inf if s == 0 else 1.0 / (cfg.M_S * s)
    return CrossSectorDecay(float(beta1), float(beta2), float(bound), float(actual))
