"""Half-space isotropic and directive element patterns.

Gains are power gains normalized so that the pattern averaged over the
full sphere equals one. ``F`` denotes the amplitude ``sqrt(G)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Pattern, SystemConfig
from .errors import BoundarySingularityError, DomainError
from .geometry import sector_angles, sector_rotation_angle, wrap_diff

# cos(theta_l) at or below this counts as the sector edge (gain 0)
EDGE_COS_TOL = 1e-12
# half-width of the exclusion zone around edges where dF/dtheta diverges
EPS_BOUNDARY = 1e-6


def rolloff_exponent(L: int) -> float:
    """Exponent aligning the half-power beamwidth with the 2*pi/L sector span."""
    if L < 2:
        raise DomainError(f"need L >= 2, got {L}")
    exact = {2: 0.0, 3: 1.0, 4: 2.0}
    if L in exact:
        return exact[L]
    return float(np.log(0.5) / np.log(np.cos(np.pi / L)))


@dataclass(frozen=True)
class PatternSpec:
    kind: Pattern
    L: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Pattern(self.kind))
        if self.L < 2:
            raise DomainError(f"need L >= 2, got {self.L}")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "PatternSpec":
        return cls(cfg.pattern, cfg.L)

    @property
    def alpha_L(self) -> float:
        return 0.0 if self.kind is Pattern.ISOTROPIC else rolloff_exponent(self.L)

    @property
    def singular_derivative(self) -> bool:
        """True when dF/dtheta diverges at the sector edges (0 < alpha_L < 2)."""
        return 0.0 < self.alpha_L < 2.0


def gain(spec: PatternSpec, theta_l):
    """Power gain toward local angle ``theta_l``; zero on the back half-space."""
    c = np.cos(np.asarray(theta_l, dtype=float))
    lit = c > EDGE_COS_TOL
    a = spec.alpha_L
    g = np.where(lit, 2.0 * (a + 1.0) * np.where(lit, c, 1.0) ** a, 0.0)
    return g if g.ndim else float(g)


def _amplitude_parts(spec: PatternSpec, x):
    """Amplitude and its derivative at local angle(s) ``x``; no guard check."""
    x = np.asarray(x, dtype=float)
    c, s = np.cos(x), np.sin(x)
    lit = c > EDGE_COS_TOL
    a = spec.alpha_L
    cc = np.where(lit, c, 1.0)
    peak = np.sqrt(2.0 * (a + 1.0))
    F = np.where(lit, peak * cc ** (a / 2.0), 0.0)
    if a == 0.0:
        dF = np.zeros_like(F)
    else:
        dF = np.where(lit, -peak * (a / 2.0) * cc ** (a / 2.0 - 1.0) * s, 0.0)
    return F, dF


def _check_guard(spec: PatternSpec, x) -> None:
    if not spec.singular_derivative:
        return
    # distance of the local angle to +-pi/2
    dist = np.abs(np.pi / 2 - np.abs(wrap_diff(x)))
    if np.any(dist < EPS_BOUNDARY):
        raise BoundarySingularityError(
            f"pattern derivative requested within {EPS_BOUNDARY:g} rad of a sector edge"
        )


def amplitude(spec: PatternSpec, theta, l: int):
    """F(theta, l) = sqrt(G(theta - phi_l))."""
    x = np.asarray(theta, dtype=float) - sector_rotation_angle(l, spec.L)
    F, _ = _amplitude_parts(spec, x)
    return F if F.ndim else float(F)


def amplitude_derivative(spec: PatternSpec, theta, l: int):
    """dF(theta, l)/dtheta; raises inside the guard band for L = 3 directive."""
    x = np.asarray(theta, dtype=float) - sector_rotation_angle(l, spec.L)
    _check_guard(spec, x)
    _, dF = _amplitude_parts(spec, x)
    return dF if dF.ndim else float(dF)


def sector_amplitudes(spec: PatternSpec, theta, derivative: bool = True):
    """Amplitudes for all sectors at once.

    Returns ``(F, dF)`` with shape ``theta.shape + (L,)``; ``dF`` is ``None``
    when ``derivative`` is False.
    """
    x = np.asarray(theta, dtype=float)[..., None] - sector_angles(spec.L)
    if derivative:
        _check_guard(spec, x)
    F, dF = _amplitude_parts(spec, x)
    return F, (dF if derivative else None)


def illuminated(spec: PatternSpec, theta):
    """Boolean mask ``theta.shape + (L,)`` of sectors that see the target."""
    x = np.asarray(theta, dtype=float)[..., None] - sector_angles(spec.L)
    return np.cos(x) > EDGE_COS_TOL


def in_guard_band(spec: PatternSpec, theta, width: float = EPS_BOUNDARY):
    """True where a derivative evaluation would hit a singular edge."""
    theta = np.asarray(theta, dtype=float)
    if not spec.singular_derivative:
        return np.zeros(theta.shape, dtype=bool)
    x = theta[..., None] - sector_angles(spec.L)
    dist = np.abs(np.pi / 2 - np.abs(wrap_diff(x)))
    return np.any(dist < width, axis=-1)
