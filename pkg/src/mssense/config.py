"""Scenario parameters shared by every module."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import speed_of_light

from .errors import DomainError


class Pattern(str, enum.Enum):
    ISOTROPIC = "isotropic"
    DIRECTIVE = "directive"


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * np.log10(watt) + 30.0


def db_to_amplitude(db: float) -> float:
    return 10.0 ** (db / 20.0)


@dataclass(frozen=True)
class SystemConfig:
    """All parameters of one multi-sector self-sensing scenario.

    Powers are in watts, ``f_c`` in hertz, ``rho`` and ``d_ci`` in meters.
    Defaults reproduce the evaluation setup: 5.19 GHz carrier, -80 dBm
    noise, target at 519 m with 0 dB scattering, 45 dBm transmit power.

    Attributes:
        L: number of sectors.
        M_I: IS elements per sector.
        M_S: sensors per sector.
        Q: snapshot count; ``None`` selects ``N_I``.
    """

    L: int
    M_I: int
    M_S: int
    Q: int | None = None
    pattern: Pattern = Pattern.ISOTROPIC
    p_tr: float = field(default_factory=lambda: dbm_to_watt(45.0))
    sigma2: float = field(default_factory=lambda: dbm_to_watt(-80.0))
    f_c: float = 5.19e9
    rho: float = 519.0
    alpha_t: complex = 1.0 + 0.0j
    d_ci: float = 0.5
    zeta_src: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        object.__setattr__(self, "alpha_t", complex(self.alpha_t))
        if self.Q is None:
            object.__setattr__(self, "Q", self.L * self.M_I)
        if self.L < 2:
            raise DomainError(f"need at least 2 sectors, got L={self.L}")
        if self.M_I < 1 or self.M_S < 1:
            raise DomainError("element counts per sector must be >= 1")
        if self.Q < 1 or self.Q % self.M_I:
            raise DomainError(f"Q={self.Q} must be a positive multiple of M_I={self.M_I}")
        if self.p_tr <= 0 or self.rho <= 0 or self.f_c <= 0:
            raise DomainError("p_tr, rho and f_c must be positive")
        if self.sigma2 < 0:
            raise DomainError("sigma2 must be non-negative")

    @classmethod
    def symmetric(cls, L: int, N: int, pattern=Pattern.ISOTROPIC, **kwargs) -> "SystemConfig":
        """Same element and sensor count ``N`` split over ``L`` sectors."""
        if N % L:
            raise DomainError(f"N={N} is not divisible by L={L}")
        return cls(L=L, M_I=N // L, M_S=N // L, pattern=pattern, **kwargs)

    @property
    def N_I(self) -> int:
        return self.L * self.M_I

    @property
    def N_S(self) -> int:
        return self.L * self.M_S

    @property
    def M(self) -> int:
        return max(self.M_I, self.M_S)

    @property
    def wavelength(self) -> float:
        return speed_of_light / self.f_c

    @property
    def is_symmetric(self) -> bool:
        return self.M_I == self.M_S

    def with_(self, **changes) -> "SystemConfig":
        # keep the Q = N_I default tied to the new element counts
        if "Q" not in changes and self.Q == self.N_I and ({"L", "M_I"} & changes.keys()):
            changes["Q"] = None
        return replace(self, **changes)
