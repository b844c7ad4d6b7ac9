"""Controller channel, IS phase shifts, DFT probing codebook and link budget."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .config import SystemConfig
from .errors import DomainError
from .geometry import local_axis_positions


def dft_codeword(q: int, M_I: int) -> np.ndarray:
    """Column ``q mod M_I`` of the M_I-point DFT matrix (unit-modulus entries)."""
    if q < 0:
        raise DomainError(f"snapshot index must be >= 0, got {q}")
    m = np.arange(M_I)
    return np.exp(-2j * np.pi * m * (q % M_I) / M_I)


@dataclass(frozen=True)
class SourceChannel:
    """Controller -> sector-1 line-of-sight channel ``g = alpha_g * a_g``."""

    alpha_g: complex
    a_g: np.ndarray

    @property
    def g(self) -> np.ndarray:
        return self.alpha_g * self.a_g


def source_channel(cfg: SystemConfig) -> SourceChannel:
    # beta and d_CI are assumed chosen so that |alpha_g|^2 = 1/M_I
    a_g = np.exp(1j * np.pi * local_axis_positions(cfg.M_I) * np.sin(cfg.zeta_src))
    return SourceChannel(complex(np.sqrt(1.0 / cfg.M_I)), a_g)


def phase_shift_matrices(q: int, g: SourceChannel, L: int) -> np.ndarray:
    """Per-sector diagonal phase-shift matrices, shape (L, M_I, M_I).

    Built so that ``sum_l Phi_l^H Phi_l = I`` (lossless) and each sector
    radiates the DFT column selected by ``q``.
    """
    M_I = g.a_g.size
    diag = np.sqrt(1.0 / L) * dft_codeword(q, M_I) * np.conj(g.a_g)
    return np.broadcast_to(np.diag(diag), (L, M_I, M_I)).copy()


@dataclass(frozen=True)
class Codebook:
    """Radiated probing signal over Q snapshots.

    ``X`` stacks the sector blocks ``per_sector[l]`` (M_I x Q) row-wise.
    """

    X: np.ndarray            # (N_I, Q)
    per_sector: np.ndarray   # (L, M_I, Q)

    @property
    def R_X(self) -> np.ndarray:
        return np.conj(self.X) @ self.X.T

    @property
    def base(self) -> np.ndarray:
        """Common sector block; every sector radiates the same signal."""
        return self.per_sector[0]


def build_codebook(cfg: SystemConfig) -> Codebook:
    g = source_channel(cfg)
    cols = np.empty((cfg.L, cfg.M_I, cfg.Q), dtype=complex)
    amp = np.sqrt(cfg.p_tr)
    for q in range(cfg.Q):
        phis = phase_shift_matrices(q, g, cfg.L)
        cols[:, :, q] = amp * (phis @ g.g)
    X = cols.reshape(cfg.N_I, cfg.Q)
    X.setflags(write=False)
    cols.setflags(write=False)
    return Codebook(X, cols)


def write_codebook_csv(codebook: Codebook, fh: TextIO) -> None:
    """Dump X as rows of (snapshot, sector, element, real, imag).

    Sectors are numbered from 1, snapshots and elements from 0.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["snapshot", "sector", "element", "real", "imag"])
    L, M_I, Q = codebook.per_sector.shape
    for q in range(Q):
        for l in range(L):
            for m in range(M_I):
                v = codebook.per_sector[l, m, q]
                writer.writerow([q, l + 1, m, format(v.real, ".17g"), format(v.imag, ".17g")])


@dataclass(frozen=True)
class LinkBudget:
    wavelength: float
    alpha: complex
    sigma2: float


def link_budget(cfg: SystemConfig) -> LinkBudget:
    """Round-trip path gain, normalized by the isotropic pattern."""
    lam = cfg.wavelength
    alpha = np.sqrt(64.0 * lam**2 / (np.pi**3 * cfg.rho**4)) * cfg.alpha_t
    return LinkBudget(lam, complex(alpha), cfg.sigma2)
