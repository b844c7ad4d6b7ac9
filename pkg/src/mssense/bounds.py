"""Fisher information, exact and asymptotic CRBs, and scaling summaries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .antenna import PatternSpec, in_guard_band, sector_amplitudes
from .config import Pattern, SystemConfig
from .errors import ArchitectureError, DomainError
from .geometry import SectorGeometry, build_geometry, sector_angles
from .manifold import ResponseBundle, response
from .waveform import Codebook, build_codebook, link_budget

# Schur terms below this mean the angle is unidentifiable (CRB = inf)
SCHUR_FLOOR = 1e-30
EXPECTATION_GRID = 4096

# Leading N^3 coefficients of E_theta{r^2} and N-coefficients of E_theta{e}/P_tr
# as tabulated for the L = 2, 3, 4 configurations.
TABLE_R2_COEF = {
    (2, Pattern.ISOTROPIC): 0.102,
    (2, Pattern.DIRECTIVE): 0.102,
    (3, Pattern.ISOTROPIC): (0.061, 0.121),
    (3, Pattern.DIRECTIVE): 0.116,
    (4, Pattern.ISOTROPIC): 0.102,
    (4, Pattern.DIRECTIVE): 0.116,
}
TABLE_E_COEF = {
    (2, Pattern.ISOTROPIC): 1.0,
    (2, Pattern.DIRECTIVE): 1.0,
    (3, Pattern.ISOTROPIC): (0.67, 1.33),
    (3, Pattern.DIRECTIVE): 1.33,
    (4, Pattern.ISOTROPIC): 1.0,
    (4, Pattern.DIRECTIVE): 1.5,
}


def _inner(x, y):
    """Batched x^H y over the last axis."""
    return np.sum(np.conj(x) * y, axis=-1)


def _norm2(x):
    return np.sum(np.abs(x) ** 2, axis=-1)


def _residual_norm2(v, ref):
    """||v - proj_ref(v)||^2, zero where ref vanishes."""
    rr = _norm2(ref)
    safe = np.where(rr > 0, rr, 1.0)
    coef = np.where(rr > 0, _inner(ref, v) / safe, 0.0)
    return _norm2(v - coef[..., None] * ref)


def fim(theta, alpha: complex, bundle: ResponseBundle, sigma2: float) -> np.ndarray:
    """3x3 Fisher information over (theta, Re alpha, Im alpha)."""
    mu, dmu = bundle.mu, bundle.dmu
    k = 2.0 / sigma2
    dd = np.vdot(dmu, dmu).real
    cross = np.conj(alpha) * np.vdot(dmu, mu)
    mm = np.vdot(mu, mu).real
    F = np.empty((3, 3))
    F[0, 0] = k * abs(alpha) ** 2 * dd
    F[0, 1] = F[1, 0] = k * cross.real
    F[0, 2] = F[2, 0] = k * (1j * cross).real
    F[1, 1] = F[2, 2] = k * mm
    F[1, 2] = F[2, 1] = 0.0
    return F


def schur_term(bundle: ResponseBundle):
    """mu'^H mu' - |mu^H mu'|^2 / mu^H mu, from the factored echo.

    Uses the exact split ||d||^2 ||P_c^perp c'||^2 + ||c||^2 ||P_d^perp d'||^2,
    which avoids the cancellation of the direct formula.
    """
    c, dc, d, dd = bundle.c, bundle.dc, bundle.a_p, bundle.da_p
    return _norm2(d) * _residual_norm2(dc, c) + _norm2(c) * _residual_norm2(dd, d)


def _crb_from_schur(schur, sigma2, alpha):
    schur = np.asarray(schur, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(schur < SCHUR_FLOOR, np.inf, sigma2 / (2.0 * abs(alpha) ** 2 * np.maximum(schur, SCHUR_FLOOR)))
    return out if out.ndim else float(out)


def crb_exact(theta, cfg: SystemConfig, geom=None, codebook=None):
    """CRB on theta (rad^2); ``inf`` where the angle is unidentifiable."""
    bundle = response(theta, cfg, geom, codebook, derivatives=True)
    lb = link_budget(cfg)
    return _crb_from_schur(schur_term(bundle), cfg.sigma2, lb.alpha)


def _gamma_values(theta, cfg: SystemConfig):
    """Closed-form coupling factor; NaN where no sector sees the target."""
    theta = np.asarray(theta, dtype=float)
    F, _ = sector_amplitudes(PatternSpec.from_config(cfg), theta, derivative=False)
    F2 = F**2
    total = F2.sum(axis=-1)
    if cfg.L == 2:
        return np.where(total > 0, 1.0, np.nan)
    x = theta[..., None] - sector_angles(cfg.L)
    t2 = np.tan(np.pi / cfg.L) ** 2
    num = np.sum(F2 * np.sin(x), axis=-1) ** 2
    den = total * np.sum(F2 * (np.sin(x) ** 2 + t2 * np.cos(x) ** 2 / 3.0), axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, 1.0 - num / np.where(den > 0, den, 1.0), np.nan)


def gamma(theta, cfg: SystemConfig, role: str = "sensor"):
    """Large-M coupling factor between a manifold and its derivative.

    Closed form 1 - [sum F^2 sin x]^2 / (sum F^2 * sum F^2 [sin^2 x +
    tan^2(pi/L) cos^2 x / 3]) with x = theta - phi_l. Identically 1 for L = 2.
    ``role`` selects IS elements ("is") or sensors ("sensor"); both share the
    configured pattern.
    """
    if role not in ("is", "sensor"):
        raise DomainError(f"role must be 'is' or 'sensor', got {role!r}")
    out = _gamma_values(theta, cfg)
    if np.any(np.isnan(out)):
        raise DomainError("no sector illuminates the target")
    return out if out.ndim else float(out)


def gamma_exact(bundle: ResponseBundle, role: str = "sensor"):
    """Finite-size coupling factor computed from the manifold vectors."""
    if role == "sensor":
        v, dv = bundle.a_p, bundle.da_p
    elif role == "is":
        v, dv = bundle.c, bundle.dc
    else:
        raise DomainError(f"role must be 'is' or 'sensor', got {role!r}")
    out = _residual_norm2(dv, v) / _norm2(dv)
    return out if np.ndim(out) else float(out)


def probing_power_def(theta, cfg: SystemConfig, codebook: Codebook | None = None, geom=None):
    """Energy of the codebook seen through the transmit manifold, ||c||^2."""
    b = response(theta, cfg, geom, codebook, derivatives=False)
    out = _norm2(b.c)
    return out if np.ndim(out) else float(out)


def angle_rate_def(theta, cfg: SystemConfig, geom=None):
    """Squared norm of the receive-manifold derivative, ||d a_p/d theta||^2."""
    b = response(theta, cfg, geom, derivatives=True)
    out = _norm2(b.da_p)
    return out if np.ndim(out) else float(out)


def crb_approx(theta, cfg: SystemConfig, gamma_mode: str = "computed", geom=None, codebook=None):
    """sigma^2 / (4 |alpha|^2 Gamma e r^2) for the symmetric architecture."""
    if not cfg.is_symmetric:
        raise ArchitectureError("approximate CRB needs M_I == M_S")
    b = response(theta, cfg, geom, codebook, derivatives=True)
    return _approx_from_bundle(b, cfg, gamma_mode)


def _approx_from_bundle(b: ResponseBundle, cfg: SystemConfig, gamma_mode: str):
    e = _norm2(b.c)
    r2 = _norm2(b.da_p)
    if gamma_mode == "computed":
        g = np.nan_to_num(_gamma_values(b.theta, cfg), nan=1.0)
    elif gamma_mode == "unity":
        g = 1.0
    else:
        raise DomainError(f"gamma_mode must be 'computed' or 'unity', got {gamma_mode!r}")
    alpha = link_budget(cfg).alpha
    prod = 4.0 * abs(alpha) ** 2 * g * e * r2
    with np.errstate(divide="ignore"):
        out = np.where(prod > 0, cfg.sigma2 / np.where(prod > 0, prod, 1.0), np.inf)
    return out if out.ndim else float(out)


# --- closed forms -----------------------------------------------------------


def _illumination(theta, L, pattern):
    F, _ = sector_amplitudes(PatternSpec(pattern, L), theta, derivative=False)
    x = np.asarray(theta, dtype=float)[..., None] - sector_angles(L)
    return F, x


def closed_forms(theta, L: int, pattern: Pattern, N: int, P_tr: float) -> dict:
    """Leading-order e(theta) and r^2(theta) for L in {2, 3, 4}.

    e = P_tr * N * sum_l F^2 / L in every case. The rate keeps only the N^3
    term: L = 2 uses cos^2(theta - phi_l)/96, L = 3 uses 1/324 (which
    covers both the one-sector and two-sector phases), L = 4 uses
    (2 sin^2(theta - phi_l) + 1)/768.
    """
    if L not in (2, 3, 4):
        raise DomainError(f"closed forms exist for L in {{2, 3, 4}}, got {L}")
    F, x = _illumination(theta, L, Pattern(pattern))
    F2 = F**2
    e = P_tr * N * F2.sum(axis=-1) / L
    if L == 2:
        w = np.cos(x) ** 2 / 96.0
    elif L == 3:
        w = np.full(x.shape, 1.0 / 324.0)
    else:
        w = (2.0 * np.sin(x) ** 2 + 1.0) / 768.0
    r2 = np.pi**2 * N**3 * np.sum(F2 * w, axis=-1)
    if np.ndim(e) == 0:
        return {"e_closed": float(e), "r2_closed": float(r2)}
    return {"e_closed": e, "r2_closed": r2}


def rate_expansion(theta, L: int, pattern: Pattern, N: int):
    """Full finite-N expansion of r^2 including the -N L^2 and pattern-slope terms."""
    spec = PatternSpec(Pattern(pattern), L)
    F, dF = sector_amplitudes(spec, theta, derivative=True)
    x = np.asarray(theta, dtype=float)[..., None] - sector_angles(L)
    base = (N**3 - N * L**2) / (12.0 * L**3)
    off = 0.0 if L == 2 else N**3 / (4.0 * L**3 * np.tan(np.pi / L) ** 2)
    out = np.sum(np.pi**2 * F**2 * ((off - base) * np.sin(x) ** 2 + base) + dF**2 * N / L, axis=-1)
    return out if np.ndim(out) else float(out)


def expectation_grid(L: int, pattern: Pattern, points: int = EXPECTATION_GRID) -> np.ndarray:
    """Uniform [0, 2*pi) grid, offset by half a step, minus guard-band nodes."""
    theta = (np.arange(points) + 0.5) * 2.0 * np.pi / points
    return theta[~in_guard_band(PatternSpec(Pattern(pattern), L), theta)]


@dataclass(frozen=True)
class ScalingSummary:
    E_e: float
    E_r2: float
    table_r2_coef: float | tuple | None
    table_e_coef: float | tuple | None


def scaling_summary(L: int, pattern: Pattern, N: int, P_tr: float, points: int = EXPECTATION_GRID) -> ScalingSummary:
    pattern = Pattern(pattern)
    theta = expectation_grid(L, pattern, points)
    cf = closed_forms(theta, L, pattern, N, P_tr)
    return ScalingSummary(
        float(np.mean(cf["e_closed"])),
        float(np.mean(cf["r2_closed"])),
        TABLE_R2_COEF.get((L, pattern)),
        TABLE_E_COEF.get((L, pattern)),
    )


# --- full report --------------------------------------------------------------


@dataclass(frozen=True)
class CrbReport:
    theta: np.ndarray
    crb_exact: np.ndarray
    crb_approx: np.ndarray | None
    gamma_I: np.ndarray
    gamma_S: np.ndarray
    e_def: np.ndarray
    r2_def: np.ndarray
    e_closed: np.ndarray | None
    r2_closed: np.ndarray | None
    fim: np.ndarray | None = None


def crb_report(
    theta,
    cfg: SystemConfig,
    geom: SectorGeometry | None = None,
    codebook: Codebook | None = None,
    gamma_mode: str = "computed",
) -> CrbReport:
    """Every bound-related quantity at ``theta`` (scalar or array)."""
    geom = geom if geom is not None else build_geometry(cfg)
    codebook = codebook if codebook is not None else build_codebook(cfg)
    theta = np.asarray(theta, dtype=float)
    b = response(theta, cfg, geom, codebook, derivatives=True)
    lb = link_budget(cfg)
    exact = _crb_from_schur(schur_term(b), cfg.sigma2, lb.alpha)
    approx = _approx_from_bundle(b, cfg, gamma_mode) if cfg.is_symmetric else None
    g = _gamma_values(theta, cfg)
    e_closed = r2_closed = None
    if cfg.L in (2, 3, 4) and cfg.is_symmetric:
        cf = closed_forms(theta, cfg.L, cfg.pattern, cfg.N_I, cfg.p_tr)
        e_closed, r2_closed = cf["e_closed"], cf["r2_closed"]
    F = fim(theta, lb.alpha, b, cfg.sigma2) if theta.ndim == 0 else None
    return CrbReport(theta, exact, approx, g, g, _norm2(b.c), _norm2(b.da_p), e_closed, r2_closed, F)
