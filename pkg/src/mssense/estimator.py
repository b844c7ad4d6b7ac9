"""Joint maximum-likelihood estimation of the target angle and path gain.

The concentrated likelihood ``|mu(theta)^H y|^2 / ||mu(theta)||^2`` is
evaluated through the factored echo. Writing ``Y`` for the N_S x Q
reshape of ``y``, ``mu^H y = d^H Y c^*``. Because every sector radiates the
same block ``X_1``, ``c^* = X_1^H v`` with ``v = sum_l F_l b_l``, so a
whole search grid costs one (G x N_S) @ (N_S x M_I) product per
observation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .antenna import PatternSpec, in_guard_band
from .config import SystemConfig
from .errors import ContractError, EstimationFailure
from .geometry import SectorGeometry, build_geometry, wrap_angle
from .manifold import response
from .waveform import Codebook, build_codebook

DEFAULT_GRID = 4096
REFINE_TOL = 1e-7
POLISH_STEP = 1e-5
# grid nodes this close to a singular sector edge are skipped
GRID_GUARD = 1e-4
METRIC_FLOOR = 1e-30
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_TRIAL_CHUNK = 32


@dataclass(frozen=True)
class Estimate:
    theta_hat: float
    alpha_hat: complex
    metric_value: float
    grid_resolution: float
    refined: bool


def observation_matrix(y, cfg: SystemConfig) -> np.ndarray:
    """Reshape stacked observation(s) to (..., N_S, Q)."""
    y = np.asarray(y)
    n = cfg.Q * cfg.N_S
    if y.shape[-1] != n:
        raise ContractError(f"observation length {y.shape[-1]} != Q*N_S = {n}")
    Y = y.reshape(y.shape[:-1] + (cfg.Q, cfg.N_S))
    return np.swapaxes(Y, -1, -2)


class MLEstimator:
    """Grid search plus golden-section refinement for one configuration.

    The manifold tables over the search grid are built once and reused for
    every observation passed to :meth:`estimate` or :meth:`estimate_batch`.
    """

    def __init__(
        self,
        cfg: SystemConfig,
        grid_points: int = DEFAULT_GRID,
        refine: bool = True,
        geom: SectorGeometry | None = None,
        codebook: Codebook | None = None,
        tol: float = REFINE_TOL,
    ):
        if grid_points < 8:
            raise ValueError(f"grid_points must be >= 8, got {grid_points}")
        self.cfg = cfg
        self.refine = refine
        self.tol = tol
        self.geom = geom if geom is not None else build_geometry(cfg)
        self.codebook = codebook if codebook is not None else build_codebook(cfg)
        self.resolution = 2.0 * np.pi / grid_points
        grid = np.arange(grid_points) * self.resolution
        spec = PatternSpec.from_config(cfg)
        self.grid = grid[~in_guard_band(spec, grid, GRID_GUARD)]
        per = self.codebook.per_sector
        self._folded = bool(np.all(per == per[0]))
        self._Xeff = self.codebook.base if self._folded else self.codebook.X
        self._D, self._V, self._den = self._tables(self.grid)

    def _tables(self, theta):
        b = response(theta, self.cfg, self.geom, self.codebook, derivatives=False)
        if self._folded:
            v = b.b_p.reshape(b.b_p.shape[:-1] + (self.cfg.L, self.cfg.M_I)).sum(axis=-2)
        else:
            v = b.b_p
        den = np.sum(np.abs(b.c) ** 2, axis=-1) * np.sum(np.abs(b.a_p) ** 2, axis=-1)
        return np.conj(b.a_p), v, den

    def _project(self, Y):
        # Y c^* = (Y X_eff^H) v
        return Y @ np.conj(self._Xeff).T

    def grid_metric(self, y) -> np.ndarray:
        """Concentrated likelihood at every grid node, shape (..., G)."""
        K = self._project(observation_matrix(y, self.cfg))
        z = np.einsum("gm,...gm->...g", self._V, self._D @ K)
        return _ratio(np.abs(z) ** 2, self._den)

    def _point_metric(self, theta, K):
        """Metric at one angle per observation; theta (T,), K (T, N_S, M)."""
        D, V, den = self._tables(theta)
        z = np.einsum("ts,tsm,tm->t", D, K, V)
        return _ratio(np.abs(z) ** 2, den), z, den

    def estimate_batch(self, y):
        """Estimate for a stack of observations ``y`` of shape (T, Q*N_S).

        Returns ``(theta_hat, alpha_hat, metric, failed)``; failed rows carry
        NaN estimates.
        """
        y = np.atleast_2d(y)
        T = y.shape[0]
        theta_hat = np.empty(T)
        alpha_hat = np.empty(T, dtype=complex)
        metric = np.empty(T)
        failed = np.zeros(T, dtype=bool)
        for start in range(0, T, _TRIAL_CHUNK):
            sl = slice(start, min(T, start + _TRIAL_CHUNK))
            th, al, mv, fl = self._estimate_chunk(y[sl])
            theta_hat[sl], alpha_hat[sl], metric[sl], failed[sl] = th, al, mv, fl
        return theta_hat, alpha_hat, metric, failed

    def _estimate_chunk(self, y):
        K = self._project(observation_matrix(y, self.cfg))
        gm = _ratio(np.abs(np.einsum("gm,tgm->tg", self._V, self._D @ K)) ** 2, self._den)
        idx = np.argmax(gm, axis=1)  # first maximum wins ties
        best = gm[np.arange(len(idx)), idx]
        failed = ~(best > 0)
        theta = self.grid[idx]
        if self.refine:
            theta = self._golden(idx, K, best)
        m, z, den = self._point_metric(theta, K)
        alpha = np.where(den > METRIC_FLOOR, z / np.where(den > METRIC_FLOOR, den, 1.0), 0.0)
        theta = wrap_angle(theta)
        theta = np.where(failed, np.nan, theta)
        alpha = np.where(failed, np.nan, alpha)
        return theta, alpha, m, failed

    def _golden(self, idx, K, best):
        G = self.grid.size
        center = self.grid[idx]
        lo = center - np.mod(center - self.grid[(idx - 1) % G], 2 * np.pi)
        hi = center + np.mod(self.grid[(idx + 1) % G] - center, 2 * np.pi)
        h = hi - lo
        n = max(1, int(math.ceil(math.log(self.tol / h.max()) / math.log(_INV_PHI))))
        x1 = hi - _INV_PHI * h
        x2 = lo + _INV_PHI * h
        f1 = self._point_metric(x1, K)[0]
        f2 = self._point_metric(x2, K)[0]
        for _ in range(n):
            left = f1 >= f2  # maximum lies in [lo, x2]
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            h = hi - lo
            new_x = np.where(left, hi - _INV_PHI * h, lo + _INV_PHI * h)
            fn = self._point_metric(new_x, K)[0]
            x2, f2, x1, f1 = (
                np.where(left, x1, new_x),
                np.where(left, f1, fn),
                np.where(left, new_x, x2),
                np.where(left, fn, f2),
            )
        mid = 0.5 * (lo + hi)
        fm = self._point_metric(mid, K)[0]
        mid, fm = self._polish(mid, fm, K)
        # refinement must never lose against the best grid node
        return np.where(fm >= best, mid, center)

    def _polish(self, x, fx, K):
        """Parabolic vertex step through x +- POLISH_STEP.

        Golden section cannot resolve a quadratic peak much below
        sqrt(machine eps) because neighbouring metric values round to the
        same float; the three-point vertex uses differences that are still
        well resolved at this step size.
        """
        h = POLISH_STEP
        for _ in range(2):
            fp = self._point_metric(x + h, K)[0]
            fn = self._point_metric(x - h, K)[0]
            curv = 2.0 * fx - fp - fn
            ok = curv > 0
            shift = np.where(ok, 0.5 * h * (fp - fn) / np.where(ok, curv, 1.0), 0.0)
            shift = np.clip(shift, -h, h)
            # near the peak the metric is flat to within an ulp, so comparing
            # metric values would reject genuine vertex steps
            x = x + shift
        return x, self._point_metric(x, K)[0]

    def estimate(self, y) -> Estimate:
        th, al, mv, failed = self.estimate_batch(np.asarray(y)[None, :])
        if failed[0]:
            raise EstimationFailure("likelihood metric is zero over the whole grid")
        return Estimate(float(th[0]), complex(al[0]), float(mv[0]), self.resolution, self.refine)


def _ratio(num, den):
    ok = den > METRIC_FLOOR
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def ml_metric(y, theta, cfg: SystemConfig, geom=None, codebook=None):
    """Concentrated likelihood |mu^H y|^2 / ||mu||^2 at ``theta``."""
    b = response(theta, cfg, geom, codebook, derivatives=False)
    Y = observation_matrix(y, cfg)
    z = np.einsum("...s,sq,...q->...", np.conj(b.a_p), Y, np.conj(b.c))
    den = np.sum(np.abs(b.c) ** 2, axis=-1) * np.sum(np.abs(b.a_p) ** 2, axis=-1)
    out = _ratio(np.abs(z) ** 2, den)
    return out if np.ndim(out) else float(out)


def estimate(y, cfg: SystemConfig, grid_points: int = DEFAULT_GRID, refine: bool = True, geom=None, codebook=None) -> Estimate:
    return MLEstimator(cfg, grid_points, refine, geom, codebook).estimate(y)
