"""Noisy observations, seeded trial batches and MSE / CRB sweeps.

Seeding: trial ``t`` at theta-index ``i`` draws its noise from
``numpy.random.Generator(PCG64(trial_seed(base_seed, i, t)))`` where
``trial_seed`` chains the SplitMix64 finalizer::

    s = mix(base_seed); s = mix(s ^ i); s = mix(s ^ t)

The mixer and its constants are part of the output format; changing them
changes every Monte Carlo result.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .antenna import PatternSpec, in_guard_band
from .bounds import crb_report, expectation_grid
from .config import Pattern, SystemConfig, dbm_to_watt, watt_to_dbm
from .errors import ContractError, DomainError
from .estimator import DEFAULT_GRID, MLEstimator
from .geometry import build_geometry, wrap_diff
from .manifold import response
from .waveform import build_codebook, link_budget

MASK64 = (1 << 64) - 1
DEFAULT_TRIALS = 500
OVERALL_POINTS = 360
SWEEP_KINDS = ("crb_theta", "mse_theta", "power_sweep", "sector_sweep", "scaling_N")


def splitmix64(x: int) -> int:
    """SplitMix64 output function (Steele, Lea and Flood constants)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(base_seed: int, theta_index: int, trial: int) -> int:
    s = splitmix64(int(base_seed) & MASK64)
    s = splitmix64(s ^ (int(theta_index) & MASK64))
    return splitmix64(s ^ (int(trial) & MASK64))


def complex_noise(seed: int, n: int, sigma2: float) -> np.ndarray:
    """Circular complex Gaussian vector with variance sigma2 per entry."""
    rng = np.random.Generator(np.random.PCG64(seed))
    w = rng.standard_normal((2, n))
    return np.sqrt(sigma2 / 2.0) * (w[0] + 1j * w[1])


def observe(theta: float, cfg: SystemConfig, seed: int, geom=None, codebook=None) -> np.ndarray:
    """y = alpha * mu(theta) + z, a pure function of (theta, cfg, seed)."""
    mu = response(theta, cfg, geom, codebook, derivatives=False).mu
    y = link_budget(cfg).alpha * mu
    if cfg.sigma2 > 0:
        y = y + complex_noise(seed, mu.size, cfg.sigma2)
    return y


def overall_theta_grid(cfg: SystemConfig, points: int = OVERALL_POINTS) -> np.ndarray:
    """Half-step-offset uniform grid used for theta averages, minus guard bands.

    The half-step offset keeps exact blind-spot and sector-edge angles off the
    grid, so averages stay finite.
    """
    return expectation_grid(cfg.L, cfg.pattern, points)


def crb_theta_grid(cfg: SystemConfig, points: int = OVERALL_POINTS) -> np.ndarray:
    """k * 2*pi/points grid for per-angle tables, minus guard bands."""
    theta = np.arange(points) * 2.0 * np.pi / points
    return theta[~in_guard_band(PatternSpec.from_config(cfg), theta)]


@dataclass(frozen=True)
class TrialPlan:
    cfg: SystemConfig
    theta_grid: tuple | None = None
    trials_per_theta: int = DEFAULT_TRIALS
    base_seed: int = 0
    grid_points: int = DEFAULT_GRID
    refine: bool = True
    workers: int = 1
    theta_points: int = OVERALL_POINTS

    def __post_init__(self):
        if self.trials_per_theta < 1:
            raise DomainError(f"trials_per_theta must be >= 1, got {self.trials_per_theta}")
        if self.theta_grid is not None:
            grid = tuple(float(t) for t in np.atleast_1d(self.theta_grid))
            if np.any(in_guard_band(PatternSpec.from_config(self.cfg), np.array(grid))):
                raise DomainError("theta grid touches a sector-edge guard band")
            object.__setattr__(self, "theta_grid", grid)

    @property
    def thetas(self) -> np.ndarray:
        if self.theta_grid is None:
            return overall_theta_grid(self.cfg, self.theta_points)
        return np.array(self.theta_grid)

    def with_cfg(self, cfg: SystemConfig) -> "TrialPlan":
        """Same plan on another configuration; explicit grids are kept only if still valid."""
        grid = self.theta_grid
        if grid is not None and np.any(in_guard_band(PatternSpec.from_config(cfg), np.array(grid))):
            grid = None
        return replace(self, cfg=cfg, theta_grid=grid)


@dataclass(frozen=True)
class SweepRecord:
    """One row of sweep output.

    Per-angle rows carry ``theta``; aggregated rows (power, sector and
    size sweeps) leave it ``None`` and hold theta-averages instead.
    """

    theta: float | None
    crb_exact: float
    crb_approx: float | None
    gamma: float | None
    e_def: float
    r2_def: float
    e_closed: float | None
    r2_closed: float | None
    mse: float | None = None
    trials: int = 0
    failures: int = 0
    mean_bias: float | None = None
    L: int = 0
    N: int = 0
    pattern: str = ""
    p_tr_dbm: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrialStats:
    mse: float
    trials: int
    failures: int
    mean_bias: float


def _opt(x):
    if x is None:
        return None
    x = float(x)
    return None if np.isnan(x) else x


def _context(cfg: SystemConfig) -> dict:
    return dict(L=cfg.L, N=cfg.N_I, pattern=Pattern(cfg.pattern).value, p_tr_dbm=float(watt_to_dbm(cfg.p_tr)))


def _run_trials(thetas, indices, plan: TrialPlan) -> list[TrialStats]:
    cfg = plan.cfg
    geom = build_geometry(cfg)
    codebook = build_codebook(cfg)
    est = MLEstimator(cfg, plan.grid_points, plan.refine, geom, codebook)
    alpha = link_budget(cfg).alpha
    out = []
    for theta, idx in zip(thetas, indices):
        mu = response(theta, cfg, geom, codebook, derivatives=False).mu
        y = np.empty((plan.trials_per_theta, mu.size), dtype=complex)
        for t in range(plan.trials_per_theta):
            y[t] = alpha * mu
            if cfg.sigma2 > 0:
                y[t] += complex_noise(trial_seed(plan.base_seed, idx, t), mu.size, cfg.sigma2)
        th_hat, _, _, failed = est.estimate_batch(y)
        err = wrap_diff(th_hat[~failed] - theta)
        n_ok = err.size
        mse = float(np.sum(err**2) / n_ok) if n_ok else float("nan")
        bias = float(np.sum(err) / n_ok) if n_ok else float("nan")
        out.append(TrialStats(mse, plan.trials_per_theta, int(failed.sum()), bias))
    return out


def _run_trials_task(args):
    thetas, indices, plan = args
    return _run_trials(thetas, indices, plan)


def _trial_stats(thetas, indices, plan: TrialPlan) -> list[TrialStats]:
    workers = plan.workers if plan.workers > 0 else (os.cpu_count() or 1)
    if workers == 1 or len(thetas) < 2:
        return _run_trials(thetas, indices, plan)
    n = min(workers, len(thetas))
    chunks = [(thetas[k::n], indices[k::n], plan) for k in range(n)]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(_run_trials_task, chunks))
    # undo the strided split so rows stay in theta-index order
    merged: list[TrialStats | None] = [None] * len(thetas)
    for k, part in enumerate(parts):
        for j, stats in enumerate(part):
            merged[k + j * n] = stats
    return merged


def _theta_records(plan: TrialPlan, with_mse: bool, indices=None) -> list[SweepRecord]:
    cfg = plan.cfg
    thetas = plan.thetas
    indices = list(range(len(thetas))) if indices is None else list(indices)
    thetas = thetas[indices]
    rep = crb_report(thetas, cfg)
    ctx = _context(cfg)
    stats = _trial_stats(thetas, indices, plan) if with_mse else [None] * len(thetas)
    rows = []
    for k, theta in enumerate(thetas):
        s = stats[k]
        rows.append(
            SweepRecord(
                theta=float(theta),
                crb_exact=float(rep.crb_exact[k]),
                crb_approx=None if rep.crb_approx is None else float(rep.crb_approx[k]),
                gamma=_opt(rep.gamma_S[k]),
                e_def=float(rep.e_def[k]),
                r2_def=float(rep.r2_def[k]),
                e_closed=None if rep.e_closed is None else float(rep.e_closed[k]),
                r2_closed=None if rep.r2_closed is None else float(rep.r2_closed[k]),
                mse=None if s is None else _opt(s.mse),
                trials=0 if s is None else s.trials,
                failures=0 if s is None else s.failures,
                mean_bias=None if s is None else _opt(s.mean_bias),
                **ctx,
            )
        )
    return rows


def instantaneous_mse(theta: float, plan: TrialPlan) -> SweepRecord:
    """MSE over ``plan.trials_per_theta`` trials at one grid angle."""
    grid = plan.thetas
    hits = np.flatnonzero(np.isclose(grid, theta, rtol=0.0, atol=1e-12))
    if hits.size == 0:
        raise ContractError(f"theta={theta} is not on the plan grid")
    return _theta_records(plan, True, [int(hits[0])])[0]


def _mean_or_none(values):
    vals = [v for v in values]
    if any(v is None for v in vals):
        return None
    return float(np.mean(vals))


def _aggregate(rows: list[SweepRecord], cfg: SystemConfig) -> SweepRecord:
    mses = [r.mse for r in rows]
    with_mse = any(r.trials for r in rows)
    biases = [r.mean_bias for r in rows]
    return SweepRecord(
        theta=None,
        crb_exact=float(np.mean([r.crb_exact for r in rows])),
        crb_approx=_mean_or_none([r.crb_approx for r in rows]),
        gamma=_mean_or_none([r.gamma for r in rows]),
        e_def=float(np.mean([r.e_def for r in rows])),
        r2_def=float(np.mean([r.r2_def for r in rows])),
        e_closed=_mean_or_none([r.e_closed for r in rows]),
        r2_closed=_mean_or_none([r.r2_closed for r in rows]),
        mse=_mean_or_none(mses) if with_mse else None,
        trials=sum(r.trials for r in rows),
        failures=sum(r.failures for r in rows),
        mean_bias=_mean_or_none(biases) if with_mse else None,
        **_context(cfg),
    )


@dataclass(frozen=True)
class OverallResult:
    mse: float | None
    crb_exact: float
    crb_approx: float | None
    records: list = field(default_factory=list)


def overall_mse(plan: TrialPlan) -> OverallResult:
    """Uniform theta-average of the per-angle MSE and CRBs over the plan grid."""
    rows = _theta_records(plan, True)
    agg = _aggregate(rows, plan.cfg)
    return OverallResult(agg.mse, agg.crb_exact, agg.crb_approx, rows)


def run_sweep(
    kind: str,
    plan: TrialPlan,
    powers_dbm=None,
    sectors=(2, 3, 4, 5, 6),
    sizes=None,
    with_mse: bool = True,
) -> list[SweepRecord]:
    """Deterministic record sequence for one experiment type.

    ``crb_theta`` and ``mse_theta`` give one row per grid angle. The other
    kinds give one theta-averaged row per swept value: ``power_sweep`` over
    ``powers_dbm``, ``sector_sweep`` over ``sectors`` at fixed N (CRB only
    unless ``with_mse``), ``scaling_N`` over ``sizes`` at fixed L.
    """
    cfg = plan.cfg
    if kind == "crb_theta":
        return _theta_records(plan, False)
    if kind == "mse_theta":
        return _theta_records(plan, True)
    if kind == "power_sweep":
        if powers_dbm is None:
            raise DomainError("power_sweep needs powers_dbm")
        out = []
        for p in powers_dbm:
            sub = plan.with_cfg(cfg.with_(p_tr=dbm_to_watt(p)))
            out.append(_aggregate(_theta_records(sub, with_mse), sub.cfg))
        return out
    if kind == "sector_sweep":
        out = []
        for L in sectors:
            sub_cfg = _resized(cfg, L, cfg.N_I)
            sub = plan.with_cfg(sub_cfg)
            out.append(_aggregate(_theta_records(sub, with_mse), sub_cfg))
        return out
    if kind == "scaling_N":
        if sizes is None:
            raise DomainError("scaling_N needs sizes")
        out = []
        for N in sizes:
            sub_cfg = _resized(cfg, cfg.L, N)
            sub = plan.with_cfg(sub_cfg)
            out.append(_aggregate(_theta_records(sub, False), sub_cfg))
        return out
    raise DomainError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")


def _resized(cfg: SystemConfig, L: int, N: int) -> SystemConfig:
    if N % L:
        raise DomainError(f"N={N} is not a multiple of L={L}")
    M = N // L
    M_S = M if cfg.is_symmetric else cfg.M_S
    return cfg.with_(L=L, M_I=M, M_S=M_S)


__all__ = [
    "OverallResult",
    "SweepRecord",
    "TrialPlan",
    "complex_noise",
    "crb_theta_grid",
    "instantaneous_mse",
    "observe",
    "overall_mse",
    "overall_theta_grid",
    "run_sweep",
    "splitmix64",
    "trial_seed",
]
