"""Command-line front end.

Every command reads a scenario JSON file (see :mod:`mssense.scenario`) and
writes CSV (or JSON for ``estimate``) to ``--out``, the scenario's
``output.path``, or stdout. Exit codes: 0 success, 2 usage or configuration
error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .bounds import expectation_grid
from .config import Pattern, SystemConfig
from .errors import DomainError, EstimationFailure
from .estimator import DEFAULT_GRID, MLEstimator
from .montecarlo import DEFAULT_TRIALS, OVERALL_POINTS, TrialPlan, crb_theta_grid, run_sweep
from .scenario import ScenarioError, load_scenario, power_list
from .waveform import write_codebook_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

CRB_COLUMNS = [
    "theta_rad", "crb_exact_rad2", "crb_approx_rad2", "gamma",
    "e_def", "r2_def", "e_closed", "r2_closed",
]
MSE_COLUMNS = CRB_COLUMNS + ["mse_rad2", "trials", "failures"]
SWEEP_COLUMNS = [
    "p_tr_dbm", "L", "N", "pattern", "crb_exact_rad2", "crb_approx_rad2", "gamma",
    "e_def", "r2_def", "e_closed", "r2_closed", "mse_rad2", "trials", "failures",
]
SCALING_COLUMNS = [
    "N", "L", "pattern", "E_e", "E_r2", "E_e_closed", "E_r2_closed", "e_exponent", "r2_exponent",
]


def fmt(value) -> str:
    """17-significant-digit decimal, 'inf' for infinities, empty for null."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if np.isnan(v):
        return ""
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _write_rows(fh, columns, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _theta_grid(scn, cfg: SystemConfig) -> np.ndarray:
    block = scn.block("theta_grid") or {}
    if "values_rad" in block:
        return np.array([float(t) for t in block["values_rad"]])
    return crb_theta_grid(cfg, int(block.get("points", OVERALL_POINTS)))


def _sweep_grid(scn):
    """Explicit angles, or None plus a point count for the per-L averaging grid."""
    block = scn.block("theta_grid") or {}
    values = block.get("values_rad")
    return (None if values is None else [float(t) for t in values]), int(block.get("points", OVERALL_POINTS))


def _mse_plan(scn, args, cfg, theta=None, theta_points=OVERALL_POINTS) -> TrialPlan:
    block = scn.require("mse")
    trials = args.trials if args.trials is not None else int(block.get("trials", DEFAULT_TRIALS))
    seed = args.seed if args.seed is not None else int(block.get("seed", 0))
    grid = args.grid if args.grid is not None else int(block.get("grid_points", DEFAULT_GRID))
    return TrialPlan(
        cfg,
        None if theta is None else tuple(theta),
        trials_per_theta=trials,
        base_seed=seed,
        grid_points=grid,
        refine=bool(block.get("refine", True)),
        workers=int(block.get("workers", 1)),
        theta_points=theta_points,
    )


def _record_row(r) -> dict:
    return {
        "theta_rad": r.theta, "crb_exact_rad2": r.crb_exact, "crb_approx_rad2": r.crb_approx,
        "gamma": r.gamma, "e_def": r.e_def, "r2_def": r.r2_def, "e_closed": r.e_closed,
        "r2_closed": r.r2_closed, "mse_rad2": r.mse, "trials": r.trials, "failures": r.failures,
        "p_tr_dbm": r.p_tr_dbm, "L": r.L, "N": r.N, "pattern": r.pattern,
    }


def cmd_crb(scn, args, out):
    cfg = scn.cfg
    plan = TrialPlan(cfg, tuple(_theta_grid(scn, cfg)), trials_per_theta=1)
    _write_rows(out, CRB_COLUMNS, [_record_row(r) for r in run_sweep("crb_theta", plan)])


def cmd_mse(scn, args, out):
    cfg = scn.cfg
    plan = _mse_plan(scn, args, cfg, _theta_grid(scn, cfg))
    _write_rows(out, MSE_COLUMNS, [_record_row(r) for r in run_sweep("mse_theta", plan)])


def cmd_sweep(scn, args, out):
    block = scn.require("sweep")
    kind = block.get("kind")
    with_mse = bool(block.get("with_mse", True))
    cfg = scn.cfg
    theta, points = _sweep_grid(scn)
    if with_mse:
        plan = _mse_plan(scn, args, cfg, theta, points)
    else:
        plan = TrialPlan(cfg, None if theta is None else tuple(theta), trials_per_theta=1, theta_points=points)
    if kind == "power":
        if "powers_dbm" not in block:
            raise ScenarioError("power sweep needs 'powers_dbm'")
        rows = run_sweep("power_sweep", plan, powers_dbm=power_list(block["powers_dbm"]), with_mse=with_mse)
    elif kind == "sector":
        sectors = [int(L) for L in block.get("sectors", [2, 3, 4, 5, 6])]
        rows = run_sweep("sector_sweep", plan, sectors=sectors, with_mse=with_mse)
    else:
        raise ScenarioError(f"sweep kind must be 'power' or 'sector', got {kind!r}")
    _write_rows(out, SWEEP_COLUMNS, [_record_row(r) for r in rows])


def _slope(ns, values):
    if len(ns) < 2 or not all(v > 0 for v in values):
        return None
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def cmd_scaling(scn, args, out):
    block = scn.require("scaling")
    ns = [int(n) for n in block.get("n_values", [16, 24, 32, 48, 64])]
    sectors = [int(L) for L in block.get("sectors", [scn.cfg.L])]
    patterns = [Pattern(p) for p in block.get("patterns", [scn.cfg.pattern.value])]
    points = int(block.get("points", 4096))
    rows = []
    for L in sectors:
        for pattern in patterns:
            base = scn.cfg.with_(L=L, M_I=ns[0] // L, M_S=ns[0] // L, pattern=pattern, Q=None)
            grid = tuple(expectation_grid(L, pattern, points))
            plan = TrialPlan(base, grid, trials_per_theta=1)
            recs = run_sweep("scaling_N", plan, sizes=ns)
            e_exp = _slope(ns, [r.e_def for r in recs])
            r_exp = _slope(ns, [r.r2_def for r in recs])
            for r in recs:
                rows.append({
                    "N": r.N, "L": r.L, "pattern": r.pattern, "E_e": r.e_def, "E_r2": r.r2_def,
                    "E_e_closed": r.e_closed, "E_r2_closed": r.r2_closed,
                    "e_exponent": e_exp, "r2_exponent": r_exp,
                })
    _write_rows(out, SCALING_COLUMNS, rows)


def cmd_codebook(scn, args, out):
    from .waveform import build_codebook

    write_codebook_csv(build_codebook(scn.cfg), out)


def read_observation(path: str) -> np.ndarray:
    """Observation CSV with header ``index,real,imag``; rows in any order."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["index", "real", "imag"]:
            raise ScenarioError(f"{path}: expected header 'index,real,imag', got {','.join(header)!r}")
        rows = [r for r in reader if r]
    try:
        idx = np.array([int(r[0]) for r in rows])
        vals = np.array([float(r[1]) + 1j * float(r[2]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ScenarioError(f"{path}: malformed observation row ({exc})") from exc
    if sorted(idx.tolist()) != list(range(len(idx))):
        raise ScenarioError(f"{path}: indices must cover 0..{len(idx) - 1} exactly once")
    y = np.empty(len(idx), dtype=complex)
    y[idx] = vals
    return y


def write_observation(y, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["index", "real", "imag"])
    for i, v in enumerate(np.asarray(y)):
        writer.writerow([i, format(v.real, ".17g"), format(v.imag, ".17g")])


def cmd_estimate(scn, args, out):
    y = read_observation(args.observation)
    grid = args.grid if args.grid is not None else DEFAULT_GRID
    try:
        est = MLEstimator(scn.cfg, grid).estimate(y)
        doc = {
            "theta_hat_rad": est.theta_hat,
            "alpha_hat_re": est.alpha_hat.real,
            "alpha_hat_im": est.alpha_hat.imag,
            "metric": est.metric_value,
        }
    except EstimationFailure as exc:
        doc = {"theta_hat_rad": None, "alpha_hat_re": None, "alpha_hat_im": None, "metric": 0.0, "failure": str(exc)}
    out.write(json.dumps(doc) + "\n")


COMMANDS = {
    "crb": (cmd_crb, "per-angle exact/approximate CRB table"),
    "mse": (cmd_mse, "per-angle Monte Carlo MSE next to the CRB"),
    "scaling": (cmd_scaling, "theta-averaged e and r^2 versus N with fitted exponents"),
    "codebook": (cmd_codebook, "dump the probing codebook X"),
    "estimate": (cmd_estimate, "ML estimate from an observation CSV"),
    "sweep": (cmd_sweep, "theta-averaged power or sector sweep"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mssense", description="Multi-sector IS self-sensing toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario JSON file")
        if name == "estimate":
            p.add_argument("observation", help="observation CSV (index,real,imag)")
        p.add_argument("--out", help="output file (default: scenario output.path or stdout)")
        p.add_argument("--seed", type=int, help="override the Monte Carlo base seed")
        p.add_argument("--trials", type=int, help="override trials per angle")
        p.add_argument("--grid", type=int, help="override the estimator search-grid size")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    handler = COMMANDS[args.command][0]
    try:
        scn = load_scenario(args.scenario)
        # render into memory first so a failing command leaves no partial file
        buf = io.StringIO()
        handler(scn, args, buf)
    except (DomainError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"mssense {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError, EstimationFailure) as exc:
        print(f"mssense {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    path = args.out if args.out is not None else scn.output_path
    with _output(path) as fh:
        fh.write(buf.getvalue())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
