"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a PASS/FAIL line with the measured values before asserting,
so the summary printed at the end of the session and the results file list
every criterion even when some of them fail. Criterion 12 is marked slow
(about five minutes on one core) but runs by default; deselect it with
``-m "not slow"``.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from mssense.antenna import PatternSpec, in_guard_band, illuminated
from mssense.bounds import crb_approx, crb_exact, crb_report, expectation_grid, fim, gamma
from mssense.cli import main, write_observation
from mssense.config import Pattern, SystemConfig
from mssense.estimator import MLEstimator
from mssense.geometry import build_geometry, edge_distance, interior_mask, wrap_diff
from mssense.manifold import cross_sector_decay, response
from mssense.montecarlo import TrialPlan, observe, run_sweep
from mssense.waveform import link_budget

from conftest import CONFIGS, interior_angles, sym

ISO, DIR = Pattern.ISOTROPIC, Pattern.DIRECTIVE
RESULTS = []
DETAILS = {}
RESULTS_FILE = Path(__file__).resolve().parents[1] / "acceptance_results.md"
NOTES = []


def report(n, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {name} | {detail}"
    RESULTS[:] = [r for r in RESULTS if f"criterion {n:2d}:" not in r] + [line]
    RESULTS.sort(key=lambda r: int(r.split("criterion")[1].split(":")[0]))
    DETAILS[n] = (ok, name, detail)
    print(line)
    return ok


@pytest.fixture(scope="module", autouse=True)
def _results_file():
    yield
    lines = ["# Acceptance results", "", "Generated by `pytest tests/test_acceptance.py`.", ""]
    lines += ["| # | criterion | result | measured |", "|---|---|---|---|"]
    for n in sorted(DETAILS):
        ok, name, detail = DETAILS[n]
        lines.append(f"| {n} | {name} | {'PASS' if ok else 'FAIL'} | {detail} |")
    if NOTES:
        lines += ["", "## Notes", ""] + [f"- {note}" for note in NOTES]
    RESULTS_FILE.write_text("\n".join(lines) + "\n")


def _rng(n):
    return np.random.default_rng(1000 + n)


def _noiseless(theta, cfg):
    return link_budget(cfg).alpha * response(theta, cfg, derivatives=False).mu


def test_c01_estimator_consistency():
    rng = _rng(1)
    t0 = time.perf_counter()
    worst_th = worst_al = 0.0
    for L, pattern in CONFIGS:
        cfg = sym(L, 24, pattern)
        alpha = link_budget(cfg).alpha
        th = interior_angles(rng, L, 64)
        y = np.stack([_noiseless(t, cfg) for t in th])
        th_hat, al_hat, _, failed = MLEstimator(cfg).estimate_batch(y)
        assert not failed.any()
        worst_th = max(worst_th, np.max(np.abs(wrap_diff(th_hat - th))))
        worst_al = max(worst_al, np.max(np.abs(al_hat - alpha) / abs(alpha)))
    dt = time.perf_counter() - t0
    ok = worst_th < 1e-6 and worst_al < 1e-9 and dt < 10
    report(1, "estimator noiseless consistency", ok,
           f"max |dtheta| {worst_th:.2e} rad, max alpha rel err {worst_al:.2e}, {dt:.1f} s")
    assert ok


def test_c02_crb_fim_oracle():
    rng = _rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for L, pattern in CONFIGS:
        cfg = sym(L, 24, pattern)
        alpha = link_budget(cfg).alpha
        th = interior_angles(rng, L, 64)
        ex = crb_exact(th, cfg)
        for k, t in enumerate(th):
            F = fim(t, alpha, response(t, cfg), cfg.sigma2)
            D = np.diag(1 / np.sqrt(np.diag(F)))
            inv = D @ np.linalg.inv(D @ F @ D) @ D
            worst = max(worst, abs(ex[k] - inv[0, 0]) / inv[0, 0])
    dt = time.perf_counter() - t0
    ok = worst < 1e-9 and dt < 5
    report(2, "exact CRB vs inverse FIM", ok, f"max rel diff {worst:.2e}, {dt:.1f} s")
    assert ok


def test_c03_derivative_correctness():
    rng = _rng(3)
    h = 1e-6
    worst = 0.0
    for L, pattern in CONFIGS:
        cfg = sym(L, 24, pattern)
        spec = PatternSpec.from_config(cfg)
        th = rng.uniform(0, 2 * np.pi, 400)
        # the step must not straddle a guard band or a sector edge
        th = th[~in_guard_band(spec, th, 1e-4) & (edge_distance(th, L) > 1e-4)][:64]
        assert th.size == 64
        b = response(th, cfg)
        fd = (response(th + h, cfg, derivatives=False).mu - response(th - h, cfg, derivatives=False).mu) / (2 * h)
        err = np.linalg.norm(b.dmu - fd, axis=-1) / np.linalg.norm(b.dmu, axis=-1)
        worst = max(worst, err.max())
    ok = worst < 1e-5
    report(3, "analytic dmu vs central differences", ok, f"max rel err {worst:.2e}")
    assert ok


def test_c04_gamma_bounds():
    parts, ok = [], True
    g2 = gamma(expectation_grid(2, ISO, 4096), sym(2, 24))
    dev = np.max(np.abs(g2 - 1))
    ok &= dev < 1e-9
    parts.append(f"L2 |G-1| {dev:.1e}")
    for L, pattern, bound in ((3, ISO, 0.25), (3, DIR, 0.25), (4, ISO, 0.375), (4, DIR, 0.25)):
        g = gamma(expectation_grid(L, pattern, 4096), sym(L, 24, pattern))
        worst = np.max(1 - g)
        ok &= bool(worst <= bound and np.all(g <= 1 + 1e-9))
        parts.append(f"L{L} {pattern.value[:3]} max(1-G) {worst:.4f}<={bound}")
    report(4, "coupling factor bounds", bool(ok), ", ".join(parts))
    assert ok


def test_c05_asymptotic_factorization():
    th = (np.arange(16) + 0.5) * 2 * np.pi / 16
    parts, ok = [], True
    for pattern in (ISO, DIR):
        rel = []
        for N in (24, 48, 96):
            cfg = sym(4, N, pattern)
            ex = crb_exact(th, cfg)
            rel.append(np.abs(ex - crb_approx(th, cfg)) / ex)
        rel = np.array(rel)
        mono = np.all(np.diff(rel, axis=0) < 0, axis=0)
        ok &= bool(mono.all() and rel[-1].max() < 0.10)
        parts.append(
            f"{pattern.value}: monotone at {mono.sum()}/16 angles, max err {rel.max(axis=1).round(4).tolist()}"
        )
    if not ok:
        NOTES.append(
            "Criterion 5: the relative gap between the exact and factorized CRB carries an O(1/M) "
            "ripple whose sign changes with theta, so for the directive pattern it is not monotone "
            "in N at every fixed angle. The worst-case gap over the 16 angles still decreases "
            "with N and stays below 10% at N = 96."
        )
    report(5, "approximate CRB convergence (L=4)", bool(ok), "; ".join(parts))
    assert ok


def test_c06_closed_form_convergence():
    parts, ok = [], True
    e_exp = {}
    for L, pattern in CONFIGS:
        th = expectation_grid(L, pattern, 360)
        th = th[interior_mask(th, L, np.deg2rad(5))]
        Ns = (24, 48, 96)
        means = []
        for N in Ns:
            rep = crb_report(th, sym(L, N, pattern))
            means.append(np.mean(rep.e_def))
        lit = rep.r2_closed > 0
        r_err = np.max(np.abs(rep.r2_def - rep.r2_closed)[lit] / rep.r2_closed[lit])
        e_err = np.max(np.abs(rep.e_def - rep.e_closed) / rep.e_closed)
        ok &= bool(r_err < 0.10 and e_err < 0.10)
        e_exp[(L, pattern.value)] = np.polyfit(np.log(Ns), np.log(means), 1)[0]
        parts.append(f"L{L} {pattern.value[:3]} r2 {r_err:.4f} e {e_err:.4f}")
    exps = ", ".join(f"L{L} {p[:3]} {v:.3f}" for (L, p), v in e_exp.items())
    NOTES.append(
        f"Criterion 6: measured N-exponent of the definitional probing power e: {exps}. "
        "The probing power grows linearly in N (e = P_tr N sum_l F_l^2 / L to leading order), "
        "whereas the tabulated scaling summary lists N^2 for e. The equation-level forms and the "
        "computed values agree on the linear law; the N^2 entry is treated as a typo."
    )
    report(6, "closed forms at N=96 (interior theta)", bool(ok), "max rel err " + ", ".join(parts))
    assert ok


def _phase_coef(L, pattern, N, points=4096):
    th = expectation_grid(L, pattern, points)
    r2 = crb_report(th, sym(L, N, pattern)).r2_def / N**3
    if (L, pattern) != (3, ISO):
        return float(np.mean(r2))
    lit = illuminated(PatternSpec(pattern, L), th).sum(axis=-1)
    return float(np.mean(r2[lit == 1])), float(np.mean(r2[lit == 2]))


def test_c07_scaling_laws():
    t0 = time.perf_counter()
    table = {(2, ISO): 0.102, (2, DIR): 0.102, (3, ISO): (0.061, 0.121), (3, DIR): 0.116,
             (4, ISO): 0.102, (4, DIR): 0.116}
    parts, ok = [], True
    for (L, pattern), ref in table.items():
        # N must be a multiple of L; L = 3 uses the nearest admissible sizes
        Ns = [16, 24, 32, 48, 64] if L != 3 else [15, 24, 33, 48, 63]
        th = expectation_grid(L, pattern, 4096)
        means = [np.mean(crb_report(th, sym(L, N, pattern)).r2_def) for N in Ns]
        slope = np.polyfit(np.log(Ns), np.log(means), 1)[0]
        coef = _phase_coef(L, pattern, Ns[-1])
        rel = np.max(np.abs(np.array(coef) - np.array(ref)) / np.array(ref))
        ok &= bool(abs(slope - 3.0) <= 0.1 and rel <= 0.03)
        parts.append(f"L{L} {pattern.value[:3]} slope {slope:.3f} coef {np.round(coef, 4).tolist()} ({rel:.1%})")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    report(7, "r^2 scaling slope and coefficients", bool(ok), "; ".join(parts) + f"; {dt:.1f} s")
    assert ok


def test_c08_pattern_gain_ratio():
    parts, ok = [], True
    for L, target, tol in ((4, 1.50, 0.03), (3, 1.33, 0.04)):
        e = [np.mean(crb_report(expectation_grid(L, p), sym(L, 60, p)).e_def) for p in (ISO, DIR)]
        ratio = e[1] / e[0]
        good = abs(ratio - target) <= tol
        ok &= bool(good)
        parts.append(f"L{L} {ratio:.4f} (target {target} +- {tol})")
    if not ok:
        NOTES.append(
            "Criterion 8: for L = 3 the theta-averaged directive/isotropic probing-power ratio "
            "is 4/pi = 1.273 analytically, and the computed 1.276 at N = 60 agrees with that. The "
            "tabulated 1.33 is met only by the isotropic two-sector phase alone (1.345 P_tr N), "
            "not by the average over both phases."
        )
    report(8, "directive/isotropic e ratio at N=60", bool(ok), "; ".join(parts))
    assert ok


def test_c09_mse_matches_crb():
    th = tuple((np.arange(24) + 0.5) * np.deg2rad(15))
    t0 = time.perf_counter()
    parts, ok = [], True
    for pattern in (ISO, DIR):
        rows = run_sweep("mse_theta", TrialPlan(sym(4, 24, pattern), th, 500, base_seed=7))
        r = np.array([x.mse / x.crb_exact for x in rows])
        ok &= bool(np.all((r >= 0.5) & (r <= 4)))
        parts.append(f"{pattern.value} MSE/CRB in [{r.min():.3f}, {r.max():.3f}]")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    report(9, "MSE vs CRB at 45 dBm (L=4, N=24)", bool(ok), "; ".join(parts) + f"; {dt:.0f} s")
    assert ok


def test_c10_blind_spot():
    plan = TrialPlan(sym(2, 24), tuple(np.deg2rad([45.0, 89.0])), 500, base_seed=10)
    rows = run_sweep("mse_theta", plan)
    crb_ratio = rows[1].crb_exact / rows[0].crb_exact
    mse_ratio = rows[1].mse / rows[0].mse
    ok = crb_ratio > 100 and mse_ratio > 10
    report(10, "L=2 blind spot at 89 deg", ok, f"CRB ratio {crb_ratio:.0f}, MSE ratio {mse_ratio:.3g}")
    assert ok


def test_c11_sector_ranking():
    parts, ok = [], True
    for pattern in (ISO, DIR):
        cfg = sym(4, 60, pattern).with_(p_tr=1.0)
        rows = run_sweep("sector_sweep", TrialPlan(cfg), with_mse=False)
        crb = [r.crb_exact for r in rows]
        ok &= bool(crb[2] < min(crb[0], crb[1]))
        if pattern is DIR:
            ok &= all(a > b for a, b in zip(crb, crb[1:]))
        parts.append(f"{pattern.value} L2..L6 " + " ".join(f"{c:.3g}" for c in crb))
    report(11, "overall CRB ranking over L (N=60, 30 dBm)", bool(ok), "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_c12_threshold_offset():
    th = tuple((np.arange(24) + 0.5) * np.deg2rad(15))
    powers = np.arange(20, 51)
    t0 = time.perf_counter()
    first = {}
    for pattern in (ISO, DIR):
        plan = TrialPlan(sym(4, 24, pattern), th, 200, base_seed=12, workers=0)
        rows = run_sweep("power_sweep", plan, powers_dbm=powers)
        r = np.array([x.mse / x.crb_exact for x in rows])
        first[pattern] = int(powers[np.argmax(r < 4)]) if (r < 4).any() else None
    dt = time.perf_counter() - t0
    offset = None if None in first.values() else first[ISO] - first[DIR]
    ok = offset is not None and 4 <= offset <= 6 and dt < 1200
    if not ok:
        NOTES.append(
            "Criterion 12: the directive pattern reaches the MSE/CRB < 4 regime earlier, but by "
            f"{offset} dB rather than 4-6 dB. The offset tracks the directive gain in ||mu||^2 "
            "at L = 4, N = 24 (about 3.5 dB averaged over theta), and it is unchanged with "
            "100 trials on a 1024-point grid or 200 trials on a 4096-point grid."
        )
    report(12, "threshold offset directive vs isotropic", ok,
           f"first P with MSE/CRB<4: iso {first[ISO]} dBm, dir {first[DIR]} dBm, offset {offset} dB; {dt:.0f} s")
    assert ok


def test_c13_cross_sector_decay():
    rng = _rng(13)
    n_bound = n_beta = total = 0
    worst_beta = {}
    for M in (16, 32, 64):
        count = 0
        geoms = {}
        while count < 1024:
            L = int(rng.integers(3, 7))
            theta = rng.uniform(0, 2 * np.pi)
            lit = np.flatnonzero(illuminated(PatternSpec(ISO, L), theta)) + 1
            if lit.size < 2:
                continue
            l1, l2 = rng.choice(lit, 2, replace=False)
            cfg = sym(L, L * M)
            geom = geoms.setdefault(L, build_geometry(cfg))
            rec = cross_sector_decay(theta, int(l1), int(l2), cfg, geom)
            n_bound += rec.actual <= rec.bound + 1e-12
            floor = np.cos(np.pi / L) * np.sin(np.pi / L)
            n_beta += abs(rec.beta2) >= floor
            if abs(rec.beta2) < floor:
                worst_beta[L] = min(worst_beta.get(L, 1.0), abs(rec.beta2))
            count += 1
        total += count
    ok = n_bound == total and n_beta == total
    if not ok:
        NOTES.append(
            "Criterion 13: the decay bound 1/(M sin(pi |beta2|)) holds at every sample, but the "
            "claimed floor |beta2| >= cos(pi/L) sin(pi/L) fails for L >= 5. For a lit adjacent "
            "pair the true floor is sin^2(pi/L), reached at the edge of the weaker sector, and it "
            "is below cos(pi/L) sin(pi/L) once L > 4. Smallest violating |beta2|: "
            + ", ".join(f"L{L} {v:.3f}" for L, v in sorted(worst_beta.items()))
        )
    report(13, "cross-sector decay (L in 3..6, M in 16/32/64)", ok,
           f"bound holds {n_bound}/{total}, beta2 floor holds {n_beta}/{total}")
    assert ok


def test_c14_cli_determinism(tmp_path):
    base = {"sectors": 4, "m_i": 6, "m_s": 6, "pattern": "directive"}
    docs = {
        "crb": dict(base),
        "mse": dict(base, theta_grid={"values_rad": [0.3, 1.1, 2.5]}, mse={"trials": 20, "seed": 3}),
        "scaling": dict(base, scaling={"n_values": [16, 24, 32], "points": 512}),
        "codebook": dict(base),
        "estimate": dict(base),
        "sweep": dict(base, theta_grid={"points": 36}, mse={"trials": 5, "grid_points": 512},
                      sweep={"kind": "power", "powers_dbm": [30, 40]}),
        "sweep-sector": dict(base, m_i=15, m_s=15, sweep={"kind": "sector", "with_mse": False}),
    }
    cfg = SystemConfig(L=4, M_I=6, M_S=6, pattern=DIR)
    obs = tmp_path / "y.csv"
    with open(obs, "w", newline="") as fh:
        write_observation(observe(1.3, cfg, 99), fh)
    same = []
    for name, doc in docs.items():
        scn = tmp_path / f"{name}.json"
        scn.write_text(json.dumps(doc))
        cmd = name.split("-")[0]
        outs = []
        for run in range(2):
            out = tmp_path / f"{name}.{run}.out"
            argv = [cmd, str(scn)] + ([str(obs)] if cmd == "estimate" else []) + ["--out", str(out)]
            assert main(argv) == 0
            outs.append(out.read_bytes())
        same.append((name, outs[0] == outs[1] and len(outs[0]) > 0))
    ok = all(s for _, s in same)
    report(14, "CLI byte-identical reruns", ok, ", ".join(f"{n} {'same' if s else 'DIFF'}" for n, s in same))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
