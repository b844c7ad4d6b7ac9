"""Scenario files: JSON documents with unit-suffixed keys.

Example::

    {
      "sectors": 4, "m_i": 6, "m_s": 6, "pattern": "directive",
      "p_tr_dbm": 45, "sigma2_dbm": -80, "f_c_hz": 5.19e9, "rho_m": 519,
      "alpha_t_db": 0, "d_ci_m": 0.5,
      "theta_grid": {"points": 360},
      "mse": {"trials": 500, "seed": 1},
      "output": {"path": "crb.csv"}
    }

Unknown keys anywhere in the document are rejected. Powers are converted
from dBm to watts once, here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import Pattern, SystemConfig, db_to_amplitude, dbm_to_watt
from .errors import DomainError

TOP_KEYS = {
    "sectors", "m_i", "m_s", "q", "pattern", "p_tr_dbm", "sigma2_dbm", "f_c_hz",
    "rho_m", "alpha_t_db", "d_ci_m", "zeta_src_rad",
    "theta_grid", "mse", "scaling", "sweep", "output",
}
BLOCK_KEYS = {
    "theta_grid": {"points", "values_rad"},
    "mse": {"trials", "seed", "grid_points", "refine", "workers"},
    "scaling": {"n_values", "sectors", "patterns", "points"},
    "sweep": {"kind", "powers_dbm", "sectors", "with_mse"},
    "output": {"path"},
}
REQUIRED = ("sectors", "m_i", "m_s")


class ScenarioError(DomainError):
    """Malformed scenario document."""


@dataclass(frozen=True)
class Scenario:
    cfg: SystemConfig
    blocks: dict = field(default_factory=dict)

    def block(self, name: str) -> dict | None:
        return self.blocks.get(name)

    def require(self, name: str) -> dict:
        if name not in self.blocks:
            raise ScenarioError(f"scenario needs a '{name}' block for this command")
        return self.blocks[name]

    @property
    def output_path(self) -> str | None:
        return (self.blocks.get("output") or {}).get("path")


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def parse_scenario(doc: dict) -> Scenario:
    _check_keys(doc, TOP_KEYS, "scenario")
    missing = [k for k in REQUIRED if k not in doc]
    if missing:
        raise ScenarioError(f"scenario is missing required key(s): {', '.join(missing)}")
    for name, allowed in BLOCK_KEYS.items():
        if name in doc:
            _check_keys(doc[name], allowed, f"'{name}' block")
    try:
        pattern = Pattern(doc.get("pattern", "isotropic"))
    except ValueError as exc:
        raise ScenarioError(f"pattern must be 'isotropic' or 'directive', got {doc['pattern']!r}") from exc
    kwargs = dict(
        L=int(doc["sectors"]),
        M_I=int(doc["m_i"]),
        M_S=int(doc["m_s"]),
        Q=None if doc.get("q") is None else int(doc["q"]),
        pattern=pattern,
        p_tr=dbm_to_watt(float(doc.get("p_tr_dbm", 45.0))),
        sigma2=dbm_to_watt(float(doc.get("sigma2_dbm", -80.0))),
        f_c=float(doc.get("f_c_hz", 5.19e9)),
        rho=float(doc.get("rho_m", 519.0)),
        alpha_t=complex(db_to_amplitude(float(doc.get("alpha_t_db", 0.0)))),
        d_ci=float(doc.get("d_ci_m", 0.5)),
        zeta_src=float(doc.get("zeta_src_rad", 0.0)),
    )
    cfg = SystemConfig(**kwargs)
    blocks = {k: dict(doc[k]) for k in BLOCK_KEYS if k in doc}
    return Scenario(cfg, blocks)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(doc)


def power_list(spec) -> list[float]:
    """Accept an explicit list or {"start", "stop", "step"} (stop inclusive)."""
    if isinstance(spec, dict):
        _check_keys(spec, {"start", "stop", "step"}, "'powers_dbm'")
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec.get("step", 1.0))
        if step <= 0:
            raise ScenarioError("powers_dbm step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return [float(p) for p in spec]
