"""Scenario configuration, CLI entry points, and result files.

Config files are flat INI-style key = value text with sections [econ],
[climate], [solver], [robust], [randomization]; every key is optional
and missing keys take the benchmark defaults.  All numeric output is
written with shortest round-trip formatting so identical configs
reproduce byte-identical files.

Exit codes: 0 success, 2 config error, 3 solver error, 4 ordering
failure from the compare command.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, regimes, robust as robust_mod
from .climate_econ import (ClimateParams, EconParams, TechCurve,
                           discounted_flow_integral)
from .itm_core import TimeGrid
from .regimes import RegimeSolution, compare_regimes, solve_regime
from .robust import RandomizationSpec, RobustParams, alpha_sweep, randomized_bands

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ORDERING = 4

ENV_CONFIG = "CLIMGAME_CONFIG"

CSV_COLUMNS = ["t", "C1", "C2", "B1", "B2", "K1", "K2", "Ra", "Rb",
               "P", "T", "S", "Temp", "G1", "G2", "G"]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_SCHEMA = {
    "econ": {"rho", "rho1", "rho2", "A_bar", "sigma1", "sigma2", "gamma1",
             "gamma2", "eta_K", "eta_B", "theta1", "theta2", "g0", "g_inf",
             "h0", "h_inf"},
    "climate": {"phi", "phi_L", "phi_0", "S_bar", "P0", "T0"},
    "solver": {"t_end", "n_grid", "tail_eps"},
    "robust": {"alpha", "gamma1_hat", "gamma2_hat"},
    "randomization": {"n_draws", "seed"},
}

_DEFAULT_RHO = -10.0 * math.log(0.96)


@dataclass
class ScenarioConfig:
    """Fully resolved scenario: benchmark defaults plus file overrides."""

    rho1: float = _DEFAULT_RHO
    rho2: float = _DEFAULT_RHO
    A_bar: float = 10.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    gamma1: float = 0.0125
    gamma2: float = 0.0125
    eta_K: float = 1.0
    eta_B: float = 1.0
    theta1: float = 0.5
    theta2: float = 0.5
    g0: float = 0.2
    g_inf: float = 0.5
    h0: float = 0.5
    h_inf: float = 0.9
    phi: float = 0.5
    phi_L: float = 0.2
    phi_0: float = 0.393
    S_bar: float = 1.0
    P0: float = 0.5
    T0: float = 0.5
    t_end: float = 50.0
    n_grid: int = 512
    tail_eps: float = 1e-8
    alpha: float = 1.0
    gamma1_hat: float = 0.0125
    gamma2_hat: float = 0.0125
    n_draws: int = 1000
    seed: int = 42
    climate_defaults_used: bool = True

    def econ(self) -> EconParams:
        try:
            return EconParams(A_bar=self.A_bar, sigma1=self.sigma1,
                              sigma2=self.sigma2, gamma1=self.gamma1,
                              gamma2=self.gamma2, rho1=self.rho1,
                              rho2=self.rho2, eta_K=self.eta_K,
                              eta_B=self.eta_B, theta1=self.theta1,
                              theta2=self.theta2,
                              g_fn=TechCurve(self.g0, self.g_inf),
                              h_fn=TechCurve(self.h0, self.h_inf))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def climate(self) -> ClimateParams:
        try:
            return ClimateParams(phi=self.phi, phi_L=self.phi_L,
                                 phi_0=self.phi_0, S_bar=self.S_bar,
                                 P0=self.P0, T0=self.T0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self) -> TimeGrid:
        # the horizon must push the discount tail below tail_eps
        min_rho = min(self.rho1, self.rho2)
        needed = -math.log(self.tail_eps) / min_rho
        if self.t_end < needed:
            logger.warning("t_end=%g leaves a discount tail above tail_eps "
                           "(need >= %.1f)", self.t_end, needed)
        return TimeGrid(0.0, self.t_end, self.n_grid)

    def robust(self) -> RobustParams:
        try:
            return RobustParams(alpha=self.alpha, gamma1_hat=self.gamma1_hat,
                                gamma2_hat=self.gamma2_hat)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def randomization(self) -> RandomizationSpec:
        try:
            return RandomizationSpec(n_draws=self.n_draws, seed=self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self):
        self.econ()
        self.climate()
        self.robust()
        self.randomization()
        if self.n_grid < 2:
            raise ConfigError("n_grid must be >= 2")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")

    def serialize(self) -> str:
        lines = []
        for section, keys in _SCHEMA.items():
            lines.append(f"[{section}]")
            for key in sorted(keys):
                if key in ("rho", "rho1", "rho2") and section == "econ":
                    continue
                lines.append(f"{key} = {_fmt(getattr(self, key))}")
            if section == "econ":
                lines.append(f"rho1 = {_fmt(self.rho1)}")
                lines.append(f"rho2 = {_fmt(self.rho2)}")
            lines.append("")
        return "\n".join(lines)

    def hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isinf(v):
        return "inf"
    return repr(float(v))


def load_config(path: Optional[str | Path]) -> ScenarioConfig:
    """Read, validate, and default-fill a scenario file.

    `path` None falls back to the CLIMGAME_CONFIG environment variable
    and then to pure defaults.  Unknown sections or keys, unparsable
    numbers, and constraint violations raise ConfigError naming the
    offending key.
    """
    cfg = ScenarioConfig()
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        cfg.validate()
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    saw_climate_initials = False
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            canonical = _canonical_key(section, key)
            if canonical is None:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            value = _parse_value(section, canonical, raw)
            if canonical == "rho":
                cfg.rho1 = value
                cfg.rho2 = value
            else:
                setattr(cfg, canonical, value)
            if canonical in ("S_bar", "P0", "T0"):
                saw_climate_initials = True
    cfg.climate_defaults_used = not saw_climate_initials
    if cfg.climate_defaults_used:
        logger.warning("climate initial stocks not configured; using "
                       "normalized defaults (S_bar=1, P0=T0=0.5) - override "
                       "them for quantitative runs")
    cfg.validate()
    return cfg


def _canonical_key(section: str, key: str) -> Optional[str]:
    for cand in _SCHEMA[section]:
        if cand.lower() == key.lower():
            return cand
    return None


def _parse_value(section: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if key in ("n_grid", "n_draws", "seed"):
            return int(raw)
        if key == "alpha" and raw.lower() in ("inf", "infinity"):
            return math.inf
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {section}.{key} = {raw!r}") from exc


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_fmt)
                    + "\n")


def _write_manifest(outdir: Path, cfg: ScenarioConfig, started: float,
                    diagnostics: dict) -> None:
    manifest = {
        "config_hash": cfg.hash(),
        "tool_version": __version__,
        "wall_clock_s": time.time() - started,
        "diagnostics": diagnostics,
    }
    _write_json(outdir / "manifest.json", manifest)


def _solution_rows(sol: RegimeSolution):
    t = sol.grid.times
    for j in range(sol.grid.n_points):
        u = sol.allocation[j]
        yield (t[j], u[0], u[1], u[2], u[3], u[4], u[5], u[6], u[7],
               sol.P[j], sol.T[j], sol.S[j], sol.temperature[j],
               sol.G1[j], sol.G2[j], sol.G[j])


def run(regime: str, cfg: ScenarioConfig, outdir: Path) -> RegimeSolution:
    """Solve one regime and write timeseries.csv + summary.json."""
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    sol = solve_regime(regime, cfg.econ(), cfg.climate(), cfg.grid())
    _write_csv(outdir / "timeseries.csv", CSV_COLUMNS, _solution_rows(sol))
    summary = {
        "regime": sol.regime,
        "U1": sol.U1,
        "U2": sol.U2,
        "U": sol.U,
        "final_temperature": float(sol.temperature[-1]),
        "diagnostics": _jsonable(sol.diagnostics),
    }
    _write_json(outdir / "summary.json", summary)
    _write_manifest(outdir, cfg, started, {"regime": sol.regime})
    return sol


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return float(obj)
    return obj


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

_SWEEPABLE = {k for keys in _SCHEMA.values() for k in keys} | {"sigma",
                                                               "gamma_split"}


def _apply_axis(cfg: ScenarioConfig, axis: str, raw_value: str) -> ScenarioConfig:
    new = dataclasses.replace(cfg)
    if axis == "sigma":
        v = float(raw_value)
        new.sigma1 = v
        new.sigma2 = v
    elif axis == "gamma_split":
        try:
            g1, g2 = (float(p) for p in raw_value.split(":"))
        except ValueError as exc:
            raise ConfigError("gamma_split values must look like "
                              "'0.0075:0.0175'") from exc
        new.gamma1 = g1
        new.gamma2 = g2
    elif axis == "rho":
        v = float(raw_value)
        new.rho1 = v
        new.rho2 = v
    else:
        setattr(new, axis, type(getattr(new, axis))(float(raw_value)))
    return new


def sweep(axis: str, values: Sequence[str], regime_list: Sequence[str],
          cfg: ScenarioConfig, outdir: Path) -> list[dict]:
    """One regime solve per (axis value, regime); failures become rows."""
    if axis not in _SWEEPABLE:
        raise ConfigError(f"axis '{axis}' is not a sweepable config key")
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rows = []
    records = []
    for raw in values:
        for regime in regime_list:
            try:
                pt_cfg = _apply_axis(cfg, axis, raw)
                pt_cfg.validate()
                sol = solve_regime(regime, pt_cfg.econ(), pt_cfg.climate(),
                                   pt_cfg.grid())
                g_total = float(np.sum(sol.G[:-1]) * sol.grid.dt)
                rec = {"axis": axis, "value": raw, "regime": regime,
                       "final_temperature": float(sol.temperature[-1]),
                       "total_emissions": g_total,
                       "emission_flow": float(sol.G[0]),
                       "U1": sol.U1, "U2": sol.U2, "U": sol.U, "error": ""}
            except Exception as exc:
                rec = {"axis": axis, "value": raw, "regime": regime,
                       "final_temperature": math.nan,
                       "total_emissions": math.nan,
                       "emission_flow": math.nan,
                       "U1": math.nan, "U2": math.nan, "U": math.nan,
                       "error": str(exc)}
            records.append(rec)
            rows.append([rec["axis"], rec["value"], rec["regime"],
                         rec["final_temperature"], rec["total_emissions"],
                         rec["emission_flow"], rec["U1"], rec["U2"],
                         rec["U"], rec["error"]])
    _write_csv(outdir / "sweep.csv",
               ["axis", "value", "regime", "final_temperature",
                "total_emissions", "emission_flow", "U1", "U2", "U", "error"],
               rows)
    _write_manifest(outdir, cfg, started,
                    {"axis": axis, "n_points": len(values),
                     "regimes": list(regime_list)})
    return records


# ---------------------------------------------------------------------------
# robust / randomize / compare commands
# ---------------------------------------------------------------------------

def robust_cmd(regime: str, alphas: Sequence[float], cfg: ScenarioConfig,
               outdir: Path) -> list:
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    points = alpha_sweep(regime, cfg.robust(), alphas, cfg.econ(),
                         cfg.climate(), cfg.grid())
    grid = cfg.grid()
    header = ["t"] + [f"temp_alpha_{_fmt_alpha(p.alpha)}" for p in points]
    rows = []
    for j, t in enumerate(grid.times):
        row = [t]
        for p in points:
            row.append(p.temperature[j] if p.temperature is not None
                       else math.nan)
        rows.append(row)
    _write_csv(outdir / f"robust_{regime}.csv", header, rows)
    summary = []
    for p in points:
        entry = {"alpha": _fmt_alpha(p.alpha), "error": p.error}
        if p.solution is not None:
            entry.update({"gamma1": p.solution.gamma1,
                          "gamma2": p.solution.gamma2,
                          "emission_flow": p.emission_flow,
                          "final_temperature": float(p.temperature[-1])})
        summary.append(entry)
    _write_json(outdir / f"robust_{regime}_summary.json", summary)
    _write_manifest(outdir, cfg, started,
                    {"regime": regime, "alphas": [_fmt_alpha(a) for a in alphas]})
    return points


def _fmt_alpha(a: float) -> str:
    return "inf" if math.isinf(a) else _fmt(a)


def randomize_cmd(regime: str, cfg: ScenarioConfig, outdir: Path,
                  naive: bool = False):
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    band = randomized_bands(regime, cfg.randomization(), cfg.robust(),
                            cfg.econ(), cfg.climate(), cfg.grid(),
                            naive=naive)
    rows = zip(band.times, band.lower, band.median, band.upper)
    _write_csv(outdir / f"bands_{regime}.csv",
               ["t", "lower", "median", "upper"], rows)
    _write_manifest(outdir, cfg, started,
                    {"regime": regime, "n_draws": band.n_draws,
                     "n_failures": band.n_failures, "naive": naive})
    return band


def compare_cmd(cfg: ScenarioConfig, outdir: Path) -> tuple[int, dict]:
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    econ = cfg.econ()
    if econ.sigma1 != 1.0 or econ.sigma2 != 1.0:
        raise ConfigError("compare requires logarithmic utility "
                          "(sigma1 = sigma2 = 1); the orderings are proven "
                          "only for that case")
    from .climate_econ import phi_constant
    report = compare_regimes(econ, phi_constant(econ.rho, cfg.climate()))
    payload = {
        "orderings": report.orderings,
        "precondition_value": report.precondition_value,
        "precondition_bound": report.precondition_bound,
        "precondition_holds": report.precondition_holds,
        "conditional_checked": report.conditional_checked,
        "all_unconditional_hold": report.all_unconditional_hold,
    }
    _write_json(outdir / "compare.json", payload)
    _write_manifest(outdir, cfg, started,
                    {"all_unconditional_hold": report.all_unconditional_hold})
    code = EXIT_OK if report.all_unconditional_hold else EXIT_ORDERING
    return code, payload


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="climgame",
        description="Solve the two-country climate-economy model under "
                    "planner, restricted-planner, and Nash arrangements.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None,
                        help=f"scenario file (default: ${ENV_CONFIG} or "
                             "built-in benchmark values)")
        sp.add_argument("--out", default="out", help="output directory")

    sp = sub.add_parser("run", help="solve one regime and write time series")
    sp.add_argument("--regime", required=True, choices=["gp", "rp", "nash"])
    common(sp)

    sp = sub.add_parser("sweep", help="vary one config key across regimes")
    sp.add_argument("--axis", required=True)
    sp.add_argument("--values", required=True,
                    help="comma-separated values (gamma_split uses g1:g2)")
    sp.add_argument("--regimes", default="gp,rp,nash")
    common(sp)

    sp = sub.add_parser("robust", help="penalty-level sweep of a robust regime")
    sp.add_argument("--regime", required=True, choices=["gp", "rp", "nash"])
    sp.add_argument("--alphas", required=True,
                    help="comma-separated penalties; 'inf' allowed")
    common(sp)

    sp = sub.add_parser("randomize",
                        help="percentile bands under benchmark draws")
    sp.add_argument("--regime", required=True, choices=["gp", "rp", "nash"])
    sp.add_argument("--draws", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--naive", action="store_true",
                    help="use the drawn sensitivities directly instead of "
                         "the worst-case response")
    common(sp)

    sp = sub.add_parser("compare",
                        help="verify the cross-regime orderings (log utility)")
    common(sp)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.out)
    try:
        if args.command == "run":
            sol = run(args.regime, cfg, outdir)
            print(f"{args.regime}: U={sol.U:.6g} "
                  f"final_temp={sol.temperature[-1]:.6g}")
            return EXIT_OK
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            regime_list = [r.strip() for r in args.regimes.split(",")
                           if r.strip()]
            records = sweep(args.axis, values, regime_list, cfg, outdir)
            n_err = sum(1 for r in records if r["error"])
            print(f"sweep: {len(records)} points, {n_err} failures")
            return EXIT_OK
        if args.command == "robust":
            alphas = [math.inf if v.strip().lower() == "inf" else float(v)
                      for v in args.alphas.split(",") if v.strip()]
            points = robust_cmd(args.regime, alphas, cfg, outdir)
            n_err = sum(1 for pt in points if pt.error)
            print(f"robust {args.regime}: {len(points)} alphas, "
                  f"{n_err} failures")
            return EXIT_OK if n_err == 0 else EXIT_SOLVER
        if args.command == "randomize":
            if args.draws is not None:
                cfg.n_draws = args.draws
            if args.seed is not None:
                cfg.seed = args.seed
            cfg.validate()
            band = randomize_cmd(args.regime, cfg, outdir, naive=args.naive)
            print(f"randomize {args.regime}: {band.n_draws} draws, "
                  f"{band.n_failures} failures")
            return EXIT_OK
        if args.command == "compare":
            code, payload = compare_cmd(cfg, outdir)
            status = "ok" if code == EXIT_OK else "ORDERING FAILURE"
            print(f"compare: {status} (precondition holds: "
                  f"{payload['precondition_holds']})")
            return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
