"""Command-line front door.

Subcommands: ``simulate`` (full dynamics to CSV), ``reduce`` (shape dynamics
to CSV, optionally co-integrating the full system for a consistency check),
``equilibria`` (closed-form families and the Newton solver, JSON reports),
``stability`` (one classification report), and ``sweep`` (per-cell verdicts
over a parameter grid, CSV).

All commands read a single JSON config (``--config`` or a packaged
``--preset``), write into ``--out``, and are deterministic: identical runs
produce bit-identical files.  Exit codes: 0 success, 1 configuration error,
2 runtime/numerical abort (truncated output is still written when possible).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import coalgebra, dynamics, equilibria, stability
from .integrators import (IntegratorSettings, SingularityError,
                          StepUnderflowError)
from .model import (ChargeConfig, ConfigError, CoadjointPoint, DomainError,
                    PhysicalParams, StateValidationError, VortexError,
                    VortexState, momentum_map, physical_to_scaled)

__all__ = ["main"]


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------

def _load_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


def _preset_path(name: str):
    base = resources.files("vortexlp").joinpath("presets")
    candidate = base.joinpath(f"{name}.json")
    if not candidate.is_file():
        available = sorted(p.name[:-5] for p in base.iterdir()
                           if p.name.endswith(".json"))
        raise ConfigError(f"unknown preset '{name}'; available: {available}")
    return candidate


def parse_problem(config: dict) -> ChargeConfig:
    if "charges" not in config:
        raise ConfigError("config must provide 'charges'")
    has_c = "c" in config
    has_physical = "physical" in config
    if has_c == has_physical:
        raise ConfigError("exactly one of 'c' or 'physical' must be present")
    if has_physical:
        phys = config["physical"]
        try:
            params = PhysicalParams(mu_chem=phys["mu"], omega_tr=phys["omega_tr"],
                                    b=phys["b"])
        except (KeyError, TypeError):
            raise ConfigError("'physical' needs fields 'mu', 'omega_tr', 'b'")
        coupling = physical_to_scaled(params).coupling_c
    else:
        coupling = config["c"]
    return ChargeConfig(config["charges"], coupling)


def parse_positions(config: dict) -> VortexState:
    if "positions" not in config:
        raise ConfigError("config must provide 'positions' as [[x, y], ...]")
    rows = config["positions"]
    try:
        return VortexState([complex(float(x), float(y)) for x, y in rows])
    except (TypeError, ValueError):
        raise ConfigError("'positions' must be a list of [x, y] pairs")


def parse_integrator(config: dict) -> IntegratorSettings:
    section = dict(config.get("integrator", {}))
    try:
        return IntegratorSettings(**section)
    except TypeError as exc:
        raise ConfigError(f"bad integrator settings: {exc}")


def parse_t_span(config: dict):
    span = config.get("t_span")
    if span is None or len(span) != 2:
        raise ConfigError("config must provide 't_span': [t0, t1]")
    return float(span[0]), float(span[1])


def parse_grid_axis(spec) -> np.ndarray:
    if isinstance(spec, (list, tuple)):
        return np.asarray([float(v) for v in spec])
    try:
        return np.linspace(float(spec["min"]), float(spec["max"]), int(spec["count"]))
    except (KeyError, TypeError):
        raise ConfigError("grid axis must be a list or {'min','max','count'}")


def _sample_times(config, t0, t1):
    samples = int(config.get("samples", 0))
    if samples <= 0:
        return None
    if samples == 1:
        return np.asarray([t1])
    return np.linspace(t0, t1, samples)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_simulate(config: dict, outdir: Path) -> int:
    cfg = parse_problem(config)
    z0 = parse_positions(config)
    t0, t1 = parse_t_span(config)
    settings = parse_integrator(config)
    t_eval = _sample_times(config, t0, t1)
    guards = config.get("guards", {})

    status, abort = 0, None
    try:
        traj = dynamics.integrate(cfg, z0, (t0, t1), settings, t_eval=t_eval,
                                  eps_bound=float(guards.get("eps_bound", 1e-9)),
                                  eps_coll=float(guards.get("eps_coll", 1e-9)))
    except (SingularityError, StepUnderflowError) as exc:
        traj = exc.trajectory
        abort = {"abort_time": exc.time, "abort_reason": str(exc)}
        status = 2

    with open(outdir / "trajectory.csv", "w", encoding="utf-8") as fh:
        traj.write_csv(fh)

    summary = {
        "command": "simulate",
        "n": cfg.n,
        "t_span": [t0, t1],
        "samples": int(traj.times.size),
        "energy_drift_max": float(np.max(np.abs(traj.energy - traj.energy[0]))),
        "impulse_drift_max": float(np.max(np.abs(traj.impulse - traj.impulse[0]))),
        "rank_residual_max": float(np.max(traj.rank_residual_inf)),
        "truncated": status != 0,
    }
    if cfg.n == 1 and traj.times.size >= 3:
        phases = np.unwrap(np.angle([s.positions[0] for s in traj.states]))
        total = phases[-1] - phases[0]
        if total != 0.0:
            elapsed = traj.times[-1] - traj.times[0]
            summary["precession_period"] = float(2.0 * np.pi * elapsed / abs(total))
    if abort:
        summary.update(abort)
    _write_json(outdir / "summary.json", summary)
    return status


def cmd_reduce(config: dict, outdir: Path) -> int:
    cfg = parse_problem(config)
    t0, t1 = parse_t_span(config)
    settings = parse_integrator(config)
    t_eval = _sample_times(config, t0, t1)

    z0 = None
    if "mu0" in config:
        mu0 = CoadjointPoint(np.asarray(config["mu0"], dtype=float))
    else:
        z0 = parse_positions(config)
        mu0 = momentum_map(z0)

    status, abort = 0, None
    try:
        traj = coalgebra.integrate_reduced(cfg, mu0, (t0, t1), settings,
                                           t_eval=t_eval)
    except (SingularityError, StepUnderflowError) as exc:
        traj = exc.trajectory
        abort = {"abort_time": exc.time, "abort_reason": str(exc)}
        status = 2

    with open(outdir / "reduced.csv", "w", encoding="utf-8") as fh:
        traj.write_csv(fh)

    summary = {
        "command": "reduce",
        "n": cfg.n,
        "t_span": [t0, t1],
        "samples": int(traj.times.size),
        "h_drift_max": float(np.max(np.abs(traj.energy - traj.energy[0]))),
        "casimir_drift_max": float(np.max(np.abs(traj.casimir - traj.casimir[0]))),
        "rank_residual_max": float(np.max(traj.rank_residual_inf)),
        "truncated": status != 0,
    }
    if config.get("co_integrate") and z0 is not None and status == 0:
        full = dynamics.integrate(cfg, z0, (t0, t1), settings, t_eval=traj.times)
        deviation = 0.0
        for point, state in zip(traj.points, full.states):
            gap = np.abs(point.coords - momentum_map(state).coords)
            deviation = max(deviation, float(np.max(gap)))
        summary["co_deviation_max"] = deviation
    if abort:
        summary.update(abort)
    _write_json(outdir / "summary.json", summary)
    return status


def _report_for_build(cfg, built) -> dict:
    spec = equilibria.RelEqSpec(built.kind, built.params)
    report = stability.classify(cfg, built.mu0, family=spec,
                                z0=built.z0, omega=built.omega)
    return report.to_dict()


def cmd_equilibria(config: dict, outdir: Path) -> int:
    cfg = parse_problem(config)
    section = config.get("equilibria")
    if not isinstance(section, dict) or "kind" not in section:
        raise ConfigError("config must provide 'equilibria': {'kind': ...}")
    kind = str(section["kind"])
    reports = []

    if kind in ("pair_a", "equilateral3", "equilateral_center4"):
        spec = equilibria.RelEqSpec(kind, {"r": section["r"]})
        built = equilibria.build_equilibrium(cfg, spec)
        reports.append(_report_for_build(cfg, built))
    elif kind == "pair_b":
        r1_values = (parse_grid_axis(section["r1_grid"])
                     if "r1_grid" in section else [float(section["r1"])])
        for r1 in r1_values:
            for r2 in equilibria.pair_family_b_solve(cfg, float(r1)):
                spec = equilibria.RelEqSpec(kind, {"r1": float(r1), "r2": float(r2)})
                built = equilibria.build_equilibrium(cfg, spec)
                reports.append(_report_for_build(cfg, built))
    elif kind == "dipole_curve":
        r1_values = (parse_grid_axis(section["r1_grid"])
                     if "r1_grid" in section else [float(section["r1"])])
        for r1 in r1_values:
            for r2 in equilibria.dipole_family_curve(cfg, float(r1)):
                z0 = VortexState([float(r1), -float(r2)])
                omega = equilibria.rotation_rate(cfg, z0)
                report = stability.classify(cfg, momentum_map(z0), z0=z0,
                                            omega=omega)
                reports.append(report.to_dict())
    elif kind == "numeric":
        guess = VortexState([complex(float(x), float(y))
                             for x, y in section["guess_positions"]])
        result = equilibria.newton_relative_equilibrium(
            cfg, guess, float(section.get("omega_guess", 1.0)))
        report = stability.classify(cfg, momentum_map(result.state),
                                    z0=result.state, omega=result.omega)
        payload = report.to_dict()
        payload["newton_iterations"] = result.iterations
        payload["newton_residual"] = result.residual
        reports.append(payload)
    else:
        raise ConfigError(f"unknown equilibria kind '{kind}'")

    _write_json(outdir / "equilibria.json", {"reports": reports})
    return 0


def cmd_stability(config: dict, outdir: Path) -> int:
    cfg = parse_problem(config)
    if "family" in config:
        section = dict(config["family"])
        kind = section.pop("kind")
        spec = equilibria.RelEqSpec(kind, section)
        built = equilibria.build_equilibrium(cfg, spec)
        report = stability.classify(cfg, built.mu0, family=spec,
                                    z0=built.z0, omega=built.omega)
    elif "mu0" in config:
        report = stability.classify(cfg, CoadjointPoint(np.asarray(config["mu0"],
                                                                   dtype=float)))
    else:
        raise ConfigError("stability needs 'family' or 'mu0'")
    _write_json(outdir / "report.json", report.to_dict())
    return 0


def cmd_sweep(config: dict, outdir: Path) -> int:
    cfg = parse_problem(config)
    family = config.get("family")
    if not isinstance(family, dict) or "kind" not in family:
        raise ConfigError("sweep needs 'family': {'kind': ...}")
    grid = config.get("grid")
    if not isinstance(grid, dict) or "param1" not in grid or "param2" not in grid:
        raise ConfigError("sweep needs 'grid': {'param1': ..., 'param2': ...}")
    values1 = parse_grid_axis(grid["param1"])
    values2 = parse_grid_axis(grid["param2"])
    result = stability.sweep(cfg, family["kind"], values1, values2,
                             workers=int(config.get("workers", 1)))
    with open(outdir / "sweep.csv", "w", encoding="utf-8") as fh:
        result.write_csv(fh)
    _write_json(outdir / "sweep_meta.json", {
        "command": "sweep",
        "family": result.kind.value,
        "criterion": result.criterion,
        "param_names": list(result.param_names),
        "shape": [int(values1.size), int(values2.size)],
    })
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "reduce": cmd_reduce,
    "equilibria": cmd_equilibria,
    "stability": cmd_stability,
    "sweep": cmd_sweep,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexlp",
        description="Trapped point-vortex dynamics, reduction, and stability.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        group = cmd.add_mutually_exclusive_group(required=True)
        group.add_argument("--config", type=Path, help="path to a JSON config")
        group.add_argument("--preset", type=str, help="name of a packaged preset")
        cmd.add_argument("--out", type=Path, default=Path("."),
                         help="output directory (created if missing)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="seed for randomized runs (recorded, unused by "
                              "the deterministic commands)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.preset is not None:
            with resources.as_file(_preset_path(args.preset)) as path:
                config = _load_json(path)
        else:
            config = _load_json(args.config)
        outdir = args.out
        outdir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"vortexlp: config error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](config, outdir)
    except ConfigError as exc:
        print(f"vortexlp: config error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, TypeError, ValueError) as exc:
        print(f"vortexlp: config error: {exc!r}", file=sys.stderr)
        return 1
    except (SingularityError, StepUnderflowError, DomainError,
            StateValidationError, equilibria.NewtonError,
            np.linalg.LinAlgError) as exc:
        print(f"vortexlp: runtime abort: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
