"""Command-line driver: configuration, runs, sweeps and CSV/VTK output.

Configuration comes from an optional ``key = value`` file overridden by
command-line flags::

    pfaccel --case tensile --mode combined --depth 1 --omega 1.6 --out results/
    pfaccel --config run.cfg --sweep-depth 0,1,2 --sweep-omega 1.0,1.3,1.6

Exit status is 0 when every loading step converged, 2 when some step hit the
iteration cap and 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import os
import sys
from dataclasses import dataclass, field

from . import bench
from .mesh import write_vtk
from .staggered import SimulationReport, SolverConfig, run_simulation

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "run_specs",
    "write_iteration_csv",
    "write_load_csv",
    "write_residual_csv",
    "main",
]

log = logging.getLogger("pfaccel")

_TOLERANCES = ("tol_res_abs", "tol_res_rel", "tol_inc_abs", "tol_inc_rel", "tol_inner")


class ConfigError(ValueError):
    """Malformed or invalid configuration value."""


@dataclass(frozen=True)
class RunConfig:
    case: str = "tensile"
    profile: str = "desk"
    mode: str = "combined"
    depth: int = 1
    omega: float = 1.6
    n_switch: int = 5
    max_iter: int = 1000
    steps: int | None = None
    tolerances: dict = field(default_factory=dict)
    out: str = "pfaccel-out"
    vtk: bool = False
    sweep_depth: tuple = ()
    sweep_omega: tuple = ()

    def solver_config(self, depth: int | None = None, omega: float | None = None) -> SolverConfig:
        return SolverConfig(
            max_iter=self.max_iter,
            depth_m=self.depth if depth is None else depth,
            omega=self.omega if omega is None else omega,
            n_switch=self.n_switch,
            mode=self.mode,
            **self.tolerances,
        )


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONVERTERS = {
    "case": str,
    "profile": str,
    "mode": str,
    "depth": int,
    "omega": float,
    "n_switch": int,
    "max_iter": int,
    "steps": int,
    "out": str,
    "vtk": _bool,
    "sweep_depth": _int_list,
    "sweep_omega": _float_list,
    **{k: float for k in _TOLERANCES},
}


def _read_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pfaccel", description="Accelerated staggered phase-field fracture runs.")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--case", help="tensile, shear or lshape")
    p.add_argument("--profile", help="desk or paper")
    p.add_argument("--mode", help="plain, anderson, relax or combined")
    p.add_argument("--depth", type=str, help="Anderson depth m")
    p.add_argument("--omega", type=str, help="relaxation factor in (0, 2)")
    p.add_argument("--n-switch", type=str, help="non-increasing residuals before leaving relaxation")
    p.add_argument("--max-iter", type=str)
    p.add_argument("--steps", type=str, help="run only the first N loading steps")
    for tol in _TOLERANCES:
        p.add_argument("--" + tol.replace("_", "-"), type=str)
    p.add_argument("--out", help="output directory")
    p.add_argument("--vtk", action="store_true", default=None, help="write VTK fields for every step")
    p.add_argument("--sweep-depth", help="comma-separated depths")
    p.add_argument("--sweep-omega", help="comma-separated relaxation factors")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(path=None, argv=None) -> RunConfig:
    """Merge defaults, an optional config file and command-line flags.

    Raises
    ------
    ConfigError
        Naming the offending key for unknown keys, unparsable values or
        values that violate the solver invariants.
    """
    raw: dict = {}
    if path is not None:
        raw.update(_read_file(path))
    if argv is not None:
        ns = _build_parser().parse_args(argv)
        if ns.config:
            raw.update(_read_file(ns.config))
        for key, value in vars(ns).items():
            if key in ("config", "verbose") or value is None:
                continue
            raw[key] = value if isinstance(value, str) else str(value)
    kwargs: dict = {}
    tolerances: dict = {}
    for key, value in raw.items():
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            converted = _CONVERTERS[key](value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
        if key in _TOLERANCES:
            tolerances[key] = converted
        else:
            kwargs[key] = converted
    cfg = RunConfig(tolerances=tolerances, **kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.case not in bench.CASE_NAMES:
        raise ConfigError(f"bad value for 'case': {cfg.case!r}")
    if cfg.profile not in bench.PROFILES:
        raise ConfigError(f"bad value for 'profile': {cfg.profile!r}")
    if cfg.steps is not None and cfg.steps < 0:
        raise ConfigError("bad value for 'steps': must be >= 0")
    for depth, omega in run_specs(cfg):
        try:
            cfg.solver_config(depth, omega)
        except ValueError as exc:
            word = str(exc).split()[0]
            key = {"depth_m": "depth"}.get(word, word)
            if key not in _CONVERTERS:
                key = "mode" if "Mode" in str(exc) else "config"
            raise ConfigError(f"bad value for {key!r}: {exc}") from None


def run_specs(cfg: RunConfig) -> list:
    """``(depth, omega)`` pairs: the Cartesian product of the sweeps, or the single pair."""
    depths = cfg.sweep_depth or (cfg.depth,)
    omegas = cfg.sweep_omega or (cfg.omega,)
    return list(itertools.product(depths, omegas))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_iteration_csv(report: SimulationReport, path) -> None:
    """One row per loading step plus a final ``TOTAL`` row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["load_step", "iterations", "converged", "mode_summary"])
        for s in report.steps:
            w.writerow([s.load_step, s.iterations, int(s.converged), s.mode_summary])
        w.writerow(["TOTAL", report.total_iterations, int(report.all_converged), ""])


def write_load_csv(report: SimulationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["load_step", "applied_displacement", "tau_x", "tau_y"])
        for s in report.steps:
            w.writerow([s.load_step, _fmt(s.applied_displacement), _fmt(s.tau_x), _fmt(s.tau_y)])


def write_residual_csv(report: SimulationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["load_step", "iter", "res_u_norm", "mode"])
        for r in report.records:
            w.writerow([r.load_step, r.iter, _fmt(r.res_u_norm), r.mode])


def read_iteration_csv(path) -> dict:
    """Per-step iteration counts from a file written by :func:`write_iteration_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {int(r["load_step"]): int(r["iterations"]) for r in rows if r["load_step"] != "TOTAL"}


def _tag(depth: int, omega: float) -> str:
    return f"m{depth}_w{omega:g}"


def run(cfg: RunConfig) -> int:
    """Execute every run spec of ``cfg``; returns the exit status."""
    case = bench.get_case(cfg.case, cfg.profile)
    os.makedirs(cfg.out, exist_ok=True)
    specs = run_specs(cfg)
    sweep = len(specs) > 1
    totals = {}
    status = 0
    for depth, omega in specs:
        solver_cfg = cfg.solver_config(depth, omega)
        suffix = f"_{_tag(depth, omega)}" if sweep else ""
        callback = None
        if cfg.vtk:
            def callback(n, state, mesh, suffix=suffix):
                write_vtk(os.path.join(cfg.out, f"fields{suffix}_{n:04d}.vtk"), mesh,
                          {"phi": state.phi}, {"u": state.u.reshape(-1, 2)})
        report = run_simulation(case, solver_cfg, cfg.steps, callback)
        write_iteration_csv(report, os.path.join(cfg.out, f"iterations{suffix}.csv"))
        write_load_csv(report, os.path.join(cfg.out, f"loads{suffix}.csv"))
        write_residual_csv(report, os.path.join(cfg.out, f"residuals{suffix}.csv"))
        totals[(depth, omega)] = report.total_iterations
        log.info("%s m=%d omega=%g: %d iterations, all converged: %s", case.name, depth, omega,
                 report.total_iterations, report.all_converged)
        if not report.all_converged:
            status = 2
    if sweep:
        omegas = sorted({o for _, o in specs})
        depths = sorted({d for d, _ in specs})
        with open(os.path.join(cfg.out, "sweep_summary.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["depth"] + [f"omega={o:g}" for o in omegas])
            for d in depths:
                w.writerow([d] + [totals.get((d, o), "") for o in omegas])
    return status


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = parse_config(argv=argv)
        return run(cfg)
    except SystemExit as exc:
        return 1 if exc.code else 0
    except Exception as exc:  # reported to the user, not re-raised
        print(f"pfaccel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
