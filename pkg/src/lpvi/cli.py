"""Batch experiment runner: ``python -m lpvi {run,table1,sweep}``.

Trajectory CSV columns are ``t, q0..q{d-1}, p0..p{d-1}, h, rel_e_err,
rel_l_err, newton_iters``, one row per stored state starting with the
initial state (whose ``h`` and ``newton_iters`` are 0).  Floats are
written with 17 significant digits so files round-trip exactly.

The run summary is a JSON object with keys ``system, S, mode, steps,
max_rel_e_err, max_rel_l_err, wall_seconds`` (``null`` where an invariant
is undefined).  With ``--format csv`` it goes to ``<output>.summary.json``;
with ``--format json`` it is the output file.  It is echoed to stdout in
both cases.

Exit status: 0 on success, 2 for an invalid configuration, 3 when the
integration fails (the partial trajectory is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .integrator import AdaptiveConfig, IntegrationError, Trajectory, integrate_adaptive, integrate_fixed
from .lagrangian import (
    harmonic_model,
    kepler_initial_state,
    kepler_model,
    outer_solar_initial_state,
    outer_solar_model,
    PhaseState,
)
from .reference import kepler_exact_state
from .stepper import StepConfig, StepError

EXIT_CONFIG = 2
EXIT_FAILED = 3

SYSTEMS = ("harmonic", "kepler", "outer-solar")

# run options: name -> (converter, default, help).  A default of None means
# "not set"; the validation step decides what is required.
RUN_OPTIONS = {
    "system": (str, "kepler", "system to integrate: harmonic, kepler or outer-solar"),
    "eps": (float, 0.5, "Kepler eccentricity in [0, 1)"),
    "S": (int, 3, "polynomial degree of the path"),
    "enforcement": (str, "internal", "residual enforcement: internal or endpoints"),
    "nodes": (str, "uniform", "collocation nodes: uniform or chebyshev-lobatto"),
    "mode": (str, "fixed", "step control: fixed or adaptive"),
    "h": (float, None, "step size (fixed mode only)"),
    "energy_tol": (float, 1e-7, "relative energy tolerance (adaptive mode)"),
    "h_init": (float, 0.01, "initial step (adaptive mode)"),
    "h_min": (float, 1e-8, "smallest allowed step (adaptive mode)"),
    "h_max": (float, 1.0, "largest allowed step (adaptive mode)"),
    "max_steps": (int, None, "step budget (adaptive mode; unlimited if unset)"),
    "t_end": (float, None, "integration span; mutually exclusive with --periods"),
    "periods": (float, None, "span in orbital periods (harmonic, kepler); 1 if neither is set"),
    "output": (str, "trajectory.csv", "output path"),
    "format": (str, "csv", "output format: csv (trajectory) or json (summary only)"),
    "decimate": (int, 1, "store every k-th step (the last step is always stored)"),
}
ADAPTIVE_KEYS = ("energy_tol", "h_init", "h_min", "h_max", "max_steps")
CHOICES = {
    "system": SYSTEMS,
    "enforcement": ("internal", "endpoints"),
    "nodes": ("uniform", "chebyshev-lobatto"),
    "mode": ("fixed", "adaptive"),
    "format": ("csv", "json"),
}
SWEEP_PARAMS = ("S", "h", "energy_tol", "eps")


class ConfigError(ValueError):
    """An experiment configuration is invalid."""


@dataclass(frozen=True)
class Experiment:
    """A validated run configuration."""

    system: str
    eps: float
    S: int
    enforcement: str
    nodes: str
    mode: str
    h: float | None
    adaptive: AdaptiveConfig | None
    t_end: float
    output: str
    format: str
    decimate: int

    @property
    def step_config(self) -> StepConfig:
        return StepConfig(S=self.S, scheme=self.nodes, enforcement=self.enforcement)


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Keys are option names with dashes or underscores (``energy-tol`` or
    ``energy_tol``).
    """
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in RUN_OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _convert(key, value):
    conv = RUN_OPTIONS[key][0]
    if value is None or not isinstance(value, str):
        return value
    try:
        return conv(value)
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {value!r}") from exc


def _period(system):
    if system == "harmonic":
        return harmonic_model().period
    if system == "kepler":
        return kepler_model().period
    return None


def build_experiment(explicit: dict) -> Experiment:
    """Merge defaults with ``explicit`` settings and validate the result.

    ``explicit`` holds only the values the user actually set (config file
    entries overridden by flags); unset adaptive parameters in fixed mode
    and an unset ``h`` in adaptive mode are how the one-of rule is checked.
    """
    given = {k: _convert(k, v) for k, v in explicit.items() if v is not None}
    cfg = {k: spec[1] for k, spec in RUN_OPTIONS.items()}
    cfg.update(given)
    for key, allowed in CHOICES.items():
        if cfg[key] not in allowed:
            raise ConfigError(f"{key} must be one of {', '.join(allowed)}; got {cfg[key]!r}")
    if cfg["mode"] == "fixed":
        if cfg["h"] is None:
            raise ConfigError("fixed mode needs --h")
        extra = [k for k in ADAPTIVE_KEYS if k in given]
        if extra:
            raise ConfigError(f"fixed mode does not take adaptive settings: {', '.join(extra)}")
        if not cfg["h"] > 0:
            raise ConfigError("h must be positive")
        adaptive = None
    else:
        if "h" in given:
            raise ConfigError("adaptive mode does not take --h; use --h-init")
        try:
            adaptive = AdaptiveConfig(energy_tol=cfg["energy_tol"], h_init=cfg["h_init"],
                                      h_min=cfg["h_min"], h_max=cfg["h_max"],
                                      max_steps=cfg["max_steps"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if cfg["system"] == "kepler" and not 0.0 <= cfg["eps"] < 1.0:
        raise ConfigError(f"eps must lie in [0, 1), got {cfg['eps']}")
    if cfg["t_end"] is not None and cfg["periods"] is not None:
        raise ConfigError("give either --t-end or --periods, not both")
    if cfg["t_end"] is not None:
        t_end = cfg["t_end"]
    else:
        period = _period(cfg["system"])
        if period is None:
            raise ConfigError(f"system {cfg['system']} has no period; use --t-end")
        t_end = (1.0 if cfg["periods"] is None else cfg["periods"]) * period
    if not t_end > 0:
        raise ConfigError("the integration span must be positive")
    if cfg["decimate"] < 1:
        raise ConfigError("decimate must be >= 1")
    try:
        StepConfig(S=cfg["S"], scheme=cfg["nodes"], enforcement=cfg["enforcement"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return Experiment(cfg["system"], cfg["eps"], cfg["S"], cfg["enforcement"], cfg["nodes"],
                      cfg["mode"], cfg["h"], adaptive, float(t_end), cfg["output"],
                      cfg["format"], cfg["decimate"])


def system_setup(exp: Experiment):
    """(model, initial state) for the experiment's system."""
    if exp.system == "harmonic":
        return harmonic_model(), PhaseState(0.0, np.array([1.0]), np.array([0.0]))
    if exp.system == "kepler":
        return kepler_model(), kepler_initial_state(exp.eps)
    return outer_solar_model(), outer_solar_initial_state()


def execute(exp: Experiment):
    """Integrate; returns ``(trajectory, error message or None, wall seconds)``."""
    model, initial = system_setup(exp)
    t0 = time.perf_counter()
    try:
        if exp.mode == "fixed":
            n = max(1, int(round(exp.t_end / exp.h)))
            traj = integrate_fixed(model, initial, exp.h, n, exp.step_config, exp.decimate)
        else:
            traj = integrate_adaptive(model, initial, exp.t_end, exp.adaptive,
                                      exp.step_config, exp.decimate)
        err = None
    except IntegrationError as exc:
        traj, err = exc.trajectory, str(exc)
    return traj, err, time.perf_counter() - t0


def _num(x):
    x = float(x)
    return None if math.isnan(x) else x


def summary_record(exp: Experiment, traj: Trajectory, wall: float, error=None) -> dict:
    rec = {
        "system": exp.system,
        "S": exp.S,
        "mode": exp.mode,
        "steps": traj.n_steps,
        "max_rel_e_err": _num(traj.max_rel_energy_error),
        "max_rel_l_err": _num(traj.max_rel_angular_momentum_error),
        "wall_seconds": wall,
    }
    if error is not None:
        rec["error"] = error
    return rec


def _fmt(x):
    return format(float(x), ".17g")


def write_trajectory_csv(path: str, traj: Trajectory) -> None:
    d = traj.q.shape[1]
    header = (["t"] + [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)]
              + ["h", "rel_e_err", "rel_l_err", "newton_iters"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        # the initial row has zero error for each invariant the model defines
        l0 = 0.0 if np.any(~np.isnan(traj.rel_angular_momentum_error)) else math.nan
        for i in range(len(traj)):
            if i == 0:
                diag = (0.0, 0.0, l0, 0)
            else:
                diag = (traj.h_used[i - 1], traj.rel_energy_error[i - 1],
                        traj.rel_angular_momentum_error[i - 1], traj.newton_iterations[i - 1])
            row = [_fmt(traj.t[i])] + [_fmt(x) for x in traj.q[i]] + [_fmt(x) for x in traj.p[i]]
            row += [_fmt(diag[0]), _fmt(diag[1]), _fmt(diag[2]), str(int(diag[3]))]
            w.writerow(row)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _explicit(args, keys) -> dict:
    explicit = {}
    if getattr(args, "config", None):
        explicit.update(read_config_file(args.config))
    for key in keys:
        if hasattr(args, key):
            explicit[key] = getattr(args, key)
    return explicit


def cmd_run(args) -> int:
    exp = build_experiment(_explicit(args, RUN_OPTIONS))
    traj, err, wall = execute(exp)
    summary = summary_record(exp, traj, wall, err)
    if exp.format == "csv":
        write_trajectory_csv(exp.output, traj)
        _write_json(exp.output + ".summary.json", summary)
    else:
        _write_json(exp.output, summary)
    print(json.dumps(summary))
    if err is not None:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILED
    return 0


def _table1_one(job):
    eps, tol, S, h_init, h_min, h_max, nodes, limit = job
    exp = Experiment("kepler", eps, S, "internal", nodes, "adaptive", None,
                     AdaptiveConfig(energy_tol=tol, h_init=h_init, h_min=h_min, h_max=h_max,
                                    max_steps=limit),
                     kepler_model().period, "", "csv", 1)
    traj, err, _ = execute(exp)
    return S, traj, err


def _ordered_map(fn, jobs, n_workers):
    if n_workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_table1(args) -> int:
    if not 0.0 <= args.eps < 1.0:
        raise ConfigError(f"eps must lie in [0, 1), got {args.eps}")
    S_list = _parse_list(args.S_list, int, "S")
    if not S_list:
        raise ConfigError("need at least one S")
    jobs = [(args.eps, args.energy_tol, S, args.h_init, args.h_min, args.h_max, args.nodes,
             args.limit) for S in S_list]
    try:
        AdaptiveConfig(energy_tol=args.energy_tol, h_init=args.h_init, h_min=args.h_min,
                       h_max=args.h_max)
        for S in S_list:
            StepConfig(S=S, scheme=args.nodes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    for S, traj, err in _ordered_map(_table1_one, jobs, args.jobs):
        steps = f">{args.limit}" if err is not None else str(traj.n_steps)
        rows.append([str(S), steps, str(traj.n_rejected), _fmt(traj.max_rel_energy_error)])
    header = ["S", "steps", "rejected", "max_rel_e_err"]
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    print(f"eps={args.eps:g} energy_tol={args.energy_tol:g}, one period")
    for r in [header] + rows:
        print("  ".join(s.rjust(w) for s, w in zip(r, widths)))
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    return 0


def _parse_list(values, conv, name):
    items = []
    for v in values or []:
        items.extend(s for s in str(v).split(",") if s.strip())
    try:
        return [conv(s) for s in items]
    except ValueError as exc:
        raise ConfigError(f"invalid {name} value: {exc}") from exc


def _final_position_error(exp: Experiment, traj: Trajectory) -> float:
    if exp.system == "kepler":
        ref = kepler_exact_state(exp.eps, traj.t[-1]).q
    elif exp.system == "harmonic":
        ref = np.array([math.cos(traj.t[-1])])
    else:
        return math.nan
    return float(np.linalg.norm(traj.q[-1] - ref))


def _sweep_one(job):
    explicit, param, value = job
    settings = dict(explicit)
    settings[param] = value
    try:
        exp = build_experiment(settings)
    except ConfigError as exc:
        return [param, str(value), f"invalid: {exc}", "", "", "", ""]
    traj, err, _ = execute(exp)
    status = "ok" if err is None else "failed"
    return [param, str(value), status, str(traj.n_steps), _fmt(traj.max_rel_energy_error),
            _fmt(traj.max_rel_angular_momentum_error), _fmt(_final_position_error(exp, traj))]


def cmd_sweep(args) -> int:
    conv = int if args.param == "S" else float
    values = _parse_list(args.values, conv, args.param)
    if not values:
        raise ConfigError("sweep needs at least one value")
    explicit = _explicit(args, RUN_OPTIONS)
    explicit.pop("output", None)
    explicit.pop("format", None)
    # validate the shared settings once so a bad base config exits early
    build_experiment({**explicit, args.param: values[0]})
    rows = _ordered_map(_sweep_one, [(explicit, args.param, v) for v in values], args.jobs)
    header = ["param", "value", "status", "steps", "max_rel_e_err", "max_rel_l_err",
              "final_pos_err"]
    out = getattr(args, "output", "sweep.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    for r in rows:
        print(",".join(r))
    return 0


def _add_run_options(parser, skip=()):
    for key, (conv, default, text) in RUN_OPTIONS.items():
        if key in skip:
            continue
        flag = "--" + key.replace("_", "-")
        kwargs = dict(type=conv, default=argparse.SUPPRESS,
                      help=f"{text} (default: {default if default is not None else 'unset'})")
        if key in CHOICES:
            kwargs["choices"] = CHOICES[key]
        parser.add_argument(flag, dest=key, **kwargs)
    parser.add_argument("--config", help="flat key=value file; flags override its entries "
                                         "(default: none)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpvi", description=(
        "Run local path fitting variational integrator experiments."))
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate one system and write its trajectory")
    _add_run_options(run)
    run.set_defaults(func=cmd_run)

    t1 = sub.add_parser("table1", help="accepted steps per Kepler period against S")
    t1.add_argument("--eps", type=float, default=0.99, help="eccentricity (default: 0.99)")
    t1.add_argument("--energy-tol", type=float, default=1e-7,
                    help="relative energy tolerance (default: 1e-07)")
    t1.add_argument("--S", dest="S_list", nargs="+", default=[str(s) for s in range(3, 13)],
                    help="degrees to run, space or comma separated (default: 3..12)")
    t1.add_argument("--nodes", choices=CHOICES["nodes"], default="uniform",
                    help="collocation nodes (default: uniform)")
    t1.add_argument("--h-init", type=float, default=0.01, help="initial step (default: 0.01)")
    t1.add_argument("--h-min", type=float, default=1e-8, help="smallest step (default: 1e-08)")
    t1.add_argument("--h-max", type=float, default=1.0, help="largest step (default: 1.0)")
    t1.add_argument("--limit", type=int, default=10000,
                    help="step budget per run; runs over it are reported as >limit "
                         "(default: 10000)")
    t1.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    t1.add_argument("--output", help="CSV output path (default: none)")
    t1.set_defaults(func=cmd_table1)

    sw = sub.add_parser("sweep", help="one summary row per value of a run parameter")
    sw.add_argument("--param", required=True, choices=SWEEP_PARAMS, help="parameter to vary")
    sw.add_argument("--values", nargs="*", default=[],
                    help="values, space or comma separated (default: none, which is an error)")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    _add_run_options(sw, skip=("format",))
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, StepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
