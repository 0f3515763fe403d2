"""Command-line experiment runner.

    eden-sim simulate --out runs/seq --seed 3
    eden-sim escape --alpha_s=0.9 --tau_d=10
    eden-sim phase --ratio_alpha=0.5,0.9,1.2 --ratio_tau=10,20 --jobs 4
    eden-sim capacity --n_grid=10,12,14 --trials=20 --model reference
    eden-sim fixed-points --config runs/seq/metadata.json --out runs/fp

Configs are flat JSON objects (or a metadata.json written by a previous
run). ``--key=value`` overrides any config key; lists are comma-separated.
Every run writes ``metadata.json`` next to its CSVs.
"""

import argparse
import dataclasses
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .analysis import (
    DYNAMIC, STATIC, analytic_escape_time, mean_absolute_error, mean_escape_time,
    measure_escape_times, n_transitions, phase_diagram, write_escape_csv, write_phase_csv,
)
from .capacity import CapacitySpec, capacity_scaling, empirical_capacity, write_capacity_csv, write_capacity_summary
from .dynamics import DivergenceError, EdenParams, NetworkState, integrate
from .energy import principal_component_1, track_fixed_points, write_fixed_point_csv
from .io import read_json, write_json
from .patterns import GENERATOR_ID, generate_orthogonal_memories, generate_rademacher_memories

log = logging.getLogger("eden_sim")

EXPERIMENTS = ("simulate", "escape", "phase", "capacity", "fixed-points")
EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "simulate"
    # dynamics
    alpha_s: float = 0.98
    alpha_c: float = 1.0
    tau_f: float = 1.0
    tau_d: float = 20.0
    dt: float = 0.01
    t_max: float = 600.0
    record_stride: int = 10
    model: str = "eden"
    # patterns and cue (cue is 1-based)
    N: int = 100
    P: int = 5
    seed: int = 0
    pattern_kind: str = "rademacher"
    cue: int = 1
    slow_init: str = "zero"
    include_states: bool = False
    # phase diagram
    ratio_alpha: list = field(default_factory=lambda: [0.5, 0.7, 0.9, 0.98])
    ratio_tau: list = field(default_factory=lambda: [10.0, 20.0])
    n_seeds: int = 1
    simulate: bool = True
    t_max_cap: float = 1e5
    static_t_max: float | None = None
    # capacity
    n_grid: list = field(default_factory=lambda: [10, 12, 14, 16, 18, 20])
    alpha: float = 2.0
    r: float = 0.999
    epsilon: float = 1e-3
    delta: float = 1e-3
    trials: int = 100
    p_cap: int = 10**6
    targets_per_trial: int = 10
    # fixed points
    fp_stride: int = 1
    fp_tol: float = 1e-8
    fp_max_iter: int = 10000
    output_dir: str = "eden_out"

    @classmethod
    def field_kinds(cls):
        kinds = {}
        for f in dataclasses.fields(cls):
            default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
            if isinstance(default, list):
                kinds[f.name] = ("list", type(default[0]))
            elif default is None:
                kinds[f.name] = ("optional", float)
            else:
                kinds[f.name] = ("scalar", type(default))
        return kinds

    @classmethod
    def from_mapping(cls, mapping):
        kinds = cls.field_kinds()
        unknown = sorted(set(mapping) - set(kinds))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values = {k: _coerce(k, v, kinds[k]) for k, v in mapping.items()}
        return cls(**values)

    def to_dict(self):
        return dataclasses.asdict(self)

    def eden_params(self, **changes):
        d = dict(alpha_s=self.alpha_s, alpha_c=self.alpha_c, tau_f=self.tau_f,
                 tau_d=self.tau_d, dt=self.dt, t_max=self.t_max)
        d.update(changes)
        return EdenParams(**d)

    def capacity_spec(self, n_features):
        return CapacitySpec(
            n_features=n_features, alpha=self.alpha, r=self.r, epsilon=self.epsilon, delta=self.delta,
            trials=self.trials, p_cap=self.p_cap, targets_per_trial=self.targets_per_trial,
            model=self.model, tol=self.fp_tol, max_iter=self.fp_max_iter,
        )

    def seeds(self):
        return [self.seed + i for i in range(self.n_seeds)]

    def validate(self):
        """Check every field the selected experiment reads; raises :class:`ConfigError`."""
        exp = self.experiment
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment: must be one of {EXPERIMENTS}, got {exp!r}")
        if self.model not in ("eden", "reference"):
            raise ConfigError(f"model: must be 'eden' or 'reference', got {self.model!r}")
        if self.model == "reference" and exp in ("phase", "fixed-points"):
            raise ConfigError(f"model: {exp} supports only the eden model")
        for name in ("record_stride", "n_seeds", "trials", "p_cap", "targets_per_trial", "fp_stride", "fp_max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        if not self.fp_tol > 0:
            raise ConfigError("fp_tol: must be positive")
        try:
            self.eden_params()
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from None

        if exp in ("simulate", "escape", "phase", "fixed-points"):
            if self.N < 1 or self.P < 1:
                raise ConfigError("N, P: must be positive")
            if self.pattern_kind not in ("rademacher", "orthogonal"):
                raise ConfigError(f"pattern_kind: unknown kind {self.pattern_kind!r}")
            if self.pattern_kind == "rademacher" and self.N <= 62 and self.P > 2**self.N:
                raise ConfigError(f"P: {self.P} exceeds the 2**{self.N} distinct patterns")
            if self.pattern_kind == "orthogonal" and (self.N & (self.N - 1) or self.P > self.N):
                raise ConfigError("N, P: orthogonal patterns need N a power of two and P <= N")
        if exp in ("simulate", "escape", "fixed-points"):
            if not 1 <= self.cue <= self.P:
                raise ConfigError(f"cue: must lie in 1..{self.P}")
            if self.slow_init not in ("zero", "cue"):
                raise ConfigError("slow_init: must be 'zero' or 'cue'")
        if exp == "phase":
            if not self.ratio_alpha:
                raise ConfigError("ratio_alpha: grid must be non-empty")
            if not self.ratio_tau:
                raise ConfigError("ratio_tau: grid must be non-empty")
            if any(not x > 0 for x in self.ratio_alpha + self.ratio_tau):
                raise ConfigError("ratio_alpha, ratio_tau: entries must be positive")
            if not self.t_max_cap > 0:
                raise ConfigError("t_max_cap: must be positive")
            if self.static_t_max is not None and not self.static_t_max >= 0:
                raise ConfigError("static_t_max: must be >= 0")
            try:
                self.eden_params(alpha_s=max(self.ratio_alpha) * self.alpha_c,
                                 tau_d=min(self.ratio_tau) * self.tau_f)
            except ValueError as exc:
                raise ConfigError(f"ratio grids: {exc}") from None
        if exp == "capacity":
            if not self.n_grid:
                raise ConfigError("n_grid: must be non-empty")
            for n in self.n_grid:
                try:
                    self.capacity_spec(n)
                except ValueError as exc:
                    raise ConfigError(f"capacity (N={n}): {exc}") from None
        return self


def _coerce(name, value, kind):
    shape, typ = kind
    try:
        if shape == "list":
            if isinstance(value, str):
                value = [v for v in (x.strip() for x in value.split(",")) if v]
            elif not isinstance(value, (list, tuple)):
                value = [value]
            return [_scalar(v, typ) for v in value]
        if shape == "optional":
            if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
                return None
            return _scalar(value, typ)
        return _scalar(value, typ)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _scalar(value, typ):
    if typ is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("1", "true", "yes", "on", "0", "false", "no", "off"):
            return value.lower() in ("1", "true", "yes", "on")
        raise ValueError(f"expected a boolean, got {value!r}")
    if typ is int:
        if isinstance(value, bool):
            raise ValueError("expected an integer")
        x = float(value) if isinstance(value, str) and not value.lstrip("-").isdigit() else value
        if isinstance(x, float) and not x.is_integer():
            raise ValueError(f"expected an integer, got {value!r}")
        return int(x)
    if typ is float:
        if isinstance(value, bool):
            raise ValueError("expected a number")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    raise TypeError(typ)


def load_config(path):
    """Read a flat config, or the ``config`` entry of a run's metadata.json."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


def parse_overrides(tokens):
    out = {}
    for tok in tokens:
        if not tok.startswith("--") or "=" not in tok:
            raise ConfigError(f"unrecognised argument {tok!r} (overrides take the form --key=value)")
        key, value = tok[2:].split("=", 1)
        out[key.replace("-", "_")] = value
    return out


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def _memories(cfg, seed=None):
    seed = cfg.seed if seed is None else seed
    if cfg.pattern_kind == "orthogonal":
        return generate_orthogonal_memories(cfg.N, cfg.P, seed)
    return generate_rademacher_memories(cfg.N, cfg.P, seed)


def _initial_state(cfg, mems):
    v = mems.xi[cfg.cue - 1].copy()
    s = np.zeros_like(v) if cfg.slow_init == "zero" else v.copy()
    return NetworkState(v, s, 0.0)


def _simulate(cfg, store_states):
    mems = _memories(cfg)
    traj = integrate(_initial_state(cfg, mems), mems, cfg.eden_params(), cfg.record_stride,
                     store_states=store_states, model=cfg.model)
    return mems, traj


def run_simulate(cfg, out, jobs=1):
    mems, traj = _simulate(cfg, cfg.include_states)
    traj.write_csv(out / "trajectory.csv", include_states=cfg.include_states)
    traj.write_hidden_csv(out / "hidden.csv")
    return {"files": ["trajectory.csv", "hidden.csv"], "n_samples": len(traj),
            "n_transitions": n_transitions(traj.argmax), "patterns": mems.meta()}


def run_escape(cfg, out, jobs=1):
    mems, traj = _simulate(cfg, False)
    records = measure_escape_times(traj, mems, include_censored=True)
    complete = [r for r in records if not r.censored]
    te = analytic_escape_time(cfg.alpha_s, cfg.alpha_c, cfg.tau_d, cfg.tau_f)
    mean = mean_escape_time(complete)
    summary = {
        "mean_escape_time": mean,
        "analytic_escape_time": te,
        "absolute_error": abs(mean - te) if complete and math.isfinite(te) else math.nan,
        "n_complete_runs": len(complete),
        "n_transitions": n_transitions(traj.argmax),
        "regime": STATIC if cfg.alpha_s >= cfg.alpha_c else DYNAMIC,
        "ratio_alpha": cfg.alpha_s / cfg.alpha_c,
        "ratio_tau": cfg.tau_d / cfg.tau_f,
        "model": cfg.model,
    }
    write_escape_csv(out / "escape_records.csv", records)
    write_json(out / "summary.json", summary)
    return {"files": ["escape_records.csv", "summary.json"], "summary": summary}


def run_phase(cfg, out, jobs=1):
    cells = phase_diagram(
        cfg.ratio_alpha, cfg.ratio_tau, cfg.eden_params(), cfg.N, cfg.P, cfg.seeds(),
        simulate=cfg.simulate, jobs=jobs, record_stride=cfg.record_stride,
        t_max_cap=cfg.t_max_cap, static_t_max=cfg.static_t_max, kind=cfg.pattern_kind,
    )
    write_phase_csv(out / "phase_diagram.csv", cells)
    return {"files": ["phase_diagram.csv"], "n_cells": len(cells),
            "mean_absolute_error": mean_absolute_error(cells) if cfg.simulate else math.nan,
            "cell_errors": sum(len(c.errors) for c in cells)}


def run_capacity(cfg, out, jobs=1):
    specs = [cfg.capacity_spec(n) for n in cfg.n_grid]
    if len(specs) > 1:
        ests, slope = capacity_scaling(cfg.n_grid, specs[0], seed=cfg.seed, jobs=jobs)
    else:
        ests, slope = [empirical_capacity(specs[0], seed=cfg.seed, jobs=jobs)], None
    write_capacity_csv(out / "capacity.csv", ests)
    write_capacity_summary(out / "summary.json", ests, slope)
    return {"files": ["capacity.csv", "summary.json"], "fit_slope": slope,
            "capacities": [e.capacity for e in ests], "saturated": [e.saturated for e in ests]}


def run_fixed_points(cfg, out, jobs=1):
    mems, traj = _simulate(cfg, True)
    params = cfg.eden_params()
    fps = track_fixed_points(traj, mems, params, cfg.fp_stride, cfg.fp_tol, cfg.fp_max_iter)
    pts = np.array([fp.v_star for fp in fps])
    idx = np.arange(0, len(traj), cfg.fp_stride)
    if len(fps) >= 2:
        direction, scores = principal_component_1(pts)
        state_scores = (traj.v[idx] - pts.mean(axis=0)) @ direction
    else:
        scores = np.zeros(len(fps))
        state_scores = np.zeros(len(fps))
    write_fixed_point_csv(out / "fixed_points.csv", fps, scores, state_scores, traj.argmax[idx])
    return {"files": ["fixed_points.csv"], "n_points": len(fps),
            "n_unconverged": int(sum(not fp.converged for fp in fps))}


HELP = {
    "simulate": "integrate from a cued memory; trajectory and hidden-weight CSVs",
    "escape": "escape records of one run against the closed-form mean",
    "phase": "analytic and simulated escape times over (alpha_s/alpha_c, tau_d/tau_f)",
    "capacity": "Monte Carlo and closed-form capacity over a grid of N",
    "fixed-points": "instantaneous frozen-slow fixed points along a run, with PC1 scores",
}

RUNNERS = {
    "simulate": run_simulate,
    "escape": run_escape,
    "phase": run_phase,
    "capacity": run_capacity,
    "fixed-points": run_fixed_points,
}


def _setup_logging():
    level = os.environ.get("EDEN_SIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON config or a previous run's metadata.json")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="pattern / Monte Carlo seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for grid cells or trials")
    common.add_argument("--model", choices=("eden", "reference"))
    ap = argparse.ArgumentParser(prog="eden-sim", description="EDEN simulation and analysis experiments",
                                 epilog="any config key can be overridden with --key=value")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return ap


def resolve_config(args, extra):
    data = load_config(args.config) if args.config else {}
    if data.get("experiment", args.experiment) != args.experiment:
        raise ConfigError(f"experiment: config is for {data['experiment']!r}, not {args.experiment!r}")
    data["experiment"] = args.experiment
    data.update(parse_overrides(extra))
    if args.seed is not None:
        data["seed"] = args.seed
    if args.model is not None:
        data["model"] = args.model
    if args.out is not None:
        data["output_dir"] = str(args.out)
    return ExperimentConfig.from_mapping(data).validate()


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        cfg = resolve_config(args, extra)
    except ConfigError as exc:
        print(f"eden-sim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = RUNNERS[cfg.experiment](cfg, out, args.jobs)
    except DivergenceError as exc:
        print(f"eden-sim: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    meta = {
        "config": cfg.to_dict(),
        "seeds": cfg.seeds() if cfg.experiment == "phase" else [cfg.seed],
        "generator": GENERATOR_ID,
        "version": __version__,
        "backend": _accel.get_backend(),
        "duration_s": time.perf_counter() - t0,
        "result": result,
    }
    write_json(out / "metadata.json", meta)
    log.info("wrote %s", ", ".join(result["files"]))
    print(f"{cfg.experiment}: wrote {', '.join(result['files'])} to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
