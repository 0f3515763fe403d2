"""Escape times: measurement from trajectories, closed-form prediction, phase diagrams."""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DivergenceError, EdenParams, cue_state, fmt, integrate
from .patterns import generate_orthogonal_memories, generate_rademacher_memories

log = logging.getLogger(__name__)

STATIC = "static"
DYNAMIC = "dynamic"


@dataclass(frozen=True)
class EscapeRecord:
    """One maximal run of constant argmax memory.

    Times are in simulation units; ``duration`` is in units of ``tau_f``.
    ``censored`` runs (the transient from the cue and the run cut off by
    ``t_max``) carry a lower bound only.
    """

    memory_index: int
    enter_time: float
    exit_time: float
    duration: float
    censored: bool = False
    enter_sample: int = -1
    exit_sample: int = -1


def escape_runs(times, argmax, tau_f=1.0):
    """Split an argmax series into maximal constant runs.

    A run ends at the first sample of the following run, so a run of ``n``
    samples lasts ``n`` sample spacings. The final run ends at the last
    sample. The first and last runs are flagged as censored.
    """
    times = np.asarray(times, dtype=float)
    argmax = np.asarray(argmax)
    if times.shape != argmax.shape or times.ndim != 1:
        raise ValueError("times and argmax must be 1-D and the same length")
    if times.size == 0:
        return []
    starts = np.concatenate([[0], np.flatnonzero(np.diff(argmax)) + 1])
    ends = np.concatenate([starts[1:], [times.size - 1]])
    last = len(starts) - 1
    runs = []
    for j, (a, b) in enumerate(zip(starts, ends)):
        t0, t1 = float(times[a]), float(times[b])
        runs.append(EscapeRecord(
            memory_index=int(argmax[a]),
            enter_time=t0,
            exit_time=t1,
            duration=(t1 - t0) / tau_f,
            censored=(j == 0 or j == last),
            enter_sample=int(a),
            exit_sample=int(b),
        ))
    return runs


def measure_escape_times(traj, mems=None, include_censored=False):
    """Escape records of a trajectory; complete runs only unless ``include_censored``.

    An empty list means no complete run; the censored runs from
    ``include_censored=True`` tell a static trajectory from a short one.
    """
    if mems is not None and traj.mv.shape[1] != mems.n_memories:
        raise ValueError("trajectory and memory sequence disagree on P")
    runs = escape_runs(traj.t, traj.argmax, traj.params.tau_f)
    return runs if include_censored else [r for r in runs if not r.censored]


def n_transitions(argmax):
    return int(np.count_nonzero(np.diff(np.asarray(argmax))))


def mean_escape_time(records):
    """Mean duration over complete runs; NaN when there are none."""
    d = [r.duration for r in records if not r.censored]
    return float(np.mean(d)) if d else math.nan


def _check_positive(**kw):
    for k, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{k} must be a finite positive number, got {v!r}")


def analytic_escape_time(alpha_s, alpha_c, tau_d, tau_f):
    """Mean escape time ``-(tau_d/tau_f) ln(1 - sqrt(alpha_s/alpha_c))`` in ``tau_f`` units.

    Infinite on the static side, ``alpha_s >= alpha_c``.
    """
    _check_positive(alpha_s=alpha_s, alpha_c=alpha_c, tau_d=tau_d, tau_f=tau_f)
    r = alpha_s / alpha_c
    if r >= 1.0:
        return math.inf
    return -(tau_d / tau_f) * math.log1p(-math.sqrt(r))


def transition_lambda(alpha_s, alpha_c):
    """Fraction ``sqrt(alpha_s/alpha_c)`` of the previous pattern left in the slow state."""
    _check_positive(alpha_s=alpha_s, alpha_c=alpha_c)
    if alpha_s > alpha_c:
        raise ValueError("alpha_s > alpha_c: no transitions, lambda undefined")
    return math.sqrt(alpha_s / alpha_c)


def slow_trajectory_analytic(lam, xi_prev, xi_curr, tau_ratio, t):
    """``s(t) = lam xi_prev e^{-t/tau} + xi_curr (1 - e^{-t/tau})`` for a fast state pinned at ``xi_curr``."""
    if tau_ratio <= 0:
        raise ValueError("tau_ratio must be positive")
    if t < 0:
        raise ValueError("t must be >= 0")
    decay = math.exp(-t / tau_ratio)
    return lam * decay * np.asarray(xi_prev, dtype=float) + (1.0 - decay) * np.asarray(xi_curr, dtype=float)


def slow_overlaps_at_transitions(traj, records):
    """Slow-state overlaps with the active memory and its predecessor at each exit.

    Read at the last sample of every complete run. Returns an array of
    shape ``(n_records, 2)``.
    """
    P = traj.ms.shape[1]
    out = np.empty((len(records), 2))
    for j, rec in enumerate(records):
        k = rec.exit_sample - 1
        out[j, 0] = traj.ms[k, rec.memory_index]
        out[j, 1] = traj.ms[k, (rec.memory_index - 1) % P]
    return out


# --------------------------------------------------------------------------
# phase diagram
# --------------------------------------------------------------------------

@dataclass
class PhaseCell:
    ratio_alpha: float
    ratio_tau: float
    analytic_te: float
    empirical_te: float = math.nan
    regime: str = DYNAMIC
    n_transitions: int = 0
    n_complete: int = 0
    censored: bool = True
    t_max: float = math.nan
    errors: list = field(default_factory=list)


def cell_t_max(analytic_te, tau_f, cap=1e5, static_t_max=None):
    """Horizon ``max(10 te, 100 tau_f)`` capped at ``cap * tau_f``.

    Static cells use ``static_t_max`` when given, otherwise the cap.
    """
    limit = cap * tau_f
    if math.isinf(analytic_te):
        return limit if static_t_max is None else float(static_t_max)
    return min(max(10.0 * analytic_te * tau_f, 100.0 * tau_f), limit)


def _memories(kind, n_features, n_memories, seed):
    if kind == "rademacher":
        return generate_rademacher_memories(n_features, n_memories, seed)
    if kind == "orthogonal":
        return generate_orthogonal_memories(n_features, n_memories, seed)
    raise ValueError(f"unknown pattern kind {kind!r}")


def _simulate_cell(job):
    params, n_features, n_memories, seeds, kind, stride = job
    durations, n_tr, errors = [], 0, []
    for seed in seeds:
        mems = _memories(kind, n_features, n_memories, seed)
        try:
            traj = integrate(cue_state(mems), mems, params, stride, store_states=False)
        except DivergenceError as exc:
            errors.append(f"seed {seed}: {exc}")
            continue
        durations += [r.duration for r in measure_escape_times(traj)]
        n_tr += n_transitions(traj.argmax)
    return durations, n_tr, errors


def phase_diagram(ratio_alpha_grid, ratio_tau_grid, template=None, n_features=100, n_memories=5,
                  seeds=(0,), simulate=True, jobs=1, record_stride=10, t_max_cap=1e5,
                  static_t_max=None, kind="rademacher"):
    """Analytic and (optionally) simulated escape times over a grid.

    ``alpha_c`` and ``tau_f`` come from ``template``; each cell sets
    ``alpha_s = ratio_alpha * alpha_c`` and ``tau_d = ratio_tau * tau_f``.
    Empirical escape times pool complete runs over ``seeds``. Cells run in
    parallel for ``jobs > 1``; output follows grid order (alpha outer).
    """
    ratio_alpha_grid = [float(x) for x in ratio_alpha_grid]
    ratio_tau_grid = [float(x) for x in ratio_tau_grid]
    if not ratio_alpha_grid or not ratio_tau_grid:
        raise ValueError("ratio grids must be non-empty")
    template = template or EdenParams()
    cells, work = [], []
    for ra in ratio_alpha_grid:
        for rt in ratio_tau_grid:
            _check_positive(ratio_alpha=ra, ratio_tau=rt)
            te = analytic_escape_time(ra * template.alpha_c, template.alpha_c,
                                      rt * template.tau_f, template.tau_f)
            tm = cell_t_max(te, template.tau_f, t_max_cap, static_t_max)
            cells.append(PhaseCell(ra, rt, te, regime=STATIC if ra >= 1 else DYNAMIC, t_max=tm))
            params = template.replace(alpha_s=ra * template.alpha_c, tau_d=rt * template.tau_f, t_max=tm)
            work.append((params, n_features, n_memories, tuple(seeds), kind, record_stride))
    if not simulate:
        return cells

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_simulate_cell, work))
    else:
        results = [_simulate_cell(w) for w in work]
    for cell, (durations, n_tr, errors) in zip(cells, results):
        cell.n_transitions = n_tr
        cell.n_complete = len(durations)
        cell.censored = not durations
        cell.empirical_te = float(np.mean(durations)) if durations else math.nan
        cell.errors = errors
        for e in errors:
            log.warning("cell (%g, %g): %s", cell.ratio_alpha, cell.ratio_tau, e)
    return cells


def mean_absolute_error(cells):
    """Mean ``|empirical - analytic|`` over dynamic cells; censored dynamic cells make it NaN."""
    errs = [abs(c.empirical_te - c.analytic_te) for c in cells if c.regime == DYNAMIC]
    return float(np.mean(errs)) if errs else math.nan


def write_phase_csv(path, cells):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ratio_alpha", "ratio_tau", "analytic_te", "empirical_te", "n_transitions",
                    "censored", "regime", "n_complete", "t_max", "error"])
        for c in cells:
            w.writerow([fmt(c.ratio_alpha), fmt(c.ratio_tau), fmt(c.analytic_te), fmt(c.empirical_te),
                        c.n_transitions, int(c.censored), c.regime, c.n_complete, fmt(c.t_max),
                        "; ".join(c.errors)])


def write_escape_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["memory_index", "enter_time", "exit_time", "duration", "censored"])
        for r in records:
            w.writerow([r.memory_index + 1, fmt(r.enter_time), fmt(r.exit_time), fmt(r.duration), int(r.censored)])
