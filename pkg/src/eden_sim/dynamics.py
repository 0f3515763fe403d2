"""EDEN and reference-network dynamics, Euler integration and trajectories."""

import csv
import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .patterns import MemorySequence, generate_rademacher_memories

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """The integrated state left the bounded region (or became non-finite)."""

    def __init__(self, step, t):
        super().__init__(f"state diverged at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class EdenParams:
    """Coupling strengths, timescales and Euler settings.

    ``alpha_s`` couples each memory to itself, ``alpha_c`` couples the slow
    trace of the predecessor to the successor. Defaults are the values used
    for the sequential-retrieval simulations.
    """

    alpha_s: float = 0.98
    alpha_c: float = 1.0
    tau_f: float = 1.0
    tau_d: float = 20.0
    dt: float = 0.01
    t_max: float = 600.0

    def __post_init__(self):
        for name in ("alpha_s", "alpha_c", "tau_f", "tau_d", "dt"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a finite positive number, got {val!r}")
        if not (np.isfinite(self.t_max) and self.t_max >= 0):
            raise ValueError(f"t_max must be finite and >= 0, got {self.t_max!r}")
        if self.dt > self.tau_f / 10 * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} does not resolve tau_f={self.tau_f} (need dt <= tau_f/10)")

    @property
    def ratio(self):
        """Coefficient ratio ``alpha_s / alpha_c``."""
        return self.alpha_s / self.alpha_c

    @property
    def tau_ratio(self):
        return self.tau_d / self.tau_f

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return EdenParams(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class NetworkState:
    v: np.ndarray
    s: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.v.ndim != 1 or self.v.shape != self.s.shape:
            raise ValueError(f"v and s must be vectors of equal length, got {self.v.shape} and {self.s.shape}")


def _check_state(v, s, mems):
    N = mems.n_features
    if np.shape(v) != (N,) or np.shape(s) != (N,):
        raise ValueError(f"state shapes {np.shape(v)}, {np.shape(s)} do not match N={N}")


def cue_state(mems, cue=0, slow="zero"):
    """Initial state with ``v = xi[cue]``; ``s`` is zero or ``xi[cue]``."""
    v = mems.xi[cue].copy()
    if slow == "zero":
        s = np.zeros_like(v)
    elif slow == "cue":
        s = v.copy()
    else:
        raise ValueError(f"unknown slow initialisation {slow!r}")
    return NetworkState(v, s, 0.0)


# --------------------------------------------------------------------------
# pointwise pieces
# --------------------------------------------------------------------------

def _shifted_exp(h):
    h = np.asarray(h, dtype=float)
    hmax = h.max(axis=-1, keepdims=True)
    return hmax, np.exp(h - hmax)


def logsumexp(h):
    """``log sum exp(h)`` over the last axis, with max subtraction."""
    hmax, e = _shifted_exp(h)
    out = (hmax + np.log(e.sum(axis=-1, keepdims=True)))[..., 0]
    return float(out) if out.ndim == 0 else out


def softmax(h):
    _, e = _shifted_exp(h)
    return e / e.sum(axis=-1, keepdims=True)


def hidden_activation(v, s, mems, params):
    """``h_mu = alpha_s <xi[mu], v> + alpha_c <xi[mu-1], s>``."""
    _check_state(v, s, mems)
    return params.alpha_s * (mems.xi @ v) + params.alpha_c * (mems.prev @ s)


def eden_derivative(state, mems, params):
    v, s = state.v, state.s
    w = softmax(hidden_activation(v, s, mems, params))
    dv = (w @ mems.xi - v) / params.tau_f
    ds = (v - s) / params.tau_d
    return dv, ds


def clamp_sigma(x):
    """Piecewise-linear clamp to [-1, 1]."""
    return np.clip(x, -1.0, 1.0) if np.ndim(x) else float(min(1.0, max(-1.0, x)))


def reference_derivative(state, mems, params):
    """Linear-interaction baseline: Hopfield self term through the clamp plus a slow cross term."""
    v, s = state.v, state.s
    _check_state(v, s, mems)
    drive = params.alpha_s * (mems.xi @ clamp_sigma(v)) + params.alpha_c * (mems.prev @ s)
    dv = (drive @ mems.xi - v) / params.tau_f
    ds = (v - s) / params.tau_d
    return dv, ds


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Recorded samples of one integration run.

    ``mv``/``ms`` are the overlaps of the fast and slow populations with
    every memory (``T x P``); ``energy``, ``F`` and ``S`` are the energy and
    its fast/slow rate terms; ``argmax`` is the 0-based memory with the
    largest fast overlap. ``v``/``s`` hold full states when they were stored.
    """

    t: np.ndarray
    mv: np.ndarray
    ms: np.ndarray
    energy: np.ndarray
    F: np.ndarray
    S: np.ndarray
    argmax: np.ndarray
    params: EdenParams
    mems_meta: dict
    record_stride: int
    v: np.ndarray | None = None
    s: np.ndarray | None = None
    model: str = "eden"

    def __len__(self):
        return len(self.t)

    @property
    def sample_dt(self):
        return self.params.dt * self.record_stride

    def hidden_weights(self):
        """Softmax weights of the hidden layer at every sample (``T x P``).

        Rebuilt from the overlaps, so it works without stored states.
        """
        N = self.mems_meta["N"]
        h = N * (self.params.alpha_s * self.mv + self.params.alpha_c * np.roll(self.ms, 1, axis=1))
        return softmax(h)

    def state(self, k):
        if self.v is None:
            raise ValueError("states were not stored for this trajectory")
        return NetworkState(self.v[k], self.s[k], float(self.t[k]))

    def write_csv(self, path, include_states=False):
        P = self.mv.shape[1]
        header = ["t"]
        if include_states:
            if self.v is None:
                raise ValueError("states were not stored for this trajectory")
            header += [f"v_{i + 1}" for i in range(self.v.shape[1])]
        header += [f"mv_{m + 1}" for m in range(P)]
        header += [f"ms_{m + 1}" for m in range(P)]
        header += ["E", "F", "S", "argmax"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for k in range(len(self.t)):
                row = [fmt(self.t[k])]
                if include_states:
                    row += [fmt(x) for x in self.v[k]]
                row += [fmt(x) for x in self.mv[k]]
                row += [fmt(x) for x in self.ms[k]]
                row += [fmt(self.energy[k]), fmt(self.F[k]), fmt(self.S[k]), str(int(self.argmax[k]) + 1)]
                writer.writerow(row)

    def write_hidden_csv(self, path):
        w = self.hidden_weights()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t"] + [f"w_{m + 1}" for m in range(w.shape[1])])
            for k in range(len(self.t)):
                writer.writerow([fmt(self.t[k])] + [fmt(x) for x in w[k]])


def fmt(x):
    """17 significant digits, enough for an exact float64 round trip."""
    return format(float(x), ".17g")


def integrate(initial, mems, params, record_stride=10, store_states=True, model="eden", vmax=10.0):
    """Forward-Euler integration from ``initial`` until ``params.t_max``.

    Every ``record_stride``-th step (including step 0) is recorded together
    with its observables. Raises :class:`DivergenceError` if ``|v_i|``
    exceeds ``vmax`` or the state becomes non-finite.
    """
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    _check_state(initial.v, initial.s, mems)
    if not (np.all(np.abs(initial.v) <= vmax) and np.all(np.isfinite(initial.s))):
        raise DivergenceError(0, initial.t)
    n_steps = params.n_steps
    if model == "eden":
        mv, ms, en, F, S, am, vr, sr, status, fail = kernels.eden_euler(
            mems.xi, initial.v, initial.s, params.alpha_s, params.alpha_c,
            params.tau_f, params.tau_d, params.dt, n_steps, record_stride, store_states, vmax,
        )
    elif model == "reference":
        mv, ms, en, am, vr, sr, status, fail = kernels.reference_euler(
            mems.xi, initial.v, initial.s, params.alpha_s, params.alpha_c,
            params.tau_f, params.tau_d, params.dt, n_steps, record_stride, store_states, vmax,
        )
        F = np.full_like(en, np.nan)
        S = np.full_like(en, np.nan)
    else:
        raise ValueError(f"unknown model {model!r}")
    if status == kernels.DIVERGED:
        raise DivergenceError(fail, initial.t + fail * params.dt)
    t = initial.t + np.arange(len(en)) * (record_stride * params.dt)
    log.debug("integrated %d steps (%d samples)", n_steps, len(t))
    return Trajectory(
        t=t, mv=mv, ms=ms, energy=en, F=F, S=S, argmax=am,
        params=params, mems_meta=mems.meta(), record_stride=record_stride,
        v=vr if store_states else None, s=sr if store_states else None, model=model,
    )


def simulate_cued(n_features, n_memories, seed, params, record_stride=10, store_states=True):
    """Cue with the first memory and an empty slow population, then integrate."""
    mems = generate_rademacher_memories(n_features, n_memories, seed)
    traj = integrate(cue_state(mems), mems, params, record_stride, store_states)
    return mems, traj


__all__ = [
    "DivergenceError", "EdenParams", "NetworkState", "Trajectory", "MemorySequence",
    "clamp_sigma", "cue_state", "eden_derivative", "hidden_activation", "integrate",
    "logsumexp", "reference_derivative", "simulate_cued", "softmax",
]
