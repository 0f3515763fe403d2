"""Energy function, its fast/slow rate decomposition, and frozen-slow fixed points."""

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import _check_state, eden_derivative, fmt, hidden_activation, logsumexp, softmax
from .patterns import argmax_memory


@dataclass(frozen=True)
class EnergyBreakdown:
    state_energy: float
    interaction_energy: float
    total: float


def energy(v, s, mems, params):
    """``sum v^2 / 2 - log(sum_mu exp(h_mu)) / alpha_s``, split into its two terms."""
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    h = hidden_activation(v, s, mems, params)
    state = 0.5 * float(v @ v)
    inter = logsumexp(h) / params.alpha_s
    return EnergyBreakdown(state, inter, state - inter)


def energy_rate_decomposition(state, mems, params):
    """Fast and slow contributions to dE/dt along the flow.

    ``F = -tau_f * |dv/dt|^2`` is never positive; ``S`` collects the change
    of the interaction energy due to the moving slow population.
    """
    dv, ds = eden_derivative(state, mems, params)
    w = softmax(hidden_activation(state.v, state.s, mems, params))
    F = -params.tau_f * float(dv @ dv)
    S = -(params.alpha_c / params.alpha_s) * float(w @ (mems.prev @ ds))
    return F, S


@dataclass
class FixedPointResult:
    v_star: np.ndarray
    residual: float
    iterations: int
    converged: bool
    nearest_memory: int
    t: float = np.nan


def slow_drive(s, mems, params):
    """Per-memory contribution of a frozen slow state to ``h``."""
    return params.alpha_c * (mems.prev @ np.asarray(s, dtype=float))


def fixed_point_map(v, s_frozen, mems, params):
    """One application of ``v <- sum_mu xi[mu] softmax(h(v, s))_mu``."""
    return softmax(hidden_activation(v, s_frozen, mems, params)) @ mems.xi


def find_fixed_point(v0, s_frozen, mems, params, tol=1e-8, max_iter=10000):
    """Fixed point of the fast dynamics with the slow population held constant.

    Zeros of dv/dt at fixed ``s`` are exactly the fixed points of
    :func:`fixed_point_map`, which is iterated from ``v0``. Non-convergence
    is reported through ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_state(v0, s_frozen, mems)
    v, res, it, ok = kernels.eden_fixed_point(
        mems.xi, slow_drive(s_frozen, mems, params), v0, params.alpha_s, tol, max_iter
    )
    return FixedPointResult(v, res, it, ok, argmax_memory(v, mems))


def find_reference_fixed_point(v0, s_frozen, mems, params, tol=1e-8, max_iter=10000):
    """Frozen-slow fixed point of the reference (linear interaction) network."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_state(v0, s_frozen, mems)
    bias = params.alpha_c * ((mems.prev @ np.asarray(s_frozen, dtype=float)) @ mems.xi)
    v, res, it, ok = kernels.reference_fixed_point(mems.xi, bias, v0, params.alpha_s, tol, max_iter)
    return FixedPointResult(v, res, it, ok, argmax_memory(v, mems))


def track_fixed_points(traj, mems, params, stride=1, tol=1e-8, max_iter=10000):
    """Instantaneous fixed point at every ``stride``-th recorded sample.

    Each search starts at the recorded ``v`` with ``s`` frozen at the
    recorded slow state.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if traj.v is None:
        raise ValueError("fixed-point tracking needs a trajectory with stored states")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = []
    for k in range(0, len(traj), stride):
        fp = find_fixed_point(traj.v[k], traj.s[k], mems, params, tol, max_iter)
        fp.t = float(traj.t[k])
        out.append(fp)
    return out


def principal_component_1(points, tol=1e-10, max_iter=100000):
    """Leading principal direction of a point cloud by power iteration.

    Returns ``(direction, scores)``: a unit vector and the centered
    projections onto it, with the sign chosen so the first nonzero score is
    positive. Identical points give the first basis vector and zero scores.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two points")
    Xc = X - X.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=1)
    scale = norms.max()
    if scale == 0.0 or scale <= 1e-14 * max(1.0, np.abs(X).max()):
        e = np.zeros(X.shape[1])
        e[0] = 1.0
        return e, np.zeros(X.shape[0])

    u = Xc[np.argmax(norms)] / scale
    u /= np.linalg.norm(u)
    for _ in range(max_iter):
        nu = Xc.T @ (Xc @ u)
        n = np.linalg.norm(nu)
        if n == 0.0:
            break
        nu /= n
        if np.linalg.norm(nu - u) <= tol:
            u = nu
            break
        u = nu
    scores = Xc @ u
    nz = np.flatnonzero(np.abs(scores) > 1e-12 * scale)
    if nz.size and scores[nz[0]] < 0:
        u, scores = -u, -scores
    return u, scores


def write_fixed_point_csv(path, results, pc1_scores, pc1_state=None, state_argmax=None):
    """Fixed-point track; memory indices are written 1-based."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["t", "residual", "converged", "nearest_memory", "pc1_score"]
        if pc1_state is not None:
            header.append("pc1_state")
        if state_argmax is not None:
            header.append("state_argmax")
        writer.writerow(header)
        for k, fp in enumerate(results):
            row = [fmt(fp.t), fmt(fp.residual), int(fp.converged), fp.nearest_memory + 1, fmt(pc1_scores[k])]
            if pc1_state is not None:
                row.append(fmt(pc1_state[k]))
            if state_argmax is not None:
                row.append(int(state_argmax[k]) + 1)
            writer.writerow(row)
