"""Zero-crosstalk control: Hadamard patterns separate finite-N effects from bugs."""

import math

import numpy as np
import pytest

from eden_sim.analysis import analytic_escape_time, mean_escape_time, measure_escape_times
from eden_sim.dynamics import EdenParams, cue_state, integrate
from eden_sim.energy import energy, find_fixed_point
from eden_sim.patterns import generate_orthogonal_memories


def _run(N, r, tau=20.0, P=5, periods=10):
    mems = generate_orthogonal_memories(N, P, seed=0)
    te = analytic_escape_time(r, 1.0, tau, 1.0)
    p = EdenParams(alpha_s=r, alpha_c=1.0, tau_d=tau, t_max=periods * te)
    return mems, te, integrate(cue_state(mems), mems, p, store_states=False)


def test_patterns_are_orthogonal():
    mems = generate_orthogonal_memories(128, 5, seed=0)
    np.testing.assert_array_equal(mems.xi @ mems.xi.T, 128 * np.eye(5))


@pytest.mark.parametrize("r", [0.5, 0.9, 0.98])
def test_sequential_retrieval(r):
    mems, _, traj = _run(128, r)
    am = traj.argmax
    seq = [am[0]] + [b for a, b in zip(am, am[1:]) if a != b]
    assert seq[0] == 0 and len(seq) >= 8
    assert all((b - a) % 5 == 1 for a, b in zip(seq, seq[1:]))


def test_static_regime_never_moves():
    mems = generate_orthogonal_memories(128, 5, seed=0)
    traj = integrate(cue_state(mems), mems, EdenParams(alpha_s=1.05, t_max=2000.0), store_states=False)
    assert np.all(traj.argmax == 0)


def test_escape_matches_at_moderate_ratio():
    for N in (128, 512, 2048):
        _, te, traj = _run(N, 0.5)
        assert abs(mean_escape_time(measure_escape_times(traj, None)) - te) < 1.5


def test_escape_gap_closes_with_N():
    # near r = 1 the softmax hands over before the h crossing; the lead shrinks with N
    gaps = []
    for N in (128, 256, 512, 1024, 2048):
        _, te, traj = _run(N, 0.98)
        gaps.append(te - mean_escape_time(measure_escape_times(traj, None)))
    assert all(g > 0 for g in gaps)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[0] > 10 and gaps[3] < 10 and gaps[-1] < 3


def test_fixed_point_is_memory_without_slow_drive():
    mems = generate_orthogonal_memories(64, 4, seed=1)
    p = EdenParams(alpha_s=0.9)
    fp = find_fixed_point(mems.xi[2].copy(), np.zeros(64), mems, p)
    assert fp.converged and fp.nearest_memory == 2
    np.testing.assert_allclose(fp.v_star, mems.xi[2], atol=1e-12)
    e = energy(fp.v_star, np.zeros(64), mems, p)
    assert e.total == pytest.approx(32.0 - (0.9 * 64 + math.log1p(3 * math.exp(-0.9 * 64))) / 0.9, rel=1e-12)
