import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eden_sim.dynamics import (
    DivergenceError,
    EdenParams,
    NetworkState,
    clamp_sigma,
    cue_state,
    eden_derivative,
    hidden_activation,
    integrate,
    logsumexp,
    reference_derivative,
    softmax,
)
from eden_sim.patterns import MemorySequence, argmax_memory, generate_rademacher_memories

PAPER = EdenParams(alpha_s=0.98, alpha_c=1.0, tau_f=1.0, tau_d=20.0)


# ---- oracles ---------------------------------------------------------------

def h_loop(v, s, xi, a_s, a_c):
    P, N = xi.shape
    h = [0.0] * P
    for mu in range(P):
        pm = (mu - 1) % P
        acc_s = acc_c = 0.0
        for i in range(N):
            acc_s += xi[mu][i] * v[i]
            acc_c += xi[pm][i] * s[i]
        h[mu] = a_s * acc_s + a_c * acc_c
    return h


def eden_rhs_loop(v, s, xi, p):
    h = h_loop(v, s, xi, p.alpha_s, p.alpha_c)
    m = max(h)
    e = [math.exp(x - m) for x in h]
    z = sum(e)
    w = [x / z for x in e]
    P, N = xi.shape
    dv = [(sum(xi[mu][i] * w[mu] for mu in range(P)) - v[i]) / p.tau_f for i in range(N)]
    ds = [(v[i] - s[i]) / p.tau_d for i in range(N)]
    return np.array(dv), np.array(ds)


def reference_rhs_loop(v, s, xi, p):
    P, N = xi.shape
    sig = [min(1.0, max(-1.0, x)) for x in v]
    dv = []
    for i in range(N):
        acc = 0.0
        for mu in range(P):
            pm = (mu - 1) % P
            for j in range(N):
                acc += p.alpha_s * xi[mu][i] * xi[mu][j] * sig[j]
                acc += p.alpha_c * xi[mu][i] * xi[pm][j] * s[j]
        dv.append((acc - v[i]) / p.tau_f)
    return np.array(dv), (np.asarray(v) - np.asarray(s)) / p.tau_d


def _random_state(N, seed):
    r = np.random.default_rng(seed)
    return NetworkState(r.uniform(-1, 1, N), r.uniform(-1, 1, N))


# ---- params ----------------------------------------------------------------

def test_params_defaults_and_validation():
    p = EdenParams()
    assert (p.alpha_s, p.alpha_c, p.tau_f, p.tau_d, p.dt) == (0.98, 1.0, 1.0, 20.0, 0.01)
    assert p.n_steps == 60000
    assert p.ratio == pytest.approx(0.98)
    with pytest.raises(ValueError):
        EdenParams(alpha_s=0)
    with pytest.raises(ValueError):
        EdenParams(tau_d=-1)
    with pytest.raises(ValueError):
        EdenParams(dt=0.2)
    with pytest.raises(ValueError):
        EdenParams(alpha_c=float("nan"))
    assert p.replace(tau_d=40).tau_d == 40


def test_state_shape_checks():
    with pytest.raises(ValueError):
        NetworkState(np.zeros(3), np.zeros(4))
    mems = generate_rademacher_memories(5, 2, 0)
    with pytest.raises(ValueError):
        hidden_activation(np.zeros(4), np.zeros(4), mems, PAPER)


# ---- hidden activation -----------------------------------------------------

def test_hidden_self_term():
    mems = generate_rademacher_memories(16, 3, seed=0)
    p = PAPER.replace(alpha_s=1.0)
    h = hidden_activation(mems.xi[1], np.zeros(16), mems, p)
    assert h[1] == 16.0


def test_hidden_cross_term_wraps():
    mems = generate_rademacher_memories(16, 3, seed=0)
    p = PAPER.replace(alpha_c=1.0)
    h = hidden_activation(np.zeros(16), mems.xi[0], mems, p)
    assert h[1] == 16.0
    assert h[0] == mems.xi[2] @ mems.xi[0]
    assert h[2] == mems.xi[1] @ mems.xi[0]


def test_hidden_matches_double_loop():
    mems = generate_rademacher_memories(10, 4, seed=5)
    st_ = _random_state(10, 5)
    want = h_loop(st_.v, st_.s, mems.xi, PAPER.alpha_s, PAPER.alpha_c)
    np.testing.assert_allclose(hidden_activation(st_.v, st_.s, mems, PAPER), want, rtol=1e-13, atol=1e-13)


# ---- softmax ---------------------------------------------------------------

def test_softmax_examples():
    np.testing.assert_allclose(softmax(np.full(3, 7.5)), [1 / 3] * 3, rtol=1e-15)
    np.testing.assert_array_equal(softmax(np.array([1000.0, 0.0])), [1.0, 0.0])
    mp.mp.dps = 40
    z = mp.e + mp.e**2 + mp.e**3
    want = [float(mp.e**k / z) for k in (1, 2, 3)]
    np.testing.assert_allclose(softmax(np.array([1.0, 2.0, 3.0])), want, rtol=1e-14)


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e3, 1e3)))
@settings(max_examples=200, deadline=None)
def test_softmax_normalised(h):
    w = softmax(h)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_logsumexp_matches_mpmath():
    h = np.array([800.0, 799.0, -5.0])
    mp.mp.dps = 50
    want = float(mp.log(sum(mp.exp(mp.mpf(x)) for x in h)))
    assert logsumexp(h) == pytest.approx(want, rel=1e-15)
    assert isinstance(logsumexp(h), float)


# ---- derivatives -----------------------------------------------------------

def test_slow_fixed_point_ds_zero():
    mems = generate_rademacher_memories(10, 3, seed=1)
    v = np.random.default_rng(0).normal(size=10)
    _, ds = eden_derivative(NetworkState(v, v.copy()), mems, PAPER)
    assert np.all(ds == 0.0)


def test_single_memory_is_fixed_point():
    mems = generate_rademacher_memories(12, 1, seed=2)
    dv, _ = eden_derivative(NetworkState(mems.xi[0], np.zeros(12)), mems, PAPER)
    assert np.all(dv == 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_eden_derivative_matches_loops(seed):
    mems = generate_rademacher_memories(10, 3, seed=seed)
    st_ = _random_state(10, 100 + seed)
    dv, ds = eden_derivative(st_, mems, PAPER)
    dv0, ds0 = eden_rhs_loop(st_.v, st_.s, mems.xi, PAPER)
    np.testing.assert_allclose(dv, dv0, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(ds, ds0, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("x,want", [(-3.0, -1.0), (0.5, 0.5), (2.0, 1.0), (-1.0, -1.0), (1.0, 1.0)])
def test_clamp(x, want):
    assert clamp_sigma(x) == want


def test_clamp_vector():
    np.testing.assert_array_equal(clamp_sigma(np.array([-2, 0.25, 9])), [-1, 0.25, 1])


def test_reference_constructed_fixed_point():
    N = 8
    mems = generate_rademacher_memories(N, 1, seed=3)
    p = PAPER.replace(alpha_s=1.0 / N, alpha_c=1e-300)
    v = mems.xi[0].copy()
    dv, _ = reference_derivative(NetworkState(v, np.zeros(N)), mems, p)
    np.testing.assert_allclose(dv, 0.0, atol=1e-15)


def test_reference_matches_triple_loop():
    mems = generate_rademacher_memories(8, 2, seed=4)
    r = np.random.default_rng(9)
    st_ = NetworkState(r.uniform(-2, 2, 8), r.uniform(-1, 1, 8))
    dv, ds = reference_derivative(st_, mems, PAPER)
    dv0, ds0 = reference_rhs_loop(st_.v, st_.s, mems.xi, PAPER)
    np.testing.assert_allclose(dv, dv0, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(ds, ds0, rtol=0, atol=0)


def test_reference_pure_decay():
    mems = generate_rademacher_memories(8, 2, seed=4)
    p = PAPER.replace(alpha_s=1e-300)
    v = np.random.default_rng(1).normal(size=8)
    dv, _ = reference_derivative(NetworkState(v, np.zeros(8)), mems, p)
    np.testing.assert_allclose(dv, -v / p.tau_f, rtol=1e-14)


# ---- integration -----------------------------------------------------------

def test_integrate_single_memory_equilibrium(backend):
    mems = generate_rademacher_memories(20, 1, seed=0)
    x = mems.xi[0]
    traj = integrate(NetworkState(x, x), mems, PAPER.replace(t_max=50), record_stride=50)
    assert np.max(np.abs(traj.v - x)) <= 1e-9
    assert np.max(np.abs(traj.s - x)) <= 1e-9


def test_integrate_matches_python_euler(backend):
    mems = generate_rademacher_memories(10, 3, seed=6)
    p = PAPER.replace(alpha_s=0.6, t_max=2.0, dt=0.01)
    st0 = _random_state(10, 6)
    traj = integrate(st0, mems, p, record_stride=20)
    v, s = st0.v.copy(), st0.s.copy()
    for k in range(p.n_steps):
        if k % 20 == 0:
            np.testing.assert_allclose(traj.v[k // 20], v, rtol=1e-12, atol=1e-13)
        dv, ds = eden_rhs_loop(v, s, mems.xi, p)
        v, s = v + p.dt * dv, s + p.dt * ds
    np.testing.assert_allclose(traj.v[-1], v, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(traj.s[-1], s, rtol=1e-11, atol=1e-12)


def test_integrate_reference_matches_python_euler(backend):
    mems = generate_rademacher_memories(8, 2, seed=7)
    p = EdenParams(alpha_s=0.05, alpha_c=0.06, tau_f=1.0, tau_d=5.0, dt=0.01, t_max=1.0)
    st0 = _random_state(8, 7)
    traj = integrate(st0, mems, p, record_stride=10, model="reference")
    v, s = st0.v.copy(), st0.s.copy()
    for _ in range(p.n_steps):
        dv, ds = reference_rhs_loop(v, s, mems.xi, p)
        v, s = v + p.dt * dv, s + p.dt * ds
    np.testing.assert_allclose(traj.v[-1], v, rtol=1e-11, atol=1e-12)
    assert np.all(np.isnan(traj.F))


def test_sampling_grid_and_observables(backend):
    mems = generate_rademacher_memories(30, 4, seed=8)
    p = PAPER.replace(t_max=3.0)
    traj = integrate(cue_state(mems), mems, p, record_stride=7)
    assert len(traj) == p.n_steps // 7 + 1
    np.testing.assert_allclose(np.diff(traj.t), 7 * p.dt, rtol=1e-12)
    np.testing.assert_allclose(traj.mv, traj.v @ mems.xi.T / 30, atol=1e-14)
    np.testing.assert_allclose(traj.ms, traj.s @ mems.xi.T / 30, atol=1e-14)
    for k in range(len(traj)):
        assert traj.argmax[k] == argmax_memory(traj.v[k], mems)


def test_hidden_weights_reproduce_step_softmax(backend):
    mems = generate_rademacher_memories(40, 5, seed=9)
    traj = integrate(cue_state(mems), mems, PAPER.replace(alpha_s=0.5, t_max=20), record_stride=25)
    w = traj.hidden_weights()
    for k in range(0, len(traj), 5):
        want = softmax(hidden_activation(traj.v[k], traj.s[k], mems, traj.params))
        np.testing.assert_allclose(w[k], want, rtol=1e-9, atol=1e-12)


def test_t_max_zero_gives_initial_sample(backend):
    mems = generate_rademacher_memories(10, 3, seed=0)
    traj = integrate(cue_state(mems), mems, PAPER.replace(t_max=0.0))
    assert len(traj) == 1
    np.testing.assert_array_equal(traj.v[0], mems.xi[0])


def test_divergence_reports_step(backend):
    mems = generate_rademacher_memories(10, 2, seed=0)
    p = EdenParams(alpha_s=1.0, alpha_c=1.0, tau_f=1.0, tau_d=1.0, dt=0.1, t_max=10.0)
    st0 = NetworkState(np.full(10, 3.0), np.zeros(10))
    with pytest.raises(DivergenceError) as exc:
        integrate(st0, mems, p, vmax=2.0)
    assert exc.value.step == 0
    with pytest.raises(DivergenceError):
        integrate(NetworkState(np.full(10, np.nan), np.zeros(10)), mems, p)
    # linear self-excitation grows until the guard trips
    loud = EdenParams(alpha_s=1.0, alpha_c=1.0, tau_f=1.0, tau_d=1.0, dt=0.01, t_max=50.0)
    with pytest.raises(DivergenceError) as exc:
        integrate(NetworkState(mems.xi[0], mems.xi[1]), mems, loud, model="reference")
    assert exc.value.step > 0
    assert exc.value.t == pytest.approx(exc.value.step * loud.dt)


def test_euler_first_order_convergence(backend):
    # Richardson: successive dt halvings shrink the difference by ~2
    mems = generate_rademacher_memories(20, 3, seed=10)
    T = 15.0
    base = EdenParams(alpha_s=0.5, alpha_c=1.0, tau_f=1.0, tau_d=5.0, dt=0.04, t_max=T)
    st0 = _random_state(20, 10)
    finals = []
    for dt in (0.04, 0.02, 0.01, 0.005):
        traj = integrate(st0, mems, base.replace(dt=dt), record_stride=int(round(T / dt)))
        assert traj.t[-1] == pytest.approx(T)
        finals.append(traj.v[-1])
    d = [np.max(np.abs(finals[i] - finals[i + 1])) for i in range(3)]
    assert d[0] > 0
    for a, b in zip(d, d[1:]):
        assert 1.7 < a / b < 2.3


@pytest.mark.parametrize("mu", range(5))
def test_static_associative_memory_recall(mu, backend):
    # alpha_c -> 0 leaves a static dense associative memory
    N, P = 100, 5
    mems = generate_rademacher_memories(N, P, seed=21)
    r = np.random.default_rng(mu)
    v0 = mems.xi[mu].copy()
    flip = r.choice(N, size=N // 10, replace=False)
    v0[flip] *= -1
    p = EdenParams(alpha_s=1.0, alpha_c=1e-12, tau_f=1.0, tau_d=20.0, dt=0.01, t_max=20.0)
    traj = integrate(NetworkState(v0, np.zeros(N)), mems, p, record_stride=100)
    assert traj.argmax[-1] == mu
    np.testing.assert_allclose(traj.v[-1], mems.xi[mu], atol=1e-6)


def test_trajectory_csv(tmp_path, backend):
    mems = generate_rademacher_memories(6, 3, seed=0)
    traj = integrate(cue_state(mems), mems, PAPER.replace(t_max=1.0), record_stride=50)
    traj.write_csv(tmp_path / "t.csv", include_states=True)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    head = lines[0].split(",")
    assert head[:2] == ["t", "v_1"]
    assert head[-4:] == ["E", "F", "S", "argmax"]
    assert len(head) == 1 + 6 + 3 + 3 + 4
    assert len(lines) == 1 + len(traj)
    row = lines[-1].split(",")
    assert float(row[1]) == traj.v[-1, 0]
    assert row[-1] == str(traj.argmax[-1] + 1)
    assert b"\r" not in (tmp_path / "t.csv").read_bytes()
    traj.write_hidden_csv(tmp_path / "h.csv")
    w = np.loadtxt(tmp_path / "h.csv", delimiter=",", skiprows=1)[:, 1:]
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_memory_sequence_from_explicit_patterns(backend):
    xi = np.array([[1, 1, -1, -1], [1, -1, 1, -1]])
    mems = MemorySequence(xi)
    traj = integrate(cue_state(mems, 1), mems, PAPER.replace(t_max=0.5), record_stride=10)
    assert traj.argmax[0] == 1
