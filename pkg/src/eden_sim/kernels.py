"""Hot loops: Euler integration and fixed-point iteration.

Every kernel exists twice, a numba-compiled loop version (``_*_jit``) and a
vectorised numpy version (``_*_np``). The public wrappers dispatch on
:func:`eden_sim._accel.get_backend` at call time, so both paths stay
testable in one process.

Memory indices are 0-based here; the predecessor of memory ``m`` is
``(m - 1) % P``.
"""

import numpy as np

from . import _accel
from ._accel import njit

OK = 0
DIVERGED = 1


# --------------------------------------------------------------------------
# EDEN Euler integration
# --------------------------------------------------------------------------

@njit
def _eden_euler_jit(xi, v0, s0, a_s, a_c, tau_f, tau_d, dt, n_steps, stride, store, vmax):
    P, N = xi.shape
    n_rec = n_steps // stride + 1
    mv = np.empty((n_rec, P))
    ms = np.empty((n_rec, P))
    en = np.empty(n_rec)
    ff = np.empty(n_rec)
    ss = np.empty(n_rec)
    am = np.empty(n_rec, np.int64)
    if store:
        vrec = np.empty((n_rec, N))
        srec = np.empty((n_rec, N))
    else:
        vrec = np.empty((0, N))
        srec = np.empty((0, N))

    v = v0.copy()
    s = s0.copy()
    ov = np.empty(P)
    osl = np.empty(P)
    h = np.empty(P)
    w = np.empty(P)
    tgt = np.empty(N)
    dv = np.empty(N)
    ds = np.empty(N)
    rec = 0
    for k in range(n_steps + 1):
        for m in range(P):
            a = 0.0
            b = 0.0
            for i in range(N):
                a += xi[m, i] * v[i]
                b += xi[m, i] * s[i]
            ov[m] = a
            osl[m] = b
        hmax = -np.inf
        for m in range(P):
            h[m] = a_s * ov[m] + a_c * osl[(m - 1) % P]
            if h[m] > hmax:
                hmax = h[m]
        z = 0.0
        for m in range(P):
            w[m] = np.exp(h[m] - hmax)
            z += w[m]
        for m in range(P):
            w[m] /= z
        for i in range(N):
            t = 0.0
            for m in range(P):
                t += w[m] * xi[m, i]
            tgt[i] = t
            dv[i] = (t - v[i]) / tau_f
            ds[i] = (v[i] - s[i]) / tau_d

        if k % stride == 0:
            best = ov[0]
            bi = 0
            for m in range(1, P):
                if ov[m] > best:
                    best = ov[m]
                    bi = m
            am[rec] = bi
            vv = 0.0
            f = 0.0
            for i in range(N):
                vv += v[i] * v[i]
                f += dv[i] * dv[i]
            for m in range(P):
                mv[rec, m] = ov[m] / N
                ms[rec, m] = osl[m] / N
            en[rec] = 0.5 * vv - (hmax + np.log(z)) / a_s
            ff[rec] = -tau_f * f
            # slow term: sum_mu w_mu <xi^(mu-1), ds>
            acc = 0.0
            for m in range(P):
                q = 0.0
                pm = (m - 1) % P
                for i in range(N):
                    q += xi[pm, i] * ds[i]
                acc += w[m] * q
            ss[rec] = -(a_c / a_s) * acc
            if store:
                for i in range(N):
                    vrec[rec, i] = v[i]
                    srec[rec, i] = s[i]
            rec += 1

        if k == n_steps:
            break
        bad = False
        for i in range(N):
            v[i] += dt * dv[i]
            s[i] += dt * ds[i]
            if not (np.abs(v[i]) <= vmax) or not np.isfinite(s[i]):
                bad = True
        if bad:
            return mv[:rec], ms[:rec], en[:rec], ff[:rec], ss[:rec], am[:rec], vrec[:rec], srec[:rec], DIVERGED, k + 1
    return mv, ms, en, ff, ss, am, vrec, srec, OK, -1


def _eden_euler_np(xi, v0, s0, a_s, a_c, tau_f, tau_d, dt, n_steps, stride, store, vmax):
    P, N = xi.shape
    n_rec = n_steps // stride + 1
    mv = np.empty((n_rec, P))
    ms = np.empty((n_rec, P))
    en = np.empty(n_rec)
    ff = np.empty(n_rec)
    ss = np.empty(n_rec)
    am = np.empty(n_rec, np.int64)
    vrec = np.empty((n_rec if store else 0, N))
    srec = np.empty((n_rec if store else 0, N))
    prev = np.roll(xi, 1, axis=0)
    v = np.array(v0, dtype=float)
    s = np.array(s0, dtype=float)
    rec = 0
    for k in range(n_steps + 1):
        ov = xi @ v
        osl = xi @ s
        h = a_s * ov + a_c * np.roll(osl, 1)
        hmax = h.max()
        e = np.exp(h - hmax)
        z = e.sum()
        w = e / z
        dv = (w @ xi - v) / tau_f
        ds = (v - s) / tau_d
        if k % stride == 0:
            am[rec] = int(np.argmax(ov))
            mv[rec] = ov / N
            ms[rec] = osl / N
            en[rec] = 0.5 * (v @ v) - (hmax + np.log(z)) / a_s
            ff[rec] = -tau_f * (dv @ dv)
            ss[rec] = -(a_c / a_s) * (w @ (prev @ ds))
            if store:
                vrec[rec] = v
                srec[rec] = s
            rec += 1
        if k == n_steps:
            break
        v = v + dt * dv
        s = s + dt * ds
        if not (np.all(np.abs(v) <= vmax) and np.all(np.isfinite(s))):
            return mv[:rec], ms[:rec], en[:rec], ff[:rec], ss[:rec], am[:rec], vrec[:rec], srec[:rec], DIVERGED, k + 1
    return mv, ms, en, ff, ss, am, vrec, srec, OK, -1


def eden_euler(xi, v0, s0, a_s, a_c, tau_f, tau_d, dt, n_steps, stride, store=True, vmax=10.0):
    """Forward-Euler integration of the EDEN equations.

    Returns ``(mv, ms, energy, F, S, argmax, v_rec, s_rec, status, fail_step)``;
    observables are evaluated at the state *before* the update of each
    recorded step. ``status`` is :data:`DIVERGED` when a component of ``v``
    left ``[-vmax, vmax]`` or ``s`` became non-finite, with ``fail_step`` the
    1-based step index at which it happened.
    """
    args = (
        np.ascontiguousarray(xi, dtype=np.float64),
        np.ascontiguousarray(v0, dtype=np.float64),
        np.ascontiguousarray(s0, dtype=np.float64),
        float(a_s), float(a_c), float(tau_f), float(tau_d), float(dt),
        int(n_steps), int(stride), bool(store), float(vmax),
    )
    if _accel.get_backend() == "numba":
        return _eden_euler_jit(*args)
    return _eden_euler_np(*args)


# --------------------------------------------------------------------------
# Reference (linear interaction) network
# --------------------------------------------------------------------------

@njit
def _clamp(x):
    if x < -1.0:
        return -1.0
    if x > 1.0:
        return 1.0
    return x


@njit
def _reference_euler_jit(xi, v0, s0, a_s, a_c, tau_f, tau_d, dt, n_steps, stride, store, vmax):
    P, N = xi.shape
    n_rec = n_steps // stride + 1
    mv = np.empty((n_rec, P))
    ms = np.empty((n_rec, P))
    en = np.empty(n_rec)
    am = np.empty(n_rec, np.int64)
    if store:
        vrec = np.empty((n_rec, N))
        srec = np.empty((n_rec, N))
    else:
        vrec = np.empty((0, N))
        srec = np.empty((0, N))
    v = v0.copy()
    s = s0.copy()
    sv = np.empty(N)
    ov = np.empty(P)
    osg = np.empty(P)
    osl = np.empty(P)
    c = np.empty(P)
    dv = np.empty(N)
    ds = np.empty(N)
    rec = 0
    for k in range(n_steps + 1):
        for i in range(N):
            sv[i] = _clamp(v[i])
        for m in range(P):
            a = 0.0
            b = 0.0
            g = 0.0
            for i in range(N):
                a += xi[m, i] * v[i]
                g += xi[m, i] * sv[i]
                b += xi[m, i] * s[i]
            ov[m] = a
            osg[m] = g
            osl[m] = b
        for m in range(P):
            c[m] = a_s * osg[m] + a_c * osl[(m - 1) % P]
        for i in range(N):
            t = 0.0
            for m in range(P):
                t += xi[m, i] * c[m]
            dv[i] = (t - v[i]) / tau_f
            ds[i] = (v[i] - s[i]) / tau_d
        if k % stride == 0:
            best = ov[0]
            bi = 0
            for m in range(1, P):
                if ov[m] > best:
                    best = ov[m]
                    bi = m
            am[rec] = bi
            vv = 0.0
            for i in range(N):
                vv += v[i] * v[i]
            cc = 0.0
            for m in range(P):
                mv[rec, m] = ov[m] / N
                ms[rec, m] = osl[m] / N
                cc += c[m] * c[m]
            en[rec] = 0.5 * vv - cc / (2.0 * a_s)
            if store:
                for i in range(N):
                    vrec[rec, i] = v[i]
                    srec[rec, i] = s[i]
            rec += 1
        if k == n_steps:
            break
        bad = False
        for i in range(N):
            v[i] += dt * dv[i]
            s[i] += dt * ds[i]
            if not (np.abs(v[i]) <= vmax) or not np.isfinite(s[i]):
                bad = True
        if bad:
            return mv[:rec], ms[:rec], en[:rec], am[:rec], vrec[:rec], srec[:rec], DIVERGED, k + 1
    return mv, ms, en, am, vrec, srec, OK, -1


def _reference_euler_np(xi, v0, s0, a_s, a_c, tau_f, tau_d, dt, n_steps, stride, store, vmax):
    P, N = xi.shape
    n_rec = n_steps // stride + 1
    mv = np.empty((n_rec, P))
    ms = np.empty((n_rec, P))
    en = np.empty(n_rec)
    am = np.empty(n_rec, np.int64)
    vrec = np.empty((n_rec if store else 0, N))
    srec = np.empty((n_rec if store else 0, N))
    v = np.array(v0, dtype=float)
    s = np.array(s0, dtype=float)
    rec = 0
    for k in range(n_steps + 1):
        ov = xi @ v
        osl = xi @ s
        c = a_s * (xi @ np.clip(v, -1.0, 1.0)) + a_c * np.roll(osl, 1)
        dv = (c @ xi - v) / tau_f
        ds = (v - s) / tau_d
        if k % stride == 0:
            am[rec] = int(np.argmax(ov))
            mv[rec] = ov / N
            ms[rec] = osl / N
            en[rec] = 0.5 * (v @ v) - (c @ c) / (2.0 * a_s)
            if store:
                vrec[rec] = v
                srec[rec] = s
            rec += 1
        if k == n_steps:
            break
        v = v + dt * dv
        s = s + dt * ds
        if not (np.all(np.abs(v) <= vmax) and np.all(np.isfinite(s))):
            return mv[:rec], ms[:rec], en[:rec], am[:rec], vrec[:rec], srec[:rec], DIVERGED, k + 1
    return mv, ms, en, am, vrec, srec, OK, -1


def reference_euler(xi, v0, s0, a_s, a_c, tau_f, tau_d, dt, n_steps, stride, store=True, vmax=10.0):
    """Euler integration of the reference network.

    Returns ``(mv, ms, energy, argmax, v_rec, s_rec, status, fail_step)``.
    """
    args = (
        np.ascontiguousarray(xi, dtype=np.float64),
        np.ascontiguousarray(v0, dtype=np.float64),
        np.ascontiguousarray(s0, dtype=np.float64),
        float(a_s), float(a_c), float(tau_f), float(tau_d), float(dt),
        int(n_steps), int(stride), bool(store), float(vmax),
    )
    if _accel.get_backend() == "numba":
        return _reference_euler_jit(*args)
    return _reference_euler_np(*args)


# --------------------------------------------------------------------------
# Fixed-point iteration with the slow population frozen
# --------------------------------------------------------------------------

@njit
def _eden_fixed_point_jit(xi, hc, v0, a_s, tol, max_iter):
    P, N = xi.shape
    v = v0.copy()
    vn = np.empty(N)
    h = np.empty(P)
    d = np.inf
    for it in range(max_iter + 1):
        hmax = -np.inf
        for m in range(P):
            a = 0.0
            for i in range(N):
                a += xi[m, i] * v[i]
            h[m] = a_s * a + hc[m]
            if h[m] > hmax:
                hmax = h[m]
        z = 0.0
        for m in range(P):
            h[m] = np.exp(h[m] - hmax)
            z += h[m]
        for i in range(N):
            vn[i] = 0.0
        for m in range(P):
            wm = h[m] / z
            if wm == 0.0:
                continue
            for i in range(N):
                vn[i] += wm * xi[m, i]
        d = 0.0
        for i in range(N):
            x = np.abs(vn[i] - v[i])
            if x > d:
                d = x
        if d <= tol:
            return v, d, it, True
        if it == max_iter:
            break
        for i in range(N):
            v[i] = vn[i]
    return v, d, max_iter, False


def _eden_fixed_point_np(xi, hc, v0, a_s, tol, max_iter):
    v = np.array(v0, dtype=float)
    d = np.inf
    for it in range(max_iter + 1):
        h = a_s * (xi @ v) + hc
        e = np.exp(h - h.max())
        vn = (e / e.sum()) @ xi
        d = float(np.max(np.abs(vn - v)))
        if d <= tol:
            return v, d, it, True
        if it == max_iter:
            break
        v = vn
    return v, d, max_iter, False


def eden_fixed_point(xi, hc, v0, a_s, tol, max_iter):
    """Iterate ``v <- xi^T softmax(a_s xi v + hc)`` until the sup-norm step is ``<= tol``.

    ``hc`` is the frozen slow drive, one entry per memory. Returns
    ``(v, residual, updates, converged)`` where ``residual`` is the size of
    the step the map would take from the returned ``v``.
    """
    args = (
        np.ascontiguousarray(xi, dtype=np.float64),
        np.ascontiguousarray(hc, dtype=np.float64),
        np.ascontiguousarray(v0, dtype=np.float64),
        float(a_s), float(tol), int(max_iter),
    )
    if _accel.get_backend() == "numba":
        v, d, it, ok = _eden_fixed_point_jit(*args)
    else:
        v, d, it, ok = _eden_fixed_point_np(*args)
    return v, float(d), int(it), bool(ok)


@njit
def _reference_fixed_point_jit(xi, bias, v0, a_s, tol, max_iter):
    P, N = xi.shape
    v = v0.copy()
    vn = np.empty(N)
    g = np.empty(P)
    d = np.inf
    for it in range(max_iter + 1):
        for m in range(P):
            a = 0.0
            for i in range(N):
                a += xi[m, i] * _clamp(v[i])
            g[m] = a_s * a
        for i in range(N):
            vn[i] = bias[i]
        for m in range(P):
            for i in range(N):
                vn[i] += g[m] * xi[m, i]
        d = 0.0
        for i in range(N):
            x = np.abs(vn[i] - v[i])
            if x > d:
                d = x
        if d <= tol:
            return v, d, it, True
        if it == max_iter or not np.isfinite(d):
            break
        for i in range(N):
            v[i] = vn[i]
    return v, d, max_iter, False


def _reference_fixed_point_np(xi, bias, v0, a_s, tol, max_iter):
    v = np.array(v0, dtype=float)
    d = np.inf
    for it in range(max_iter + 1):
        vn = a_s * ((xi @ np.clip(v, -1.0, 1.0)) @ xi) + bias
        d = float(np.max(np.abs(vn - v)))
        if d <= tol:
            return v, d, it, True
        if it == max_iter or not np.isfinite(d):
            break
        v = vn
    return v, d, max_iter, False


def reference_fixed_point(xi, bias, v0, a_s, tol, max_iter):
    """Iterate ``v <- a_s xi^T xi clamp(v) + bias``; same return contract as :func:`eden_fixed_point`."""
    args = (
        np.ascontiguousarray(xi, dtype=np.float64),
        np.ascontiguousarray(bias, dtype=np.float64),
        np.ascontiguousarray(v0, dtype=np.float64),
        float(a_s), float(tol), int(max_iter),
    )
    if _accel.get_backend() == "numba":
        v, d, it, ok = _reference_fixed_point_jit(*args)
    else:
        v, d, it, ok = _reference_fixed_point_np(*args)
    return v, float(d), int(it), bool(ok)
