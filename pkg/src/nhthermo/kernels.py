"""Hot numerical kernels: adaptive embedded Runge-Kutta stepping of the
vectorized master equation.

The generator is supplied as piecewise-linear-in-time superoperator nodes:
at time t the right-hand side is

    f(t, x) = M(t) x - (c(t) . x) x

with x = vec(rho) (row-major), M the linear part of the generator and c the
linear functional whose value is the trace-growth rate (2 tr(Gamma rho) plus
the dissipator's trace leak). Nodes are exact for linear-in-time Hamiltonian
ramps; curvature of the dissipator between nodes is handled by node
refinement at build time (see dynamics).

Every accepted step re-Hermitizes and renormalizes the state, which is the
discrete form of the master equation's normalizing term.

Two interchangeable implementations are provided: a numba @njit kernel and a
pure-numpy fallback. Selection: the environment variable
NHTHERMO_DISABLE_NUMBA=1 forces the numpy path; otherwise numba is used when
importable.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("NHTHERMO_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        return deco


USE_NUMBA = HAS_NUMBA and not _DISABLE

# Dormand-Prince 5(4) tableau.
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# y5 - y4 error weights (k2 weight is zero).
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


def _rhs_numpy(t, x, node_t, Mn, cn):
    if len(node_t) == 1:
        M = Mn[0]
        c = cn[0]
    else:
        j = int(np.searchsorted(node_t, t, side="right")) - 1
        j = min(max(j, 0), len(node_t) - 2)
        w = (t - node_t[j]) / (node_t[j + 1] - node_t[j])
        M = Mn[j] * (1 - w) + Mn[j + 1] * w
        c = cn[j] * (1 - w) + cn[j + 1] * w
    return M @ x - (c @ x) * x


def _normalize_numpy(x, d):
    rho = x.reshape(d, d)
    rho = (rho + rho.conj().T) / 2
    tr = rho.trace().real
    return (rho / tr).reshape(-1)


def integrate_window_numpy(x0, t0, t1, node_t, Mn, cn, rtol, atol, h0, hmax, max_steps):
    """Pure-numpy adaptive DP45 over [t0, t1]. Returns (x, h_last, nsteps, status)."""
    x = _normalize_numpy(x0.astype(np.complex128), int(round(len(x0) ** 0.5)))
    d = int(round(len(x0) ** 0.5))
    t = t0
    span = t1 - t0
    if span <= 0:
        return x, h0, 0, STATUS_OK
    if h0 <= 0:
        f0 = _rhs_numpy(t, x, node_t, Mn, cn)
        h0 = min(hmax, span, 0.01 * max(1.0, np.linalg.norm(x)) / max(np.linalg.norm(f0), 1e-12))
    h = min(h0, span, hmax)
    nsteps = 0
    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        if nsteps >= max_steps:
            return x, h, nsteps, STATUS_MAX_STEPS
        h = min(h, t1 - t)
        if h < 1e-14 * max(1.0, abs(t)):
            return x, h, nsteps, STATUS_STEP_UNDERFLOW
        k1 = _rhs_numpy(t, x, node_t, Mn, cn)
        k2 = _rhs_numpy(t + _C2 * h, x + h * (_A21 * k1), node_t, Mn, cn)
        k3 = _rhs_numpy(t + _C3 * h, x + h * (_A31 * k1 + _A32 * k2), node_t, Mn, cn)
        k4 = _rhs_numpy(t + _C4 * h, x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), node_t, Mn, cn)
        k5 = _rhs_numpy(
            t + _C5 * h, x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4), node_t, Mn, cn
        )
        k6 = _rhs_numpy(
            t + h,
            x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
            node_t,
            Mn,
            cn,
        )
        xn = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = _rhs_numpy(t + h, xn, node_t, Mn, cn)
        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        scale = atol + rtol * np.maximum(np.abs(x), np.abs(xn))
        enorm = np.sqrt(np.mean(np.abs(err / scale) ** 2))
        nsteps += 1
        if enorm <= 1.0:
            t += h
            x = _normalize_numpy(xn, d)
        fac = 0.9 * (enorm + 1e-300) ** -0.2
        h *= min(5.0, max(0.2, fac))
        h = min(h, hmax)
    return x, h, nsteps, STATUS_OK


@njit(cache=True)
def _integrate_window_numba(x0, t0, t1, node_t, Mn, cn, rtol, atol, h0, hmax, max_steps):  # pragma: no cover - exercised via wrapper
    m = x0.shape[0]
    d = int(round(m**0.5))
    n_nodes = node_t.shape[0]

    x = x0.copy()
    # hermitize + renormalize in place
    rho = x.reshape(d, d)
    tr = 0.0
    for i in range(d):
        for j in range(i, d):
            v = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
            rho[i, j] = v
            rho[j, i] = np.conj(v)
        tr += rho[i, i].real
    for i in range(m):
        x[i] /= tr

    k = np.empty((7, m), dtype=np.complex128)
    xs = np.empty(m, dtype=np.complex128)
    xn = np.empty(m, dtype=np.complex128)
    Mloc = np.empty((m, m), dtype=np.complex128)
    cloc = np.empty(m, dtype=np.complex128)

    def _eval(t, y, out):
        # interpolate generator
        if n_nodes == 1:
            for r in range(m):
                cloc[r] = cn[0, r]
                for s in range(m):
                    Mloc[r, s] = Mn[0, r, s]
        else:
            j = np.searchsorted(node_t, t, side="right") - 1
            if j < 0:
                j = 0
            if j > n_nodes - 2:
                j = n_nodes - 2
            w = (t - node_t[j]) / (node_t[j + 1] - node_t[j])
            wm = 1.0 - w
            for r in range(m):
                cloc[r] = cn[j, r] * wm + cn[j + 1, r] * w
                for s in range(m):
                    Mloc[r, s] = Mn[j, r, s] * wm + Mn[j + 1, r, s] * w
        cdot = 0.0 + 0.0j
        for r in range(m):
            cdot += cloc[r] * y[r]
        for r in range(m):
            acc = 0.0 + 0.0j
            for s in range(m):
                acc += Mloc[r, s] * y[s]
            out[r] = acc - cdot * y[r]

    span = t1 - t0
    t = t0
    if span <= 0.0:
        return x, h0, 0, STATUS_OK
    h = h0
    if h <= 0.0:
        _eval(t, x, k[0])
        fn = 0.0
        xnorm = 0.0
        for r in range(m):
            fn += abs(k[0, r]) ** 2
            xnorm += abs(x[r]) ** 2
        fn = np.sqrt(fn)
        xnorm = np.sqrt(xnorm)
        h = 0.01 * max(1.0, xnorm) / max(fn, 1e-12)
    if h > span:
        h = span
    if h > hmax:
        h = hmax

    nsteps = 0
    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        if nsteps >= max_steps:
            return x, h, nsteps, STATUS_MAX_STEPS
        if h > t1 - t:
            h = t1 - t
        if h < 1e-14 * max(1.0, abs(t)):
            return x, h, nsteps, STATUS_STEP_UNDERFLOW

        _eval(t, x, k[0])
        for r in range(m):
            xs[r] = x[r] + h * _A21 * k[0, r]
        _eval(t + _C2 * h, xs, k[1])
        for r in range(m):
            xs[r] = x[r] + h * (_A31 * k[0, r] + _A32 * k[1, r])
        _eval(t + _C3 * h, xs, k[2])
        for r in range(m):
            xs[r] = x[r] + h * (_A41 * k[0, r] + _A42 * k[1, r] + _A43 * k[2, r])
        _eval(t + _C4 * h, xs, k[3])
        for r in range(m):
            xs[r] = x[r] + h * (
                _A51 * k[0, r] + _A52 * k[1, r] + _A53 * k[2, r] + _A54 * k[3, r]
            )
        _eval(t + _C5 * h, xs, k[4])
        for r in range(m):
            xs[r] = x[r] + h * (
                _A61 * k[0, r]
                + _A62 * k[1, r]
                + _A63 * k[2, r]
                + _A64 * k[3, r]
                + _A65 * k[4, r]
            )
        _eval(t + h, xs, k[5])
        for r in range(m):
            xn[r] = x[r] + h * (
                _B1 * k[0, r] + _B3 * k[2, r] + _B4 * k[3, r] + _B5 * k[4, r] + _B6 * k[5, r]
            )
        _eval(t + h, xn, k[6])

        enorm2 = 0.0
        for r in range(m):
            err = h * (
                _E1 * k[0, r]
                + _E3 * k[2, r]
                + _E4 * k[3, r]
                + _E5 * k[4, r]
                + _E6 * k[5, r]
                + _E7 * k[6, r]
            )
            am = abs(x[r])
            an = abs(xn[r])
            sc = atol + rtol * (am if am > an else an)
            q = abs(err) / sc
            enorm2 += q * q
        enorm = np.sqrt(enorm2 / m)
        nsteps += 1
        if enorm <= 1.0:
            t += h
            rho = xn.reshape(d, d)
            tr = 0.0
            for i in range(d):
                for j2 in range(i, d):
                    v = 0.5 * (rho[i, j2] + np.conj(rho[j2, i]))
                    rho[i, j2] = v
                    rho[j2, i] = np.conj(v)
                tr += rho[i, i].real
            for r in range(m):
                x[r] = xn[r] / tr
        fac = 0.9 * (enorm + 1e-300) ** -0.2
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        h *= fac
        if h > hmax:
            h = hmax
    return x, h, nsteps, STATUS_OK


def integrate_window(x0, t0, t1, node_t, Mn, cn, rtol=1e-9, atol=1e-12, h0=0.0, hmax=np.inf, max_steps=200_000_000):
    """Advance vec(rho) from t0 to t1; dispatches to numba or numpy path."""
    node_t = np.ascontiguousarray(node_t, dtype=np.float64)
    Mn = np.ascontiguousarray(Mn, dtype=np.complex128)
    cn = np.ascontiguousarray(cn, dtype=np.complex128)
    x0 = np.ascontiguousarray(x0, dtype=np.complex128)
    if USE_NUMBA:
        return _integrate_window_numba(
            x0, float(t0), float(t1), node_t, Mn, cn, float(rtol), float(atol), float(h0), float(hmax), int(max_steps)
        )
    return integrate_window_numpy(
        x0, float(t0), float(t1), node_t, Mn, cn, float(rtol), float(atol), float(h0), float(hmax), int(max_steps)
    )


def generator_apply(x, t, node_t, Mn, cn):
    """f(t, x) for diagnostics (generator norm at samples)."""
    return _rhs_numpy(
        float(t),
        np.asarray(x, dtype=np.complex128),
        np.asarray(node_t, dtype=np.float64),
        np.asarray(Mn, dtype=np.complex128),
        np.asarray(cn, dtype=np.complex128),
    )
