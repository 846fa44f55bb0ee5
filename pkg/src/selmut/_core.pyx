# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stepping core.

Twin of selmut._pycore: same rate-vector and Dormand-Prince 5(4) trial
step, compiled.  Every floating-point expression mirrors _pycore.py
term for term, and setup.py builds this module with -ffp-contract=off,
so the two backends produce bit-identical trajectories.

Generic Python-callable models are not handled here; the backend
selector routes those to the pure-Python core.

Any edit to arithmetic here must be mirrored literally in _pycore.py.
"""

from libc.math cimport exp, fabs, sqrt

import numpy as np

cdef int RICKER = 0
cdef int LOGISTIC = 1
cdef int TABULATED = 2

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0

compiled = True


cdef class Context:
    """Bound model + kernel data for the stepping kernels."""

    cdef int n
    cdef int family
    cdef bint identity
    cdef double theta
    cdef double[::1] p1
    cdef double[::1] p2
    cdef double[::1] p3
    cdef double[::1] sgrid
    cdef double[:, ::1] btab
    cdef double[:, ::1] dtab
    cdef double[:, ::1] gamma
    # scratch
    cdef double[::1] bs
    cdef double[::1] ds
    cdef double[::1] f
    cdef double[::1] y
    cdef double[::1] k2
    cdef double[::1] k3
    cdef double[::1] k4
    cdef double[::1] k5
    cdef double[::1] k6


def make_context(gamma, identity, spec, model=None):
    """Build a stepping context (see _pycore.make_context)."""
    cdef Context ctx = Context()
    cdef int n = gamma.shape[0]
    ctx.n = n
    ctx.gamma = np.array(gamma, dtype=np.float64, order="C")
    ctx.identity = bool(identity)
    if spec is None:
        raise ValueError("compiled core has no generic-callable path")
    if spec[0] == "ricker":
        ctx.family = RICKER
        ctx.p1 = np.array(spec[1], dtype=np.float64, order="C")
        ctx.p2 = np.array(spec[2], dtype=np.float64, order="C")
        ctx.theta = float(spec[3])
    elif spec[0] == "logistic":
        ctx.family = LOGISTIC
        ctx.p1 = np.array(spec[1], dtype=np.float64, order="C")
        ctx.p2 = np.array(spec[2], dtype=np.float64, order="C")
        ctx.p3 = np.array(spec[3], dtype=np.float64, order="C")
    elif spec[0] == "tabulated":
        ctx.family = TABULATED
        ctx.sgrid = np.array(spec[1], dtype=np.float64, order="C")
        ctx.btab = np.array(spec[2], dtype=np.float64, order="C")
        ctx.dtab = np.array(spec[3], dtype=np.float64, order="C")
    else:
        raise ValueError(f"unknown model family {spec[0]!r}")
    ctx.bs = np.zeros(n)
    ctx.ds = np.zeros(n)
    ctx.f = np.zeros(n)
    ctx.y = np.zeros(n)
    ctx.k2 = np.zeros(n)
    ctx.k3 = np.zeros(n)
    ctx.k4 = np.zeros(n)
    ctx.k5 = np.zeros(n)
    ctx.k6 = np.zeros(n)
    return ctx


cdef double _interp(double[::1] grid, double[:, ::1] tab, int row, double s):
    cdef int m = grid.shape[0]
    cdef int lo, hi, mid
    cdef double s0, s1
    if s <= grid[0]:
        return tab[row, 0]
    if s >= grid[m - 1]:
        return tab[row, m - 1]
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if grid[mid] <= s:
            lo = mid
        else:
            hi = mid
    s0 = grid[lo]
    s1 = grid[lo + 1]
    return tab[row, lo] + (tab[row, lo + 1] - tab[row, lo]) * ((s - s0) / (s1 - s0))


cdef void _rates(Context ctx, const double[::1] w, double[::1] out):
    cdef int n = ctx.n
    cdef int i, j
    cdef double s = 0.0
    cdef double dv, acc
    cdef double[::1] bs = ctx.bs
    cdef double[::1] ds = ctx.ds
    cdef double[::1] f = ctx.f
    cdef double[:, ::1] g = ctx.gamma
    for i in range(n):
        s += w[i]
    if ctx.family == RICKER:
        dv = exp(ctx.theta * s)
        for i in range(n):
            bs[i] = ctx.p1[i] * exp(-ctx.p2[i] * s)
            ds[i] = dv
    elif ctx.family == LOGISTIC:
        for i in range(n):
            bs[i] = ctx.p1[i]
            ds[i] = ctx.p2[i] + ctx.p3[i] * s
    else:
        for i in range(n):
            bs[i] = _interp(ctx.sgrid, ctx.btab, i, s)
            ds[i] = _interp(ctx.sgrid, ctx.dtab, i, s)
    if ctx.identity:
        for j in range(n):
            out[j] = bs[j] * w[j] - ds[j] * w[j]
    else:
        for i in range(n):
            f[i] = bs[i] * w[i]
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += f[i] * g[i, j]
            out[j] = acc - ds[j] * w[j]


def rhs(Context ctx, const double[::1] w_arr, double[::1] out_arr):
    """Rate vector at state w_arr (written to out_arr).

    w_arr is input-only (const view), so read-only arrays such as
    AtomicMeasure.weights are accepted.
    """
    _rates(ctx, w_arr, out_arr)


def try_step(Context ctx, const double[::1] w, const double[::1] k1, double h,
             double rel_tol, double abs_tol,
             double[::1] w5, double[::1] k7):
    """One Dormand-Prince 5(4) trial step (see _pycore.try_step)."""
    cdef int n = ctx.n
    cdef int i
    cdef double err, minw, e, aw, a5, big, sc, q
    cdef double[::1] y = ctx.y
    cdef double[::1] k2 = ctx.k2
    cdef double[::1] k3 = ctx.k3
    cdef double[::1] k4 = ctx.k4
    cdef double[::1] k5 = ctx.k5
    cdef double[::1] k6 = ctx.k6

    for i in range(n):
        y[i] = w[i] + h * (A21 * k1[i])
    _rates(ctx, y, k2)
    for i in range(n):
        y[i] = w[i] + h * (A31 * k1[i] + A32 * k2[i])
    _rates(ctx, y, k3)
    for i in range(n):
        y[i] = w[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    _rates(ctx, y, k4)
    for i in range(n):
        y[i] = w[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    _rates(ctx, y, k5)
    for i in range(n):
        y[i] = w[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    _rates(ctx, y, k6)
    for i in range(n):
        w5[i] = w[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    _rates(ctx, w5, k7)

    err = 0.0
    minw = w5[0]
    for i in range(n):
        e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        aw = fabs(w[i])
        a5 = fabs(w5[i])
        big = aw if aw > a5 else a5
        sc = abs_tol + rel_tol * big
        q = e / sc
        err += q * q
        if w5[i] < minw:
            minw = w5[i]
    err = sqrt(err / n)

    return err, minw
