"""Pure-Python stepping core.

Implements the hot kernels of the adaptive integrator: the selection-
mutation rate vector and one embedded Dormand-Prince 5(4) trial step.
``selmut._core`` is the compiled twin of this module; the two produce
bit-identical results because every floating-point operation is written
in the same order with the same libm calls (the extension is compiled
with fused multiply-adds disabled).

Any edit to arithmetic here must be mirrored literally in _core.pyx.
"""

from __future__ import annotations

from math import exp, sqrt

# model family codes
RICKER = 0
LOGISTIC = 1
TABULATED = 2
CALLABLE = 3

# Dormand-Prince 5(4) tableau (FSAL; c-nodes unused: the field is autonomous)
A21 = 1.0 / 5.0
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0
B1 = 35.0 / 384.0
B3 = 500.0 / 1113.0
B4 = 125.0 / 192.0
B5 = -2187.0 / 6784.0
B6 = 11.0 / 84.0
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

compiled = False


class Context:
    """Bound model + kernel data for the stepping kernels."""

    __slots__ = (
        "n", "family", "p1", "p2", "p3", "theta",
        "sgrid", "btab", "dtab", "gamma", "identity", "model",
    )

    def __init__(self, n, family, p1, p2, p3, theta, sgrid, btab, dtab,
                 gamma, identity, model):
        self.n = n
        self.family = family
        self.p1 = p1
        self.p2 = p2
        self.p3 = p3
        self.theta = theta
        self.sgrid = sgrid
        self.btab = btab
        self.dtab = dtab
        self.gamma = gamma
        self.identity = identity
        self.model = model


def make_context(gamma, identity, spec, model=None):
    """Build a stepping context.

    Args:
        gamma: (N, N) float64 row-stochastic matrix.
        identity: Whether gamma is exactly the identity (enables the
            O(N) pure-selection path; bit-identical to the full loop).
        spec: Model family spec from RateModel.backend_spec(), or None
            for a generic Python-callable model.
        model: The model object (required when spec is None).
    """
    n = gamma.shape[0]
    g = [list(map(float, row)) for row in gamma]
    p1 = p2 = p3 = None
    theta = 0.0
    sgrid = btab = dtab = None
    if spec is None:
        if model is None:
            raise ValueError("generic path needs the model object")
        family = CALLABLE
    elif spec[0] == "ricker":
        family = RICKER
        p1 = list(map(float, spec[1]))
        p2 = list(map(float, spec[2]))
        theta = float(spec[3])
    elif spec[0] == "logistic":
        family = LOGISTIC
        p1 = list(map(float, spec[1]))
        p2 = list(map(float, spec[2]))
        p3 = list(map(float, spec[3]))
    elif spec[0] == "tabulated":
        family = TABULATED
        sgrid = list(map(float, spec[1]))
        btab = [list(map(float, row)) for row in spec[2]]
        dtab = [list(map(float, row)) for row in spec[3]]
    else:
        raise ValueError(f"unknown model family {spec[0]!r}")
    return Context(n, family, p1, p2, p3, theta, sgrid, btab, dtab,
                   g, bool(identity), model)


def _interp(grid, row, s):
    m = len(grid)
    if s <= grid[0]:
        return row[0]
    if s >= grid[m - 1]:
        return row[m - 1]
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
    return row[lo] + (row[lo + 1] - row[lo]) * ((s - s0) / (s1 - s0))


def _rates(ctx, w, out):
    """out[j] = sum_i B_i(s) w_i gamma[i][j] - D_j(s) w_j, s = sum(w)."""
    n = ctx.n
    s = 0.0
    for i in range(n):
        s += w[i]
    bs = [0.0] * n
    ds = [0.0] * n
    fam = ctx.family
    if fam == RICKER:
        p1 = ctx.p1
        p2 = ctx.p2
        dv = exp(ctx.theta * s)
        for i in range(n):
            bs[i] = p1[i] * exp(-p2[i] * s)
            ds[i] = dv
    elif fam == LOGISTIC:
        p1 = ctx.p1
        p2 = ctx.p2
        p3 = ctx.p3
        for i in range(n):
            bs[i] = p1[i]
            ds[i] = p2[i] + p3[i] * s
    elif fam == TABULATED:
        grid = ctx.sgrid
        for i in range(n):
            bs[i] = _interp(grid, ctx.btab[i], s)
            ds[i] = _interp(grid, ctx.dtab[i], s)
    else:
        model = ctx.model
        sv = s if s > 0.0 else 0.0  # FD probes may undershoot zero
        for i in range(n):
            bs[i] = model.B(sv, i)
            ds[i] = model.D(sv, i)
    if ctx.identity:
        for j in range(n):
            out[j] = bs[j] * w[j] - ds[j] * w[j]
    else:
        g = ctx.gamma
        f = [0.0] * n
        for i in range(n):
            f[i] = bs[i] * w[i]
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += f[i] * g[i][j]
            out[j] = acc - ds[j] * w[j]


def rhs(ctx, w_arr, out_arr):
    """Rate vector at state w_arr (numpy float64 in, written to out_arr)."""
    w = w_arr.tolist()
    out = [0.0] * ctx.n
    _rates(ctx, w, out)
    out_arr[:] = out


def try_step(ctx, w_arr, k1_arr, h, rel_tol, abs_tol, w5_arr, k7_arr):
    """One Dormand-Prince 5(4) trial step of size h from state w_arr.

    k1_arr must hold the rate vector at w_arr (FSAL).  Writes the 5th
    order proposal into w5_arr and its rate vector into k7_arr.

    Returns:
        (err, min_w5): scaled RMS error estimate and the smallest
        proposed weight (for the positivity policy).
    """
    n = ctx.n
    w = w_arr.tolist()
    k1 = k1_arr.tolist()
    y = [0.0] * n
    k2 = [0.0] * n
    k3 = [0.0] * n
    k4 = [0.0] * n
    k5 = [0.0] * n
    k6 = [0.0] * n
    k7 = [0.0] * n
    w5 = [0.0] * n

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
        aw = abs(w[i])
        a5 = abs(w5[i])
        big = aw if aw > a5 else a5
        sc = abs_tol + rel_tol * big
        q = e / sc
        err += q * q
        if w5[i] < minw:
            minw = w5[i]
    err = sqrt(err / n)

    w5_arr[:] = w5
    k7_arr[:] = k7
    return err, minw
