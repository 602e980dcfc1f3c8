"""Scalar map formulas and the jitted stepping loops.

Every formula here is used twice: jitted inside the trajectory kernels, and
through ``.py_func`` by the pure-Python evaluation path in :mod:`invmeas.homeo`.
Keeping one source means the two paths agree to the last bit.
"""
import math

import numpy as np
from numba import njit

# primitive op codes of a compiled map program
OP_AFFINE = 0
OP_ODD_POWER = 1
OP_PIECEWISE = 2
OP_SKEW = 3
OP_CONJ = 4

# interval diffeomorphism codes
D_MOEBIUS = 0
D_POWER = 1
D_CUBIC = 2
D_CUBIC_INV = 3

# clamp for r^{-1}(x) near the poles of the conjugation
CONJ_DELTA = 1e-12


@njit(cache=True)
def odd_power(p, x):
    if x >= 0.0:
        return x ** p
    return -((-x) ** p)


@njit(cache=True)
def piecewise(xs, ys, left, right, x):
    n = xs.shape[0]
    if x <= xs[0]:
        return ys[0] + left * (x - xs[0])
    if x >= xs[n - 1]:
        return ys[n - 1] + right * (x - xs[n - 1])
    i = np.searchsorted(xs, x, side="right") - 1
    slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
    return ys[i] + slope * (x - xs[i])


@njit(cache=True)
def _cubic(k, u, w):
    # h(u) = u + k u (1-u) (1-2u); symmetric: h(1-u) = 1 - h(u)
    d = w - u
    return u * (1.0 + k * w * d), w * (1.0 - k * u * d)


@njit(cache=True)
def _cubic_solve_low(k, y):
    # solve h(v) = y for v in [0, 1/2], y in [0, 1/2]
    if y <= 0.0:
        return 0.0
    if y >= 0.5:
        return 0.5
    lo, hi = 0.0, 0.5
    v = y / (1.0 + k)
    if not (lo < v < hi):
        v = y
    for _ in range(200):
        h = v * (1.0 + k * (1.0 - v) * (1.0 - 2.0 * v))
        f = h - y
        if f > 0.0:
            hi = v
        else:
            lo = v
        dh = 1.0 + k * (1.0 - 6.0 * v + 6.0 * v * v)
        nv = v - f / dh
        if not (lo < nv < hi):
            nv = 0.5 * (lo + hi)
        if nv == v or hi - lo <= 2.2e-16 * hi:
            v = nv
            break
        v = nv
    return v


@njit(cache=True)
def diffeo_pair(code, par, u, w):
    """Evaluate an interval diffeomorphism on the pair (u, 1-u).

    Returns ``(h(u), 1 - h(u))`` with both components computed without
    cancellation, which keeps the conjugated maps accurate near the poles.
    """
    if code == D_MOEBIUS:
        d = par * w + u
        return u / d, par * w / d
    if code == D_POWER:
        if u <= 0.0:
            return 0.0, 1.0
        if w <= 0.0:
            return 1.0, 0.0
        if u <= 0.5:
            lu = math.log(u)
        else:
            lu = math.log1p(-w)
        return math.exp(par * lu), -math.expm1(par * lu)
    if code == D_CUBIC:
        return _cubic(par, u, w)
    # D_CUBIC_INV
    if u <= 0.5:
        v = _cubic_solve_low(par, u)
        return v, 1.0 - v
    v = _cubic_solve_low(par, w)
    return 1.0 - v, v


@njit(cache=True)
def r_inverse(x):
    """Root in (0, 1) of r(u) = x for r(u) = -1/u + 1/(1-u), as (u, 1-u)."""
    s = math.hypot(x, 2.0)
    if x >= 0.0:
        w = 2.0 / (s + 2.0 + x)
        return 1.0 - w, w
    u = 2.0 / (s + 2.0 - x)
    return u, 1.0 - u


@njit(cache=True)
def r_forward(u, w):
    return (u - w) / (u * w)


@njit(cache=True)
def conjugated(code, par, x):
    u, w = r_inverse(x)
    if u < CONJ_DELTA:
        u, w = CONJ_DELTA, 1.0 - CONJ_DELTA
    elif w < CONJ_DELTA:
        u, w = 1.0 - CONJ_DELTA, CONJ_DELTA
    h, hw = diffeo_pair(code, par, u, w)
    return r_forward(h, hw)


@njit(cache=True)
def integer_skew(code, par, shift, x):
    n = np.floor(x)
    f = x - n
    h, _ = diffeo_pair(code, par, f, 1.0 - f)
    return h + n + shift


@njit(cache=True)
def apply_op(code, par, bx, by, x):
    if code == OP_AFFINE:
        return par[0] * x + par[1]
    if code == OP_ODD_POWER:
        return odd_power(par[0], x)
    if code == OP_PIECEWISE:
        off = int(par[0])
        cnt = int(par[1])
        return piecewise(bx[off:off + cnt], by[off:off + cnt], par[2], par[3], x)
    if code == OP_SKEW:
        return integer_skew(int(par[0]), par[1], par[2], x)
    return conjugated(int(par[0]), par[1], x)


@njit(cache=True)
def alias_pick(u, prob, alias):
    """Alias-method draw from a single uniform: integer part picks the column."""
    n = prob.shape[0]
    t = u * n
    j = int(t)
    if j >= n:
        j = n - 1
    if t - j < prob[j]:
        return j
    return alias[j]


@njit(cache=True, nogil=True)
def advance(x, uniforms, prob, alias, map_start, op_code, op_par, bx, by, out):
    """Step the chain once per uniform, writing states into ``out``.

    Returns ``(fail, x)``: ``fail`` is the index of the first non-finite
    state (or -1), ``x`` the last finite state.
    """
    for i in range(uniforms.shape[0]):
        j = alias_pick(uniforms[i], prob, alias)
        y = x
        for k in range(map_start[j], map_start[j + 1]):
            y = apply_op(op_code[k], op_par[k], bx, by, y)
        if not math.isfinite(y):
            return i, x
        x = y
        out[i] = x
    return -1, x


@njit(cache=True, nogil=True)
def excursions(x0, lo, hi, horizon, x, t, uniforms, prob, alias, map_start,
               op_code, op_par, bx, by, landed, n_done):
    """Resumable first-return runs from ``x0`` into ``[lo, hi]``.

    Each completed run writes its landing point into ``landed`` (NaN when the
    horizon is reached first). The caller refills ``uniforms`` and resumes
    with the returned ``(x, t, n_done)``.
    """
    n_target = landed.shape[0]
    for i in range(uniforms.shape[0]):
        if n_done >= n_target:
            break
        j = alias_pick(uniforms[i], prob, alias)
        for k in range(map_start[j], map_start[j + 1]):
            x = apply_op(op_code[k], op_par[k], bx, by, x)
        t += 1
        if lo <= x <= hi:
            landed[n_done] = x
            n_done += 1
            x = x0
            t = 0
        elif t >= horizon or not math.isfinite(x):
            landed[n_done] = np.nan
            n_done += 1
            x = x0
            t = 0
    return x, t, n_done
