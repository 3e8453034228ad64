"""Error-free transformations and compensated sums, compiled with numba.

The double-double helpers follow Dekker's splitting; a pair ``(hi, lo)``
represents ``hi + lo`` with ``|lo| <= ulp(hi) / 2``.
"""
import numba
import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


@numba.njit(cache=True, nogil=True)
def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@numba.njit(cache=True, nogil=True)
def quick_two_sum(a, b):
    s = a + b
    err = b - (s - a)
    return s, err


@numba.njit(cache=True, nogil=True)
def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


@numba.njit(cache=True, nogil=True)
def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


@numba.njit(cache=True, nogil=True)
def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e += t
    s, e = quick_two_sum(s, e)
    e += f
    return quick_two_sum(s, e)


@numba.njit(cache=True, nogil=True)
def dd_mul_d(ah, al, b):
    p, e = two_prod(ah, b)
    e += al * b
    return quick_two_sum(p, e)


@numba.njit(cache=True, nogil=True)
def dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = dd_mul_d(bh, bl, q1)
    rh, rl = dd_add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = dd_mul_d(bh, bl, q2)
    rh, rl = dd_add(rh, rl, -ph, -pl)
    q3 = rh / bh
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add(q1, q2, q3, 0.0)


@numba.njit(cache=True, nogil=True)
def neumaier_add(s, c, x):
    """One step of Neumaier summation; returns the new (sum, compensation)."""
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@numba.njit(cache=True, nogil=True)
def compensated_cumsum(values):
    """Prefix sums of ``values`` with Neumaier compensation."""
    out = np.empty(values.shape[0], dtype=np.float64)
    s = 0.0
    c = 0.0
    for i in range(values.shape[0]):
        s, c = neumaier_add(s, c, values[i])
        out[i] = s + c
    return out


@numba.njit(cache=True, nogil=True)
def exact_squares(values):
    """Squares of ``values`` as (hi, lo) arrays with hi + lo == v * v exactly."""
    hi = np.empty(values.shape[0], dtype=np.float64)
    lo = np.empty(values.shape[0], dtype=np.float64)
    for i in range(values.shape[0]):
        hi[i], lo[i] = two_prod(values[i], values[i])
    return hi, lo
