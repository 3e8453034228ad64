"""Standard-normal primitives used by every component.

All functions accept a scalar or a numpy array and return the same shape
(a Python ``float`` for scalar input).  Tail quantities go through
:func:`scaled_tail`, never through ``1 - Phi``.
"""
import math
from typing import Union

import numpy as np
from scipy import special

from utils.bound_check import BoundCheck
from utils.errors import DomainError, QuadratureError
from utils.summation import exact_squares

ArrayLike = Union[float, np.ndarray]

SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)

# scaled_tail switches to the continued fraction at this argument.
CF_THRESHOLD = 4.0
# and to the reflection formula below this one.
DEEP_THRESHOLD = -8.0
CF_MAX_TERMS = 500
_CF_EPS = 1e-15


def _as_array(w: ArrayLike):
    arr = np.asarray(w, dtype=np.float64)
    return arr, arr.ndim == 0


def _finish(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


# ------------------ Density / CDF / quantile ------------------ #
def phi(w: ArrayLike) -> ArrayLike:
    """Standard normal density."""
    arr, scalar = _as_array(w)
    return _finish(np.exp(-0.5 * arr * arr) / SQRT_2PI, scalar)


def Phi(w: ArrayLike) -> ArrayLike:
    """Standard normal CDF."""
    arr, scalar = _as_array(w)
    return _finish(special.ndtr(arr), scalar)


def Phi_inv(p: ArrayLike) -> ArrayLike:
    """Standard normal quantile.

    Rational initial guess (``scipy.special.ndtri``) refined by two Newton
    steps on the lower-tail probability.  The upper half is solved through the
    mirror ``Phi_inv(p) = -Phi_inv(1 - p)``; ``1 - p`` is exact for p >= 1/2.
    """
    arr, scalar = _as_array(p)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("Phi_inv requires 0 < p < 1")

    upper = arr > 0.5
    lower = np.where(upper, 1.0 - arr, arr)
    x = special.ndtri(lower)
    for _ in range(2):
        density = np.exp(-0.5 * x * x) / SQRT_2PI
        step = np.where(density > 0.0, (special.ndtr(x) - lower) / np.where(density > 0.0, density, 1.0), 0.0)
        x = x - step
    return _finish(np.where(upper, -x, x), scalar)


# ------------------ Scaled tail (Mills ratio) ------------------ #
def mills_ratio_continued_fraction(w: ArrayLike) -> ArrayLike:
    """(1 - Phi(w)) / phi(w) by modified Lentz on w + 1/(w + 2/(w + 3/(w + ...))).

    Intended for w >= CF_THRESHOLD, where it converges in a few dozen terms.
    """
    arr, scalar = _as_array(w)
    if np.any(arr <= 0.0):
        raise DomainError("continued fraction is only used for positive arguments")

    f = arr.copy()
    c = arr.copy()
    d = np.zeros_like(arr)
    active = np.ones(arr.shape, dtype=bool)
    for k in range(1, CF_MAX_TERMS + 1):
        d = np.where(active, 1.0 / (arr + k * d), d)
        c = np.where(active, arr + k / c, c)
        delta = np.where(active, c * d, 1.0)
        f = f * delta
        active &= np.abs(delta - 1.0) > _CF_EPS
        if not active.any():
            break
    else:
        raise QuadratureError(f"Mills-ratio continued fraction did not converge in {CF_MAX_TERMS} terms")
    return _finish(1.0 / f, scalar)


def scaled_tail(w: ArrayLike) -> ArrayLike:
    """T(w) = sqrt(2 pi) exp(w^2/2) (1 - Phi(w)), the Mills ratio.

    Between DEEP_THRESHOLD and CF_THRESHOLD the scaled complementary error
    function is used: T(w) = sqrt(pi/2) erfcx(w / sqrt 2).  Further left the
    reflection T(w) = sqrt(2 pi) exp(w^2/2) - T(-w) is taken with w^2 split
    exactly into hi + lo, so the exponential carries no rounding from the
    square.  For w below about -37.7 the value exceeds the double range and
    ``inf`` is returned.
    """
    arr, scalar = _as_array(w)
    out = np.empty_like(arr)
    far = arr >= CF_THRESHOLD
    deep = arr < DEEP_THRESHOLD
    near = ~(far | deep)
    out[near] = _SQRT_HALF_PI * special.erfcx(arr[near] / math.sqrt(2.0))
    if far.any():
        out[far] = mills_ratio_continued_fraction(arr[far])
    if deep.any():
        left = arr[deep]
        hi, lo = exact_squares(left)
        with np.errstate(over="ignore"):
            out[deep] = SQRT_2PI * np.exp(0.5 * hi) * (1.0 + 0.5 * lo) - mills_ratio_continued_fraction(-left)
    return _finish(out, scalar)


# ------------------ Antiderivatives ------------------ #
def Phi_antideriv(w: ArrayLike) -> ArrayLike:
    """J(w) = integral of Phi over (-inf, w] = w Phi(w) + phi(w)."""
    arr, scalar = _as_array(w)
    dens = np.exp(-0.5 * arr * arr) / SQRT_2PI
    neg = arr < 0.0
    # Phi(w) = phi(w) T(-w); the factored form keeps the left tail relative.
    left = dens * (1.0 + arr * scaled_tail(np.where(neg, -arr, 0.0)))
    right = arr * special.ndtr(arr) + dens
    return _finish(np.where(neg, np.maximum(left, 0.0), right), scalar)


def Phi_difference(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Phi(b) - Phi(a), taken on the upper tail when both arguments are nonnegative."""
    a_arr, a_scalar = _as_array(a)
    b_arr, b_scalar = _as_array(b)
    upper = (a_arr >= 0.0) & (b_arr >= 0.0)
    diff = np.where(
        upper,
        special.ndtr(-a_arr) - special.ndtr(-b_arr),
        special.ndtr(b_arr) - special.ndtr(a_arr),
    )
    return _finish(diff, a_scalar and b_scalar)


def Phi_excess(c: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Integral between c and x of |Phi(t) - Phi(c)|.

    Equals x (Phi(x) - Phi(c)) + phi(x) - phi(c) = J(x) - J(c) - (x - c) Phi(c),
    evaluated without forming J so that short intervals keep absolute accuracy.
    """
    c_arr, c_scalar = _as_array(c)
    x_arr, x_scalar = _as_array(x)
    dens_gap = (np.exp(-0.5 * x_arr * x_arr) - np.exp(-0.5 * c_arr * c_arr)) / SQRT_2PI
    value = x_arr * Phi_difference(c_arr, x_arr) + dens_gap
    return _finish(np.maximum(value, 0.0), c_scalar and x_scalar)


# ------------------ Mills-ratio inequalities ------------------ #
def _require_positive(w: float) -> float:
    w = float(w)
    if not (w > 0.0) or not math.isfinite(w):
        raise DomainError(f"argument must be positive and finite, got {w!r}")
    return w


def mills_inequality_1(w: float) -> BoundCheck:
    """w T(w) <= (w^2 + 2) / (w^2 + 3) for w > 0."""
    w = _require_positive(w)
    lhs = w * scaled_tail(w)
    rhs = (w * w + 2.0) / (w * w + 3.0)
    return BoundCheck.evaluate("mills_1", lhs, rhs)


def mills_inequality_2(w: float) -> BoundCheck:
    """0 < (1 + w^2) T(w) - w <= 3 / (1 + w)^3 for w > 0."""
    w = _require_positive(w)
    lhs = (1.0 + w * w) * scaled_tail(w) - w
    rhs = 3.0 / (1.0 + w) ** 3
    return BoundCheck.evaluate("mills_2", lhs, rhs, floor=0.0)
