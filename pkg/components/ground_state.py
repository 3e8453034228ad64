"""Zero-median ground state of the MIW recursion x_{n+1} = x_n - 1/S_n.

The first half x_1..x_m is produced by shooting on x_1; the second half is
the mirror x_{N+1-n} = -x_n and is never recomputed.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from loguru import logger

from utils.errors import BracketError, DivergedError, DomainError, SolverError
from utils.settings import get_settings
from utils.summation import compensated_cumsum, dd_add, dd_div, neumaier_add

MAX_EXPANSIONS = 60
PRECISIONS = ("double", "dd")

_OK = 0
_LOW = 1
_NONFINITE = 2


# ------------------ Recursion kernels ------------------ #
@numba.njit(cache=True, nogil=True)
def _shoot_double(x1, m, even, out_x, out_s):
    x = x1
    s = 0.0
    c = 0.0
    for n in range(m):
        out_x[n] = x
        s, c = neumaier_add(s, c, x)
        total = s + c
        out_s[n] = total
        if n == m - 1:
            break
        if total != total:
            return np.nan, _NONFINITE
        if total <= 0.0:
            return -np.inf, _LOW
        x = x - 1.0 / total
        if not np.isfinite(x):
            return np.nan, _NONFINITE
    if not even:
        return out_x[m - 1], _OK
    last = out_s[m - 1]
    if not last > 0.0:
        return -np.inf, _LOW
    return out_x[m - 1] - 0.5 / last, _OK


@numba.njit(cache=True, nogil=True)
def _shoot_dd(x1, m, even, out_x, out_s):
    xh = x1
    xl = 0.0
    sh = 0.0
    sl = 0.0
    for n in range(m):
        out_x[n] = xh + xl
        sh, sl = dd_add(sh, sl, xh, xl)
        out_s[n] = sh + sl
        if n == m - 1:
            break
        if sh != sh:
            return np.nan, _NONFINITE
        if sh <= 0.0:
            return -np.inf, _LOW
        rh, rl = dd_div(1.0, 0.0, sh, sl)
        xh, xl = dd_add(xh, xl, -rh, -rl)
        if not np.isfinite(xh):
            return np.nan, _NONFINITE
    if not even:
        return xh + xl, _OK
    if not sh > 0.0:
        return -np.inf, _LOW
    rh, rl = dd_div(0.5, 0.0, sh, sl)
    oh, ol = dd_add(xh, xl, -rh, -rl)
    return oh + ol, _OK


_KERNELS = {"double": _shoot_double, "dd": _shoot_dd}


# ------------------ Types ------------------ #
@dataclass(frozen=True)
class Residuals:
    zero_mean_residual: float
    variance_residual: float
    recursion_residual: float
    median_residual: float


@dataclass(frozen=True)
class ShootResult:
    """Output of one forward run of the recursion from a trial x_1."""

    objective: float
    half_locations: np.ndarray
    partial_sums: np.ndarray
    diverged_low: bool


@dataclass(frozen=True, eq=False)
class Configuration:
    """The solved ground state x_1 > ... > x_N (immutable)."""

    n_worlds: int
    median_index: int
    locations: np.ndarray
    partial_sums: np.ndarray
    shoot_value: float
    residuals: Residuals
    tol: float
    precision: str

    @property
    def half_locations(self) -> np.ndarray:
        return self.locations[: self.median_index]

    @property
    def ascending(self) -> np.ndarray:
        return self.locations[::-1]

    @property
    def x1(self) -> float:
        return float(self.locations[0])

    @property
    def variance(self) -> float:
        """Var(W) = (N - 1)/N, taken from the variance constraint, never from data."""
        return (self.n_worlds - 1) / self.n_worlds

    def __repr__(self) -> str:
        return (
            f"Configuration(n_worlds={self.n_worlds}, x1={self.shoot_value!r}, "
            f"precision={self.precision!r}, residuals={self.residuals})"
        )


def median_index(n_worlds: int) -> int:
    """m = (N+1)/2 for odd N and N/2 for even N."""
    return (n_worlds + 1) // 2


def _check_inputs(n_worlds: int, precision: str) -> None:
    if int(n_worlds) != n_worlds or n_worlds < 2:
        raise DomainError(f"n_worlds must be an integer >= 2, got {n_worlds!r}")
    if precision not in PRECISIONS:
        raise DomainError(f"precision must be one of {PRECISIONS}, got {precision!r}")


# ------------------ Shooting ------------------ #
def forward_shoot(x1: float, n_worlds: int, precision: str = "double") -> ShootResult:
    """Run the recursion for n = 1..m from ``x1``.

    The objective is x_m for odd N and x_m - 1/(2 S_m) for even N (the
    condition x_m = -x_{m+1}).  A non-positive partial sum before step m
    gives objective -inf with ``diverged_low`` set.
    """
    _check_inputs(n_worlds, precision)
    if not (x1 > 0.0) or not math.isfinite(x1):
        raise DomainError(f"x1 must be positive and finite, got {x1!r}")

    m = median_index(n_worlds)
    out_x = np.zeros(m, dtype=np.float64)
    out_s = np.zeros(m, dtype=np.float64)
    objective, status = _KERNELS[precision](float(x1), m, n_worlds % 2 == 0, out_x, out_s)
    if status == _NONFINITE:
        raise DivergedError(
            "forward recursion produced a non-finite value",
            {"x1": x1, "n_worlds": n_worlds, "precision": precision},
        )
    return ShootResult(
        objective=float(objective),
        half_locations=out_x,
        partial_sums=out_s,
        diverged_low=status == _LOW,
    )


def _initial_bracket(m: int):
    log_m = math.log(m)
    return max(0.1, math.sqrt(log_m)), math.sqrt(2.0 * (1.0 + log_m)) + 1.0


def _expand_bracket(objective, lo: float, hi: float):
    g_lo, g_hi = objective(lo), objective(hi)
    expansions = 0
    while not (g_lo < 0.0 < g_hi):
        if g_lo >= 0.0 and g_hi <= 0.0:
            raise BracketError(
                "shooting objective is not increasing across the bracket",
                {"lo": lo, "hi": hi, "g_lo": g_lo, "g_hi": g_hi},
            )
        if expansions >= MAX_EXPANSIONS:
            raise BracketError(
                "bracket expansion limit reached",
                {"lo": lo, "hi": hi, "g_lo": g_lo, "g_hi": g_hi, "expansions": expansions},
            )
        width = 2.0 * (hi - lo)
        if g_lo >= 0.0:
            lo = max(hi - width, 0.5 * lo)
            g_lo = objective(lo)
        else:
            hi = lo + width
            g_hi = objective(hi)
        expansions += 1
        logger.debug("bracket expansion {}: [{}, {}]", expansions, lo, hi)
    return lo, hi, g_lo, g_hi


def _polish(objective, lo: float, hi: float, g_lo: float, g_hi: float):
    """Keep bisecting down to adjacent doubles; return the end with the smaller |g|.

    The sign condition is not re-checked: at this width the objective is
    rounding noise and the result stays inside the accepted bracket.
    """
    steps = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = objective(mid)
        steps += 1
        if g_mid == 0.0:
            return mid, steps
        if g_mid < 0.0:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    return (lo if abs(g_lo) <= abs(g_hi) else hi), steps


def solve(n_worlds: int, tol: Optional[float] = None, precision: Optional[str] = None) -> Configuration:
    """Solve for the unique strictly decreasing zero-median configuration.

    Bisection on x_1 stops once the bracket is narrower than tol * max(1, x_1).
    The sign condition g(lo) < 0 < g(hi) is re-checked after every step.  The
    accepted bracket is then narrowed to adjacent doubles, so closed-form roots
    such as x_1 = 1 at N = 3 come out exact.
    """
    settings = get_settings()
    tol = settings.tol if tol is None else float(tol)
    precision = settings.precision if precision is None else precision
    _check_inputs(n_worlds, precision)
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol!r}")

    n_worlds = int(n_worlds)
    m = median_index(n_worlds)

    def objective(x1: float) -> float:
        return forward_shoot(x1, n_worlds, precision).objective

    lo, hi = _initial_bracket(m)
    lo, hi, g_lo, g_hi = _expand_bracket(objective, lo, hi)
    logger.debug("N={} bracket [{}, {}]", n_worlds, lo, hi)

    steps = 0
    root = None
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = objective(mid)
        steps += 1
        if g_mid == 0.0:
            root = mid
            break
        if g_mid < 0.0:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
        if not (g_lo < 0.0 < g_hi):
            raise BracketError(
                "sign condition violated during bisection",
                {"lo": lo, "hi": hi, "g_lo": g_lo, "g_hi": g_hi, "step": steps},
            )

    if root is None:
        root, extra = _polish(objective, lo, hi, g_lo, g_hi)
        steps += extra
    x1 = root
    shot = forward_shoot(x1, n_worlds, precision)
    if shot.diverged_low:
        raise SolverError("final shot diverged", {"x1": x1, "n_worlds": n_worlds})

    half = shot.half_locations.copy()
    if n_worlds % 2 == 1:
        # Symmetry forces x_m = -x_m; the recursion value survives in median_residual.
        half[-1] = 0.0
    cfg = reconstruct(half, n_worlds, x1, tol=tol, precision=precision)
    logger.info(
        "solved N={} x1={:.17g} in {} bisection steps; residuals {}",
        n_worlds,
        x1,
        steps,
        cfg.residuals,
    )
    return cfg


# ------------------ Construction from the first half ------------------ #
def _mirror(half: np.ndarray, n_worlds: int) -> np.ndarray:
    m = median_index(n_worlds)
    locations = np.empty(n_worlds, dtype=np.float64)
    locations[:m] = half
    locations[n_worlds - m :] = -half[::-1]
    if n_worlds % 2 == 1:
        locations[m - 1] = half[m - 1]
    return locations


def _mirror_partial_sums(half_sums: np.ndarray, n_worlds: int) -> np.ndarray:
    # S_{N-k} = S_k and S_N = 0.
    m = median_index(n_worlds)
    sums = np.empty(n_worlds, dtype=np.float64)
    sums[:m] = half_sums
    for k in range(1, n_worlds - m):
        sums[n_worlds - k - 1] = half_sums[k - 1]
    sums[n_worlds - 1] = 0.0
    return sums


def _residuals(locations: np.ndarray, sums: np.ndarray, n_worlds: int) -> Residuals:
    m = median_index(n_worlds)
    zero_mean = abs(math.fsum(locations))
    variance = abs(math.fsum(np.square(locations)) - (n_worlds - 1))

    # Steps produced by the recursion itself; the step into an odd-N median is
    # the median condition and is reported separately.
    last = m - 1 if n_worlds % 2 == 0 else m - 2
    recursion = 0.0
    if last > 0:
        x_n = locations[:last]
        x_next = locations[1 : last + 1]
        step = 1.0 / sums[:last]
        scale = np.maximum(np.abs(x_n), step)
        recursion = float(np.max(np.abs(x_next - x_n + step) / scale))

    if n_worlds % 2 == 1:
        if m >= 2:
            median = abs(locations[m - 2] - 1.0 / sums[m - 2])
        else:
            median = 0.0
    else:
        # x_{m+1} from the recursion is x_m - 1/S_m; the condition is x_m + x_{m+1} = 0.
        median = abs(2.0 * locations[m - 1] - 1.0 / sums[m - 1])
    return Residuals(
        zero_mean_residual=float(zero_mean),
        variance_residual=float(variance),
        recursion_residual=float(recursion),
        median_residual=float(median),
    )


def reconstruct(
    half_locations: np.ndarray,
    n_worlds: int,
    shoot_value: float,
    tol: float,
    precision: str = "double",
) -> Configuration:
    """Build a Configuration from x_1..x_m; shared by ``solve`` and the cache loader."""
    _check_inputs(n_worlds, precision)
    half = np.ascontiguousarray(half_locations, dtype=np.float64)
    m = median_index(n_worlds)
    if half.shape != (m,):
        raise DomainError(f"expected {m} half locations for N={n_worlds}, got {half.shape}")

    locations = _mirror(half, n_worlds)
    sums = _mirror_partial_sums(compensated_cumsum(half), n_worlds)
    residuals = _residuals(locations, sums, n_worlds)

    if np.any(np.diff(locations) >= 0.0):
        bad = int(np.argmax(np.diff(locations) >= 0.0)) + 1
        raise SolverError("locations are not strictly decreasing", {"n_worlds": n_worlds, "index": bad})
    if np.any(sums[:-1] <= 0.0):
        bad = int(np.argmax(sums[:-1] <= 0.0)) + 1
        raise SolverError("partial sum not positive", {"n_worlds": n_worlds, "index": bad})

    locations.setflags(write=False)
    sums.setflags(write=False)
    return Configuration(
        n_worlds=int(n_worlds),
        median_index=m,
        locations=locations,
        partial_sums=sums,
        shoot_value=float(shoot_value),
        residuals=residuals,
        tol=float(tol),
        precision=precision,
    )


# ------------------ Diagnostics ------------------ #
def variance_check(cfg: Configuration) -> float:
    """|sum x_n^2 - (N - 1)| with exact summation of the squares."""
    return abs(math.fsum(np.square(cfg.locations)) - (cfg.n_worlds - 1))


def recursion_replay_error(cfg: Configuration) -> float:
    """Largest relative gap between stored locations and a fresh forward run from x_1."""
    shot = forward_shoot(cfg.shoot_value, cfg.n_worlds, cfg.precision)
    upto = cfg.median_index if cfg.n_worlds % 2 == 0 else cfg.median_index - 1
    if upto == 0:
        return 0.0
    stored = cfg.half_locations[:upto]
    fresh = shot.half_locations[:upto]
    return float(np.max(np.abs(stored - fresh) / np.maximum(1.0, np.abs(stored))))
