"""Stein-equation solutions for the normal target.

g_z = (w f_z)' for the indicator test function 1(w <= z), and g_h for the
sawtooth h of a configuration.  Every exp(w^2/2)(1 - Phi(w)) goes through
``scaled_tail``.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, special

from components.ground_state import Configuration, median_index
from utils.errors import DomainError
from utils.gaussians import SQRT_2PI, Phi, Phi_excess, scaled_tail
from utils.settings import get_settings

MONOTONE_TOL = 1e-12
LEMMA41_NUDGE = 1e-9


@dataclass(frozen=True)
class GridSpec:
    lo: float = -40.0
    hi: float = 40.0
    points: int = 10_000

    @classmethod
    def from_settings(cls) -> "GridSpec":
        settings = get_settings()
        return cls(lo=-settings.grid_limit, hi=settings.grid_limit, points=settings.grid_points)

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)


class Violation(NamedTuple):
    w: float
    name: str
    lhs: float
    rhs: float


@dataclass(frozen=True)
class SteinEnvelopeReport:
    z: float
    grid: np.ndarray
    violations: List[Violation] = field(default_factory=list)
    max_violation: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations


# ------------------ g_z and f_z ------------------ #
def _left_factor(z: float, w: np.ndarray) -> np.ndarray:
    """sqrt(2 pi) e^{w^2/2} Phi(w) (1 - Phi(z)) for w <= z, without overflow.

    For w < 0 this is T(-w)(1 - Phi(z)); for 0 <= w <= z it is rewritten as
    Phi(w) T(z) e^{(w^2 - z^2)/2}.
    """
    tail_z = Phi(-z)
    negative = w < 0.0
    direct = scaled_tail(np.where(negative, -w, 0.0)) * tail_z
    shifted = Phi(w) * scaled_tail(z) * np.exp(0.5 * (np.square(np.where(negative, 0.0, w)) - z * z))
    return np.where(negative, direct, shifted)


def _g_left(z: float, w: np.ndarray) -> np.ndarray:
    return (1.0 + w * w) * _left_factor(z, w) + w * Phi(-z)


def _g_right(z: float, w: np.ndarray) -> np.ndarray:
    return ((1.0 + w * w) * scaled_tail(w) - w) * Phi(z)


def g_z(z: float, w):
    """(w f_z(w))' for the Stein equation f' - w f = 1(w <= z) - Phi(z)."""
    arr = np.asarray(w, dtype=np.float64)
    out = np.where(arr > z, _g_right(z, np.maximum(arr, z)), _g_left(z, np.minimum(arr, z)))
    return float(out) if out.ndim == 0 else out


def f_z(z: float, w):
    """The bounded solution of f' - w f = 1(w <= z) - Phi(z)."""
    arr = np.asarray(w, dtype=np.float64)
    out = np.where(
        arr > z,
        scaled_tail(np.maximum(arr, z)) * Phi(z),
        _left_factor(z, np.minimum(arr, z)),
    )
    return float(out) if out.ndim == 0 else out


def gz_branch_jump(z: float) -> Tuple[float, float]:
    """Both branches of g_z evaluated at w = z (left, right); they differ by z."""
    point = np.asarray(float(z))
    return float(_g_left(z, point)), float(_g_right(z, point))


def verify_gz_properties(
    z: float,
    grid_spec: Optional[GridSpec] = None,
    evaluator: Callable[[float, np.ndarray], np.ndarray] = g_z,
) -> SteinEnvelopeReport:
    """Check nonnegativity, the linear envelope, the left cap, monotonicity and both cubic tails."""
    if not z > 0.0:
        raise DomainError(f"z must be positive, got {z!r}")
    grid_spec = grid_spec or GridSpec.from_settings()
    w = grid_spec.values()
    g = np.asarray(evaluator(z, w), dtype=np.float64)

    violations: List[Violation] = []
    worst = 0.0

    def record(mask, name, at, lhs, rhs, slack):
        nonlocal worst
        excess = np.where(mask, lhs - rhs - slack, -np.inf)
        if excess.size:
            worst = max(worst, float(np.max(excess)))
        for i in np.flatnonzero(excess > 0.0):
            violations.append(Violation(float(at[i]), name, float(lhs[i]), float(rhs[i])))

    everywhere = np.ones_like(w, dtype=bool)
    zeros = np.zeros_like(w)
    record(everywhere, "nonnegative", w, zeros, g, MONOTONE_TOL)

    envelope = np.abs(w) + SQRT_2PI / 4.0
    record(everywhere, "cs3a", w, np.abs(g), envelope, MONOTONE_TOL * (1.0 + envelope))

    left_cap = np.full_like(w, 2.0 * Phi(-z))
    record(w <= 0.0, "left_cap", w, g, left_cap, MONOTONE_TOL * (1.0 + left_cap))

    cs3c = 3.0 / (2.0 * (1.0 - np.minimum(w, 0.0)) ** 3)
    record(w < 0.0, "cs3c", w, g, cs3c, MONOTONE_TOL * (1.0 + cs3c))

    cs3d = 3.0 / (1.0 + np.maximum(w, 0.0)) ** 3
    record(w > z, "cs3d", w, g, cs3d, MONOTONE_TOL * (1.0 + cs3d))

    # Adjacent pairs: increasing on w < 0, decreasing on w > z.
    w0, w1, g0, g1 = w[:-1], w[1:], g[:-1], g[1:]
    pair_slack = MONOTONE_TOL * (1.0 + np.abs(g0))
    record(w1 < 0.0, "cs3b_increasing", w0, g0, g1, pair_slack)
    record(w0 > z, "cs3b_decreasing", w0, g1, g0, pair_slack)

    return SteinEnvelopeReport(z=float(z), grid=w, violations=violations, max_violation=max(worst, 0.0))


# ------------------ g_h for the sawtooth ------------------ #
class SawtoothStein:
    """Closed-form g_h for the sawtooth of ``cfg``.

    g_h(w) = (w - (1+w^2) T(w)) int_{-inf}^w h' Phi - (w + (1+w^2) T(-w)) int_w^inf h' (1 - Phi),
    with h' = +1 on [x_{n+1}, m_n) and -1 on [m_n, x_n).  Each tooth
    integrates to a combination of ``Phi_excess`` terms.
    """

    def __init__(self, cfg: Configuration):
        self.cfg = cfg
        asc = cfg.ascending
        self.atoms = asc
        self.lo = asc[:-1]
        self.hi = asc[1:]
        self.mid = 0.5 * (self.lo + self.hi)
        # Over a whole tooth, int h' Phi = -tooth and int h' (1 - Phi) = +tooth.
        tooth = Phi_excess(self.mid, self.lo) + Phi_excess(self.mid, self.hi)
        self.tooth = tooth
        self.below = np.concatenate(([0.0], np.cumsum(-tooth)))
        suffix = np.concatenate((np.cumsum(tooth[::-1])[::-1], [0.0]))
        self.above = suffix[1:]
        self.total_phi = float(self.below[-1])
        self.total_tail = float(suffix[0])

    def integrals(self, w) -> Tuple[np.ndarray, np.ndarray]:
        """(int_{-inf}^w h' Phi, int_w^inf h' (1 - Phi))."""
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        idx = np.searchsorted(self.atoms, w, side="right") - 1
        n_intervals = self.lo.shape[0]
        inside = (idx >= 0) & (idx < n_intervals)
        i = np.clip(idx, 0, n_intervals - 1)
        a, b, mid = self.lo[i], self.hi[i], self.mid[i]
        rising = w < mid

        phi_a, phi_mid = Phi(a), Phi(mid)
        part_phi = np.where(
            rising,
            (w - a) * phi_a + Phi_excess(a, w),
            ((mid - a) * phi_mid - Phi_excess(mid, a)) - ((w - mid) * phi_mid + Phi_excess(mid, w)),
        )
        tail_mid, tail_b = Phi(-mid), Phi(-b)
        part_tail = np.where(
            rising,
            ((mid - w) * tail_mid + Phi_excess(mid, w)) - ((b - mid) * tail_mid - Phi_excess(mid, b)),
            -((b - w) * tail_b + Phi_excess(b, w)),
        )

        below_support = idx < 0
        lower = np.where(inside, self.below[i] + part_phi, np.where(below_support, 0.0, self.total_phi))
        upper = np.where(inside, self.above[i] + part_tail, np.where(below_support, self.total_tail, 0.0))
        return lower, upper

    def __call__(self, w):
        arr = np.asarray(w, dtype=np.float64)
        flat = np.atleast_1d(arr)
        lower, upper = self.integrals(flat)
        with np.errstate(over="ignore", invalid="ignore"):
            first = np.where(lower != 0.0, (flat - (1.0 + flat**2) * scaled_tail(flat)) * lower, 0.0)
            second = np.where(upper != 0.0, (flat + (1.0 + flat**2) * scaled_tail(-flat)) * upper, 0.0)
        out = (first - second).reshape(arr.shape)
        return float(out) if out.ndim == 0 else out


def g_h(cfg: Configuration, w):
    """g_h = (w f_h)' for the sawtooth of ``cfg``, in closed form."""
    return SawtoothStein(cfg)(w)


def g_h_quadrature(cfg: Configuration, w: float) -> float:
    """Adaptive-quadrature oracle of the g_h formula, one segment of h' at a time."""
    w = float(w)
    asc = cfg.ascending
    mids = 0.5 * (asc[:-1] + asc[1:])
    breaks = np.empty(2 * asc.shape[0] - 1)
    breaks[0::2] = asc
    breaks[1::2] = mids
    signs = np.tile([1.0, -1.0], asc.shape[0] - 1)

    def quad(func, lo, hi):
        return integrate.quad(func, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]

    lower_parts, upper_parts = [], []
    for sign, lo, hi in zip(signs, breaks[:-1], breaks[1:]):
        if lo < w:
            lower_parts.append(sign * quad(special.ndtr, lo, min(w, hi)))
        if hi > w:
            upper_parts.append(sign * quad(lambda t: special.ndtr(-t), max(w, lo), hi))
    lower = math.fsum(lower_parts)
    upper = math.fsum(upper_parts)

    first = (w - (1.0 + w * w) * scaled_tail(w)) * lower if lower_parts else 0.0
    second = (w + (1.0 + w * w) * scaled_tail(-w)) * upper if upper_parts else 0.0
    return first - second


# ------------------ Envelope of g_h near the top ------------------ #
@dataclass(frozen=True)
class TopEnvelopeReport:
    best_constant: float
    table: pd.DataFrame
    symmetry_gap: float


def lemma41_samples(upper: float, lower: float) -> np.ndarray:
    """Five interior points of (lower, upper] plus both ends nudged inward."""
    width = upper - lower
    fractions = np.array([LEMMA41_NUDGE, 1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6, 1.0 - LEMMA41_NUDGE])
    return lower + fractions * width


def verify_gh_lemma41(cfg: Configuration) -> TopEnvelopeReport:
    """Empirical constant C in |g_h(w)| <= C (1/log(m/n) + n^{-2/9}) for x_{[m/e^3]} <= x_{n+1} < w <= x_n."""
    if cfg.n_worlds <= 100:
        raise DomainError("the envelope is only stated for N > 100")
    m = median_index(cfg.n_worlds)
    k = int(math.floor(m / math.exp(3.0)))
    solution = SawtoothStein(cfg)
    x = cfg.locations

    rows = []
    for n in range(1, k):
        samples = lemma41_samples(x[n - 1], x[n])
        scale = 1.0 / math.log(m / n) + n ** (-2.0 / 9.0)
        direct = float(np.max(np.abs(solution(samples)))) / scale
        mirror = float(np.max(np.abs(solution(-samples)))) / scale
        rows.append({"n": n, "direct_ratio": direct, "mirror_ratio": mirror, "bound_scale": scale})

    table = pd.DataFrame(rows, columns=["n", "direct_ratio", "mirror_ratio", "bound_scale"])
    if table.empty:
        return TopEnvelopeReport(best_constant=0.0, table=table, symmetry_gap=0.0)
    best = float(table[["direct_ratio", "mirror_ratio"]].to_numpy().max())
    gap = float((table["direct_ratio"] - table["mirror_ratio"]).abs().max())
    return TopEnvelopeReport(best_constant=best, table=table, symmetry_gap=gap)
