"""Zero-bias coupling (W, W*) on the sample space [x_N, x_1).

W* is the identity on the sample space, with the piecewise-constant density
p*_n = 1/((N-1)(x_n - x_{n+1})) on [x_{n+1}, x_n).  W quantizes the sample
point to the grid using the split points y_n.
"""
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from scipy import integrate

from components.ground_state import Configuration
from utils.errors import DomainError, QuadratureError
from utils.gaussians import phi

RealFunction = Callable[[float], float]

QUAD_EPSABS = 1e-11
_CHUNK = 1 << 16

# f and f' pairs used for the zero-bias identity.
IDENTITY_FUNCTIONS: Dict[str, Tuple[RealFunction, RealFunction]] = {
    "w": (lambda w: w, lambda w: 1.0),
    "w2": (lambda w: w * w, lambda w: 2.0 * w),
    "w3": (lambda w: w**3, lambda w: 3.0 * w * w),
    "sin": (math.sin, math.cos),
    "tanh": (math.tanh, lambda w: 1.0 / math.cosh(w) ** 2),
}


@dataclass(frozen=True, eq=False)
class ZeroBiasCoupling:
    """Density, split points and masses of the coupling; index n-1 holds interval n."""

    cfg: Configuration
    densities: np.ndarray
    splits: np.ndarray
    left_masses: np.ndarray
    right_masses: np.ndarray

    @property
    def n_worlds(self) -> int:
        return self.cfg.n_worlds

    @property
    def spacings(self) -> np.ndarray:
        x = self.cfg.locations
        return x[:-1] - x[1:]


def build(cfg: Configuration) -> ZeroBiasCoupling:
    """Construct the coupling; y_n = x_n - (N-n)(x_n - x_{n+1})/N in closed form."""
    n_worlds = cfg.n_worlds
    x = cfg.locations
    spacing = x[:-1] - x[1:]
    n = np.arange(1, n_worlds, dtype=np.float64)

    densities = 1.0 / ((n_worlds - 1) * spacing)
    splits = x[:-1] - (n_worlds - n) * spacing / n_worlds
    left = (n_worlds - n) / (n_worlds * (n_worlds - 1))
    # R_n is attached to index n = 2..N.
    right = (np.arange(2, n_worlds + 1, dtype=np.float64) - 1.0) / (n_worlds * (n_worlds - 1))

    for arr in (densities, splits, left, right):
        arr.setflags(write=False)
    return ZeroBiasCoupling(cfg=cfg, densities=densities, splits=splits, left_masses=left, right_masses=right)


# ------------------ Point queries ------------------ #
def _interval_index(c: ZeroBiasCoupling, x: np.ndarray) -> np.ndarray:
    """0-based index n-1 of the interval [x_{n+1}, x_n) containing x (caller checks support)."""
    asc = c.cfg.ascending
    k = np.searchsorted(asc, x, side="right")
    return c.n_worlds - k - 1


def density_at(c: ZeroBiasCoupling, x):
    """p*(x); zero outside [x_N, x_1)."""
    arr = np.asarray(x, dtype=np.float64)
    loc = c.cfg.locations
    inside = (arr >= loc[-1]) & (arr < loc[0])
    idx = np.clip(_interval_index(c, arr), 0, c.n_worlds - 2)
    out = np.where(inside, c.densities[idx], 0.0)
    return float(out) if out.ndim == 0 else out


def w_of_omega(c: ZeroBiasCoupling, omega):
    """W(omega): x_1 on [y_1, x_1), x_n on [y_n, y_{n-1}), x_N on [x_N, y_{N-1})."""
    arr = np.asarray(omega, dtype=np.float64)
    loc = c.cfg.locations
    if np.any(~((arr >= loc[-1]) & (arr < loc[0]))):
        raise DomainError("omega must lie in [x_N, x_1)")
    below = np.searchsorted(c.splits[::-1], arr, side="right")
    out = loc[c.n_worlds - below - 1]
    return float(out) if out.ndim == 0 else out


def interval_masses(c: ZeroBiasCoupling) -> np.ndarray:
    """Mass of [y_1, x_1), [y_n, y_{n-1}) for n = 2..N-1, and [x_N, y_{N-1}), from the splits."""
    x = c.cfg.locations
    upper = c.densities * (x[:-1] - c.splits)
    lower = c.densities * (c.splits - x[1:])
    masses = np.empty(c.n_worlds, dtype=np.float64)
    masses[0] = upper[0]
    masses[1:-1] = lower[:-1] + upper[1:]
    masses[-1] = lower[-1]
    return masses


# ------------------ Expectations ------------------ #
def _quad_interval(func: RealFunction, a: float, b: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(func, a, b, epsabs=QUAD_EPSABS, epsrel=1e-13, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature failed on [{a}, {b}]: {exc}") from exc
    return value


def zero_bias_identity_check(c: ZeroBiasCoupling, f_prime: RealFunction, f: RealFunction) -> float:
    """|E W f(W) - sigma^2 E f'(W*)| with sigma^2 = (N-1)/N."""
    x = c.cfg.locations
    ewf = math.fsum(float(v) * f(float(v)) for v in x) / c.n_worlds
    pieces = (
        float(p) * _quad_interval(f_prime, float(b), float(a))
        for p, a, b in zip(c.densities, x[:-1], x[1:])
    )
    efp = math.fsum(pieces)
    return abs(ewf - c.cfg.variance * efp)


def expected_coupling_gap(c: ZeroBiasCoupling) -> float:
    """Exact E|W - W*|; each interval splits at y_n into two triangles."""
    x = c.cfg.locations
    upper = (x[:-1] - c.splits) ** 2
    lower = (c.splits - x[1:]) ** 2
    return math.fsum(0.5 * c.densities * (upper + lower))


def sawtooth_expectation(c: ZeroBiasCoupling) -> Tuple[float, float]:
    """(E h(W), E h(W*)) for the sawtooth h vanishing at every x_n.

    E h(W) is zero exactly; E h(W*) = sum p*_n (x_n - x_{n+1})^2 / 4.
    """
    spacing = c.spacings
    return 0.0, math.fsum(c.densities * spacing * spacing / 4.0)


def sawtooth_gaussian_expectation(c: ZeroBiasCoupling, nodes: int = 12) -> float:
    """E h(Z) for standard normal Z, by Gauss-Legendre on each half-tooth."""
    t, weights = np.polynomial.legendre.leggauss(nodes)
    x = c.cfg.locations
    totals = []
    for start in range(0, c.n_worlds - 1, _CHUNK):
        upper = x[start : start + _CHUNK + 1]
        half = 0.5 * (upper[:-1] - upper[1:])
        # h rises from x_{n+1} to the midpoint and falls back to x_n; both
        # halves map onto s in [0, half] with h = s.
        s = 0.5 * (t[None, :] + 1.0) * half[:, None]
        integrand = s * (phi(upper[1:, None] + s) + phi(upper[:-1, None] - s))
        totals.extend(0.5 * half * (integrand @ weights))
    return math.fsum(totals)


def coupling_kolmogorov(c: ZeroBiasCoupling) -> float:
    """Exact sup_z |P(W <= z) - P(W* <= z)|.

    On [x_{n+1}, x_n) the law of W has CDF (N-n)/N while W* rises linearly
    from (N-1-n)/(N-1) to (N-n)/(N-1); the extremes sit at the endpoints.
    """
    n_worlds = c.n_worlds
    n = np.arange(1, n_worlds, dtype=np.float64)
    cdf_w = (n_worlds - n) / n_worlds
    start = (n_worlds - 1 - n) / (n_worlds - 1)
    end = (n_worlds - n) / (n_worlds - 1)
    return float(max(np.max(np.abs(cdf_w - start)), np.max(np.abs(cdf_w - end))))
