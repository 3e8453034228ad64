"""Verification harness: every proved inequality evaluated on solved configurations.

Checks are kept as pandas frames with the columns of ``CHECK_COLUMNS``; the
list-of-``BoundCheck`` entry points are thin views over those frames.
"""
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from tqdm import tqdm

from components.coupling import (
    ZeroBiasCoupling,
    build,
    coupling_kolmogorov,
    expected_coupling_gap,
    sawtooth_expectation,
    sawtooth_gaussian_expectation,
)
from components.ground_state import Configuration, median_index, solve
from components.metrics import DistanceReport, report, zero_bias_kolmogorov
from utils.bound_check import BoundCheck, family_of, margins
from utils.errors import DomainError, SolverError
from utils.settings import get_settings

CHECK_COLUMNS = ["N", "family", "name", "n_index", "lhs", "rhs", "margin", "passed", "status", "reason"]
CHECK_DTYPES = {
    "N": "int64",
    "family": object,
    "name": object,
    "n_index": "Int64",
    "lhs": "float64",
    "rhs": "float64",
    "margin": "float64",
    "passed": "boolean",
    "status": object,
    "reason": object,
}
REPORT_COLUMNS = ["N", "x1", "d_k", "d_w", "scaled_dk", "scaled_dw", "checks_passed", "checks_total"]

LEMMA_REGIME = 100
SKIP_REASON = "N ≤ 100"

LEMMA_FAMILIES = ("lem31d", "lem31a", "lem31b", "lem31c", "cal08", "cal07", "rem_xk", "spacing_step")
COUPLING_FAMILIES = (
    "wstar_kolmogorov",
    "wstar_gaussian",
    "coupling_gap",
    "sawtooth_identity",
    "sawtooth_lower",
    "sawtooth_witness",
)
GATED_COUPLING_FAMILIES = ("wstar_kolmogorov", "wstar_gaussian", "sawtooth_lower")
THEOREM_FAMILIES = ("BE1", "BE2", "dw_coarse")

SAWTOOTH_RELATIVE_TOL = 1e-12


# ------------------ Frame helpers ------------------ #
def _rows(n_worlds: int, name, lhs, rhs, n_index=None, floor: Optional[float] = None) -> pd.DataFrame:
    lhs, rhs = np.broadcast_arrays(np.atleast_1d(np.asarray(lhs, dtype=np.float64)), np.asarray(rhs, dtype=np.float64))
    margin, passed = margins(lhs, rhs, floor)
    names = pd.Series(name, index=range(lhs.shape[0]), dtype=object) if isinstance(name, str) else pd.Series(name)
    index = pd.array([pd.NA] * lhs.shape[0] if n_index is None else np.broadcast_to(n_index, lhs.shape), dtype="Int64")
    return pd.DataFrame(
        {
            "N": n_worlds,
            "family": names.map(family_of).to_numpy(),
            "name": names.to_numpy(),
            "n_index": index,
            "lhs": lhs,
            "rhs": rhs,
            "margin": margin,
            "passed": pd.array(passed, dtype="boolean"),
            "status": np.where(passed, "passed", "failed"),
            "reason": "",
        },
        columns=CHECK_COLUMNS,
    )


def _skipped(n_worlds: int, families: Iterable[str], reason: str = SKIP_REASON) -> pd.DataFrame:
    families = list(families)
    count = len(families)
    return pd.DataFrame(
        {
            "N": n_worlds,
            "family": families,
            "name": families,
            "n_index": pd.array([pd.NA] * count, dtype="Int64"),
            "lhs": np.nan,
            "rhs": np.nan,
            "margin": np.nan,
            "passed": pd.array([pd.NA] * count, dtype="boolean"),
            "status": "skipped",
            "reason": reason,
        },
        columns=CHECK_COLUMNS,
    )


def checks_frame(n_worlds: int, checks: Sequence[BoundCheck]) -> pd.DataFrame:
    """DataFrame form of a list of checks for one N."""
    return _concat([_rows(n_worlds, c.name, c.lhs, c.rhs, c.n_index) for c in checks])


def _to_checks(frame: pd.DataFrame) -> List[BoundCheck]:
    active = frame[frame["status"] != "skipped"]
    return [
        BoundCheck(
            name=row.name,
            lhs=float(row.lhs),
            rhs=float(row.rhs),
            margin=float(row.margin),
            passed=bool(row.passed),
            n_index=None if pd.isna(row.n_index) else int(row.n_index),
        )
        for row in active.itertuples(index=False)
    ]


def _concat(frames: Sequence[pd.DataFrame]) -> pd.DataFrame:
    # All-NA columns are dropped before concatenation and restored by the reindex.
    frames = [f.dropna(axis=1, how="all") for f in frames if not f.empty]
    if not frames:
        return pd.DataFrame(columns=CHECK_COLUMNS).astype(CHECK_DTYPES)
    return pd.concat(frames, ignore_index=True).reindex(columns=CHECK_COLUMNS).astype(CHECK_DTYPES)


# ------------------ Top-of-grid inequalities ------------------ #
def top_index(n_worlds: int) -> int:
    """[m/e^3], the last index of the top regime."""
    return int(math.floor(median_index(n_worlds) / math.exp(3.0)))


def cal08_indices(m: int, k: int) -> np.ndarray:
    """Indices 1..k, or a log-spaced deterministic subset when m is large."""
    settings = get_settings()
    if m <= settings.cal08_full_enumeration_max_m:
        return np.arange(1, k + 1)
    budget = settings.cal08_pair_budget
    points = int((1.0 + math.sqrt(1.0 + 8.0 * budget)) / 2.0)
    return np.unique(np.rint(np.geomspace(1, k, min(points, k))).astype(np.int64))


def lemma31_table(cfg: Configuration) -> pd.DataFrame:
    """All top-regime inequalities for one configuration (skipped rows for N ≤ 100)."""
    n_worlds = cfg.n_worlds
    if n_worlds <= LEMMA_REGIME:
        return _skipped(n_worlds, LEMMA_FAMILIES)

    x = cfg.locations
    s = cfg.partial_sums
    m = cfg.median_index
    k = top_index(n_worlds)
    n = np.arange(1, m, dtype=np.int64)
    envelope = np.sqrt(2.0 * (1.0 + np.log(m / n)))
    x_m = x[m - 1]

    frames = [
        _rows(n_worlds, "lem31d.lower", 0.0, x_m, m),
        _rows(n_worlds, "lem31d.upper", x_m, 1.0 / m, m),
        _rows(n_worlds, "lem31a", x[n - 1], envelope, n),
        _rows(n_worlds, "lem31b.lower", np.sqrt(n * (n + 1) / 2.0), s[n - 1], n),
        _rows(n_worlds, "lem31b.upper", s[n - 1], 1.5 * n * envelope, n),
    ]

    top = n[:k]
    frames += [
        _rows(n_worlds, "lem31c.x", envelope[:k] / 3.0, x[top - 1], top),
        _rows(n_worlds, "lem31c.s", top * envelope[:k] / 3.0, s[top - 1], top),
    ]

    idx = cal08_indices(m, k)
    first, second = np.triu_indices(idx.shape[0], 1)
    l, j = idx[first], idx[second]
    pair_names = [f"cal08:{a},{b}" for a, b in zip(l.tolist(), j.tolist())]
    frames.append(_rows(n_worlds, pair_names, 4.0 * np.log(j / l) / 9.0, x[l - 1] ** 2 - x[j - 1] ** 2, l))

    frames += [
        _rows(n_worlds, "cal07", math.sqrt(math.log(m)), x[0], 1),
        _rows(n_worlds, "rem_xk", math.sqrt(8.0) / 3.0, x[k - 1], k),
        _rows(n_worlds, "spacing_step.first", x[0], 1.0 + x[1], 1),
    ]
    step = np.arange(3, m + 1, dtype=np.int64)
    frames.append(_rows(n_worlds, "spacing_step", x[step - 2], 1.0 + x[step], step))
    return _concat(frames)


def check_lemma31(cfg: Configuration) -> List[BoundCheck]:
    """One BoundCheck per (family, index); only defined for N > 100."""
    if cfg.n_worlds <= LEMMA_REGIME:
        raise DomainError(f"top-regime inequalities need N > {LEMMA_REGIME}, got {cfg.n_worlds}")
    return _to_checks(lemma31_table(cfg))


# ------------------ Coupling ------------------ #
def check_coupling(c: ZeroBiasCoupling, distances: DistanceReport) -> List[BoundCheck]:
    """Coupling distances, the sawtooth identity and the sawtooth lower witness."""
    n_worlds = c.n_worlds
    x1 = c.cfg.x1
    _, eh_wstar = sawtooth_expectation(c)
    target = x1 / (2.0 * (n_worlds - 1))

    checks = [
        BoundCheck.evaluate("coupling_gap", expected_coupling_gap(c), 2.0 * x1 / (n_worlds - 1)),
        BoundCheck.evaluate("sawtooth_identity", abs(eh_wstar - target), SAWTOOTH_RELATIVE_TOL * target),
        BoundCheck.evaluate("sawtooth_witness", sawtooth_gaussian_expectation(c), distances.d_w),
    ]
    if n_worlds > LEMMA_REGIME:
        checks += [
            BoundCheck.evaluate("wstar_kolmogorov", coupling_kolmogorov(c), 2.02 / n_worlds),
            BoundCheck.evaluate("wstar_gaussian", zero_bias_kolmogorov(c), 52.5 / n_worlds),
            BoundCheck.evaluate(
                "sawtooth_lower", math.sqrt(math.log(n_worlds / 2.0)) / (2.0 * (n_worlds - 1)), eh_wstar
            ),
        ]
    return checks


def coupling_table(c: ZeroBiasCoupling, distances: DistanceReport) -> pd.DataFrame:
    frame = checks_frame(c.n_worlds, check_coupling(c, distances))
    if c.n_worlds > LEMMA_REGIME:
        return frame
    return _concat([frame, _skipped(c.n_worlds, GATED_COUPLING_FAMILIES)])


# ------------------ Convergence rates ------------------ #
def wasserstein_deficit(n_worlds: int, d_w: float) -> float:
    """(sqrt(log(N/2))/(2N) - d_W) N, the constant needed at this N."""
    return (math.sqrt(math.log(n_worlds / 2.0)) / (2.0 * n_worlds) - d_w) * n_worlds


def _be2_lower(distances: DistanceReport, constant: float) -> BoundCheck:
    n_worlds = distances.n_worlds
    lhs = math.sqrt(math.log(n_worlds / 2.0)) / (2.0 * n_worlds) - constant / n_worlds
    return BoundCheck.evaluate("BE2.lower", lhs, distances.d_w)


def _rate_checks(distances: DistanceReport) -> List[BoundCheck]:
    n_worlds = distances.n_worlds
    return [
        BoundCheck.evaluate("BE1.lower", 1.0 / (2.0 * n_worlds), distances.d_k),
        BoundCheck.evaluate("BE1.upper", distances.d_k, 55.0 / n_worlds),
        BoundCheck.evaluate("BE2.upper", distances.d_w, 16.0 * math.sqrt(math.log(n_worlds)) / n_worlds),
    ]


def check_theorem(distances: DistanceReport, wasserstein_constant: Optional[float] = None) -> List[BoundCheck]:
    """Both sides of the Kolmogorov and Wasserstein rates.

    Without an explicit constant the Wasserstein lower bound uses this N's own
    clamped deficit.
    """
    if wasserstein_constant is None:
        wasserstein_constant = max(wasserstein_deficit(distances.n_worlds, distances.d_w), 0.0)
    return _rate_checks(distances) + [_be2_lower(distances, wasserstein_constant)]


def check_coarse_rate(distances: DistanceReport) -> BoundCheck:
    """The earlier d_W <= 4/sqrt(log N) rate."""
    return BoundCheck.evaluate("dw_coarse", distances.d_w, 4.0 / math.sqrt(math.log(distances.n_worlds)))


# ------------------ Sweep ------------------ #
@dataclass
class SweepResult:
    n_values: List[int]
    reports: pd.DataFrame
    checks: pd.DataFrame
    worst_margins: Dict[str, float] = field(default_factory=dict)
    failures: Dict[int, str] = field(default_factory=dict)
    wasserstein_constant: float = 0.0

    @property
    def failed_checks(self) -> pd.DataFrame:
        return self.checks[self.checks["status"] == "failed"]

    @property
    def passed(self) -> bool:
        return not self.failures and self.failed_checks.empty


def _constant_from_reports(reports: pd.DataFrame) -> float:
    if reports.empty:
        return 0.0
    large = reports[reports["N"] > LEMMA_REGIME]
    if len(large) < 5:
        logger.warning("estimating the Wasserstein constant from {} values of N > 100", len(large))
    if large.empty:
        large = reports
    deficits = [wasserstein_deficit(int(n), float(d)) for n, d in zip(large["N"], large["d_w"])]
    return max(max(deficits), 0.0)


def estimate_wasserstein_constant(sweep: SweepResult) -> float:
    """Smallest C >= 0 with d_W >= sqrt(log(N/2))/(2N) - C/N over the sweep."""
    return _constant_from_reports(sweep.reports)


def _pipeline(n_worlds: int, tol: Optional[float], precision: Optional[str], cache) -> tuple:
    if cache is not None:
        cfg = cache.get_or_solve(n_worlds, tol=tol, precision=precision)
    else:
        cfg = solve(n_worlds, tol=tol, precision=precision)
    distances = report(cfg)
    coupling = build(cfg)
    frame = _concat(
        [
            lemma31_table(cfg),
            coupling_table(coupling, distances),
            checks_frame(n_worlds, _rate_checks(distances) + [check_coarse_rate(distances)]),
        ]
    )
    return distances, frame


def run_sweep(
    n_values: Iterable[int],
    tol: Optional[float] = None,
    precision: Optional[str] = None,
    workers: Optional[int] = None,
    cache=None,
    progress: bool = True,
) -> SweepResult:
    """Solve every N, evaluate all checks, and aggregate worst margins per family.

    Solver errors are recorded per N and do not stop the sweep.  The
    Wasserstein lower bound is evaluated last, with the constant estimated
    from the whole sweep.
    """
    n_values = sorted({int(n) for n in n_values})
    if any(n < 2 for n in n_values):
        raise DomainError("every N in a sweep must be >= 2")
    workers = workers or get_settings().workers

    distances: Dict[int, DistanceReport] = {}
    frames: Dict[int, pd.DataFrame] = {}
    failures: Dict[int, str] = {}
    if n_values:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_pipeline, n, tol, precision, cache): n for n in n_values}
            for future in tqdm(as_completed(futures), total=len(futures), desc="sweep", disable=not progress):
                n = futures[future]
                try:
                    distances[n], frames[n] = future.result()
                except SolverError as exc:
                    failures[n] = str(exc)
                    logger.warning("N={} failed: {}", n, exc)

    solved = [n for n in n_values if n in distances]
    reports = pd.DataFrame([distances[n].to_dict() for n in solved])
    if not reports.empty:
        reports = reports.rename(columns={"n_worlds": "N"})
    constant = _constant_from_reports(reports) if not reports.empty else 0.0

    per_n = []
    for n in solved:
        lower = checks_frame(n, [_be2_lower(distances[n], constant)])
        per_n.append(_concat([frames[n], lower]))
    checks = _concat(per_n)

    if reports.empty:
        reports = pd.DataFrame(columns=REPORT_COLUMNS)
    else:
        active = checks[checks["status"] != "skipped"]
        reports["checks_total"] = reports["N"].map(active.groupby("N").size()).fillna(0).astype(int)
        reports["checks_passed"] = (
            reports["N"].map(active[active["status"] == "passed"].groupby("N").size()).fillna(0).astype(int)
        )
        reports = reports[REPORT_COLUMNS]

    active = checks[checks["status"] != "skipped"]
    worst = {} if active.empty else active.groupby("family")["margin"].min().astype(float).to_dict()

    result = SweepResult(
        n_values=n_values,
        reports=reports,
        checks=checks,
        worst_margins=worst,
        failures=failures,
        wasserstein_constant=constant,
    )
    failed = result.failed_checks
    if not failed.empty:
        logger.info("{} checks failed across {} values of N", len(failed), failed["N"].nunique())
    logger.info("sweep over {} values of N done; Wasserstein constant {:.6g}", len(n_values), constant)
    return result
