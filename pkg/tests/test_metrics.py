import math

import numpy as np
import pytest

from components.metrics import (
    kolmogorov,
    kolmogorov_grid_scan,
    report,
    signed_cdf_gap,
    wasserstein,
    wasserstein_quadrature,
    zero_bias_kolmogorov,
)
from utils.gaussians import Phi


def test_kolmogorov_three_worlds(solved):
    # The largest gap sits just below the middle atom: 1/3 - Phi(-1).
    assert kolmogorov(solved(3)) == pytest.approx(1 / 3 - Phi(-1.0), abs=1e-12)
    assert kolmogorov(solved(3)) == pytest.approx(0.17468, abs=1e-4)


@pytest.mark.parametrize("n_worlds", [2, 3, 4, 10, 100])
def test_kolmogorov_matches_grid_scan(solved, n_worlds):
    cfg = solved(n_worlds)
    points = 1_000_000
    spacing = (cfg.x1 - cfg.locations[-1] + 2.0) / (points - 1)
    exact = kolmogorov(cfg)
    scan = kolmogorov_grid_scan(cfg, points)
    # The scan can only miss the peak by phi * spacing < spacing / 2.
    assert scan <= exact + 1e-15
    assert exact - scan <= 0.5 * spacing


@pytest.mark.parametrize("n_worlds", [2, 3, 4, 10, 100])
def test_wasserstein_matches_quadrature(solved, n_worlds):
    cfg = solved(n_worlds)
    assert wasserstein(cfg) == pytest.approx(wasserstein_quadrature(cfg), abs=1e-9)


@pytest.mark.parametrize("n_worlds", [2, 3, 10, 101, 1000])
def test_signed_cdf_gap_vanishes(solved, n_worlds):
    assert abs(signed_cdf_gap(solved(n_worlds))) <= 1e-12


@pytest.mark.parametrize("n_worlds", [2, 3, 4, 10, 100, 101, 1000])
def test_rate_windows(solved, n_worlds):
    cfg = solved(n_worlds)
    d_k, d_w = kolmogorov(cfg), wasserstein(cfg)
    assert 0.5 <= n_worlds * d_k <= 55.0
    assert d_w <= 16.0 * math.sqrt(math.log(n_worlds)) / n_worlds
    assert d_w > 0.0


def test_zero_bias_kolmogorov_three_worlds(coupled):
    # W* is uniform on [-1, 1]; the gap peaks at the ends of the support.
    assert zero_bias_kolmogorov(coupled(3)) == pytest.approx(Phi(-1.0), abs=1e-12)


@pytest.mark.parametrize("n_worlds", [10, 101])
def test_zero_bias_kolmogorov_matches_grid(coupled, n_worlds):
    c = coupled(n_worlds)
    x = c.cfg.locations
    asc = x[::-1]
    grid = np.linspace(asc[0] - 1.0, asc[-1] + 1.0, 400_001)
    # Piecewise-linear CDF of W* through (x_{n+1}, (N-1-n)/(N-1)) .. (x_n, (N-n)/(N-1)).
    levels = np.arange(n_worlds) / (n_worlds - 1)
    cdf = np.interp(grid, asc, levels)
    scan = float(np.max(np.abs(cdf - Phi(grid))))
    exact = zero_bias_kolmogorov(c)
    spacing = grid[1] - grid[0]
    assert scan <= exact + 1e-12
    assert exact - scan <= spacing


@pytest.mark.parametrize("n_worlds", [3, 101])
def test_report_fields(solved, n_worlds):
    cfg = solved(n_worlds)
    r = report(cfg)
    assert r.n_worlds == n_worlds
    assert r.x1 == cfg.x1
    assert r.scaled_dk == pytest.approx(n_worlds * r.d_k)
    assert r.scaled_dw == pytest.approx(n_worlds * r.d_w / math.sqrt(math.log(n_worlds)))
    assert set(r.to_dict()) == {"n_worlds", "d_k", "d_w", "x1", "scaled_dk", "scaled_dw"}


@pytest.mark.slow
@pytest.mark.parametrize("n_worlds", [10_000, 100_000, 1_000_000])
def test_rate_windows_large(solved, n_worlds):
    cfg = solved(n_worlds)
    assert 0.5 <= n_worlds * kolmogorov(cfg) <= 55.0
    assert wasserstein(cfg) <= 16.0 * math.sqrt(math.log(n_worlds)) / n_worlds
