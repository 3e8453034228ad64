import math

import numpy as np
import pytest

from components.ground_state import (
    forward_shoot,
    median_index,
    reconstruct,
    recursion_replay_error,
    solve,
    variance_check,
)
from utils.errors import BracketError, DomainError, SolverError


# ------------------ Closed forms ------------------ #
def test_two_worlds(solved):
    cfg = solved(2)
    assert cfg.x1 == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
    np.testing.assert_array_equal(cfg.locations, [cfg.x1, -cfg.x1])


def test_three_worlds(solved):
    cfg = solved(3)
    np.testing.assert_array_equal(cfg.locations, [1.0, 0.0, -1.0])
    assert variance_check(cfg) == 0.0


def test_four_worlds(solved):
    cfg = solved(4)
    assert cfg.x1 == pytest.approx(math.sqrt((7 + math.sqrt(17)) / 8), abs=1e-12)


@pytest.mark.parametrize("n_worlds, expected", [(2, 1), (3, 2), (4, 2), (101, 51), (1000, 500)])
def test_median_index(n_worlds, expected):
    assert median_index(n_worlds) == expected


# ------------------ Invariants ------------------ #
@pytest.mark.parametrize("n_worlds", [5, 10, 101, 1000])
def test_decreasing_and_symmetric(solved, n_worlds):
    cfg = solved(n_worlds)
    x = cfg.locations
    assert np.all(np.diff(x) < 0.0)
    np.testing.assert_array_equal(x, -x[::-1])
    assert np.all(cfg.partial_sums[:-1] > 0.0)
    assert cfg.partial_sums[-1] == 0.0


@pytest.mark.parametrize("n_worlds", [10, 101, 1000])
def test_partial_sums_match_prefix_sums(solved, n_worlds):
    cfg = solved(n_worlds)
    prefix = np.cumsum(cfg.locations)
    np.testing.assert_allclose(cfg.partial_sums[:-1], prefix[:-1], rtol=1e-12, atol=1e-12 * n_worlds)


@pytest.mark.parametrize("n_worlds", [101, 1000])
def test_residuals_within_bounds(solved, n_worlds):
    r = solved(n_worlds).residuals
    assert r.zero_mean_residual <= 1e-9 * math.sqrt(n_worlds)
    assert r.variance_residual <= 1e-8 * n_worlds
    assert r.recursion_residual <= 1e-10


@pytest.mark.parametrize("n_worlds", [10, 101, 1000])
def test_spacing_identity(solved, n_worlds):
    # x_n - x_{n+1} = 1 / S_n for every step the recursion produces.
    cfg = solved(n_worlds)
    x, s = cfg.locations, cfg.partial_sums
    last = cfg.median_index - 1 if n_worlds % 2 == 0 else cfg.median_index - 2
    gaps = x[:last] - x[1 : last + 1]
    np.testing.assert_allclose(gaps, 1.0 / s[:last], rtol=1e-12)


def test_variance_check_two_worlds(solved):
    assert variance_check(solved(2)) <= 1e-15


def test_variance_check(solved):
    cfg = solved(1000)
    assert variance_check(cfg) <= 1e-8 * 1000
    assert cfg.variance == pytest.approx(999 / 1000)


def test_configuration_is_read_only(solved):
    cfg = solved(10)
    assert not cfg.locations.flags.writeable
    with pytest.raises(ValueError):
        cfg.locations[0] = 0.0


def test_replay_reproduces_stored_locations(solved):
    assert recursion_replay_error(solved(1000)) <= 1e-12


def test_double_double_agrees_with_double(solved):
    fast, careful = solved(1001), solved(1001, "dd")
    assert careful.precision == "dd"
    assert careful.x1 == pytest.approx(fast.x1, rel=1e-12)
    np.testing.assert_allclose(careful.locations, fast.locations, atol=1e-7)


@pytest.mark.slow
@pytest.mark.parametrize("n_worlds", [10_000, 100_000, 1_000_000])
def test_large_solves(n_worlds):
    cfg = solve(n_worlds)
    r = cfg.residuals
    assert r.zero_mean_residual <= 1e-9 * math.sqrt(n_worlds)
    assert r.variance_residual <= 1e-8 * n_worlds
    assert r.recursion_residual <= 1e-10
    assert cfg.x1 >= math.sqrt(math.log(cfg.median_index))


# ------------------ Shooting ------------------ #
def test_forward_shoot_objective_sign():
    # x_1 = 1 is the root for N = 3; above it x_2 > 0.
    assert forward_shoot(1.2, 3).objective > 0.0
    assert forward_shoot(0.8, 3).objective < 0.0


def test_forward_shoot_flags_low_divergence():
    shot = forward_shoot(0.1, 10)
    assert shot.diverged_low
    assert shot.objective == -math.inf


def test_forward_shoot_returns_first_half():
    shot = forward_shoot(1.0, 3)
    np.testing.assert_allclose(shot.half_locations, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(shot.partial_sums, [1.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("x1", [0.0, -1.0, float("inf"), float("nan")])
def test_forward_shoot_rejects_bad_start(x1):
    with pytest.raises(DomainError):
        forward_shoot(x1, 10)


@pytest.mark.parametrize("n_worlds", [1, 0, -3, 2.5])
def test_solve_rejects_small_or_fractional_n(n_worlds):
    with pytest.raises(DomainError):
        solve(n_worlds)


def test_solve_rejects_unknown_precision():
    with pytest.raises(DomainError):
        solve(10, precision="quad")


def test_solve_rejects_nonpositive_tol():
    with pytest.raises(DomainError):
        solve(10, tol=0.0)


# ------------------ Reconstruction ------------------ #
def test_reconstruct_round_trip(solved):
    cfg = solved(101)
    again = reconstruct(cfg.half_locations, 101, cfg.shoot_value, cfg.tol, cfg.precision)
    np.testing.assert_array_equal(again.locations, cfg.locations)
    assert again.residuals == cfg.residuals


def test_reconstruct_rejects_increasing_half():
    with pytest.raises(SolverError):
        reconstruct(np.array([1.0, 2.0]), 4, 1.0, 1e-13)


def test_reconstruct_rejects_wrong_length():
    with pytest.raises(DomainError):
        reconstruct(np.array([1.0, 0.5, 0.1]), 4, 1.0, 1e-13)


def test_bracket_failure_reports_diagnostics(monkeypatch):
    monkeypatch.setattr("components.ground_state._initial_bracket", lambda m: (5.0, 6.0))
    monkeypatch.setattr("components.ground_state.MAX_EXPANSIONS", 0)
    with pytest.raises(BracketError) as excinfo:
        solve(10)
    diagnostics = excinfo.value.diagnostics
    assert {"lo", "hi", "g_lo", "g_hi"} <= set(diagnostics)
    assert (diagnostics["lo"], diagnostics["hi"]) == (5.0, 6.0)
    assert diagnostics["g_lo"] > 0.0
    assert "expansion limit" in str(excinfo.value)
