import math

import mpmath
import numpy as np
import pytest

from components.stein import (
    GridSpec,
    SawtoothStein,
    f_z,
    g_h,
    g_h_quadrature,
    g_z,
    gz_branch_jump,
    verify_gh_lemma41,
    verify_gz_properties,
)
from utils.errors import DomainError
from utils.gaussians import Phi, scaled_tail


# ------------------ g_z ------------------ #
def test_g_z_right_branch_against_high_precision():
    mpmath.mp.dps = 40
    tail = mpmath.sqrt(2 * mpmath.pi) * mpmath.exp(2) * mpmath.ncdf(-2)
    expected = float((5 * tail - 2) * mpmath.ncdf(1))
    assert g_z(1.0, 2.0) == pytest.approx(expected, rel=1e-13)


def test_g_z_at_origin():
    expected = math.sqrt(2 * math.pi) / 2 * (1 - Phi(0.5))
    assert g_z(0.5, 0.0) == pytest.approx(expected, rel=1e-14)


def test_g_z_far_left_is_small():
    value = g_z(1.0, -35.0)
    assert 0.0 <= value <= 3.0 / (2.0 * 36.0**3)


def test_g_z_vectorised():
    w = np.linspace(-5, 5, 11)
    out = g_z(1.0, w)
    assert out.shape == w.shape
    np.testing.assert_allclose(out, [g_z(1.0, float(v)) for v in w], rtol=1e-13)


def test_g_z_large_z_has_no_overflow():
    w = np.linspace(-40, 40, 2001)
    assert np.all(np.isfinite(g_z(30.0, w)))


@pytest.mark.parametrize("z", [0.1, 1.0, 3.0, 8.0])
def test_branch_jump_equals_z(z):
    left, right = gz_branch_jump(z)
    assert left - right == pytest.approx(z, rel=1e-12, abs=1e-12)


def test_g_z_is_derivative_of_w_f_z():
    z, h = 1.0, 1e-6
    w = np.linspace(-5, 5, 100)
    numeric = ((w + h) * f_z(z, w + h) - (w - h) * f_z(z, w - h)) / (2 * h)
    np.testing.assert_allclose(numeric, g_z(z, w), atol=1e-5)


def test_f_z_solves_stein_equation():
    # f' - w f = 1(w <= z) - Phi(z), checked away from the kink.
    z, h = 0.7, 1e-6
    w = np.array([-3.0, -1.0, 0.2, 1.5, 4.0])
    derivative = (f_z(z, w + h) - f_z(z, w - h)) / (2 * h)
    rhs = (w <= z).astype(float) - Phi(z)
    np.testing.assert_allclose(derivative - w * f_z(z, w), rhs, atol=1e-7)


# ------------------ Envelope verification ------------------ #
@pytest.mark.parametrize("z", [0.1, 1.0])
def test_envelope_default_grid(z):
    result = verify_gz_properties(z)
    assert result.passed, result.violations[:5]
    assert result.max_violation == 0.0
    assert result.grid.shape == (10_000,)


def test_envelope_detects_corruption():
    result = verify_gz_properties(1.0, evaluator=lambda z, w: g_z(z, w) + 0.1)
    assert not result.passed
    assert {v.name for v in result.violations} & {"cs3c", "cs3d"}
    assert result.max_violation > 0.0


def test_envelope_rejects_nonpositive_z():
    with pytest.raises(DomainError):
        verify_gz_properties(0.0)


@pytest.mark.slow
def test_envelope_sweep_over_z():
    grid = GridSpec(-40.0, 40.0, 10_000)
    for z in np.geomspace(1e-3, 10.0, 100):
        result = verify_gz_properties(float(z), grid)
        assert result.passed, (z, result.violations[:3])


# ------------------ g_h ------------------ #
@pytest.mark.parametrize("n_worlds", [3, 10])
def test_g_h_matches_quadrature(solved, n_worlds):
    cfg = solved(n_worlds)
    solution = SawtoothStein(cfg)
    span = cfg.x1 + 1.0
    for w in np.linspace(-span, span, 100):
        oracle = g_h_quadrature(cfg, float(w))
        assert solution(float(w)) == pytest.approx(oracle, abs=1e-9 * max(1.0, abs(oracle)))


@pytest.mark.slow
def test_g_h_matches_quadrature_101(solved):
    cfg = solved(101)
    solution = SawtoothStein(cfg)
    span = cfg.x1 + 1.0
    for w in np.linspace(-span, span, 100):
        oracle = g_h_quadrature(cfg, float(w))
        assert solution(float(w)) == pytest.approx(oracle, abs=1e-9 * max(1.0, abs(oracle)))


def test_g_h_at_origin_three_worlds(solved):
    cfg = solved(3)
    assert g_h(cfg, 0.0) == pytest.approx(g_h_quadrature(cfg, 0.0), abs=1e-10)


def test_g_h_above_support_uses_left_integral_only(solved):
    cfg = solved(10)
    solution = SawtoothStein(cfg)
    w = cfg.x1 + 0.5
    expected = (w - (1 + w * w) * scaled_tail(w)) * solution.total_phi
    assert solution(w) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("n_worlds", [3, 10, 101])
def test_g_h_linear_envelope(solved, n_worlds):
    cfg = solved(n_worlds)
    w = np.linspace(-8, 8, 2001)
    assert np.all(np.abs(g_h(cfg, w)) <= 2.0 * (1.0 + np.abs(w)))


def test_g_h_is_odd(solved):
    cfg = solved(101)
    w = np.linspace(0.05, cfg.x1 + 1.0, 200)
    np.testing.assert_allclose(g_h(cfg, -w), -g_h(cfg, w), atol=1e-10)


def test_lemma41_constant(solved):
    result = verify_gh_lemma41(solved(101))
    assert math.isfinite(result.best_constant)
    assert result.best_constant > 0.0
    assert list(result.table.columns) == ["n", "direct_ratio", "mirror_ratio", "bound_scale"]
    assert result.table["n"].tolist() == [1]
    assert result.symmetry_gap <= 1e-9 * max(1.0, result.best_constant)


def test_lemma41_needs_large_n(solved):
    with pytest.raises(DomainError):
        verify_gh_lemma41(solved(10))


@pytest.mark.slow
def test_lemma41_constant_large_n(solved):
    result = verify_gh_lemma41(solved(10_000))
    assert math.isfinite(result.best_constant)
    assert result.table["n"].tolist() == list(range(1, len(result.table) + 1))
