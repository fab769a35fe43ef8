import numpy as np
import pytest
from scipy.integrate import quad

from qscatter.errors import ArgumentError, ResolutionError
from qscatter.particle import (SHAPES, Mollifier, ScatterProblem, analytic_jump, rank_one_exact, solve,
                               solve_rank_one, solve_scalar)


@pytest.mark.parametrize("shape", SHAPES)
def test_mollifier_unit_mass_and_even(shape):
    m = Mollifier(shape, 10.0, 0.5)
    w = m.half_width
    assert abs(quad(m, -w, w, points=[0.0])[0] - 1) < 1e-10
    x = np.linspace(-w, w, 101)
    assert np.array_equal(m(x), m(-x))
    assert m(np.array([1.01 * w]))[0] == 0


@pytest.mark.parametrize("shape", SHAPES)
def test_sampled_mollifier_unit_trapezoid(shape):
    p = ScatterProblem("scalar_delta", 1.0, 1.0, Mollifier(shape, 64.0))
    x = p.grid()
    assert abs(np.trapezoid(p.mollifier.sampled(x), x) - 1) < 1e-12


def test_grid_requirements():
    p = ScatterProblem("scalar_delta", 1.0, 1.0, Mollifier("box", 8.0), points_across_support=32)
    with pytest.raises(ResolutionError):
        p.grid()
    x = ScatterProblem("scalar_delta", 1.0, 1.0, Mollifier("box", 8.0)).grid()
    assert x[0] <= -3 / 8 and x[-1] >= 3 / 8


def test_kind_mismatch():
    with pytest.raises(ArgumentError):
        solve_scalar(ScatterProblem("rank_one", 1.0, 1.0))
    with pytest.raises(ArgumentError):
        solve_rank_one(ScatterProblem("scalar_delta", 1.0, 1.0))
    with pytest.raises(ArgumentError):
        ScatterProblem("vector", 1.0, 1.0)


def test_analytic_laws():
    assert analytic_jump("scalar_delta", 0.0) == 1 == analytic_jump("rank_one", 0.0)
    assert abs(analytic_jump("scalar_delta", np.pi) + 1) < 1e-15
    assert abs(analytic_jump("rank_one", 2.0) + 1j) < 1e-15
    for eps in np.linspace(0, 0.3, 31):
        assert abs(analytic_jump(1, eps) - analytic_jump(2, eps)) <= eps ** 3 / 10 + 1e-16
    for eps in (-3.0, 0.4, 7.0):
        assert abs(abs(analytic_jump(1, eps)) - 1) < 1e-15
        assert abs(abs(analytic_jump(2, eps)) - 1) < 1e-15


@pytest.mark.parametrize("kind", ["scalar_delta", "rank_one"])
def test_zero_coupling_is_free(kind):
    assert abs(solve(ScatterProblem(kind, 0.0, 1.3)).s_numeric - 1) < 1e-14


def test_scalar_box_example():
    res = solve(ScatterProblem("scalar_delta", 1.0, 1.0, Mollifier("box", 256.0)))
    assert abs(res.s_numeric - np.exp(-1j)) < 1e-3


def test_scalar_pi_gives_minus_one():
    for n in (64.0, 1024.0):
        assert abs(solve(ScatterProblem("scalar_delta", np.pi, 0.8, Mollifier("triangle", n))).s_numeric + 1) < 1e-10


def test_scalar_integrating_factor_is_exact_at_every_width():
    # the exact solution is exp(-ikx + i eps int delta_n); only quadrature error remains
    for n in (4.0, 32.0, 512.0):
        for k in (0.5, 2.0):
            res = solve(ScatterProblem("scalar_delta", 1.3, k, Mollifier("raised_cosine", n)))
            assert res.error < 1e-12


def test_rank_one_example():
    res = solve(ScatterProblem("rank_one", 1.0, 1.0, Mollifier("raised_cosine", 256.0)))
    assert abs(res.s_numeric - (1 - 0.5j) / (1 + 0.5j)) < 1e-3


@pytest.mark.parametrize("shape", ["triangle", "raised_cosine"])
def test_rank_one_grid_matches_adaptive_quadrature(shape):
    # the grid solve and a grid-free double-quadrature evaluation of the finite-n jump agree
    m = Mollifier(shape, 64.0)
    for eps, k in ((0.5, 1.0), (2.0, 2.0)):
        grid = solve(ScatterProblem("rank_one", eps, k, m)).s_numeric
        assert abs(grid - rank_one_exact(eps, k, m)) < 1e-6


def test_rank_one_converges_monotonically():
    errs = [solve(ScatterProblem("rank_one", 1.0, 1.0, Mollifier("raised_cosine", n))).error
            for n in (32, 64, 128, 256, 512)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # first-order rate in the mollifier width
    assert np.polyfit(np.log([32, 64, 128, 256, 512]), np.log(errs), 1)[0] < -0.9


def test_rank_one_strong_coupling_limit():
    res = solve(ScatterProblem("rank_one", 2.0, 0.5, Mollifier("raised_cosine", 4096.0)))
    assert abs(res.s_numeric + 1j) < 1e-4


@pytest.mark.parametrize("kind", ["scalar_delta", "rank_one"])
def test_unimodular(kind):
    for eps in (0.5, 1.0, 2.0, 10.0):
        for k in (0.5, 2.0):
            s = solve(ScatterProblem(kind, eps, k, Mollifier("box", 128.0))).s_numeric
            assert abs(abs(s) - 1) < 1e-8


def test_mollifier_independence_at_sharp_limit():
    a = solve(ScatterProblem("rank_one", 1.0, 1.0, Mollifier("box", 512.0))).s_numeric
    b = solve(ScatterProblem("rank_one", 1.0, 1.0, Mollifier("raised_cosine", 512.0))).s_numeric
    assert abs(a - b) < 1e-3


def test_psi_is_returned():
    res = solve(ScatterProblem("rank_one", 1.0, 1.0, Mollifier("box", 64.0)))
    assert res.psi.shape == res.x.shape
