"""Rescaling-chart Riccati connection and the universal fold constant."""

import math

import numpy as np
import pytest
from scipy import special
from scipy.integrate import solve_ivp

from gspt.errors import PreconditionError
from gspt.riccati import (RiccatiProblem, k2_exit_prediction, left_tail_decay,
                          omega0_constant, riccati_special_solution,
                          right_tail_constant)


def _airy_neg(z):
    """Ai(-z) from the Maclaurin series of y'' = x y (independent of scipy).

    Ai = c1 f - c2 g with f, g the even/odd-seeded series solutions,
    c1 = 3^{-2/3}/Gamma(2/3), c2 = 3^{-1/3}/Gamma(1/3).
    """
    x = -z
    c1 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
    c2 = 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)
    f_term, g_term = 1.0, x
    f_sum, g_sum = f_term, g_term
    x3 = x ** 3
    for k in range(80):
        f_term *= x3 / ((3 * k + 2) * (3 * k + 3))
        g_term *= x3 / ((3 * k + 3) * (3 * k + 4))
        f_sum += f_term
        g_sum += g_term
        if abs(f_term) < 1e-18 and abs(g_term) < 1e-18:
            break
    return c1 * f_sum - c2 * g_sum


def _airy_first_zero():
    a, b = 2.0, 3.0
    fa = _airy_neg(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = _airy_neg(mid)
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
        if b - a < 1e-15:
            break
    return 0.5 * (a + b)


# ------------------------------------------------------------------ Omega0

def test_omega0_matches_airy_series_oracle():
    om = omega0_constant()
    assert abs(om - _airy_first_zero()) < 1e-8


def test_omega0_matches_scipy_airy_zero():
    om = omega0_constant()
    assert abs(om - (-special.ai_zeros(1)[0][0])) < 1e-12


def test_omega0_scan_resolution_stable():
    assert abs(omega0_constant(0.01) - omega0_constant(0.005)) < 1e-10


# -------------------------------------------------------------- connection

def test_special_solution_against_scipy():
    prob = RiccatiProblem(1.0, 2.0, 1.0)
    grid = np.linspace(-30.0, 30.0, 31)
    zeta = riccati_special_solution(prob, grid)

    lo, hi = prob.x2_span
    z0 = (prob.d0 / prob.b1) / (-lo)
    sol = solve_ivp(
        lambda t, z: [(prob.d0 + prob.b1 * t * z[0]) / (prob.a0 * z[0])],
        (lo, hi), [z0], t_eval=grid, rtol=1e-12, atol=1e-14, method="DOP853")
    assert sol.success
    assert np.max(np.abs(zeta - sol.y[0])) < 1e-7


def test_special_solution_positive_throughout():
    # algebraic tail -(d0/b1)/x2 is positive on the left (x2 < 0) and the
    # connection never touches zero on its way to the parabolic right tail
    prob = RiccatiProblem(1.0, 1.0, 1.0)
    grid = np.linspace(-39.0, 39.0, 401)
    zeta = riccati_special_solution(prob, grid)
    assert np.all(zeta > 0)
    # left end matches the tail; right end the parabola, both loosely
    assert zeta[0] == pytest.approx(1.0 / 39.0, rel=1e-2)
    assert zeta[-1] == pytest.approx(0.5 * 39.0 ** 2, rel=1e-2)


def test_normalization_map_reduces_to_unit_problem():
    # zeta_{a0,b1,d0}(x) = A u(x/B), A = (d0^2/(a0 b1))^{1/3},
    # B = (a0 d0 / b1^2)^{1/3}, u the (1,1,1) connection
    a0, b1, d0 = 2.0, 3.0, 1.5
    A = (d0 ** 2 / (a0 * b1)) ** (1.0 / 3.0)
    B = (a0 * d0 / b1 ** 2) ** (1.0 / 3.0)
    s = np.linspace(-12.0, 12.0, 49)
    u = riccati_special_solution(RiccatiProblem(1.0, 1.0, 1.0), s)
    zeta = riccati_special_solution(RiccatiProblem(a0, b1, d0), B * s)
    assert np.max(np.abs(zeta - A * u)) < 1e-8


def test_problem_validation():
    with pytest.raises(PreconditionError, match="positive"):
        RiccatiProblem(-1.0, 1.0, 1.0)
    with pytest.raises(PreconditionError, match="straddle"):
        RiccatiProblem(1.0, 1.0, 1.0, x2_span=(5.0, 40.0))
    with pytest.raises(PreconditionError, match="too close to the fold"):
        riccati_special_solution(
            RiccatiProblem(1.0, 1.0, 1.0, x2_span=(-5.0, 40.0)), [0.0])
    with pytest.raises(PreconditionError, match="inside x2_span"):
        riccati_special_solution(RiccatiProblem(1.0, 1.0, 1.0), [50.0])
    with pytest.raises(PreconditionError, match="exceeds x2_span"):
        right_tail_constant(RiccatiProblem(1.0, 1.0, 1.0), window=(15.0, 80.0))
    with pytest.raises(PreconditionError, match="positive"):
        k2_exit_prediction(RiccatiProblem(1.0, 1.0, 1.0), 0.0)


# ------------------------------------------------------------------- tails

def test_left_tail_remainder_decays_fourth_order():
    d = left_tail_decay(RiccatiProblem(1.0, 2.0, 1.0))
    assert d >= 3.5


def test_right_tail_constant_closes_exit_formula():
    om = omega0_constant()
    for a0, b1, d0 in [(1.0, 1.0, 1.0), (1.0, 2.0, 1.0), (2.0, 3.0, 1.5)]:
        prob = RiccatiProblem(a0, b1, d0)
        target = (2.0 * d0 ** 2 / (a0 * b1)) ** (1.0 / 3.0) * om
        assert abs(right_tail_constant(prob) - target) < 1e-4


# ------------------------------------------------------------ exit closure

def test_exit_prediction_closure_at_coarse_delta():
    # HONEST RED. The three-term exit formula drops an O(delta) remainder
    # with constant ~2, so at delta = 0.1 the discrepancy against direct
    # chart integration is ~0.2, far above the 1e-3 demanded here. The
    # companion test below pins the actual remainder law. See
    # /root/notes/decisions.md (exit-closure tolerance).
    prob = RiccatiProblem(1.0, 1.0, 1.0)
    delta = 0.1
    zeta = riccati_special_solution(prob, [delta ** (-1.0 / 3.0)])[0]
    assert abs(zeta - k2_exit_prediction(prob, delta)) <= 1e-3


def test_exit_prediction_remainder_is_order_delta():
    prob = RiccatiProblem(1.0, 1.0, 1.0)
    discs = []
    for delta in (0.1, 0.05, 0.02):
        zeta = riccati_special_solution(prob, [delta ** (-1.0 / 3.0)])[0]
        disc = abs(zeta - k2_exit_prediction(prob, delta))
        assert disc <= 4.5 * delta
        discs.append(disc)
    # remainder shrinks monotonically with delta
    assert discs[0] > discs[1] > discs[2]
