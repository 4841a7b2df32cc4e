"""Fold-passage asymptotics in the rescaling chart.

The passage past a regular jump-off point reduces, after blow-up, to one
planar Riccati flow. Its distinguished solution zeta(x2) connects the
algebraic left tail -(d0/b1)/x2 to the parabolic right tail
(b1/2a0) x2^2 + const, and the constant in between carries the universal
number Omega0: the smallest positive zero of
J_{-1/3}(2 z^{3/2}/3) + J_{1/3}(2 z^{3/2}/3). Bessel values are computed
in-module by power series so the root is an independent brute-force oracle
rather than a library lookup.
"""

import math
import numpy as np
from dataclasses import dataclass

from .errors import ComputationError, PreconditionError
from .rk import Event, integrate_field


@dataclass
class RiccatiProblem:
    a0: float
    b1: float
    d0: float
    x2_span: tuple = (-40.0, 40.0)

    def __post_init__(self):
        if not (self.a0 > 0 and self.b1 > 0 and self.d0 > 0):
            raise PreconditionError("Riccati coefficients must be positive")
        lo, hi = map(float, self.x2_span)
        if not lo < 0 < hi:
            raise PreconditionError("x2_span must straddle the fold at 0")
        self.x2_span = (lo, hi)


def riccati_special_solution(prob, x2_grid):
    """The connecting solution zeta on the grid.

    Initialised at the left end of x2_span from the algebraic tail
    zeta = -(d0/b1)/x2 and integrated through the turning region as the
    nonautonomous scalar problem d zeta/d x2 = (d0 + b1 x2 zeta)/(a0 zeta).
    zeta stays positive along the whole connection; a zero crossing means
    the tail initialisation was applied too close in.
    """
    grid = np.asarray(x2_grid, dtype=float)
    lo, hi = prob.x2_span
    X = -lo
    if X < 10.0 * (prob.d0 / prob.b1) ** (1.0 / 3.0):
        raise PreconditionError(
            "left endpoint too close to the fold: need -x2_span[0] >= "
            "10 (d0/b1)^(1/3) for the tail initialisation")
    if grid.size and (grid.min() < lo or grid.max() > hi):
        raise PreconditionError("x2_grid must lie inside x2_span")

    a0, b1, d0 = prob.a0, prob.b1, prob.d0

    def rhs(t, z, w):
        return (d0 + b1 * t * z) / (a0 * z), 0.0

    ev = Event(lambda t, z, w: z, direction=-1.0, terminal=True)
    zeta0 = (d0 / b1) / X
    traj = integrate_field(rhs, (zeta0, 0.0), (lo, hi), tol=1e-12,
                           events=[ev], record="full")
    if traj.terminated == 0:
        raise ComputationError(
            f"special solution crossed zero at x2 = {traj.t_end:.3f}; "
            "tail initialisation too crude, retry with larger X")
    return np.array([traj(t)[0] for t in grid])


# ------------------------------------------------------------- Omega0 root

def _bessel_j(nu, x):
    """J_nu by power series; ample for the |x| <= 8 needed by the bracket."""
    half = 0.5 * x
    term = half ** nu / math.gamma(nu + 1.0)
    total = term
    m = 0
    while True:
        m += 1
        term *= -(half * half) / (m * (m + nu))
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)) or m > 200:
            return total


def _omega0_combination(z):
    w = 2.0 * z ** 1.5 / 3.0
    return _bessel_j(-1.0 / 3.0, w) + _bessel_j(1.0 / 3.0, w)


def omega0_constant(scan_step=0.01):
    """Smallest positive zero of J_{-1/3} + J_{1/3} at argument 2 z^{3/2}/3."""
    z_prev = scan_step
    g_prev = _omega0_combination(z_prev)
    z = z_prev
    while z < 5.0:
        z = min(z + scan_step, 5.0)
        g = _omega0_combination(z)
        if g_prev * g <= 0.0:
            a, b, ga = z_prev, z, g_prev
            for _ in range(200):
                mid = 0.5 * (a + b)
                gm = _omega0_combination(mid)
                if gm == 0.0:
                    return mid
                if (gm < 0) == (ga < 0):
                    a, ga = mid, gm
                else:
                    b = mid
                if b - a < 1e-16:
                    break
            return 0.5 * (a + b)
        z_prev, g_prev = z, g
    raise ComputationError(
        "no sign change of the Bessel combination in (0, 5]")


_OMEGA0 = None


def _omega0_cached():
    global _OMEGA0
    if _OMEGA0 is None:
        _OMEGA0 = omega0_constant()
    return _OMEGA0


# -------------------------------------------------------- tail diagnostics

def left_tail_decay(prob, window=(-40.0, -15.0), n=120):
    """Fitted decay exponent of zeta + (d0/b1)/x2 on the far left.

    The remainder should vanish like 1/x2^4; the fitted exponent is the
    log-log slope magnitude.
    """
    lo, hi = window
    grid = np.linspace(lo, hi, n)
    span = (min(prob.x2_span[0], lo), prob.x2_span[1])
    zeta = riccati_special_solution(
        RiccatiProblem(prob.a0, prob.b1, prob.d0, span), grid)
    resid = np.abs(zeta + (prob.d0 / prob.b1) / grid)
    good = resid > 0
    slope = np.polyfit(np.log(np.abs(grid[good])), np.log(resid[good]), 1)[0]
    return float(-slope)


def right_tail_constant(prob, window=(15.0, 40.0), n=200):
    """Constant in zeta ~ (b1/2a0) x2^2 + C - (2d0/b1)/x2 as x2 -> +inf.

    Extracted by least squares against {1, x2^{-3}} after removing the two
    known terms; the next correction is O(x2^{-3}), so including that basis
    function leaves C clean.
    """
    lo, hi = window
    if hi > prob.x2_span[1]:
        raise PreconditionError("fit window exceeds x2_span")
    grid = np.linspace(lo, hi, n)
    zeta = riccati_special_solution(prob, grid)
    resid = (zeta - (prob.b1 / (2.0 * prob.a0)) * grid ** 2
             + (2.0 * prob.d0 / prob.b1) / grid)
    A = np.column_stack([np.ones_like(grid), grid ** -3.0])
    coef, *_ = np.linalg.lstsq(A, resid, rcond=None)
    return float(coef[0])


def k2_exit_prediction(prob, delta):
    """Predicted exit height at the section x2 = delta^{-1/3}.

    Three explicit terms; the remainder the formula drops is O(delta), with
    an O(1) constant, so at moderate delta the discrepancy against direct
    integration is itself of size ~delta.
    """
    if delta <= 0:
        raise PreconditionError("delta must be positive")
    a0, b1, d0 = prob.a0, prob.b1, prob.d0
    return ((b1 / (2.0 * a0)) * delta ** (-2.0 / 3.0)
            + (2.0 * d0 ** 2 / (a0 * b1)) ** (1.0 / 3.0) * _omega0_cached()
            - (2.0 * d0 / b1) * delta ** (1.0 / 3.0))
