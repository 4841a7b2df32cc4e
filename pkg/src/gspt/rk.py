"""Explicit Dormand-Prince 5(4) integrator for planar fields.

Scalar hot loop on (x, y) floats: at the stiffness-limited step counts of the
slow segments (~1e5 accepted steps per period at eps=1e-3) per-step overhead
dominates total runtime, so states are never boxed into arrays inside the loop.
Dense output is the standard quartic interpolant of the pair; events are
located on it by bracketed root-finding.
"""

import math
import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, PreconditionError, StiffnessError

# Butcher tableau, Dormand & Prince 1980
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# embedded 4th-order error weights (b - bhat)
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                          -17253 / 339200, 22 / 525, -1 / 40)
C2, C3, C4, C5, C6 = 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0

# quartic dense-output matrix (columns: theta^1..theta^4 contributions)
P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_GAUSS3_NODES = (0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10)
_GAUSS3_WEIGHTS = (5 / 18, 8 / 18, 5 / 18)


class Event:
    """Scalar event g(t, x, y) = 0.

    direction: +1 fires on -..+ crossings, -1 on +..-, 0 on any sign change.
    terminal stops the integration at the located root.
    """

    def __init__(self, g, direction=0.0, terminal=False):
        self.g = g
        self.direction = direction
        self.terminal = terminal


class Trajectory:
    """Integration result: accepted samples plus optional dense interpolant.

    times are in the integration clock (desingularised t-bar for the zoo
    fields unless a caller says otherwise).
    """

    def __init__(self, times, states, dense=None, event_hits=None, terminated=None,
                 n_steps=0):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float).reshape(-1, 2)
        self.dense = dense  # (t0s, hs, y0s[n,2], D[n,2,4]) or None
        self.event_hits = event_hits if event_hits is not None else {}
        self.terminated = terminated  # index of the terminal event, or None
        self.n_steps = n_steps

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def z_end(self):
        return self.states[-1].copy()

    def __call__(self, t):
        """Evaluate the dense interpolant (scalar t or array)."""
        if self.dense is None:
            raise PreconditionError("trajectory recorded without dense output")
        t0s, hs, y0s, D = self.dense
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(t0s, t_arr, side="right") - 1, 0, len(hs) - 1)
        th = (t_arr - t0s[idx]) / hs[idx]
        out = np.empty((t_arr.size, 2))
        for j in range(2):
            d = D[idx, j, :]
            out[:, j] = y0s[idx, j] + hs[idx] * th * (
                d[:, 0] + th * (d[:, 1] + th * (d[:, 2] + th * d[:, 3])))
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out

    def quadrature(self, func, t_lo=None, t_hi=None):
        """Integrate func(x, y) along the dense interpolant (per-step 3-pt Gauss)."""
        if self.dense is None:
            raise PreconditionError("trajectory recorded without dense output")
        t0s, hs, y0s, D = self.dense
        t_lo = self.times[0] if t_lo is None else t_lo
        t_hi = self.times[-1] if t_hi is None else t_hi
        total = 0.0
        for i in range(len(hs)):
            a = max(t0s[i], t_lo)
            b = min(t0s[i] + hs[i], t_hi)
            if b <= a:
                continue
            acc = 0.0
            for node, w in zip(_GAUSS3_NODES, _GAUSS3_WEIGHTS):
                tt = a + (b - a) * node
                th = (tt - t0s[i]) / hs[i]
                dx = D[i, 0]
                dy = D[i, 1]
                xx = y0s[i, 0] + hs[i] * th * (dx[0] + th * (dx[1] + th * (dx[2] + th * dx[3])))
                yy = y0s[i, 1] + hs[i] * th * (dy[0] + th * (dy[1] + th * (dy[2] + th * dy[3])))
                acc += w * func(xx, yy)
            total += acc * (b - a)
        return total


def _initial_step(rhs, t0, x, y, fx, fy, tol, t_len):
    scale_x = tol + tol * abs(x)
    scale_y = tol + tol * abs(y)
    d0 = math.sqrt(((x / scale_x) ** 2 + (y / scale_y) ** 2) / 2)
    d1 = math.sqrt(((fx / scale_x) ** 2 + (fy / scale_y) ** 2) / 2)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_len)
    fx1, fy1 = rhs(t0 + h0, x + h0 * fx, y + h0 * fy)
    d2 = math.sqrt((((fx1 - fx) / scale_x) ** 2 + ((fy1 - fy) / scale_y) ** 2) / 2) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_len)


def integrate_field(rhs, z0, t_span, tol=1e-9, events=(), max_step=math.inf,
                    record="full"):
    """Adaptive DP 5(4) integration of z' = rhs(t, x, y).

    record: 'full' stores dense output, 'points' accepted samples only,
    'last' just endpoints (events still refined on the current step).
    Returns a Trajectory; .terminated holds the terminal event index if one
    fired before t_span ran out.
    """
    if not (1e-13 <= tol <= 1e-5):
        raise PreconditionError(f"tol {tol:g} outside [1e-13, 1e-5]")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (t1 > t0):
        raise PreconditionError("t_span must satisfy t1 > t0")
    x, y = float(z0[0]), float(z0[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise DomainError("non-finite initial state")

    need_dense = record == "full" or len(events) > 0
    store_dense = record == "full"
    store_points = record in ("full", "points")

    times = [t0]
    states = [(x, y)]
    d_t0, d_h, d_y0, d_D = [], [], [], []
    event_hits = {i: [] for i in range(len(events))}
    terminated = None

    t = t0
    fx, fy = rhs(t, x, y)
    if not (math.isfinite(fx) and math.isfinite(fy)):
        raise DomainError("non-finite field at initial state")
    g_prev = [ev.g(t, x, y) for ev in events]

    h = min(_initial_step(rhs, t, x, y, fx, fy, tol, t1 - t0), max_step)
    err_prev = 1.0
    n_steps = 0
    tiny = 16 * np.finfo(float).eps

    while t < t1:
        h = min(h, t1 - t, max_step)
        if h < tiny * max(1.0, abs(t)):
            raise StiffnessError(
                f"step size underflow at t={t:.6g} (tol={tol:g}); "
                "increase tol or shorten t_span")

        k1x, k1y = fx, fy
        k2x, k2y = rhs(t + C2 * h, x + h * (A21 * k1x), y + h * (A21 * k1y))
        k3x, k3y = rhs(t + C3 * h, x + h * (A31 * k1x + A32 * k2x),
                       y + h * (A31 * k1y + A32 * k2y))
        k4x, k4y = rhs(t + C4 * h, x + h * (A41 * k1x + A42 * k2x + A43 * k3x),
                       y + h * (A41 * k1y + A42 * k2y + A43 * k3y))
        k5x, k5y = rhs(t + C5 * h,
                       x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x),
                       y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y))
        k6x, k6y = rhs(t + h,
                       x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x),
                       y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y))
        xn = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
        yn = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
        k7x, k7y = rhs(t + h, xn, yn)  # FSAL

        if not (math.isfinite(xn) and math.isfinite(yn)):
            raise DomainError(f"non-finite state at t={t:.6g}")

        ex = h * (E1 * k1x + E3 * k3x + E4 * k4x + E5 * k5x + E6 * k6x + E7 * k7x)
        ey = h * (E1 * k1y + E3 * k3y + E4 * k4y + E5 * k5y + E6 * k6y + E7 * k7y)
        sx = tol + tol * max(abs(x), abs(xn))
        sy = tol + tol * max(abs(y), abs(yn))
        err = math.sqrt(((ex / sx) ** 2 + (ey / sy) ** 2) / 2)

        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue

        n_steps += 1
        # PI controller (Gustafsson)
        fac = 0.9 * err ** -0.14 * err_prev ** 0.08 if err > 1e-12 else 5.0
        err_prev = max(err, 1e-12)

        if need_dense:
            Dxc = []
            Dyc = []
            for j in range(4):
                Dxc.append(k1x * P[0][j] + k3x * P[2][j] + k4x * P[3][j]
                           + k5x * P[4][j] + k6x * P[5][j] + k7x * P[6][j])
                Dyc.append(k1y * P[0][j] + k3y * P[2][j] + k4y * P[3][j]
                           + k5y * P[4][j] + k6y * P[5][j] + k7y * P[6][j])

            if store_dense:
                d_t0.append(t)
                d_h.append(h)
                d_y0.append((x, y))
                d_D.append((Dxc, Dyc))

        # event handling on this step
        stop_theta = None
        if events:
            def interp(theta):
                xi = x + h * theta * (Dxc[0] + theta * (Dxc[1] + theta * (Dxc[2] + theta * Dxc[3])))
                yi = y + h * theta * (Dyc[0] + theta * (Dyc[1] + theta * (Dyc[2] + theta * Dyc[3])))
                return xi, yi

            for i, ev in enumerate(events):
                g_new = ev.g(t + h, xn, yn)
                g_old = g_prev[i]
                crossed = (g_old < 0.0 <= g_new and ev.direction >= 0) or \
                          (g_old > 0.0 >= g_new and ev.direction <= 0)
                if crossed and g_old != g_new:
                    if g_new == 0.0:
                        theta_root = 1.0
                    else:
                        gfun = lambda th: ev.g(t + th * h, *interp(th))
                        try:
                            theta_root = brentq(gfun, 0.0, 1.0, xtol=1e-15, rtol=8.9e-16)
                        except ValueError:
                            theta_root = 1.0  # interpolant wiggle; take endpoint
                    xe, ye = interp(theta_root)
                    event_hits[i].append((t + theta_root * h, xe, ye))
                    if ev.terminal and (stop_theta is None or theta_root < stop_theta):
                        stop_theta = theta_root
                        terminated = i
                g_prev[i] = g_new

        if stop_theta is not None:
            # dense segment keeps its full h: coefficients are normalized to it
            te = t + stop_theta * h
            xn, yn = interp(stop_theta)
            if store_points:
                times.append(te)
                states.append((xn, yn))
            t = te
            x, y = xn, yn
            break

        t += h
        x, y = xn, yn
        fx, fy = k7x, k7y
        if store_points:
            times.append(t)
            states.append((x, y))

        h = min(h * min(5.0, max(0.2, fac)), max_step)

    if not store_points:
        times = [t0, t]
        states = [states[0], (x, y)]

    dense = None
    if store_dense and d_h:
        dense = (np.asarray(d_t0), np.asarray(d_h), np.asarray(d_y0),
                 np.asarray(d_D))
    return Trajectory(times, states, dense=dense, event_hits=event_hits,
                      terminated=terminated, n_steps=n_steps)
