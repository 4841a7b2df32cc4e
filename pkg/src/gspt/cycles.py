"""Singular relaxation cycle assembly: layer heteroclinics + slow segments.

The cycle at eps = 0 is a closed concatenation of a fast fiber arc from the
contact point F to its reciprocal landing point L_F, and a slow drift along
the attracting branch from L_F back to F. The fast arc is found by shooting:
the layer field N f vanishes identically on S, so the heteroclinic is
computed on the fiber system z' = +/-N, which has the same orbits off S and
does not stall at the nilpotent contact equilibrium.
"""

import math
import warnings
import numpy as np
from dataclasses import dataclass, field

from .errors import (ComputationError, EscapeError, IntegrationTimeoutError,
                     PreconditionError, StalledAtSingularityError)
from .models import make_rhs
from .rk import Event, integrate_field
from .singular import (ContactPoint, classify_contact, contact_order,
                       desingularised_rhs, find_contact_points,
                       find_N_singularities, nontrivial_eigenvalue, _lam,
                       trace_critical_curve)


@dataclass
class ReducedSegment:
    points: np.ndarray        # (n, 2) samples along S
    times: np.ndarray         # desingularised-clock times
    time_desing: float
    time_reduced: float       # improper slow-clock transit integral


@dataclass
class SingularCycle:
    F: ContactPoint
    L_F: np.ndarray
    layer_arc: object         # Trajectory of the fast fiber F -> L_F
    reduced_arc: ReducedSegment
    assumptions_report: dict = field(default_factory=dict)

    def polyline(self):
        """Closed polyline F -> L_F -> F (fast arc then slow arc)."""
        return np.vstack([self.layer_arc.states, self.reduced_arc.points])


def _stall_events(model, window):
    sings = find_N_singularities(model, window)
    evs = []
    for s in sings:
        px, py = s.location
        evs.append(Event(lambda t, x, y, px=px, py=py:
                         math.hypot(x - px, y - py) - 1e-6,
                         direction=-1, terminal=True))
    return sings, evs


def layer_flow(model, z0, window=None, max_time=5000.0, tol=1e-11,
               f_atol=1e-11, record="full"):
    """Integrate the fast subsystem z' = N(z) f(z) from z0.

    The whole critical curve consists of layer equilibria, so trajectories
    reach f = 0 only asymptotically; the arrival event fires on entering the
    band |f| < f_atol (state located to interpolant accuracy there). Starting
    exactly on S returns immediately. Coming within 1e-6 of a zero of N
    raises a stall error; running out the clock raises a timeout carrying the
    partial trajectory.
    """
    x0, y0 = float(z0[0]), float(z0[1])
    nv = model.n_field(x0, y0)
    if math.hypot(nv[0], nv[1]) < 1e-8:
        raise PreconditionError(
            f"layer start ({x0:g},{y0:g}) is a zero of N: no fast dynamics")
    f = model.f_field.value
    if f(x0, y0) == 0.0:
        # layer equilibrium: the stop condition holds at time zero
        traj = integrate_field(lambda t, x, y: (0.0, 0.0), (x0, y0),
                               (0.0, 1e-6), tol=1e-9, record=record)
        traj.event_hits = {0: [(0.0, x0, y0)]}
        traj.terminated = 0
        return traj

    if window is None:
        span = 25.0
        window = (x0 - span, x0 + span, y0 - span, y0 + span)
    xmin, xmax, ymin, ymax = window
    sings, stall_evs = _stall_events(model, window)

    events = [Event(lambda t, x, y: abs(f(x, y)) - f_atol, direction=-1,
                    terminal=True),
              Event(lambda t, x, y: max(xmin - x, x - xmax, ymin - y, y - ymax),
                    direction=1, terminal=True)]
    events += stall_evs

    rhs = make_rhs(model, 0.0)
    traj = integrate_field(rhs, (x0, y0), (0.0, max_time), tol=tol,
                           events=events, record=record)
    if traj.terminated is not None and traj.terminated >= 2:
        p = sings[traj.terminated - 2].location
        raise StalledAtSingularityError(
            f"layer flow stalled at the N-singularity ({p[0]:g},{p[1]:g})")
    if traj.terminated is None:
        raise IntegrationTimeoutError(
            f"layer flow did not stop within t={max_time:g}", trajectory=traj)
    return traj


def _as_contact(model, F):
    if isinstance(F, ContactPoint):
        return F
    z = np.asarray(F, dtype=float)
    order = contact_order(model, z)
    cls = classify_contact(model, z, order)
    return ContactPoint(location=z, order=order, regular=cls["regular"],
                        jump_class=cls["jump_class"])


def reciprocal_point(model, F, max_time=500.0, tol=1e-12, full=False):
    """Landing point of the fast heteroclinic leaving the contact point F.

    The layer field is quadratically flat along the departing fiber (f
    vanishes to second order there), so integration runs on the fiber system
    z' = s N with s chosen so motion continues in the slow-drift direction
    through F. Events are armed only outside a 1e-3 ball around F to avoid
    re-detecting the tangency itself.
    """
    cp = _as_contact(model, F)
    if not (cp.order == 1 and cp.regular):
        raise PreconditionError("reciprocal point needs a regular order-1 contact")
    Fz = np.asarray(cp.location, dtype=float)
    w = desingularised_rhs(model, Fz)
    wn = math.hypot(*w)
    if wn < 1e-12:
        raise PreconditionError("slow drift vanishes at the contact point")
    that = w / wn
    if cp.jump_class == "jump_on":
        that = -that        # heteroclinic arrives: shoot backwards

    z0 = Fz + 1e-8 * that
    nv = np.asarray(model.n_field(z0[0], z0[1]), float)
    s = 1.0 if float(nv @ that) >= 0 else -1.0
    N = model.n_field.value

    def fiber(t, x, y):
        nx, ny = N(x, y)
        return s * nx, s * ny

    span = 60.0
    window = (Fz[0] - span, Fz[0] + span, Fz[1] - span, Fz[1] + span)
    sings, stall_evs = _stall_events(model, window)

    # phase 1: leave the exclusion ball around F
    ball = Event(lambda t, x, y: math.hypot(x - Fz[0], y - Fz[1]) - 1e-3,
                 direction=1, terminal=True)
    t1 = integrate_field(fiber, z0, (0.0, max_time), tol=tol,
                         events=[ball] + stall_evs, record="points")
    if t1.terminated is None:
        raise EscapeError("fiber never left the contact neighbourhood",
                          trajectory=t1)
    if t1.terminated >= 1:
        p = sings[t1.terminated - 1].location
        raise StalledAtSingularityError(
            f"fiber stalled at the N-singularity ({p[0]:g},{p[1]:g})")

    # phase 2: continue to the first return to S
    f = model.f_field.value
    hit_S = Event(lambda t, x, y: f(x, y), direction=0, terminal=True)
    t2 = integrate_field(fiber, t1.z_end, (0.0, max_time), tol=tol,
                         events=[hit_S] + stall_evs, record="full")
    if t2.terminated is None:
        raise EscapeError(
            "no reciprocal point found: the fast fiber from the contact "
            "point did not return to the critical curve", trajectory=t2)
    if t2.terminated >= 1:
        p = sings[t2.terminated - 1].location
        raise StalledAtSingularityError(
            f"fiber stalled at the N-singularity ({p[0]:g},{p[1]:g})")

    L = t2.z_end
    lamL = _lam(model, L[0], L[1])
    attracting = lamL < -1e-6
    if cp.jump_class == "jump_off" and not attracting:
        warnings.warn(f"reciprocal landing ({L[0]:.6g},{L[1]:.6g}) is not on "
                      f"an attracting branch (lambda={lamL:.3e})")
    if full:
        return L, {"phase1": t1, "trajectory": t2, "lambda": lamL,
                   "attracting": attracting, "sign": s, "direction": that}
    return L


def reduced_segment(model, z_from, z_to, tol=1e-11, max_time=1e4):
    """Slow drift along S from z_from to z_to on the desingularised clock.

    Also reports the transit time of the unrescaled slow flow as the
    improper integral of |lambda| along the segment (finite for a regular
    approach to a contact point, divergent past a slow equilibrium).
    """
    a = np.asarray(z_from, dtype=float)
    b = np.asarray(z_to.location if isinstance(z_to, ContactPoint) else z_to,
                   dtype=float)
    if np.hypot(*(a - b)) < 1e-12:
        return ReducedSegment(points=a.reshape(1, 2), times=np.zeros(1),
                              time_desing=0.0, time_reduced=0.0)
    if abs(model.f_field(a[0], a[1])) > 1e-7 or abs(model.f_field(b[0], b[1])) > 1e-7:
        raise PreconditionError("segment endpoints must lie on the critical curve")
    w0 = desingularised_rhs(model, a)
    if float(w0 @ (b - a)) <= 0:
        raise PreconditionError(
            "slow flow is directed away from the target along this segment")

    wb = desingularised_rhs(model, b)
    wb = wb / math.hypot(*wb)

    def rhs(t, x, y):
        # desingularised field evaluated off-spec tolerance is fine: it is
        # tangent to every level set of f, so the arc stays on S
        nv = model.n_field(x, y)
        gv = model.g_field(x, y, 0.0)
        grad = model.f_field.grad(x, y)
        det = nv[0] * gv[1] - nv[1] * gv[0]
        return det * grad[1], -det * grad[0]

    arrive = Event(lambda t, x, y: (x - b[0]) * wb[0] + (y - b[1]) * wb[1],
                   direction=1, terminal=True)
    traj = integrate_field(rhs, a, (0.0, max_time), tol=tol, events=[arrive],
                           record="full")
    if traj.terminated is None:
        raise IntegrationTimeoutError(
            "slow segment did not reach the target (flow may vanish en route)",
            trajectory=traj)
    lam_abs = lambda x, y: abs(_lam(model, x, y))
    t_red = traj.quadrature(lam_abs)
    return ReducedSegment(points=traj.states, times=traj.times,
                          time_desing=traj.t_end, time_reduced=t_red)


def _reversed_model(model):
    from .models import ModelSpec, PlaneField, EpsPlaneField
    n, g = model.n_field, model.g_field
    nrev = PlaneField(lambda x, y: tuple(-c for c in n.value(x, y)),
                      jacobian=lambda x, y: -np.asarray(n.jac(x, y), float))
    grev = EpsPlaneField(lambda x, y, e: tuple(-c for c in g.value(x, y, e)),
                         jacobian=lambda x, y, e: -np.asarray(g.jac(x, y, e), float))
    return ModelSpec(model.name + "_reversed", nrev, model.f_field, grev,
                     dict(model.params), time_factor=model.time_factor)


def build_singular_cycle(model, window=(-12.0, 12.0, -3.0, 3.0), resolution=96):
    """Assemble the closed eps = 0 relaxation cycle, checking its hypotheses.

    Requires exactly one regular order-1 jump-off contact point in the window
    (report flag single_regular_jump_off); a model whose only qualifying
    point is jump-on is rebuilt in reversed time and tagged repelling.
    """
    report = {"single_regular_jump_off": False, "reciprocal_found": False,
              "closed": False, "attracting_cycle": True, "n_contact_points": 0}
    curve = trace_critical_curve(model, window, resolution)
    if not curve.branches:
        err = ComputationError("no critical curve in the window: "
                               "singular-cycle hypotheses fail")
        err.assumptions_report = report
        raise err
    contacts = find_contact_points(model, curve)
    report["n_contact_points"] = len(contacts)
    offs = [c for c in contacts if c.regular and c.order == 1
            and c.jump_class == "jump_off"]
    ons = [c for c in contacts if c.regular and c.order == 1
           and c.jump_class == "jump_on"]

    if len(offs) == 0 and len(ons) == 1:
        rev = _reversed_model(model)
        cyc = build_singular_cycle(rev, window=window, resolution=resolution)
        cyc.assumptions_report["attracting_cycle"] = False
        return cyc

    if len(offs) != 1:
        err = ComputationError(
            f"need exactly one regular order-1 jump-off contact point, found "
            f"{len(offs)} among {len(contacts)} contact point(s): no "
            "two-stroke singular cycle")
        err.assumptions_report = report
        raise err
    report["single_regular_jump_off"] = True
    F = offs[0]

    try:
        L, info = reciprocal_point(model, F, full=True)
    except (EscapeError, StalledAtSingularityError) as e:
        report["reciprocal_found"] = False
        err = ComputationError(f"reciprocal-point search failed: {e}")
        err.assumptions_report = report
        raise err from e
    report["reciprocal_found"] = True
    report["landing_attracting"] = info["attracting"]

    # merge the exclusion-ball leg with the main fiber arc so the stored
    # layer arc runs all the way from (next to) F to L_F
    t1, t2 = info["phase1"], info["trajectory"]
    from .rk import Trajectory
    layer = Trajectory(np.concatenate([t1.times, t2.times[1:] + t1.t_end]),
                       np.vstack([t1.states, t2.states[1:]]),
                       n_steps=t1.n_steps + t2.n_steps)
    reduced = reduced_segment(model, L, F.location)
    gap_start = np.hypot(*(layer.states[0] - F.location))
    gap_close = np.hypot(*(reduced.points[-1] - F.location))
    report["closed"] = bool(gap_start < 1e-6 and gap_close < 1e-6)

    return SingularCycle(F=F, L_F=np.asarray(L), layer_arc=layer,
                         reduced_arc=reduced, assumptions_report=report)


def winding_number(points, center):
    """Net turns of a sampled arc around a point."""
    d = np.asarray(points, float) - np.asarray(center, float)
    ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    return (ang[-1] - ang[0]) / (2 * math.pi)
