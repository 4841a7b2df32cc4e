"""Full-system integration, limit cycles, and cycle measurements.

The limit cycle is found as a fixed point of the Poincare return map seeded
from the singular cycle. Return-map derivatives of relaxation cycles contract
like exp(-K/eps) and underflow double precision long before eps reaches the
interesting range, so multipliers are carried in log space, computed by the
planar trace identity: ln(multiplier) = loop integral of div H dt. The
finite-difference route is kept for mildly contracting flows and is
cross-checked against the trace integral when usable.
"""

import math
import numpy as np
from dataclasses import dataclass, field
from typing import Optional

from .errors import (ComputationError, DomainError, EscapeError,
                     PreconditionError)
from .models import make_rhs, physical_time
from .rk import Event, Trajectory, integrate_field
from .singular import _lam


def integrate(model, z0, eps, t_span, tol=1e-9, events=(), record="full",
              max_step=math.inf):
    """Adaptive 5(4) integration of the full field z' = N f + eps G."""
    return integrate_field(make_rhs(model, eps), z0, t_span, tol=tol,
                           events=events, record=record, max_step=max_step)


def divergence(model, eps):
    """div H as a scalar map: trace of the full-field Jacobian.

    div(N f + eps G) = <grad f, N> + f tr(DN) + eps tr(DG).
    """
    n, f, g = model.n_field, model.f_field, model.g_field

    def div(x, y):
        J = n.jac(x, y)
        JG = g.jac(x, y, eps)
        return (_lam(model, x, y) + f(x, y) * (J[0][0] + J[1][1])
                + eps * (JG[0][0] + JG[1][1]))
    return div


@dataclass
class PoincareSection:
    base: np.ndarray
    direction: np.ndarray          # unit vector along the section segment
    half_width: float
    crossing_orientation: int      # +1 / -1: sign of <field, normal> counted

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        nd = math.hypot(*d)
        if nd == 0 or self.half_width <= 0:
            raise PreconditionError("section needs a direction and half_width > 0")
        self.direction = d / nd
        self.normal = np.array([-self.direction[1], self.direction[0]])

    def coord(self, z):
        """Arclength coordinate of z along the section."""
        return float((np.asarray(z) - self.base) @ self.direction)

    def offset(self, z):
        return float((np.asarray(z) - self.base) @ self.normal)

    def point(self, s):
        return self.base + s * self.direction


class ReturnDerivative(float):
    """Return-map derivative; .log carries ln(derivative) without underflow."""
    log = None

    def __new__(cls, value, log=None):
        obj = super().__new__(cls, value)
        obj.log = log if log is not None else (math.log(value) if value > 0
                                               else -math.inf)
        return obj


def _first_return(rhs, section, z0, tol, max_time, record="points"):
    """Integrate until the first on-segment section crossing (t > 0)."""
    nx, ny = section.normal
    bx, by = section.base
    ev = Event(lambda t, x, y: (x - bx) * nx + (y - by) * ny,
               direction=section.crossing_orientation, terminal=True)
    z = np.asarray(z0, dtype=float)
    pieces = []
    # a seed sitting on the section (the usual case for return-map iteration)
    # would retrigger the crossing event at t ~ 0; step past it event-free
    grace = 1e-3
    head = integrate_field(rhs, z, (0.0, grace), tol=tol, record=record)
    pieces.append((0.0, head))
    t_accum = head.t_end
    z = head.z_end
    for _ in range(64):
        traj = integrate_field(rhs, z, (0.0, max_time - t_accum), tol=tol,
                               events=[ev], record=record)
        pieces.append((t_accum, traj))
        if traj.terminated is None:
            raise EscapeError("no section return within the time budget",
                              trajectory=traj)
        t_accum += traj.t_end
        z = traj.z_end
        if abs(section.coord(z)) <= section.half_width and t_accum > 1e-9:
            return z, t_accum, pieces
    raise EscapeError("section crossings never landed on the segment",
                      trajectory=pieces[-1][1])


def poincare_return(model, eps, section, z0, tol=1e-11, max_time=1e6,
                    want_derivative=False):
    """First matching-orientation return to the section, plus map derivative.

    The derivative is attempted by central differences with step scaled to
    the section half-width; when the contraction is too strong for that to
    mean anything in double precision, the trace-integral value exp(loop
    div H dt) is used instead. Either way .log on the result carries the
    trustworthy log-derivative.
    """
    rhs = make_rhs(model, eps)
    hx, hy = rhs(0.0, *section.base)
    if abs(hx * section.normal[0] + hy * section.normal[1]) <= 1e-6:
        raise PreconditionError("section is not transverse to the flow at base")

    if not want_derivative:
        z1, t1, _ = _first_return(rhs, section, z0, tol, max_time)
        return z1, None

    z1, t1, pieces = _first_return(rhs, section, z0, tol, max_time,
                                   record="full")
    div = divergence(model, eps)
    L = 0.0
    for _, traj in pieces:
        L += traj.quadrature(lambda x, y: div(x, y))

    h = 1e-3 * section.half_width
    dvec = section.direction
    try:
        zp, _, _ = _first_return(rhs, section, np.asarray(z0) + h * dvec, tol,
                                 max_time)
        zm, _, _ = _first_return(rhs, section, np.asarray(z0) - h * dvec, tol,
                                 max_time)
        fd = (section.coord(zp) - section.coord(zm)) / (2 * h)
    except EscapeError:
        fd = None
    if fd is not None and fd > 0 and abs(math.log(fd) - L) < max(1.0, 0.3 * abs(L)):
        return z1, ReturnDerivative(fd, log=math.log(fd))
    val = math.exp(L) if L > -700 else 0.0
    return z1, ReturnDerivative(val, log=L)


@dataclass
class LimitCycle:
    eps: float
    samples: np.ndarray            # closed polyline (first point repeated)
    times: np.ndarray
    speeds: np.ndarray
    period_desing: float
    period_physical: float
    floquet_exponent: float
    amplitude: dict                # {'x': (min,max), 'y': (min,max)}
    strokes: Optional[int]
    fixed_point: np.ndarray
    return_residual: float
    log_multiplier: float
    section: PoincareSection
    attracting: bool = True
    extras: dict = field(default_factory=dict)


def section_from_singular(model, eps, singular, half_width=None):
    """Transverse section across the fast stroke at the cycle's mid-height."""
    arc = singular.layer_arc.states
    lo, hi = arc[:, 1].min(), arc[:, 1].max()
    mid = 0.5 * (lo + hi)
    k = int(np.argmin(np.abs(arc[:, 1] - mid)))
    base = arc[k]
    rhs = make_rhs(model, eps)
    v = np.asarray(rhs(0.0, base[0], base[1]), float)
    vn = math.hypot(*v)
    if vn < 1e-12:
        raise ComputationError("flow vanishes at the auto-placed section base")
    v /= vn
    poly = singular.polyline()
    extent = max(np.ptp(poly[:, 0]), np.ptp(poly[:, 1]))
    if half_width is None:
        half_width = 0.15 * extent
    d = np.array([-v[1], v[0]])
    sec = PoincareSection(base=base, direction=d, half_width=half_width,
                          crossing_orientation=1)
    hx, hy = rhs(0.0, base[0], base[1])
    if hx * sec.normal[0] + hy * sec.normal[1] < 0:
        sec.crossing_orientation = -1
    return sec


def section_by_burn_in(model, eps, window=(-12.0, 12.0, -3.0, 3.0)):
    """Park a trajectory on the attractor and raise a section at its endpoint.

    Used when no two-stroke singular cycle exists to seed from, or when the
    attractor has drifted away from the singular cycle. The start point is
    taken near a repelling equilibrium of the fast field if one exists, else
    on an attracting branch of the critical curve.
    """
    from .singular import find_N_singularities, trace_critical_curve

    z0 = None
    for s in find_N_singularities(model, window):
        if s.kind.startswith("unstable"):
            z0 = np.asarray(s.location) + np.array([0.11, 0.07])
            break
    if z0 is None:
        curve = trace_critical_curve(model, window, 96)
        for br in curve.branches:
            if br.stability == "attracting":
                z0 = br.points[len(br.points) // 2].copy()
                break
    if z0 is None:
        raise ComputationError(
            "no starting point for the attractor search; pass an explicit "
            "section and seed")

    rhs = make_rhs(model, eps)
    last_exc = None
    for T in (400.0, 1600.0, 6400.0):
        head = integrate_field(rhs, z0, (0.0, T), tol=1e-9, record="last")
        probe = integrate_field(rhs, head.z_end, (0.0, T), tol=1e-9,
                                record="points")
        extent = max(np.ptp(probe.states[:, 0]), np.ptp(probe.states[:, 1]))
        base = probe.z_end
        v = np.asarray(rhs(0.0, base[0], base[1]), float)
        vn = math.hypot(*v)
        if vn < 1e-12 or extent < 1e-9:
            last_exc = ComputationError("attractor probe settled on an "
                                        "equilibrium, not a cycle")
            continue
        v /= vn
        sec = PoincareSection(base=base, direction=np.array([-v[1], v[0]]),
                              half_width=0.25 * extent,
                              crossing_orientation=1)
        hx, hy = rhs(0.0, base[0], base[1])
        if hx * sec.normal[0] + hy * sec.normal[1] < 0:
            sec.crossing_orientation = -1
        try:
            _first_return(rhs, sec, base, 1e-9, 1e6)
        except EscapeError as e:
            last_exc = e
            continue
        return sec
    raise ComputationError(
        f"burn-in never produced a recurrent section: {last_exc}")


def find_limit_cycle(model, eps, section=None, singular=None, seed=None,
                     tol=1e-11, max_iter=60, measure_tol=None):
    """Locate the attracting relaxation cycle by return-map fixed point.

    Seeded from the singular cycle (built on demand); falls back to a burn-in
    search for the attractor when that cycle does not exist or its section
    misses the flow. Converged when two successive returns agree to 1e-10,
    or stagnate at the integrator noise floor below 1e-9.
    """
    auto_section = section is None
    if section is None:
        if singular is None:
            try:
                from .cycles import build_singular_cycle
                singular = build_singular_cycle(model)
            except ComputationError:
                singular = None
        if singular is not None:
            section = section_from_singular(model, eps, singular)
        else:
            section = section_by_burn_in(model, eps)
    if seed is None:
        seed = section.base
    rhs = make_rhs(model, eps)

    z = np.asarray(seed, dtype=float)
    residual = math.inf
    prev_res = math.inf
    stagnant = 0
    it = 0
    while it < max_iter:
        try:
            z1, t1, _ = _first_return(rhs, section, z, tol, 1e6)
        except EscapeError:
            if auto_section and singular is not None:
                # singular-cycle section missed the attractor; restart from
                # a burned-in one
                section = section_by_burn_in(model, eps)
                z = section.base
                singular = None
                it = 0
                residual = prev_res = math.inf
                stagnant = 0
                continue
            raise
        residual = float(np.max(np.abs(z1 - z)))
        z = z1
        it += 1
        if residual < 1e-10:
            break
        if residual < 1e-9:
            if residual > 0.5 * prev_res:
                stagnant += 1
                if stagnant >= 2:
                    break       # integrator noise floor reached
            else:
                stagnant = 0
        prev_res = residual
    else:
        raise ComputationError(
            f"return map did not converge after {max_iter} iterations "
            f"(last residual {residual:.2e}); try a smaller eps, or the cycle "
            "may be repelling (rebuild in reversed time)")

    mtol = measure_tol if measure_tol is not None else tol
    zstar = z
    z1, period, pieces = _first_return(rhs, section, zstar, mtol, 1e6,
                                       record="full")
    residual = max(residual, float(np.max(np.abs(z1 - zstar))))

    times = np.concatenate([p.times + off for off, p in pieces])
    states = np.vstack([p.states for _, p in pieces])
    if len(states) < 1200:
        # small smooth cycles take few adaptive steps; resample the dense
        # output so sample statistics (strokes, dwell) see a stable grid
        offs = [off for off, _ in pieces]
        times = np.linspace(0.0, period, 2000, endpoint=False)
        states = np.empty((len(times), 2))
        for k, t in enumerate(times):
            i = max(0, int(np.searchsorted(offs, t, side="right")) - 1)
            off, p = pieces[i]
            states[k] = p(min(max(t - off, 0.0), p.t_end))

    div = divergence(model, eps)
    L = sum(p.quadrature(lambda x, y: div(x, y)) for _, p in pieces)

    if model.time_factor is not None:
        tphys = float(sum(physical_time(model, p) for _, p in pieces))
    else:
        tphys = period
    floq = L / tphys

    speeds = np.array([math.hypot(*rhs(0.0, x, y)) for x, y in states])
    samples = np.vstack([states, states[:1]])
    amplitude = {"x": (float(states[:, 0].min()), float(states[:, 0].max())),
                 "y": (float(states[:, 1].min()), float(states[:, 1].max()))}

    cyc = LimitCycle(eps=eps, samples=samples, times=times, speeds=speeds,
                     period_desing=period, period_physical=tphys,
                     floquet_exponent=floq, amplitude=amplitude, strokes=None,
                     fixed_point=zstar, return_residual=residual,
                     log_multiplier=L, section=section,
                     attracting=bool(L < 0))
    try:
        cyc.strokes = stroke_count(cyc)
    except ComputationError:
        cyc.strokes = None      # no timescale separation at this parameter
    return cyc


def floquet_exponent(cycle, return_derivative):
    """Asymptotic orbital decay rate per unit original-clock time.

    ln(derivative) / period on the clock the stability statement lives on:
    the original one. (For models with no time rescaling the two periods
    coincide.) Accepts the log-space value carried by ReturnDerivative when
    the plain float has underflowed.
    """
    d = return_derivative
    logd = getattr(d, "log", None)
    if logd is None:
        if not d > 0:
            raise PreconditionError(
                "return derivative must be positive (orientation-preserving)")
        logd = math.log(d)
    elif d <= 0 and logd == -math.inf:
        raise PreconditionError(
            "return derivative must be positive (orientation-preserving)")
    T = cycle.period_physical if cycle.period_physical else cycle.period_desing
    return logd / T


def stroke_count(cycle):
    """Number of slow/fast phases per period.

    Samples are classified by speed against the geometric-mean threshold
    sqrt(s_min s_max); the count is the number of maximal blocks around the
    closed loop.
    """
    speeds = np.asarray(cycle.speeds, dtype=float)
    if len(speeds) < 1000:
        raise PreconditionError(
            f"stroke count needs >= 1000 samples, got {len(speeds)}")
    smin, smax = float(speeds.min()), float(speeds.max())
    if smin <= 0 or smax / smin < 10.0:
        raise ComputationError(
            f"no timescale separation: speed ratio {smax / max(smin, 1e-300):.3g} < 10")
    thr = math.sqrt(smin * smax)
    fast = speeds > thr
    changes = int(np.count_nonzero(fast[1:] != fast[:-1]))
    if fast[0] != fast[-1]:
        changes += 1
    return max(changes, 1)


def resample_closed(points, n):
    """Arclength-uniform resampling of a closed polyline."""
    p = np.asarray(points, dtype=float)
    if np.hypot(*(p[0] - p[-1])) > 1e-12:
        p = np.vstack([p, p[:1]])
    seg = np.hypot(*np.diff(p, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0:
        return np.repeat(p[:1], n, axis=0)
    si = np.linspace(0.0, total, n, endpoint=False)
    xi = np.interp(si, s, p[:, 0])
    yi = np.interp(si, s, p[:, 1])
    return np.column_stack([xi, yi])


def _dir_hausdorff(A, B):
    """max over points of A of distance to the polyline B (point-to-segment)."""
    P = B[:-1]
    Q = B[1:]
    d = Q - P
    dd = np.einsum("ij,ij->i", d, d)
    dd[dd == 0] = 1.0
    worst = 0.0
    for i0 in range(0, len(A), 512):
        a = A[i0:i0 + 512]
        w = a[:, None, :] - P[None, :, :]
        t = np.clip(np.einsum("kij,ij->ki", w, d) / dd, 0.0, 1.0)
        proj = P[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.min(np.linalg.norm(a[:, None, :] - proj, axis=2), axis=1)
        worst = max(worst, float(dist.max()))
    return worst


def hausdorff_distance(a, b):
    """Symmetric Hausdorff distance between two closed polylines."""
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    if len(A) == 0 or len(B) == 0:
        raise PreconditionError("polylines must be nonempty")
    if np.hypot(*(A[0] - A[-1])) > 1e-12:
        A = np.vstack([A, A[:1]])
    if np.hypot(*(B[0] - B[-1])) > 1e-12:
        B = np.vstack([B, B[:1]])
    return max(_dir_hausdorff(A, B), _dir_hausdorff(B, A))
