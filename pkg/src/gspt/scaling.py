"""Epsilon-ladder scaling studies, stick-slip regime sweeps, stroke diagrams.

The fold-exit law is measured on a vertical section just past the jump-off
point: the layer arc gives the eps = 0 exit height, the full slow flow the
perturbed one, and |y_s - y_l| should shrink like eps^(2/3). Ladder and grid
cells are independent jobs run through a small work pool whose results are
assembled by index, so reports are deterministic regardless of scheduling.
"""

import math
import numpy as np
from dataclasses import dataclass, field
from typing import Optional

from .errors import ComputationError, EscapeError, PreconditionError
from .models import builtin_model, make_rhs
from .rk import Event, integrate_field
from .singular import (find_contact_points, trace_critical_curve,
                       desingularised_rhs, _solve_on_curve)
from .cycles import build_singular_cycle
from .simulate import (find_limit_cycle, hausdorff_distance, resample_closed)


def run_jobs(jobs):
    """Execute callables as an ordered pool; one (result, error) per job.

    Single-process sequential execution: cells are independent, and with the
    assembly keyed by index the output is bitwise reproducible. A threaded
    pool could be dropped in here without touching any caller.
    """
    out = []
    for job in jobs:
        try:
            out.append((job(), None))
        except Exception as e:          # per-cell failures become report notes
            out.append((None, f"{type(e).__name__}: {e}"))
    return out


# ------------------------------------------------------------- fold section

_DEFAULT_WINDOW = (-12.0, 12.0, -3.0, 3.0)


def _jump_off_point(model, window=_DEFAULT_WINDOW):
    curve = trace_critical_curve(model, window, 96)
    cps = [c for c in find_contact_points(model, curve)
           if c.order == 1 and c.regular and c.jump_class == "jump_off"]
    if len(cps) != 1:
        raise ComputationError(
            f"model '{model.name}' has {len(cps)} regular order-1 jump-off "
            "points in the window; the fold-exit section needs exactly one")
    return np.asarray(cps[0].location, dtype=float)


@dataclass
class SectionOffsets:
    eps: float
    rho: float
    y_layer: float
    y_slow: float
    offset: float

    def __iter__(self):
        # unpacks as (y_s, y_l)
        return iter((self.y_slow, self.y_layer))


def section_offsets(model, eps, rho=0.1, tol=1e-11, seed_shift=0.0,
                    fold=None):
    """Exit heights on the section {x = x_F + rho} past the jump-off point.

    y_layer comes from the layer arc leaving F (integrated in the fiber
    parameterisation, which traces the same orbit without the degenerate
    clock); y_slow from the full slow flow started on the attracting branch
    half a unit upstream, displaced by eps along the fiber direction. Any
    such seed lands on the slow manifold exponentially fast, which is what
    makes y_slow well defined; seed_shift exposes the seeding point so that
    insensitivity can be demonstrated.
    """
    if rho <= 0:
        raise PreconditionError("rho must be positive")
    F = np.asarray(fold, dtype=float) if fold is not None \
        else _jump_off_point(model)
    w = np.asarray(desingularised_rhs(model, F), dtype=float)
    wn = math.hypot(*w)
    if wn < 1e-12 or abs(w[0]) < 1e-9 * wn:
        raise PreconditionError(
            "slow drift at the jump-off point has no horizontal component; "
            "a vertical section there is not transverse")
    side = 1.0 if w[0] > 0 else -1.0
    x_sec = F[0] + side * rho
    ev = Event(lambda t, x, y: x - x_sec, direction=side, terminal=True)

    # layer exit: fiber orbit out of F
    that = w / wn
    n_field = model.n_field
    z0 = F + 1e-8 * that
    nv = np.asarray(n_field(z0[0], z0[1]), dtype=float)
    s = 1.0 if float(nv @ that) >= 0 else -1.0

    def fiber(t, x, y):
        nx, ny = n_field(x, y)
        return s * nx, s * ny

    traj = integrate_field(fiber, z0, (0.0, 1e4), tol=tol, events=[ev],
                           record="last")
    if traj.terminated is None:
        raise EscapeError(
            f"layer arc from F never crossed the section x = {x_sec:g}",
            trajectory=traj)
    hit = traj.z_end
    nx_hit, _ = n_field(hit[0], hit[1])
    if abs(nx_hit) < 1e-8:
        raise PreconditionError(
            "layer arc is not transverse to the section at rho")
    y_layer = float(hit[1])

    # slow exit: full field from the upstream attracting branch
    xb = F[0] - side * (0.5 + seed_shift)
    yb = _solve_on_curve(model, "x", xb, F[1])
    nb = np.asarray(n_field(xb, yb), dtype=float)
    nbn = math.hypot(*nb)
    if nbn < 1e-12:
        raise PreconditionError("fiber direction undefined at the slow seed")
    zs = np.array([xb, yb]) + eps * nb / nbn
    rhs = make_rhs(model, eps)
    # an orbit that misses the section arcs over and falls back behind the
    # seed; catching that is much cheaper than waiting out the time budget
    x_back = xb - side * 1.0
    ev_back = Event(lambda t, x, y: x - x_back, direction=-side,
                    terminal=True)
    traj = integrate_field(rhs, zs, (0.0, 10.0 + 40.0 / eps), tol=tol,
                           events=[ev, ev_back], record="last")
    if traj.terminated != 0:
        raise EscapeError(
            f"slow trajectory never crossed the section x = {x_sec:g}",
            trajectory=traj)
    hit = traj.z_end
    hx, hy = rhs(0.0, hit[0], hit[1])
    if abs(hx) < 1e-10 * math.hypot(hx, hy):
        raise PreconditionError(
            "slow trajectory is not transverse to the section at rho")
    y_slow = float(hit[1])
    return SectionOffsets(eps=float(eps), rho=float(rho), y_layer=y_layer,
                          y_slow=y_slow, offset=abs(y_slow - y_layer))


# --------------------------------------------------------- epsilon ladders

def _loglog_slope(xs, ys):
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    good = (xs > 0) & (ys > 0)
    if np.count_nonzero(good) < 2:
        return None
    return float(np.polyfit(np.log(xs[good]), np.log(ys[good]), 1)[0])


def _loglog_fit(xs, ys):
    """Least-squares log-log slope with a 95% confidence half-width."""
    from scipy import stats

    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    good = np.isfinite(xs) & np.isfinite(ys) & (xs > 0) & (ys > 0)
    n = int(np.count_nonzero(good))
    if n < 2:
        return None
    lx, ly = np.log(xs[good]), np.log(ys[good])
    slope, intercept = np.polyfit(lx, ly, 1)
    if n == 2:
        return (float(slope), math.inf)
    resid = ly - (slope * lx + intercept)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    se = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    half = float(stats.t.ppf(0.975, n - 2)) * se
    return (float(slope), half)


def slow_segment_distance(model, cycle):
    """Median normal distance of the cycle's slow samples to the zero set.

    Slow samples are those below the geometric-mean speed threshold; the
    distance |f| / |grad f| is first order in the offset from the curve.
    """
    speeds = np.asarray(cycle.speeds, float)
    smin, smax = speeds.min(), speeds.max()
    if smin <= 0 or smax / smin < 10.0:
        raise ComputationError("no timescale separation; slow samples "
                               "cannot be isolated")
    slow = speeds < math.sqrt(smin * smax)
    f = model.f_field
    vals = []
    for x, y in cycle.samples[:-1][slow]:
        gx, gy = f.grad(x, y)
        gn = math.hypot(gx, gy)
        if gn > 1e-12:
            vals.append(abs(f(x, y)) / gn)
    if not vals:
        raise ComputationError("no slow samples with a usable gradient")
    return float(np.median(vals))


@dataclass
class ScalingReport:
    model: str
    eps_values: np.ndarray          # ascending
    offsets: np.ndarray             # |y_s - y_l| per eps (nan where failed)
    floquet: np.ndarray
    hausdorff: np.ndarray
    slow_dist: np.ndarray
    fits: dict                      # name -> (slope, 95% half-width)
    empirical_K: Optional[float]    # median of -floquet * eps
    notes: dict                     # eps -> failure message
    extras: dict = field(default_factory=dict)

    @property
    def hausdorff_decreasing(self):
        h = self.hausdorff[np.isfinite(self.hausdorff)]
        if len(h) < 2:
            return None
        return bool(np.all(np.diff(h) > 0))    # H grows with eps


def epsilon_scaling_report(model, eps_values, rho=0.1, tol=1e-11,
                           cycles=True, singular=None):
    """Scaling ladder: fold-exit offsets, Floquet law, Fenichel distance.

    Expected fits: offset slope 2/3 in eps, -floquet slope 1 in 1/eps, slow
    distance slope 1 in eps; Hausdorff(cycle, singular cycle) must shrink
    with eps. Any rung that fails leaves a note and a nan entry rather than
    aborting the ladder. cycles=False restricts the report to the offset
    column (the cycle columns cost ~1/eps integration steps per rung).
    """
    eps_values = np.sort(np.asarray(eps_values, dtype=float))
    if len(eps_values) < 5:
        raise PreconditionError("ladder needs at least 5 epsilon values")
    if math.log10(eps_values[-1] / eps_values[0]) < 1.5 - 1e-12:
        raise PreconditionError("ladder must span at least 1.5 decades")

    fold = _jump_off_point(model)
    gamma = None
    if cycles:
        if singular is None:
            singular = build_singular_cycle(model)
        gamma = resample_closed(singular.polyline(), 4000)

    def offsets_job(eps):
        return lambda: section_offsets(model, eps, rho=rho, tol=tol,
                                       fold=fold)

    def cycle_job(eps):
        def run():
            cyc = find_limit_cycle(model, eps, singular=singular, tol=tol)
            h = hausdorff_distance(resample_closed(cyc.samples, 4000), gamma)
            return {"floquet": cyc.floquet_exponent,
                    "period_desing": cyc.period_desing,
                    "period_physical": cyc.period_physical,
                    "hausdorff": h,
                    "slow_dist": slow_segment_distance(model, cyc),
                    "strokes": cyc.strokes}
        return run

    jobs = [offsets_job(e) for e in eps_values]
    if cycles:
        jobs += [cycle_job(e) for e in eps_values]
    results = run_jobs(jobs)

    n = len(eps_values)
    offsets = np.full(n, np.nan)
    floq = np.full(n, np.nan)
    haus = np.full(n, np.nan)
    slow = np.full(n, np.nan)
    notes = {}
    extras = {"y_layer": np.full(n, np.nan), "y_slow": np.full(n, np.nan),
              "period_desing": np.full(n, np.nan),
              "period_physical": np.full(n, np.nan),
              "strokes": [None] * n}

    def note(eps, msg):
        key = float(eps)
        notes[key] = (notes[key] + "; " + msg) if key in notes else msg

    for i, eps in enumerate(eps_values):
        res, err = results[i]
        if err is None:
            offsets[i] = res.offset
            extras["y_layer"][i] = res.y_layer
            extras["y_slow"][i] = res.y_slow
        else:
            note(eps, err)
        if cycles:
            res, err = results[n + i]
            if err is None:
                floq[i] = res["floquet"]
                haus[i] = res["hausdorff"]
                slow[i] = res["slow_dist"]
                extras["period_desing"][i] = res["period_desing"]
                extras["period_physical"][i] = res["period_physical"]
                extras["strokes"][i] = res["strokes"]
            else:
                note(eps, err)

    fits = {}
    fit = _loglog_fit(eps_values, offsets)
    if fit:
        fits["offset"] = fit
    emp_K = None
    if cycles:
        fit = _loglog_fit(1.0 / eps_values, -floq)
        if fit:
            fits["floquet"] = fit
        fit = _loglog_fit(eps_values, slow)
        if fit:
            fits["slow_dist"] = fit
        good = np.isfinite(floq)
        if np.any(good):
            emp_K = float(np.median(-floq[good] * eps_values[good]))

    return ScalingReport(model=model.name, eps_values=eps_values,
                         offsets=offsets, floquet=floq, hausdorff=haus,
                         slow_dist=slow, fits=fits, empirical_K=emp_K,
                         notes=notes, extras=extras)


# ----------------------------------------------------------- regime sweeps

@dataclass
class RegimeMap:
    kind: str                       # "regimes" or "strokes"
    axes: dict                      # axis name -> values
    labels: np.ndarray              # object array, 1-d or 2-d
    details: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    v_m_analytic: Optional[float] = None
    v_m_empirical: Optional[float] = None
    v_ss_bracket: Optional[tuple] = None
    thomsen_comparison: Optional[float] = None


def _dwell_fraction(times, states, band):
    """Fraction of the time span spent with |y| inside the band."""
    t = np.asarray(times, float)
    y = np.asarray(states, float)[:, 1]
    if len(t) < 2:
        return 0.0
    dt = np.diff(t)
    inside = (np.abs(y[:-1]) <= band) & (np.abs(y[1:]) <= band)
    total = t[-1] - t[0]
    return float(dt[inside].sum() / total) if total > 0 else 0.0


def stickslip_regime_sweep(v0_values, delta=1.0, eps=1e-3, mu_s=1.0,
                           a1=0.75, a3=0.25, amplitude_floor=0.05,
                           dwell_band_factor=5.0, dwell_threshold=0.10):
    """Classify the friction oscillator across belt speeds.

    Per v0: steady_sliding when the equilibrium is stable (trace test
    -v0 mu'(v0) < 0, confirmed by simulation); otherwise the attractor is a
    cycle, labelled stick_slip when its slow segment dwells in the
    |y| <= 5 eps band for at least 10% of the period, pure_slip otherwise.
    v_m is reported both analytically and as the oscillation/steady grid
    boundary; v_ss only as a bracket, since the stick-slip to pure-slip
    transition is exponentially sharp in the parameter.
    """
    v0_values = np.sort(np.asarray(v0_values, dtype=float))
    if len(v0_values) < 2 or v0_values[0] <= 0:
        raise PreconditionError("need an ascending grid of positive v0")
    v_m = math.sqrt(a1 / (3.0 * a3))

    def classify(v0):
        model = builtin_model("transition", dict(delta=delta, v0=v0,
                                                 mu_s=mu_s, a1=a1, a3=a3))
        p0 = np.array([mu_s - a1 * v0 + a3 * v0 ** 3, v0])
        trace = v0 * (a1 - 3.0 * a3 * v0 ** 2)
        rhs = make_rhs(model, eps)
        if trace < 0:
            T = 2000.0
            traj = integrate_field(rhs, p0 + np.array([0.011, 0.017]),
                                   (0.0, T), tol=1e-9, record="last")
            dist = float(np.max(np.abs(traj.z_end - p0)))
            if dist > 1e-3 * (1.0 + float(np.max(np.abs(p0)))):
                raise ComputationError(
                    f"trace test says steady sliding at v0={v0:g} but the "
                    f"simulated orbit stayed {dist:.2e} away from p0")
            return {"label": "steady_sliding", "trace": trace,
                    "amplitude": 0.0, "dwell": 0.0, "period": None}
        try:
            cyc = find_limit_cycle(model, eps, max_iter=250)
            samples, times = cyc.samples[:-1], cyc.times
            period = cyc.period_desing
            note = None
        except (ComputationError, EscapeError) as e:
            # weakly attracting cycle near onset: classify a settled loop
            head = integrate_field(rhs, p0 + np.array([0.011, 0.017]),
                                   (0.0, 40000.0), tol=1e-9, record="last")
            tail = integrate_field(rhs, head.z_end, (0.0, 20000.0), tol=1e-9,
                                   record="points")
            samples, times = tail.states, tail.times
            period = None
            note = f"loop classification after non-convergence: {e}"
        amp = float(np.max(np.hypot(samples[:, 0] - p0[0],
                                    samples[:, 1] - p0[1])))
        if amp < amplitude_floor:
            return {"label": "steady_sliding", "trace": trace,
                    "amplitude": amp, "dwell": 0.0, "period": period,
                    "note": "oscillation below amplitude floor"}
        dwell = _dwell_fraction(times, samples, dwell_band_factor * eps)
        label = "stick_slip" if dwell >= dwell_threshold else "pure_slip"
        out = {"label": label, "trace": trace, "amplitude": amp,
               "dwell": dwell, "period": period}
        if note:
            out["note"] = note
        return out

    results = run_jobs([(lambda v=v: classify(v)) for v in v0_values])
    labels = np.empty(len(v0_values), dtype=object)
    details, notes = {}, {}
    for i, (res, err) in enumerate(results):
        v0 = float(v0_values[i])
        if err is not None:
            labels[i] = None
            notes[v0] = err
        else:
            labels[i] = res["label"]
            details[v0] = res
            if "note" in res:
                notes[v0] = res["note"]

    order = {"stick_slip": 0, "pure_slip": 1, "steady_sliding": 2}
    seq = [l for l in labels if l is not None]
    for a, b in zip(seq, seq[1:]):
        if order[b] < order[a]:
            raise ComputationError(
                f"labels not monotone in v0 ({a} then {b}); grid or "
                "tolerances too coarse")
        if order[b] - order[a] > 1:
            raise ComputationError(
                "adjacent labels skip pure_slip; refine the v0 grid between "
                "the last stick_slip and first steady_sliding values")

    v_m_emp = None
    osc = [v for v, l in zip(v0_values, labels)
           if l in ("stick_slip", "pure_slip")]
    steady = [v for v, l in zip(v0_values, labels) if l == "steady_sliding"]
    if osc and steady:
        v_m_emp = 0.5 * (max(osc) + min(steady))
    v_ss = None
    sticks = [v for v, l in zip(v0_values, labels) if l == "stick_slip"]
    pures = [v for v, l in zip(v0_values, labels) if l == "pure_slip"]
    if sticks and pures:
        v_ss = (float(max(sticks)), float(min(pures)))

    return RegimeMap(kind="regimes", axes={"v0": v0_values}, labels=labels,
                     details=details, notes=notes, v_m_analytic=v_m,
                     v_m_empirical=v_m_emp, v_ss_bracket=v_ss,
                     thomsen_comparison=math.sqrt(4.0 / 5.0) * v_m)


def stroke_phase_diagram(eps_values, delta_values, base_params=None):
    """Stroke counts of the transition model over an (eps, delta) grid.

    Cells whose cycle search or stroke count fails are left as None with a
    note; no cell failure aborts the grid.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    delta_values = np.asarray(delta_values, dtype=float)
    base = dict(v0=2.0, mu_s=9.0, a1=4.0, a3=0.1)
    if base_params:
        base.update(base_params)

    def cell(eps, delta):
        model = builtin_model("transition", dict(delta=delta, **base))
        cyc = find_limit_cycle(model, eps)
        if cyc.strokes is None:
            raise ComputationError("cycle found but no timescale separation")
        return {"strokes": cyc.strokes, "period_desing": cyc.period_desing,
                "amplitude": cyc.amplitude}

    jobs = [(lambda e=e, d=d: cell(e, d))
            for e in eps_values for d in delta_values]
    results = run_jobs(jobs)

    labels = np.empty((len(eps_values), len(delta_values)), dtype=object)
    details, notes = {}, {}
    k = 0
    for i, e in enumerate(eps_values):
        for j, d in enumerate(delta_values):
            res, err = results[k]
            k += 1
            key = (float(e), float(d))
            if err is not None:
                labels[i, j] = None
                notes[key] = err
            else:
                labels[i, j] = res["strokes"]
                details[key] = res
    return RegimeMap(kind="strokes",
                     axes={"eps": eps_values, "delta": delta_values},
                     labels=labels, details=details, notes=notes)
