"""Geometry of the eps = 0 limit: critical curve, contact points, reduced flows.

Everything here works on the layer structure z' = N f: the critical curve
S = {f = 0}, the nontrivial eigenvalue lambda = <grad f, N> transverse to S,
contact points where lambda vanishes on S, and the three slow-flow
formulations (projected, ratio form, desingularised) that agree up to the
lambda time rescaling.
"""

import math
import numpy as np
from dataclasses import dataclass
from scipy.optimize import brentq, minimize_scalar

from .errors import ComputationError, DomainError, PreconditionError


@dataclass
class Branch:
    points: np.ndarray      # (n, 2) ordered samples
    lam: np.ndarray         # eigenvalue per sample
    stability: str          # 'attracting' | 'repelling'


@dataclass
class CriticalCurve:
    branches: list

    @property
    def n_points(self):
        return sum(len(b.points) for b in self.branches)


@dataclass
class ContactPoint:
    location: np.ndarray
    order: int
    regular: bool
    jump_class: str         # 'jump_off' | 'jump_on' | 'none'


@dataclass
class NSingularity:
    location: np.ndarray
    trace: float
    det: float
    kind: str


def nontrivial_eigenvalue(model, z):
    """<grad f, N> at a point of S: the one nonzero layer eigenvalue."""
    x, y = float(z[0]), float(z[1])
    if abs(model.f_field(x, y)) >= 1e-8:
        raise PreconditionError(f"z=({x:g},{y:g}) not on the critical curve")
    return _lam(model, x, y)


def _lam(model, x, y):
    gx, gy = model.f_field.grad(x, y)
    nx, ny = model.n_field(x, y)
    return gx * nx + gy * ny


def _solve_on_curve(model, axis, c_fixed, seed, tol=1e-13):
    """1-D Newton for the free coordinate of f=0 with the other held fixed.

    axis='x' means x is the graph variable (c_fixed) and y is solved for.
    """
    v = seed
    f = model.f_field
    for _ in range(60):
        if axis == "x":
            fv = f(c_fixed, v)
            dv = f.grad(c_fixed, v)[1]
        else:
            fv = f(v, c_fixed)
            dv = f.grad(v, c_fixed)[0]
        if abs(dv) < 1e-12:
            raise DomainError("curve continuation hit a vanishing partial of f")
        step = fv / dv
        v -= step
        if abs(step) < tol * max(1.0, abs(v)):
            if abs(fv) < 1e-9:
                return v
    raise DomainError("curve continuation Newton failed to converge")


def _graph_axis(model, z):
    gx, gy = model.f_field.grad(z[0], z[1])
    if abs(gy) >= abs(gx):
        return "x"          # curve is locally a graph y = phi(x)
    return "y"


def _lam_along_graph(model, F, axis):
    """lambda restricted to S as a function of the graph variable near F."""
    x0, y0 = float(F[0]), float(F[1])
    seed = {"val": y0 if axis == "x" else x0}

    def g(s):
        other = _solve_on_curve(model, axis, s, seed["val"])
        seed["val"] = other
        if axis == "x":
            return _lam(model, s, other)
        return _lam(model, other, s)
    return g, (x0 if axis == "x" else y0)


def _point_on_graph(model, axis, s, seed_other):
    other = _solve_on_curve(model, axis, s, seed_other)
    if axis == "x":
        return np.array([s, other])
    return np.array([other, s])


# ------------------------------------------------------------- curve tracing

def trace_critical_curve(model, window, resolution):
    """Sample S = {f=0} in a rectangle by grid sign scan + edge bisection.

    window = (xmin, xmax, ymin, ymax). Points are chained into ordered arcs,
    the eigenvalue is attached per sample, and arcs are split where it
    changes sign so each branch has a single stability type.
    """
    xmin, xmax, ymin, ymax = map(float, window)
    if not (xmax > xmin and ymax > ymin and
            all(map(math.isfinite, (xmin, xmax, ymin, ymax)))):
        raise PreconditionError("window must be a finite nonempty rectangle")
    if resolution < 16:
        raise PreconditionError("resolution must be >= 16")

    f = model.f_field.value
    xs = np.linspace(xmin, xmax, resolution + 1)
    ys = np.linspace(ymin, ymax, resolution + 1)
    fv = np.array([[f(x, y) for y in ys] for x in xs])

    pts = []

    def refine(p, q, fp, fq):
        # bisection along the segment p-q to |f| < 1e-10
        a, b = np.asarray(p, float), np.asarray(q, float)
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = f(mid[0], mid[1])
            if abs(fm) < 1e-10:
                return mid
            if (fm < 0) == (fp < 0):
                a, fp = mid, fm
            else:
                b, fq = mid, fm
        return 0.5 * (a + b)

    for i in range(resolution + 1):
        for j in range(resolution + 1):
            if fv[i, j] == 0.0:
                pts.append(np.array([xs[i], ys[j]]))
            if i < resolution and fv[i, j] * fv[i + 1, j] < 0:
                pts.append(refine((xs[i], ys[j]), (xs[i + 1], ys[j]),
                                  fv[i, j], fv[i + 1, j]))
            if j < resolution and fv[i, j] * fv[i, j + 1] < 0:
                pts.append(refine((xs[i], ys[j]), (xs[i], ys[j + 1]),
                                  fv[i, j], fv[i, j + 1]))

    if not pts:
        return CriticalCurve(branches=[])

    pts = np.array(pts)
    for x, y in pts:
        g = model.f_field.grad(x, y)
        if math.hypot(g[0], g[1]) < 1e-8:
            raise ComputationError(
                f"grad f vanishes at ({x:g},{y:g}) on the zero set: "
                "the critical curve is not regularly embedded there")

    # chain into arcs by nearest-neighbour walks
    cell = math.hypot((xmax - xmin) / resolution, (ymax - ymin) / resolution)
    unused = list(range(len(pts)))
    arcs = []
    while unused:
        start = min(unused, key=lambda k: (pts[k][0], pts[k][1]))
        chain = [start]
        unused.remove(start)
        for _ in range(2):      # grow both directions from the seed
            while True:
                tail = pts[chain[-1]]
                if not unused:
                    break
                nxt = min(unused, key=lambda k: np.hypot(*(pts[k] - tail)))
                if np.hypot(*(pts[nxt] - tail)) > 2.0 * cell:
                    break
                chain.append(nxt)
                unused.remove(nxt)
            chain.reverse()
        arcs.append(pts[chain])

    branches = []
    for arc in arcs:
        lam = np.array([_lam(model, p[0], p[1]) for p in arc])
        # split where the eigenvalue changes sign; a sample landing exactly on
        # a zero is the boundary itself and closes both adjacent segments
        segs = []
        cur = []
        cur_sign = 0
        for k in range(len(arc)):
            s = 0 if lam[k] == 0.0 else (1 if lam[k] > 0 else -1)
            if s == 0:
                cur.append(k)
                segs.append(cur)
                cur, cur_sign = [k], 0
                continue
            if cur_sign != 0 and s != cur_sign:
                segs.append(cur)
                cur = []
            cur.append(k)
            cur_sign = s
        if cur:
            segs.append(cur)
        for idx in segs:
            if len(idx) < 2 and len(arc) > 1:
                continue
            seg_lam = lam[idx]
            stab = "attracting" if np.median(seg_lam) < 0 else "repelling"
            branches.append(Branch(points=arc[idx].copy(), lam=seg_lam.copy(),
                                   stability=stab))
    return CriticalCurve(branches=branches)


# --------------------------------------------------------- N-singularities

def find_N_singularities(model, window):
    """Zeros of N in the window, classified by the layer Jacobian f(p) DN(p)."""
    xmin, xmax, ymin, ymax = map(float, window)
    n = model.n_field
    res = 48
    xs = np.linspace(xmin, xmax, res)
    ys = np.linspace(ymin, ymax, res)
    found = []
    for x0 in xs:
        for y0 in ys:
            nv = n(x0, y0)
            if math.hypot(nv[0], nv[1]) > 0.5 * math.hypot(xmax - xmin, ymax - ymin):
                continue
            z = np.array([x0, y0])
            ok = False
            for _ in range(40):
                nv = np.asarray(n(z[0], z[1]), float)
                if math.hypot(nv[0], nv[1]) < 1e-12:
                    ok = True
                    break
                J = n.jac(z[0], z[1])
                try:
                    step = np.linalg.solve(J, nv)
                except np.linalg.LinAlgError:
                    break
                if np.max(np.abs(step)) > math.hypot(xmax - xmin, ymax - ymin):
                    break
                z = z - step
                if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(z))):
                    ok = math.hypot(*n(z[0], z[1])) < 1e-9
                    break
            if not ok:
                continue
            if not (xmin - 1e-9 <= z[0] <= xmax + 1e-9 and
                    ymin - 1e-9 <= z[1] <= ymax + 1e-9):
                continue
            if any(np.hypot(*(z - q.location)) < 1e-7 for q in found):
                continue
            fp = model.f_field(z[0], z[1])
            Dh = fp * np.asarray(n.jac(z[0], z[1]), float)
            tr = float(Dh[0, 0] + Dh[1, 1])
            det = float(Dh[0, 0] * Dh[1, 1] - Dh[0, 1] * Dh[1, 0])
            if abs(det) < 1e-10 or (det > 0 and abs(tr) < 1e-10):
                kind = "center_degenerate"
            elif det < 0:
                kind = "saddle"
            else:
                osc = "focus" if tr * tr < 4 * det else "node"
                kind = ("unstable_" if tr > 0 else "stable_") + osc
            found.append(NSingularity(location=z, trace=tr, det=det, kind=kind))
    return found


# ------------------------------------------------------------ contact points

def contact_order(model, F):
    """Smallest n <= 3 with a nonzero n-th derivative of lambda along S at F.

    Differentiates lambda(s, phi(s)) in the graph variable by Richardson
    extrapolated central differences; the graph phi comes from Newton
    continuation of f = 0.
    """
    axis = _graph_axis(model, F)
    g, s0 = _lam_along_graph(model, F, axis)
    h = 1e-3

    def d1(hh):
        return (g(s0 + hh) - g(s0 - hh)) / (2 * hh)

    def d2(hh):
        return (g(s0 + hh) - 2 * g(s0) + g(s0 - hh)) / hh ** 2

    def d3(hh):
        return (g(s0 + 2 * hh) - 2 * g(s0 + hh) + 2 * g(s0 - hh)
                - g(s0 - 2 * hh)) / (2 * hh ** 3)

    for n, d in ((1, d1), (2, d2), (3, d3)):
        val = (4 * d(h / 2) - d(h)) / 3
        if abs(val) > 1e-5:
            return n
    raise ComputationError("contact order exceeds 3: unsupported degeneracy")


def contact_derivative(model, F):
    """Richardson first derivative of lambda along S at F (the b1 coefficient)."""
    axis = _graph_axis(model, F)
    g, s0 = _lam_along_graph(model, F, axis)
    h = 1e-3
    d = lambda hh: (g(s0 + hh) - g(s0 - hh)) / (2 * hh)
    return (4 * d(h / 2) - d(h)) / 3


def classify_contact(model, F, order):
    """Regularity (two equivalent tests, cross-checked) and jump direction."""
    if order != 1:
        return {"regular": False, "jump_class": "none"}
    x, y = float(F[0]), float(F[1])
    nv = np.asarray(model.n_field(x, y), float)
    gv = np.asarray(model.g_field(x, y, 0.0), float)
    grad = model.f_field.grad(x, y)
    det_test = nv[0] * gv[1] - nv[1] * gv[0]
    inp_test = grad[0] * gv[0] + grad[1] * gv[1]
    reg_det = abs(det_test) > 1e-9
    reg_inp = abs(inp_test) > 1e-9
    if reg_det != reg_inp:
        raise ComputationError(
            f"regularity tests disagree at ({x:g},{y:g}): "
            f"det(N|G)={det_test:.3e}, <grad f,G>={inp_test:.3e}")
    if not reg_det:
        return {"regular": False, "jump_class": "none"}

    # jump direction: the slow drift on the attracting branch either runs
    # into F (jump-off) or away from it (jump-on)
    w = desingularised_rhs(model, F)
    axis = _graph_axis(model, F)
    g, s0 = _lam_along_graph(model, F, axis)
    h = 1e-3
    side = 1.0 if g(s0 + h) < 0 else -1.0     # attracting side of the graph
    seed = y if axis == "x" else x
    p_att = _point_on_graph(model, axis, s0 + side * h, seed)
    t_a = p_att - np.array([x, y])
    t_a /= np.hypot(*t_a)
    jump = "jump_off" if float(w @ t_a) < 0 else "jump_on"
    return {"regular": True, "jump_class": jump}


def find_contact_points(model, curve):
    """Eigenvalue zeros along a traced curve, refined and classified."""
    if not curve.branches:
        raise PreconditionError("contact search needs a nonempty curve")
    out = []

    def add_point(z):
        if any(np.hypot(*(z - np.asarray(c.location))) < 1e-6 for c in out):
            return
        order = contact_order(model, z)
        cls = classify_contact(model, z, order)
        out.append(ContactPoint(location=z, order=order,
                                regular=cls["regular"],
                                jump_class=cls["jump_class"]))

    # rebuild contiguous arcs (branch splits happened exactly at sign changes;
    # a sample sitting exactly on the boundary was dropped, so allow a gap of
    # a couple of the coarsest sample spacings when re-joining)
    def gap_scale(ps):
        if len(ps) < 2:
            return np.inf
        return float(np.max(np.hypot(*np.diff(ps, axis=0).T)))

    arcs = [[curve.branches[0].points]]
    for br in curve.branches[1:]:
        prev_pts = arcs[-1][-1]
        gap = np.hypot(*(br.points[0] - prev_pts[-1]))
        if gap < 2.5 * max(gap_scale(prev_pts), gap_scale(br.points)):
            arcs[-1].append(br.points)
        else:
            arcs.append([br.points])
    arcs = [np.vstack(a) for a in arcs]

    for arc in arcs:
        lam = np.array([_lam(model, p[0], p[1]) for p in arc])
        for k in range(len(arc)):
            if lam[k] == 0.0:
                add_point(arc[k])
        for k in range(len(arc) - 1):
            if lam[k] * lam[k + 1] < 0:
                out_z = _refine_contact(model, arc[k], arc[k + 1])
                add_point(out_z)
        # tangential touches: local minima of |lam| that get close to zero
        for k in range(1, len(arc) - 1):
            if lam[k - 1] * lam[k] > 0 and lam[k] * lam[k + 1] > 0 and \
                    abs(lam[k]) < min(abs(lam[k - 1]), abs(lam[k + 1])) and \
                    abs(lam[k]) < 1e-4:
                z = _refine_tangential(model, arc[k - 1], arc[k + 1], arc[k])
                if z is not None:
                    add_point(z)
    return out


def _refine_contact(model, p, q):
    """Bisect lambda's sign change along the graph between two curve samples."""
    axis = "x" if abs(q[0] - p[0]) >= abs(q[1] - p[1]) else "y"
    i = 0 if axis == "x" else 1
    seed = {"val": p[1 - i]}

    def lam_at(s):
        other = _solve_on_curve(model, axis, s, seed["val"])
        seed["val"] = other
        z = (s, other) if axis == "x" else (other, s)
        return _lam(model, z[0], z[1]), np.asarray(z)

    a, b = p[i], q[i]
    la, _ = lam_at(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        lm, z = lam_at(mid)
        if abs(lm) < 1e-9:
            return z
        if (lm < 0) == (la < 0):
            a, la = mid, lm
        else:
            b = mid
    return z


def _refine_tangential(model, p, q, mid):
    axis = "x" if abs(q[0] - p[0]) >= abs(q[1] - p[1]) else "y"
    i = 0 if axis == "x" else 1
    seed = {"val": mid[1 - i]}

    def absl(s):
        other = _solve_on_curve(model, axis, s, seed["val"])
        seed["val"] = other
        z = (s, other) if axis == "x" else (other, s)
        return abs(_lam(model, z[0], z[1]))

    res = minimize_scalar(absl, bracket=None, bounds=sorted((p[i], q[i])),
                          method="bounded", options={"xatol": 1e-13})
    if res.fun < 1e-9:
        other = _solve_on_curve(model, axis, res.x, seed["val"])
        return np.asarray((res.x, other) if axis == "x" else (other, res.x))
    return None


# ------------------------------------------------------------- slow flows

def projection(model, z):
    """Slow projector I - N Df / lambda onto T S along the fiber direction."""
    x, y = float(z[0]), float(z[1])
    if abs(model.f_field(x, y)) >= 1e-8:
        raise PreconditionError(f"({x:g},{y:g}) not on the critical curve")
    lam = _lam(model, x, y)
    if abs(lam) <= 1e-8:
        raise PreconditionError(
            f"({x:g},{y:g}) is not normally hyperbolic (lambda={lam:.2e})")
    nv = np.asarray(model.n_field(x, y), float)
    grad = np.asarray(model.f_field.grad(x, y), float)
    return np.eye(2) - np.outer(nv, grad) / lam


def reduced_rhs(model, z):
    """Slow drift on S in the ratio form, cross-checked against the projector."""
    x, y = float(z[0]), float(z[1])
    if abs(model.f_field(x, y)) >= 1e-8:
        raise PreconditionError(f"({x:g},{y:g}) not on the critical curve")
    lam = _lam(model, x, y)
    if abs(lam) <= 1e-8:
        raise PreconditionError(
            f"({x:g},{y:g}) is not normally hyperbolic (lambda={lam:.2e})")
    nv = np.asarray(model.n_field(x, y), float)
    gv = np.asarray(model.g_field(x, y, 0.0), float)
    grad = np.asarray(model.f_field.grad(x, y), float)
    det = nv[0] * gv[1] - nv[1] * gv[0]
    val = det / lam * np.array([-grad[1], grad[0]])
    # the projected form is the defining one; the ratio form must reproduce it
    alt = projection(model, z) @ gv
    if np.max(np.abs(val - alt)) > 1e-10 * (1.0 + np.hypot(*gv)):
        raise ComputationError(
            f"reduced-flow formulations disagree at ({x:g},{y:g}): {val} vs {alt}")
    return val


def desingularised_rhs(model, z):
    """det(N|G) (D_y f, -D_x f): the slow drift rescaled to stay finite at contact."""
    x, y = float(z[0]), float(z[1])
    if abs(model.f_field(x, y)) >= 1e-8:
        raise PreconditionError(f"({x:g},{y:g}) not on the critical curve")
    nv = np.asarray(model.n_field(x, y), float)
    gv = np.asarray(model.g_field(x, y, 0.0), float)
    grad = np.asarray(model.f_field.grad(x, y), float)
    det = nv[0] * gv[1] - nv[1] * gv[0]
    return det * np.array([grad[1], -grad[0]])


# ----------------------------------------------------------- rectification

class RectifiedSystem:
    """The system rewritten in (s, u) with u = f(z) and s the graph variable.

    s' = Ntil1(s,u) u + eps Gtil1(s,u)
    u' = lamtil(s,u) u + eps Gtil2(s,u)
    where fields are evaluated at the preimage solved by per-call Newton
    (seeded from the previous solve, so sweeps along the curve stay cheap).
    """

    def __init__(self, model, z0):
        self.model = model
        self.axis = _graph_axis(model, z0)
        self.swapped = self.axis == "y"
        x0, y0 = float(z0[0]), float(z0[1])
        self._seed = y0 if self.axis == "x" else x0
        self.s0 = x0 if self.axis == "x" else y0

    def preimage(self, s, u):
        """Solve f(z) = u for the non-graph coordinate at graph value s."""
        m = self.model
        v = self._seed
        f = m.f_field
        for _ in range(60):
            if self.axis == "x":
                fv = f(s, v) - u
                dv = f.grad(s, v)[1]
            else:
                fv = f(v, s) - u
                dv = f.grad(v, s)[0]
            if abs(dv) < 1e-12:
                raise DomainError("rectified preimage left the validity strip")
            step = fv / dv
            v -= step
            if abs(step) < 1e-13 * max(1.0, abs(v)):
                self._seed = v
                return (s, v) if self.axis == "x" else (v, s)
        raise DomainError("rectified preimage Newton did not converge")

    def components(self, s, u):
        """(Ntil1, lamtil, Gtil1, Gtil2) at (s, u)."""
        m = self.model
        x, y = self.preimage(s, u)
        nv = m.n_field(x, y)
        gv = m.g_field(x, y, 0.0)
        grad = m.f_field.grad(x, y)
        lam = grad[0] * nv[0] + grad[1] * nv[1]
        if self.axis == "x":
            n1, g1 = nv[0], gv[0]
        else:
            n1, g1 = nv[1], gv[1]
        g2 = grad[0] * gv[0] + grad[1] * gv[1]
        return float(n1), float(lam), float(g1), float(g2)

    def eval(self, s, u, eps=0.0):
        n1, lam, g1, g2 = self.components(s, u)
        return np.array([n1 * u + eps * g1, lam * u + eps * g2])


def rectify(model, z0):
    """Local straightening of S to the axis u = 0 around z0."""
    return RectifiedSystem(model, z0)


def expansion_coeffs(model, F):
    """Leading coefficients of the rectified system at a regular order-1 point.

    a0: fast-direction speed at F; b1: slope of the eigenvalue along S;
    d0: transverse drift <grad f, G>; c0: tangential drift component.
    """
    order = contact_order(model, F)
    cls = classify_contact(model, F, order)
    if not (order == 1 and cls["regular"]):
        raise PreconditionError(
            f"expansion point must be regular order-1 contact, got order "
            f"{order}, regular={cls['regular']}")
    rect = rectify(model, F)
    a0, _, c0, d0 = rect.components(rect.s0, 0.0)
    b1 = contact_derivative(model, F)
    for nm, v in (("a0", a0), ("b1", b1), ("d0", d0)):
        if abs(v) < 1e-8:
            raise ComputationError(
                f"degenerate expansion: |{nm}| = {abs(v):.2e} < 1e-8 "
                "contradicts the regular order-1 classification")
    return {"a0": a0, "b1": b1, "d0": d0, "c0": c0}
