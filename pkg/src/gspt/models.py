"""Planar slow-fast systems in the product form z' = N(z) f(z) + eps G(z; eps).

The zero set S = {f = 0} carries the slow dynamics, the auxiliary curve
V0 = {N = 0} consists of extra layer equilibria, and eps G is the
perturbation that switches the slow drift on.  Models built here ship
analytic derivatives; user-supplied fields fall back to central differences.
"""

import math
import numpy as np
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import DomainError, PreconditionError

_EPS3 = np.finfo(float).eps ** (1 / 3)


def gradient_fd(func, z):
    """Central-difference gradient (scalar func) or jacobian (vector func).

    Step h_i = eps_machine^(1/3) * max(1, |z_i|) per component.
    """
    x, y = float(z[0]), float(z[1])
    hx = _EPS3 * max(1.0, abs(x))
    hy = _EPS3 * max(1.0, abs(y))
    fxp = func(x + hx, y)
    fxm = func(x - hx, y)
    fyp = func(x, y + hy)
    fym = func(x, y - hy)
    out = np.array([(np.asarray(fxp) - np.asarray(fxm)) / (2 * hx),
                    (np.asarray(fyp) - np.asarray(fym)) / (2 * hy)], dtype=float)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"non-finite finite-difference samples near z=({x:g},{y:g})")
    if out.ndim == 1:
        return out          # gradient of a scalar map
    return out.T            # jacobian rows = output components


class ScalarField:
    """Map R^2 -> R with a gradient (analytic when given, else central FD)."""

    def __init__(self, value: Callable, gradient: Optional[Callable] = None):
        self.value = value
        self._gradient = gradient

    def __call__(self, x, y):
        return self.value(x, y)

    def grad(self, x, y):
        if self._gradient is not None:
            return np.asarray(self._gradient(x, y), dtype=float)
        return gradient_fd(self.value, (x, y))


class PlaneField:
    """Map R^2 -> R^2 with a jacobian (analytic when given, else central FD)."""

    def __init__(self, value: Callable, jacobian: Optional[Callable] = None):
        self.value = value
        self._jacobian = jacobian

    def __call__(self, x, y):
        return self.value(x, y)

    def jac(self, x, y):
        if self._jacobian is not None:
            return np.asarray(self._jacobian(x, y), dtype=float)
        return gradient_fd(self.value, (x, y))


class EpsPlaneField(PlaneField):
    """Perturbation field G(z; eps): value takes (x, y, eps)."""

    def __init__(self, value, jacobian=None):
        super().__init__(value, jacobian)

    def __call__(self, x, y, eps=0.0):
        return self.value(x, y, eps)

    def jac(self, x, y, eps=0.0):
        if self._jacobian is not None:
            return np.asarray(self._jacobian(x, y, eps), dtype=float)
        return gradient_fd(lambda xx, yy: self.value(xx, yy, eps), (x, y))


@dataclass(frozen=True)
class ModelSpec:
    """Immutable bundle of the three fields plus named parameters.

    time_factor is the desingularisation factor: integrating z' = Nf + eps G
    runs on the stretched clock, and dt_physical = time_factor(z) dt. Absent
    for models already on the physical clock (vdp).
    rhs_factory(eps) -> rhs(t, x, y) is an optional fused fast path for the
    integrator; it must agree with eval_rhs to rounding.
    """
    name: str
    n_field: PlaneField
    f_field: ScalarField
    g_field: EpsPlaneField
    params: dict = field(default_factory=dict)
    time_factor: Optional[ScalarField] = None
    rhs_factory: Optional[Callable] = None


def eval_rhs(model, z, eps):
    """N(z) f(z) + eps G(z; eps). eps=0 gives the layer field."""
    x, y = float(z[0]), float(z[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise DomainError("non-finite state z")
    if eps < 0:
        raise PreconditionError("eps must be >= 0")
    nv = model.n_field(x, y)
    if not all(math.isfinite(c) for c in nv):
        raise DomainError(f"n_field non-finite at z=({x:g},{y:g})")
    fv = model.f_field(x, y)
    if not math.isfinite(fv):
        raise DomainError(f"f_field non-finite at z=({x:g},{y:g})")
    gv = model.g_field(x, y, eps)
    if not all(math.isfinite(c) for c in gv):
        raise DomainError(f"g_field non-finite at z=({x:g},{y:g})")
    return np.array([nv[0] * fv + eps * gv[0], nv[1] * fv + eps * gv[1]])


def make_rhs(model, eps):
    """Scalar rhs(t, x, y) -> (dx, dy) closure for the integrator hot loop."""
    if model.rhs_factory is not None:
        return model.rhs_factory(eps)
    N = model.n_field.value
    f = model.f_field.value
    G = model.g_field.value

    def rhs(t, x, y):
        nx, ny = N(x, y)
        fv = f(x, y)
        gx, gy = G(x, y, eps)
        return nx * fv + eps * gx, ny * fv + eps * gy
    return rhs


def em_turning_point(mu, kappa, a, b):
    """Turning point (x_*, y_*) of the exponential transistor characteristic.

    The characteristic mu e^{-a y} (1 - kappa e^{-b y}) has a unique maximum
    at y_* < 0 exactly when kappa < a/(a+b).
    """
    if not (mu > 0 and kappa > 0 and a > 0 and b > 0):
        raise PreconditionError("em_turning_point needs mu, kappa, a, b > 0")
    r = a / ((a + b) * kappa)
    if r <= 1.0:
        raise PreconditionError(
            f"kappa={kappa:g} >= a/(a+b)={a/(a+b):g}: no admissible turning point")
    y_star = -math.log(r) / b
    x_star = mu * r ** (a / b) * b / (a + b)
    return x_star, y_star


class PhysicalTime(float):
    """Float result of physical_time carrying an orientation warning flag."""
    orientation_warning = False

    def __new__(cls, value, orientation_warning=False):
        obj = super().__new__(cls, value)
        obj.orientation_warning = orientation_warning
        return obj


def physical_time(model, traj):
    """Map a stretched-clock trajectory duration back to the original clock.

    Integrates time_factor along the dense output. If the factor changes sign
    along the path the two clocks disagree about orientation on part of it;
    the returned value then carries orientation_warning=True.
    """
    if model.time_factor is None:
        raise PreconditionError(f"model '{model.name}' has no time_factor")
    fac = model.time_factor.value
    vals = np.array([fac(x, y) for x, y in traj.states])
    warn = bool(vals.min() < 0.0 < vals.max())
    total = traj.quadrature(fac)
    return PhysicalTime(total, orientation_warning=warn)


# ---------------------------------------------------------------- model zoo

def _check_params(name, given, required, positive=()):
    missing = [k for k in required if k not in given]
    if missing:
        raise PreconditionError(f"model '{name}' missing parameters: {missing}")
    unknown = [k for k in given if k not in required]
    if unknown:
        raise PreconditionError(f"model '{name}' got unknown parameters: {unknown}")
    for k in positive:
        if not given[k] > 0:
            raise PreconditionError(f"model '{name}' requires {k} > 0, got {given[k]!r}")


def _f_is_y():
    return ScalarField(lambda x, y: y, gradient=lambda x, y: (0.0, 1.0))


def _g_const_01():
    return EpsPlaneField(lambda x, y, eps: (0.0, 1.0),
                         jacobian=lambda x, y, eps: ((0.0, 0.0), (0.0, 0.0)))


def _minimal(params):
    _check_params("minimal", params, [])
    n = PlaneField(lambda x, y: (1.0 - y, x - 1.0 + y),
                   jacobian=lambda x, y: ((0.0, -1.0), (1.0, 1.0)))

    def factory(eps):
        def rhs(t, x, y):
            return (1.0 - y) * y, (x - 1.0 + y) * y + eps
        return rhs
    return ModelSpec("minimal", n, _f_is_y(), _g_const_01(), dict(params),
                     time_factor=_f_is_y(), rhs_factory=factory)


def _ebers_moll(params):
    if "x_star" in params or "y_star" in params:
        _check_params("ebers_moll", params, ["a", "x_star", "y_star"],
                      positive=["a", "x_star"])
        p = dict(params)
        if not p["y_star"] < 0:
            raise PreconditionError("ebers_moll requires y_star < 0")
    else:
        _check_params("ebers_moll", params, ["mu", "kappa", "a", "b"],
                      positive=["mu", "kappa", "a", "b"])
        x_star, y_star = em_turning_point(params["mu"], params["kappa"],
                                          params["a"], params["b"])
        p = dict(params, x_star=x_star, y_star=y_star)
    a, xs, ys = p["a"], p["x_star"], p["y_star"]
    n = PlaneField(lambda x, y: (-ys - y, x - xs * math.exp(-a * y)),
                   jacobian=lambda x, y: ((0.0, -1.0),
                                          (1.0, a * xs * math.exp(-a * y))))

    def factory(eps):
        def rhs(t, x, y):
            return (-ys - y) * y, (x - xs * math.exp(-a * y)) * y + eps
        return rhs
    return ModelSpec("ebers_moll", n, _f_is_y(), _g_const_01(), p,
                     time_factor=_f_is_y(), rhs_factory=factory)


def _stickslip_exp(params):
    _check_params("stickslip_exp", params, ["v0", "mu_m", "mu_s", "a"],
                  positive=["v0", "a"])
    v0, mm, ms, a = params["v0"], params["mu_m"], params["mu_s"], params["a"]
    if not ms > mm:
        raise PreconditionError("stickslip_exp requires mu_s > mu_m")

    def mu(y):
        return mm + (ms - mm) * math.exp(-a * y)

    n = PlaneField(lambda x, y: (v0 - y, x - mu(y)),
                   jacobian=lambda x, y: ((0.0, -1.0),
                                          (1.0, a * (ms - mm) * math.exp(-a * y))))

    def factory(eps):
        def rhs(t, x, y):
            return (v0 - y) * y, (x - (mm + (ms - mm) * math.exp(-a * y))) * y + eps
        return rhs
    return ModelSpec("stickslip_exp", n, _f_is_y(), _g_const_01(), dict(params),
                     time_factor=_f_is_y(), rhs_factory=factory)


def _stickslip_poly(params):
    _check_params("stickslip_poly", params, ["v0", "v_m", "mu_m", "mu_s"],
                  positive=["v0", "v_m"])
    v0, vm, mm, ms = params["v0"], params["v_m"], params["mu_m"], params["mu_s"]
    if not ms > mm:
        raise PreconditionError("stickslip_poly requires mu_s > mu_m")
    if not v0 < vm:
        # the cubic characteristic has negative slope only on (0, v_m); the
        # belt speed must sit on that branch for an attracting slow segment
        raise PreconditionError("stickslip_poly requires 0 < v0 < v_m")
    c1 = 3 * (ms - mm) / (2 * vm)
    c3 = (ms - mm) / (2 * vm ** 3)

    def mu(y):
        return ms - c1 * y + c3 * y ** 3

    n = PlaneField(lambda x, y: (v0 - y, x - mu(y)),
                   jacobian=lambda x, y: ((0.0, -1.0),
                                          (1.0, c1 - 3 * c3 * y ** 2)))

    def factory(eps):
        def rhs(t, x, y):
            return (v0 - y) * y, (x - ms + c1 * y - c3 * y ** 3) * y + eps
        return rhs
    return ModelSpec("stickslip_poly", n, _f_is_y(), _g_const_01(), dict(params),
                     time_factor=_f_is_y(), rhs_factory=factory)


def _vdp(params):
    _check_params("vdp", params, [])
    n = PlaneField(lambda x, y: (1.0, 0.0),
                   jacobian=lambda x, y: ((0.0, 0.0), (0.0, 0.0)))
    f = ScalarField(lambda x, y: y + x - x ** 3 / 3.0,
                    gradient=lambda x, y: (1.0 - x * x, 1.0))
    g = EpsPlaneField(lambda x, y, eps: (0.0, -x),
                      jacobian=lambda x, y, eps: ((0.0, 0.0), (-1.0, 0.0)))

    def factory(eps):
        def rhs(t, x, y):
            return y + x - x ** 3 / 3.0, -eps * x
        return rhs
    # no time_factor: this one runs on the physical clock already
    return ModelSpec("vdp", n, f, g, dict(params), time_factor=None,
                     rhs_factory=factory)


def _transition(params):
    _check_params("transition", params, ["delta", "v0", "mu_s", "a1", "a3"],
                  positive=["delta", "v0"])
    d, v0, ms, a1, a3 = (params["delta"], params["v0"], params["mu_s"],
                         params["a1"], params["a3"])
    n = PlaneField(lambda x, y: (d * (v0 - y), x - ms + a1 * y - a3 * y ** 3),
                   jacobian=lambda x, y: ((0.0, -d),
                                          (1.0, a1 - 3 * a3 * y ** 2)))

    def factory(eps):
        def rhs(t, x, y):
            return d * (v0 - y) * y, (x - ms + a1 * y - a3 * y ** 3) * y + eps
        return rhs
    return ModelSpec("transition", n, _f_is_y(), _g_const_01(), dict(params),
                     time_factor=_f_is_y(), rhs_factory=factory)


_BUILDERS = {
    "minimal": _minimal,
    "ebers_moll": _ebers_moll,
    "stickslip_exp": _stickslip_exp,
    "stickslip_poly": _stickslip_poly,
    "vdp": _vdp,
    "transition": _transition,
}

MODEL_NAMES = tuple(_BUILDERS)


def builtin_model(name, params=None):
    """Construct one of the six built-in models by name."""
    if name not in _BUILDERS:
        raise PreconditionError(
            f"unknown model '{name}'; available: {', '.join(MODEL_NAMES)}")
    return _BUILDERS[name](params or {})
