"""Model zoo construction, parameter validation, clock bookkeeping."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gspt.errors import DomainError, PreconditionError
from gspt.models import (MODEL_NAMES, builtin_model, em_turning_point,
                         eval_rhs, make_rhs, physical_time)
from gspt.rk import integrate_field

from conftest import FIG_PARAMS, EM_FIG, fig_model


def test_zoo_names():
    assert set(MODEL_NAMES) == {"minimal", "ebers_moll", "stickslip_exp",
                                "stickslip_poly", "vdp", "transition"}
    for name in MODEL_NAMES:
        assert fig_model(name).name == name


def test_unknown_model_rejected():
    with pytest.raises(PreconditionError, match="unknown model"):
        builtin_model("van_der_pol")


@pytest.mark.parametrize("name", ["ebers_moll", "stickslip_exp",
                                  "stickslip_poly", "transition"])
def test_missing_params_rejected(name):
    with pytest.raises(PreconditionError, match="missing parameters"):
        builtin_model(name, {})


def test_unknown_params_rejected():
    with pytest.raises(PreconditionError, match="unknown parameters"):
        builtin_model("minimal", {"speed": 2.0})
    with pytest.raises(PreconditionError, match="unknown parameters"):
        builtin_model("stickslip_poly", dict(FIG_PARAMS["stickslip_poly"],
                                             extra=1.0))


def test_invalid_params_rejected():
    bad = dict(FIG_PARAMS["stickslip_poly"], v0=-0.25)
    with pytest.raises(PreconditionError, match="v0 > 0"):
        builtin_model("stickslip_poly", bad)
    # belt speed beyond the negative-slope branch of the cubic
    bad = dict(FIG_PARAMS["stickslip_poly"], v0=1.5)
    with pytest.raises(PreconditionError, match="v0 < v_m"):
        builtin_model("stickslip_poly", bad)
    bad = dict(FIG_PARAMS["stickslip_exp"], mu_s=0.5)
    with pytest.raises(PreconditionError, match="mu_s > mu_m"):
        builtin_model("stickslip_exp", bad)


def test_em_turning_point_satisfies_characteristic():
    # (x_*, y_*) must be the stationary point of mu e^{-ay}(1 - kappa e^{-by}),
    # with x_* the characteristic value there
    mu, kappa, a, b = EM_FIG["mu"], EM_FIG["kappa"], EM_FIG["a"], EM_FIG["b"]
    xs, ys = em_turning_point(mu, kappa, a, b)
    char = lambda y: mu * math.exp(-a * y) * (1 - kappa * math.exp(-b * y))
    dchar = lambda y: mu * (-a * math.exp(-a * y)
                            + kappa * (a + b) * math.exp(-(a + b) * y))
    assert abs(dchar(ys)) < 1e-12
    assert abs(char(ys) - xs) < 1e-12
    assert ys < 0 < xs
    # no turning point once kappa >= a/(a+b)
    with pytest.raises(PreconditionError, match="turning point"):
        em_turning_point(1.0, 0.5, 4.0, 6.0)


def test_ebers_direct_turning_point_params():
    m = builtin_model("ebers_moll", dict(a=4.0, x_star=7.0, y_star=-0.6))
    assert m.params["x_star"] == 7.0
    with pytest.raises(PreconditionError, match="y_star < 0"):
        builtin_model("ebers_moll", dict(a=4.0, x_star=7.0, y_star=0.6))


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_factory_rhs_matches_field_composition(name, rng):
    model = fig_model(name)
    for eps in (0.0, 1e-3, 0.37):
        rhs = make_rhs(model, eps)
        for _ in range(25):
            x, y = rng.uniform(-3, 3, size=2)
            assert np.allclose(rhs(0.0, x, y), eval_rhs(model, (x, y), eps),
                               rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", ["minimal", "ebers_moll", "stickslip_exp",
                                  "stickslip_poly", "transition"])
def test_desingularised_field_is_y_times_original(name, rng):
    # dividing the integrated field by y must recover the original-clock
    # field N + (eps/y) G wherever y != 0
    model = fig_model(name)
    eps = 1e-3
    for _ in range(40):
        x = rng.uniform(-3, 3)
        y = rng.uniform(0.05, 2.5) * rng.choice([-1.0, 1.0])
        v = eval_rhs(model, (x, y), eps) / y
        nv = np.array(model.n_field(x, y))
        gv = np.array(model.g_field(x, y, eps))
        assert np.allclose(v, nv + eps * gv / y, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_time_factor_convention(name):
    model = fig_model(name)
    if name == "vdp":
        assert model.time_factor is None
        return
    for x, y in [(0.3, 1.7), (-2.0, 0.4), (5.0, -1.1)]:
        assert model.time_factor(x, y) == model.f_field(x, y)


def test_eval_rhs_guards():
    m = builtin_model("minimal")
    with pytest.raises(DomainError):
        eval_rhs(m, (math.nan, 0.0), 1e-2)
    with pytest.raises(PreconditionError):
        eval_rhs(m, (0.0, 0.0), -1e-3)


def test_physical_time_constant_factor():
    # along a path frozen at y = 2 the clocks differ by exactly that factor
    m = builtin_model("minimal")
    traj = integrate_field(lambda t, x, y: (1.0, 0.0), (0.0, 2.0), (0.0, 3.0),
                           tol=1e-12)
    pt = physical_time(m, traj)
    assert abs(pt - 6.0) < 1e-10
    assert not pt.orientation_warning


def test_physical_time_orientation_warning():
    # a path crossing y = 0 mixes clock orientations and must say so
    m = builtin_model("minimal")
    traj = integrate_field(lambda t, x, y: (0.0, 1.0), (0.0, -1.0), (0.0, 2.0),
                           tol=1e-12)
    pt = physical_time(m, traj)
    assert pt.orientation_warning
    with pytest.raises(PreconditionError, match="time_factor"):
        physical_time(builtin_model("vdp"), traj)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-5, 5), y=st.floats(-2, 2),
       eps=st.floats(0, 0.1))
def test_layer_field_vanishes_on_s(x, y, eps):
    # f multiplies N, so on {f = 0} the eps = 0 field is exactly zero
    m = builtin_model("minimal")
    v = eval_rhs(m, (x, 0.0), 0.0)
    assert v[0] == 0.0 and v[1] == 0.0
    # and the eps-term survives alone
    v = eval_rhs(m, (x, 0.0), eps)
    assert v[0] == 0.0 and abs(v[1] - eps) < 1e-18
