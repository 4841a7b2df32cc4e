"""Scaling ladders, regime classification, stroke phase diagram."""

import math

import numpy as np
import pytest

from gspt.errors import ComputationError, PreconditionError
from gspt.models import builtin_model
from gspt.scaling import (RegimeMap, ScalingReport, SectionOffsets,
                          _dwell_fraction, _loglog_fit, _loglog_slope,
                          epsilon_scaling_report, run_jobs, section_offsets,
                          slow_segment_distance, stickslip_regime_sweep,
                          stroke_phase_diagram)
from gspt.simulate import find_limit_cycle


# ---------------------------------------------------------------- plumbing

def test_run_jobs_preserves_order_and_errors():
    def boom():
        raise ValueError("nope")

    out = run_jobs([lambda: 1, boom, lambda: "x"])
    assert out[0] == (1, None)
    assert out[1][0] is None and out[1][1] == "ValueError: nope"
    assert out[2] == ("x", None)


def test_loglog_fit_recovers_power_law():
    xs = np.logspace(-4, -1, 8)
    slope, half = _loglog_fit(xs, 3.0 * xs ** 1.7)
    assert abs(slope - 1.7) < 1e-12
    assert half < 1e-10
    assert _loglog_slope(xs, 3.0 * xs ** 1.7) == pytest.approx(1.7)
    # two points: slope defined, no confidence statement possible
    s2, h2 = _loglog_fit(xs[:2], 3.0 * xs[:2] ** 1.7)
    assert abs(s2 - 1.7) < 1e-12 and h2 == math.inf
    assert _loglog_fit(xs, np.full(8, -1.0)) is None


def test_loglog_fit_confidence_width_covers_noise(rng):
    xs = np.logspace(-4, -1, 12)
    ys = xs ** (2.0 / 3.0) * np.exp(rng.normal(0, 0.05, size=12))
    slope, half = _loglog_fit(xs, ys)
    assert abs(slope - 2.0 / 3.0) < 3 * half


def test_dwell_fraction_piecewise():
    times = [0.0, 1.0, 2.0, 3.0]
    states = np.array([[0, 0.0], [0, 0.0], [0, 10.0], [0, 0.0]], float)
    assert _dwell_fraction(times, states, 1.0) == pytest.approx(1.0 / 3.0)
    assert _dwell_fraction(times[:1], states[:1], 1.0) == 0.0


# ----------------------------------------------------------- fold offsets

def test_section_offsets_minimal_fields(minimal):
    so = section_offsets(minimal, 1e-3, rho=0.01)
    assert isinstance(so, SectionOffsets)
    y_s, y_l = so
    assert y_s == so.y_slow and y_l == so.y_layer
    # the layer return passes above the slow arrival at the fold section
    assert so.offset == pytest.approx(abs(y_l - y_s))
    assert so.offset > 0
    # both heights are small: the section sits rho past the contact at (1,0)
    assert abs(y_s) < 0.1 and abs(y_l) < 0.1


def test_section_offsets_seed_shift_invariance(minimal):
    a = section_offsets(minimal, 1e-3, rho=0.01, seed_shift=0.0)
    b = section_offsets(minimal, 1e-3, rho=0.01, seed_shift=0.3)
    assert abs(a.offset - b.offset) < 1e-8


def test_offset_shrinks_like_two_thirds_power(minimal):
    eps = np.array([1e-4, 1e-3, 1e-2])
    offs = [section_offsets(minimal, e, rho=0.01).offset for e in eps]
    slope = _loglog_slope(eps, offs)
    assert abs(slope - 2.0 / 3.0) < 0.08
    assert offs[0] < offs[1] < offs[2]


# ------------------------------------------------------------ slow distance

def test_slow_segment_distance_first_order(minimal, minimal_cycle):
    d = slow_segment_distance(minimal, minimal_cycle)
    # distance to {f=0} along the slow arc is O(eps); prefactor ~0.12 here
    assert 0.02 * 1e-2 < d < 1e-2


def test_slow_segment_distance_needs_separation():
    from tests.test_simulate import radial_model
    cyc = find_limit_cycle(radial_model(), 0.0)
    with pytest.raises(ComputationError, match="separation"):
        slow_segment_distance(radial_model(), cyc)


# -------------------------------------------------------------- full ladder

def test_ladder_preconditions(minimal):
    with pytest.raises(PreconditionError, match="at least 5"):
        epsilon_scaling_report(minimal, [1e-4, 1e-3, 1e-2])
    with pytest.raises(PreconditionError, match="1.5 decades"):
        epsilon_scaling_report(minimal, np.logspace(-3, -2, 5))


@pytest.mark.slow
def test_scaling_report_minimal_full():
    model = builtin_model("minimal")
    rep = epsilon_scaling_report(model, np.logspace(-3.5, -2.0, 5), rho=0.01)
    assert isinstance(rep, ScalingReport)
    assert not rep.notes
    s_off, h_off = rep.fits["offset"]
    assert abs(s_off - 2.0 / 3.0) < 0.08
    s_fl, _ = rep.fits["floquet"]
    assert abs(s_fl - 1.0) < 0.15         # -floquet ~ K / eps
    s_sd, _ = rep.fits["slow_dist"]
    assert abs(s_sd - 1.0) < 0.15
    assert rep.hausdorff_decreasing
    assert rep.empirical_K == pytest.approx(32.85, rel=0.05)
    assert np.all(np.isfinite(rep.offsets))


def test_scaling_report_offsets_only(minimal):
    rep = epsilon_scaling_report(minimal, np.logspace(-4, -2, 5), rho=0.01,
                                 cycles=False)
    assert np.all(np.isnan(rep.floquet))
    assert np.all(np.isnan(rep.hausdorff))
    assert rep.hausdorff_decreasing is None
    assert rep.empirical_K is None
    s_off, _ = rep.fits["offset"]
    assert abs(s_off - 2.0 / 3.0) < 0.08
    assert "floquet" not in rep.fits


# ------------------------------------------------------------------ regimes

@pytest.mark.slow
def test_regime_sweep_three_labels():
    m = stickslip_regime_sweep([0.86, 0.96, 1.10])
    assert list(m.labels) == ["stick_slip", "pure_slip", "steady_sliding"]
    assert m.v_m_analytic == pytest.approx(1.0)
    assert m.v_m_empirical == pytest.approx(0.5 * (0.96 + 1.10))
    assert m.v_ss_bracket == (0.86, 0.96)
    assert m.thomsen_comparison == pytest.approx(math.sqrt(0.8))
    d = m.details[0.86]
    assert d["dwell"] >= 0.10 and d["amplitude"] > 0.05
    assert m.details[1.10]["amplitude"] == 0.0


@pytest.mark.slow
def test_regime_sweep_rejects_label_gap():
    with pytest.raises(ComputationError, match="refine the v0 grid"):
        stickslip_regime_sweep([0.86, 1.10])


def test_regime_sweep_grid_validation():
    with pytest.raises(PreconditionError):
        stickslip_regime_sweep([0.9])
    with pytest.raises(PreconditionError):
        stickslip_regime_sweep([-0.5, 1.0])


# -------------------------------------------------------------- stroke grid

@pytest.mark.slow
def test_stroke_grid_single_cell_overdamped():
    m = stroke_phase_diagram([5.0], [1e-2])
    assert m.kind == "strokes"
    assert m.labels.shape == (1, 1)
    assert m.labels[0, 0] == 4
    assert not m.notes
    key = (5.0, 1e-2)
    assert m.details[key]["period_desing"] > 0
