"""Command line front end.

    gspt <command> --config <file> [--out <dir>] [--eps <value>] [--quiet]

Exit codes: 0 success, 2 configuration problem, 3 computation failure.
CSV output is deterministic: fixed column order, floats at 17 significant
digits, so repeated runs on the same config are byte-identical.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import svgplot
from .config import load_config
from .cycles import build_singular_cycle
from .errors import ConfigError, GsptError
from .models import MODEL_NAMES
from .riccati import (RiccatiProblem, k2_exit_prediction, left_tail_decay,
                      omega0_constant, riccati_special_solution,
                      right_tail_constant)
from .scaling import (epsilon_scaling_report, stickslip_regime_sweep,
                      stroke_phase_diagram)
from .simulate import PoincareSection, find_limit_cycle, integrate
from .singular import (find_contact_points, find_N_singularities,
                       trace_critical_curve)

_DEFAULT_WINDOW = (-12.0, 12.0, -3.0, 3.0)

# name -> required parameters (the ebers_moll turning point may come either
# from circuit constants or directly)
_MODEL_PARAMS = {
    "minimal": "(none)",
    "ebers_moll": "mu, kappa, a, b | a, x_star, y_star",
    "stickslip_exp": "v0, mu_m, mu_s, a",
    "stickslip_poly": "v0, v_m, mu_m, mu_s",
    "vdp": "(none)",
    "transition": "delta, v0, mu_s, a1, a3",
}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\r\n")


class _Reporter:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, msg):
        if not self.quiet:
            print(msg)


def _require(cfg, block, key):
    blk = cfg.block(block)
    if key not in blk:
        raise ConfigError(f"command '{cfg.command}' requires '{block}.{key}'")
    return blk[key]


def _phase_portrait(model, curve, contacts, sings, extra=None):
    plot = svgplot.SvgPlot(title=f"{model.name}: critical curve and layer data",
                           xlabel="x", ylabel="y")
    for b in curve.branches:
        plot.polyline(b.points, color=svgplot.GREEN, width=2.0,
                      dashed=(b.stability == "repelling"))
    if extra is not None:
        plot.polyline(extra, color=svgplot.BLACK, width=1.2)
    if contacts:
        plot.scatter([c.location for c in contacts], color=svgplot.BLACK, r=4)
    if sings:
        plot.scatter([s.location for s in sings], color=svgplot.RED, r=4)
    return plot


# ------------------------------------------------------------- the commands

def _cmd_analyze(cfg, out, say):
    model = cfg.build_model()
    window = cfg.window or _DEFAULT_WINDOW
    res = cfg.raw.get("resolution", 96)
    curve = trace_critical_curve(model, window, res)
    contacts = find_contact_points(model, curve)
    sings = find_N_singularities(model, window)

    rows = []
    for bi, b in enumerate(curve.branches):
        for i, (p, lam) in enumerate(zip(b.points, b.lam)):
            rows.append((bi, i, p[0], p[1], lam, b.stability))
    write_csv(os.path.join(out, "critical_curve.csv"),
              ["branch", "index", "x", "y", "lambda", "stability"], rows)

    jump = {"jump_off": "off", "jump_on": "on", "none": "none"}
    write_csv(os.path.join(out, "contact_points.csv"),
              ["x", "y", "order", "regular", "jump"],
              [(c.location[0], c.location[1], c.order, c.regular,
                jump[c.jump_class]) for c in contacts])
    write_csv(os.path.join(out, "n_singularities.csv"),
              ["x", "y", "trace", "det", "kind"],
              [(s.location[0], s.location[1], s.trace, s.det, s.kind)
               for s in sings])
    _phase_portrait(model, curve, contacts, sings).write(
        os.path.join(out, "phase_portrait.svg"))
    say(f"{len(contacts)} contact point(s), {len(sings)} N-singularit"
        f"{'y' if len(sings) == 1 else 'ies'}; wrote 3 csv + 1 svg to {out}")


def _cmd_cycle(cfg, out, say):
    model = cfg.build_model()
    window = cfg.window or _DEFAULT_WINDOW
    res = cfg.raw.get("resolution", 96)
    sing = build_singular_cycle(model, window=window, resolution=res)

    rows = [("layer", t, p[0], p[1])
            for t, p in zip(sing.layer_arc.times, sing.layer_arc.states)]
    rows += [("reduced", t, p[0], p[1])
             for t, p in zip(sing.reduced_arc.times, sing.reduced_arc.points)]
    write_csv(os.path.join(out, "singular_cycle.csv"),
              ["segment", "t", "x", "y"], rows)
    write_csv(os.path.join(out, "singular_cycle_summary.csv"),
              ["key", "value"],
              [("F_x", sing.F.location[0]), ("F_y", sing.F.location[1]),
               ("L_F_x", sing.L_F[0]), ("L_F_y", sing.L_F[1]),
               ("time_desing", sing.reduced_arc.time_desing),
               ("time_reduced", sing.reduced_arc.time_reduced)]
              + sorted(sing.assumptions_report.items()))

    curve = trace_critical_curve(model, window, res)
    contacts = find_contact_points(model, curve)
    sings = find_N_singularities(model, window)
    plot = _phase_portrait(model, curve, contacts, sings,
                           extra=sing.polyline())
    plot.scatter([sing.L_F], color=svgplot.BLUE, r=4)
    plot.write(os.path.join(out, "singular_cycle.svg"))
    say(f"singular cycle: F=({sing.F.location[0]:.6g}, "
        f"{sing.F.location[1]:.6g}), L(F)=({sing.L_F[0]:.6g}, "
        f"{sing.L_F[1]:.6g}); wrote 2 csv + 1 svg to {out}")


def _section_from_config(cfg):
    blk = cfg.block("section")
    if not blk:
        return None
    for key in ("base", "direction", "half_width"):
        if key not in blk:
            raise ConfigError(f"section block requires '{key}'")
    return PoincareSection(np.asarray(blk["base"], float),
                           np.asarray(blk["direction"], float),
                           float(blk["half_width"]),
                           int(blk.get("orientation", 1)))


def _cmd_simulate(cfg, out, say):
    model = cfg.build_model()
    eps = cfg.eps
    if eps is None:
        raise ConfigError("command 'simulate' requires a scalar 'eps'")
    tol = cfg.tolerances.get("cycle", 1e-11)

    blk = cfg.block("simulate")
    if "initial" in blk:
        z0 = np.asarray(blk["initial"], float)
        t_span = float(blk.get("t_span", 100.0))
        traj = integrate(model, z0, eps,
                         (0.0, t_span),
                         tol=cfg.tolerances.get("integrate", 1e-9),
                         record="points")
        write_csv(os.path.join(out, "trajectory.csv"), ["t", "x", "y"],
                  [(t, p[0], p[1]) for t, p in zip(traj.times, traj.states)])
        say(f"trajectory: {traj.n_steps} steps to t={traj.t_end:g}")

    cyc = find_limit_cycle(model, eps, section=_section_from_config(cfg),
                           tol=tol,
                           measure_tol=cfg.tolerances.get("measure"))
    write_csv(os.path.join(out, "limit_cycle.csv"), ["t", "x", "y", "speed"],
              [(t, p[0], p[1], s) for t, p, s in
               zip(cyc.times, cyc.samples[:-1], cyc.speeds)])
    write_csv(os.path.join(out, "limit_cycle_summary.csv"), ["key", "value"],
              [("eps", cyc.eps),
               ("period_desing", cyc.period_desing),
               ("period_physical", cyc.period_physical),
               ("floquet_exponent", cyc.floquet_exponent),
               ("log_multiplier", cyc.log_multiplier),
               ("strokes", cyc.strokes),
               ("return_residual", cyc.return_residual),
               ("x_min", cyc.amplitude["x"][0]), ("x_max", cyc.amplitude["x"][1]),
               ("y_min", cyc.amplitude["y"][0]), ("y_max", cyc.amplitude["y"][1])])

    window = cfg.window or _DEFAULT_WINDOW
    curve = trace_critical_curve(model, window, cfg.raw.get("resolution", 96))
    sings = find_N_singularities(model, window)
    plot = _phase_portrait(model, curve, [], sings, extra=cyc.samples)
    plot.write(os.path.join(out, "limit_cycle.svg"))

    trace = svgplot.SvgPlot(title=f"{model.name} at eps={eps:g}",
                            xlabel="t (desingularised)", ylabel="x, y")
    trace.polyline(np.column_stack([cyc.times, cyc.samples[:-1, 0]]),
                   color=svgplot.BLUE, width=1.5)
    trace.polyline(np.column_stack([cyc.times, cyc.samples[:-1, 1]]),
                   color=svgplot.ORANGE, width=1.5)
    trace.write(os.path.join(out, "time_trace.svg"))
    say(f"limit cycle at eps={eps:g}: period={cyc.period_desing:.10g} "
        f"(physical {cyc.period_physical:.10g}), "
        f"floquet={cyc.floquet_exponent:.6g}, strokes={cyc.strokes}")


def _cmd_scale(cfg, out, say):
    model = cfg.build_model()
    if cfg.eps_values is None or len(cfg.eps_values) < 2:
        raise ConfigError("command 'scale' requires an eps ladder "
                          "{min, max, count}")
    blk = cfg.block("scale")
    rep = epsilon_scaling_report(model, cfg.eps_values,
                                 rho=float(blk.get("rho", 0.1)),
                                 tol=cfg.tolerances.get("cycle", 1e-11),
                                 cycles=bool(blk.get("cycles", True)))
    ex = rep.extras
    rows = []
    for i, e in enumerate(rep.eps_values):
        rows.append((e, rep.offsets[i], ex["y_layer"][i], ex["y_slow"][i],
                     rep.floquet[i], rep.hausdorff[i], rep.slow_dist[i],
                     ex["period_desing"][i], ex["period_physical"][i],
                     ex["strokes"][i], rep.notes.get(float(e), "")))
    write_csv(os.path.join(out, "scaling_report.csv"),
              ["eps", "offset", "y_layer", "y_slow", "floquet", "hausdorff",
               "slow_dist", "period_desing", "period_physical", "strokes",
               "note"], rows)

    fit_rows = [(name, s, h) for name, (s, h) in sorted(rep.fits.items())]
    if rep.empirical_K is not None:
        fit_rows.append(("empirical_K", rep.empirical_K, ""))
    if rep.hausdorff_decreasing is not None:
        fit_rows.append(("hausdorff_decreasing", rep.hausdorff_decreasing, ""))
    write_csv(os.path.join(out, "scaling_fits.csv"),
              ["quantity", "value", "ci_half_width"], fit_rows)

    plot = svgplot.SvgPlot(title=f"{model.name}: exit offset vs eps",
                           xlabel="eps", ylabel="|y_s - y_l|",
                           xlog=True, ylog=True)
    good = np.isfinite(rep.offsets)
    if np.any(good):
        pts = np.column_stack([rep.eps_values[good], rep.offsets[good]])
        plot.scatter(pts, color=svgplot.BLUE, r=4)
        if "offset" in rep.fits:
            s, _ = rep.fits["offset"]
            anchor = pts[-1]
            line = [(e, anchor[1] * (e / anchor[0]) ** s)
                    for e in rep.eps_values[good]]
            plot.polyline(line, color=svgplot.GRAY, width=1.0, dashed=True)
    plot.write(os.path.join(out, "scaling_loglog.svg"))

    for name, (s, h) in sorted(rep.fits.items()):
        say(f"fit {name}: slope {s:.4f} +- {h:.4f}")
    if rep.empirical_K is not None:
        say(f"empirical K = median(-floquet * eps) = {rep.empirical_K:.4f}")
    for e, msg in sorted(rep.notes.items()):
        say(f"note eps={e:g}: {msg}")


def _cmd_regimes(cfg, out, say):
    blk = cfg.block("regimes")
    v0_values = _require(cfg, "regimes", "v0_values")
    kw = {k: blk[k] for k in ("delta", "mu_s", "a1", "a3", "amplitude_floor",
                              "dwell_threshold") if k in blk}
    if "eps" in blk:
        kw["eps"] = blk["eps"]
    elif cfg.eps is not None:
        kw["eps"] = cfg.eps
    rm = stickslip_regime_sweep(v0_values, **kw)

    rows = []
    for v0, label in zip(rm.axes["v0"], rm.labels):
        d = rm.details.get(float(v0), {})
        rows.append((v0, label, d.get("trace"), d.get("amplitude"),
                     d.get("dwell"), d.get("period"),
                     rm.notes.get(float(v0), "")))
    write_csv(os.path.join(out, "regimes.csv"),
              ["v0", "label", "trace", "amplitude", "dwell", "period",
               "note"], rows)
    v_ss = rm.v_ss_bracket or (None, None)
    write_csv(os.path.join(out, "regimes_summary.csv"), ["key", "value"],
              [("v_m_analytic", rm.v_m_analytic),
               ("v_m_empirical", rm.v_m_empirical),
               ("v_ss_bracket_lo", v_ss[0]), ("v_ss_bracket_hi", v_ss[1]),
               ("thomsen_comparison", rm.thomsen_comparison)])

    colors = {"stick_slip": svgplot.ORANGE, "pure_slip": svgplot.BLUE,
              "steady_sliding": svgplot.GREEN, None: svgplot.GRAY}
    plot = svgplot.SvgPlot(title="friction oscillator regimes",
                           xlabel="v0", ylabel="cycle amplitude")
    for v0, label in zip(rm.axes["v0"], rm.labels):
        amp = rm.details.get(float(v0), {}).get("amplitude", 0.0) or 0.0
        plot.scatter([(v0, amp)], color=colors[label], r=5)
    if rm.v_m_analytic is not None:
        plot.vline(rm.v_m_analytic, color=svgplot.RED)
    plot.write(os.path.join(out, "regimes.svg"))

    say("labels: " + ", ".join(f"{v:g}:{l}" for v, l in
                               zip(rm.axes["v0"], rm.labels)))
    say(f"v_m analytic {rm.v_m_analytic:.6g}, empirical "
        f"{rm.v_m_empirical if rm.v_m_empirical is None else round(rm.v_m_empirical, 6)}")
    if rm.v_ss_bracket:
        say(f"v_ss in ({rm.v_ss_bracket[0]:g}, {rm.v_ss_bracket[1]:g}); "
            f"smooth-friction estimate sqrt(4/5) v_m = "
            f"{rm.thomsen_comparison:.6g} (comparison only)")


def _cmd_strokes(cfg, out, say):
    eps_values = _require(cfg, "strokes", "eps_values")
    delta_values = _require(cfg, "strokes", "delta_values")
    base = cfg.block("strokes").get("base_params")
    rm = stroke_phase_diagram(eps_values, delta_values, base_params=base)

    rows = []
    for i, e in enumerate(rm.axes["eps"]):
        for j, d in enumerate(rm.axes["delta"]):
            det = rm.details.get((float(e), float(d)), {})
            rows.append((e, d, rm.labels[i, j], det.get("period_desing"),
                         rm.notes.get((float(e), float(d)), "")))
    write_csv(os.path.join(out, "phase_diagram.csv"),
              ["eps", "delta", "strokes", "period_desing", "note"], rows)

    colors = {2: svgplot.BLUE, 4: svgplot.ORANGE, None: svgplot.GRAY}
    plot = svgplot.SvgPlot(title="stroke count over (eps, delta)",
                           xlabel="delta", ylabel="eps", xlog=True, ylog=True)
    ev = np.asarray(rm.axes["eps"], float)
    dv = np.asarray(rm.axes["delta"], float)

    def edges(vals):
        v = np.sort(vals)
        if len(v) == 1:
            return np.array([v[0] / 2, v[0] * 2])
        r = np.sqrt(v[1:] / v[:-1])
        return np.concatenate([[v[0] / r[0]], v[:-1] * r, [v[-1] * r[-1]]])

    ee, de = edges(ev), edges(dv)
    ei = np.argsort(ev)
    di = np.argsort(dv)
    for a, i in enumerate(ei):
        for b, j in enumerate(di):
            lab = rm.labels[i, j]
            plot.cell(de[b], de[b + 1], ee[a], ee[a + 1],
                      colors.get(lab, svgplot.GRAY),
                      label="" if lab is None else str(lab))
    plot.write(os.path.join(out, "phase_diagram.svg"))
    say("strokes by (eps, delta): " + "; ".join(
        f"({e:g},{d:g})={rm.labels[i, j]}"
        for i, e in enumerate(rm.axes["eps"])
        for j, d in enumerate(rm.axes["delta"])))


def _cmd_riccati(cfg, out, say):
    blk = cfg.block("riccati")
    a0 = float(blk.get("a0", 1.0))
    b1 = float(blk.get("b1", 2.0))
    d0 = float(blk.get("d0", 1.0))
    span = tuple(blk.get("x2_span", (-40.0, 40.0)))
    n = int(blk.get("samples", 801))
    prob = RiccatiProblem(a0, b1, d0, x2_span=span)
    grid = np.linspace(span[0], span[1], n)
    zeta = riccati_special_solution(prob, grid)
    write_csv(os.path.join(out, "riccati.csv"), ["x2", "zeta"],
              list(zip(grid, zeta)))

    om = omega0_constant()
    target = (2.0 * d0 ** 2 / (a0 * b1)) ** (1.0 / 3.0) * om
    rows = [("a0", a0), ("b1", b1), ("d0", d0),
            ("omega0", om),
            ("left_tail_decay", left_tail_decay(prob)),
            ("right_tail_constant", right_tail_constant(prob)),
            ("right_tail_target", target)]
    if "delta" in blk:
        rows.append(("exit_prediction",
                     k2_exit_prediction(prob, float(blk["delta"]))))
    write_csv(os.path.join(out, "riccati_summary.csv"), ["key", "value"], rows)

    plot = svgplot.SvgPlot(title="Riccati transition solution",
                           xlabel="x2", ylabel="zeta")
    plot.polyline(np.column_stack([grid, zeta]), color=svgplot.BLUE, width=1.8)
    asym = (b1 / (2 * a0)) * grid ** 2 - (2 * d0 / b1) / np.where(grid == 0, np.nan, grid) + target
    right = grid > 0.5
    plot.polyline(np.column_stack([grid[right], asym[right]]),
                  color=svgplot.GRAY, width=1.0, dashed=True)
    plot.write(os.path.join(out, "riccati.svg"))
    say(f"omega0={om:.12f}, right tail constant "
        f"{right_tail_constant(prob):.8f} (predicted {target:.8f})")


def _cmd_list_models(cfg, out, say):
    print(f"{'model':<15} parameters")
    for name in MODEL_NAMES:
        print(f"{name:<15} {_MODEL_PARAMS[name]}")


_COMMANDS = {
    "analyze": _cmd_analyze,
    "cycle": _cmd_cycle,
    "simulate": _cmd_simulate,
    "scale": _cmd_scale,
    "regimes": _cmd_regimes,
    "strokes": _cmd_strokes,
    "riccati": _cmd_riccati,
    "list-models": _cmd_list_models,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gspt",
        description="Two-stroke relaxation oscillation analysis for planar "
                    "slow-fast systems without a global slow/fast variable "
                    "split.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--eps", type=float, help="override config eps")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    args = parser.parse_args(argv)

    try:
        if args.config is None:
            if args.command != "list-models":
                raise ConfigError(
                    f"command '{args.command}' requires --config")
            cfg = None
        else:
            cfg = load_config(args.config, args.command)
            if args.eps is not None:
                if args.eps <= 0:
                    raise ConfigError(f"--eps must be positive, got {args.eps}")
                cfg.eps = args.eps
                cfg.eps_values = np.array([args.eps])
            if args.out:
                cfg.out = args.out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = (cfg.out if cfg else None) or "gspt_out"
    say = _Reporter(args.quiet)
    try:
        if args.command != "list-models":
            os.makedirs(out, exist_ok=True)
        _COMMANDS[args.command](cfg, out, say)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GsptError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
