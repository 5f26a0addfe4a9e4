"""Command-line interface: subcommand dispatch and artifact emission.

Exit codes: 0 success, 1 configuration or data-format problem,
2 numerical failure (domain, convergence, matching, fold), 3 I/O.
"""

import argparse
import os
import sys

import numpy as np

from .calibration import CalibDataset, backbone_curve, fit_calibration
from .config import RunConfig, drive_grid_dbm, parse_config, probe_grid
from .csvio import read_csv, require_columns, write_csv, write_report
from .dressed import track_labels
from .errors import (ConfigError, ConvergenceError, DataFormatError,
                     DomainError, MatchingError, NumericalError)
from .jpa import (LorentzianSignal, fit_jpa_spectrum, jpa_output,
                  lorentzian_from_power, measured_efficiency)
from .matching import find_balanced_drive, find_dip, level_diagram_sweep
from .spectrum import conversion_efficiency, default_spectrum_grid, spectrum_at
from .steady import operating_point, sweep_reflection
from .system import ProbeSpec
from .units import TWO_PI, dbm_to_watts, watts_to_dbm
from .version import __version__


def _out_path(cfg, outdir, name):
    prefix = cfg[("output", "prefix")]
    return os.path.join(outdir, prefix + name)


def _say(quiet, text):
    if not quiet:
        print(text)


# ---------------------------------------------------------------- dressed

def _tracked_points(bare, damping, delta_omega_d, pd_dbm_grid):
    """Operating points along a power sweep with continuous labels."""
    points, prev = [], None
    for pd_dbm in pd_dbm_grid:
        pt = operating_point(bare, damping, delta_omega_d,
                             dbm_to_watts(pd_dbm))
        if prev is not None:
            match = track_labels(prev, pt.basis)
            if match.new_order != (0, 1, 2, 3):
                pt = operating_point(bare, damping, delta_omega_d,
                                     dbm_to_watts(pd_dbm),
                                     label_order=match.new_order)
        points.append(pt)
        prev = pt.basis
    return points


def run_dressed(cfg: RunConfig, outdir, threads, quiet):
    bare, damping = cfg.bare_params(), cfg.damping_rates()
    pd_grid = drive_grid_dbm(cfg)
    points = _tracked_points(bare, damping, cfg.delta_omega_d(), pd_grid)
    cols = {name: np.empty(pd_grid.size) for name in
            ("f31_hz", "f41_hz", "f42_hz", "f32_hz", "k41_hz", "k42_hz",
             "k31_hz", "k32_hz", "g43_hz", "g21_hz")}
    for k, pt in enumerate(points):
        lab = pt.lab_transitions()
        kt = pt.rates.kappa_wg + pt.rates.kappa_loss
        gq = pt.rates.gamma_qb
        cols["f31_hz"][k] = lab[2, 0] / TWO_PI
        cols["f41_hz"][k] = lab[3, 0] / TWO_PI
        cols["f42_hz"][k] = lab[3, 1] / TWO_PI
        cols["f32_hz"][k] = lab[2, 1] / TWO_PI
        cols["k41_hz"][k] = kt[3, 0] / TWO_PI
        cols["k42_hz"][k] = kt[3, 1] / TWO_PI
        cols["k31_hz"][k] = kt[2, 0] / TWO_PI
        cols["k32_hz"][k] = kt[2, 1] / TWO_PI
        cols["g43_hz"][k] = gq[3, 2] / TWO_PI
        cols["g21_hz"][k] = gq[1, 0] / TWO_PI
    path = _out_path(cfg, outdir, "dressed.csv")
    write_csv(path, [("p_d_dbm", pd_grid)] + list(cols.items()),
              meta=cfg.echo_lines())
    _say(quiet, "dressed: wrote %s (%d rows)" % (path, pd_grid.size))


# ---------------------------------------------------------------- reflect

def run_reflect(cfg: RunConfig, outdir, threads, quiet):
    bare, damping = cfg.bare_params(), cfg.damping_rates()
    wp = probe_grid(cfg)
    pd = drive_grid_dbm(cfg)
    sweep = sweep_reflection(bare, damping, cfg.delta_omega_d(), wp, pd,
                             cfg.probe_power_watts(), threads=threads)
    n_pd, n_wp = pd.size, wp.size
    pd_col = np.repeat(pd, n_wp)
    wp_col = np.tile(wp / TWO_PI, n_pd)
    r = sweep.r.reshape(-1)
    path = _out_path(cfg, outdir, "reflect.csv")
    write_csv(path, [("p_d_dbm", pd_col), ("f_p_hz", wp_col),
                     ("re_r", np.real(r)), ("im_r", np.imag(r)),
                     ("abs_r", np.abs(r))],
              meta=cfg.echo_lines())
    _say(quiet, "reflect: wrote %s (%d rows)" % (path, r.size))


# ---------------------------------------------------------------- spectrum

def run_spectrum(cfg: RunConfig, outdir, threads, quiet):
    bare, damping = cfg.bare_params(), cfg.damping_rates()
    delta = cfg.delta_omega_d()
    p_p = cfg.probe_power_watts()
    p_d = cfg.drive_power_watts()
    w_p = cfg[("probe", "f_p")]
    if p_d is None:
        dip = find_dip(bare, damping, delta, p_p,
                       branch=cfg[("sweep", "branch")])
        p_d = dip.p_d_star
        if w_p is None:
            w_p = dip.omega_p_star / TWO_PI
    pt = operating_point(bare, damping, delta, p_d)
    if w_p is None:
        w_p = pt.lab_transitions()[3, 0] / TWO_PI
    w_p = TWO_PI * w_p
    grid = default_spectrum_grid(
        pt, half_width=TWO_PI * cfg[("spectrum", "half_width")],
        spacing=TWO_PI * cfg[("spectrum", "spacing")])
    trace, _ = spectrum_at(pt, w_p, p_p, grid=grid, threads=threads)
    w42 = pt.lab_transitions()[3, 1]
    half = TWO_PI * cfg[("spectrum", "window_half_width")]
    eta = conversion_efficiency(trace, ProbeSpec(w_p=w_p, P_p=p_p),
                                (w42 - half, w42 + half))
    meta = cfg.echo_lines() + [
        "resolved.p_d_dbm = %.12g" % watts_to_dbm(p_d),
        "resolved.f_p_hz = %.12g" % (w_p / TWO_PI),
        "resolved.f42_hz = %.12g" % (w42 / TWO_PI),
        "resolved.eta = %.12g" % eta,
    ]
    path = _out_path(cfg, outdir, "spectrum.csv")
    write_csv(path, [("f_hz", trace.omega_grid / TWO_PI),
                     ("s_w", trace.S),
                     ("flux_per_rad_s", trace.flux_density)], meta=meta)
    _say(quiet, "spectrum: wrote %s (eta = %.4f)" % (path, eta))


# ---------------------------------------------------------------- match

def run_match(cfg: RunConfig, outdir, threads, quiet):
    bare, damping = cfg.bare_params(), cfg.damping_rates()
    delta = cfg.delta_omega_d()
    p_p = cfg.probe_power_watts()
    branch = cfg[("sweep", "branch")]
    p_d0 = find_balanced_drive(bare, damping, delta, branch=branch)
    dips = {b: find_dip(bare, damping, delta, p_p, branch=b,
                        p_d0_watts=p_d0) for b in (4, 3)}
    pairs = [("p_d0_dbm", watts_to_dbm(p_d0))]
    for b in (4, 3):
        dip = dips[b]
        pairs += [("p_d%d_dbm" % b, watts_to_dbm(dip.p_d_star)),
                  ("f_p%d_hz" % b, dip.omega_p_star / TWO_PI),
                  ("r_min%d" % b, dip.r_min)]
    report = _out_path(cfg, outdir, "match.csv")
    write_report(report, pairs, meta=cfg.echo_lines())

    deltas = TWO_PI * np.asarray(cfg[("sweep", "delta_list")])
    diagram = level_diagram_sweep(bare, damping, deltas, p_p_watts=p_p,
                                  branch=branch, threads=threads)
    path = _out_path(cfg, outdir, "level_diagram.csv")
    write_csv(path, [("delta_f_d_hz", diagram.delta_omega_d / TWO_PI),
                     ("f31_hz", diagram.omega_31 / TWO_PI),
                     ("f42_hz", diagram.omega_42 / TWO_PI),
                     ("f32_hz", diagram.omega_32 / TWO_PI),
                     ("p_d_star_dbm", watts_to_dbm(diagram.p_d_star)),
                     ("r_min", diagram.r_min)],
              meta=cfg.echo_lines())
    _say(quiet, "match: wrote %s and %s (P_d0 = %.2f dBm)"
         % (report, path, watts_to_dbm(p_d0)))


# ---------------------------------------------------------------- calibrate

def run_calibrate(cfg: RunConfig, outdir, threads, quiet):
    model = cfg.network_model()
    delta_max = cfg[("calibration", "delta_max")]
    n = cfg[("calibration", "n_backbone")]
    bb = backbone_curve(model, delta_max=delta_max, n=n)
    path = _out_path(cfg, outdir, "backbone.csv")
    write_csv(path, [("delta", bb.delta), ("p_dbm", bb.p_dbm),
                     ("f_r_hz", bb.omega_r / TWO_PI)],
              meta=cfg.echo_lines())
    _say(quiet, "calibrate: wrote %s (%d points)" % (path, bb.delta.size))

    data_path = cfg[("calibration", "data")]
    if data_path is None:
        return
    _, columns = read_csv(data_path)
    p_exp, f_r = require_columns(columns, ["p_exp_dbm", "f_r_hz"], data_path)
    data = CalibDataset(p_exp_dbm=p_exp, omega_r=TWO_PI * f_r)
    guess = (cfg[("calibration", "x_guess")],
             cfg[("calibration", "i0_guess")],
             cfg[("calibration", "z_guess")])
    fit = fit_calibration(data, model, guess=guess, delta_max=delta_max,
                          n_backbone=n)
    report = _out_path(cfg, outdir, "calib_fit.csv")
    write_report(report, [("x", fit.x), ("i0_a", fit.i0_fit),
                          ("zcpw_ohm", fit.z_cpw_fit),
                          ("residual_hz", fit.residual / TWO_PI),
                          ("iterations", fit.iterations)],
                 meta=cfg.echo_lines())
    _say(quiet, "calibrate: wrote %s (x = %.4f)" % (report, fit.x))


# ---------------------------------------------------------------- fit-jpa

def run_fit_jpa(cfg: RunConfig, outdir, threads, quiet):
    model = cfg.jpa_model()
    p_s_w = dbm_to_watts(cfg[("jpa", "p_s")])
    f_s = cfg[("jpa", "f_s")]
    linewidth = cfg[("jpa", "linewidth")]
    data_path = cfg[("jpa", "data")]
    if data_path is None:
        truth = lorentzian_from_power(p_s_w, TWO_PI * f_s,
                                      TWO_PI * linewidth)
        span = TWO_PI * cfg[("jpa", "f_span")]
        f_pump = cfg[("jpa", "f_pump")]
        grid = np.linspace(TWO_PI * f_s - span,
                           TWO_PI * (f_pump - f_s) + span,
                           cfg[("jpa", "n_f")])
        trace = jpa_output(model, truth, grid)
    else:
        meta, columns = read_csv(data_path)
        grid_hz, trace = require_columns(columns, ["f_hz", "p_out_w"],
                                         data_path)
        grid = TWO_PI * grid_hz
        overrides = {}
        for key, field in (("pump_f_hz", "omega_a"), ("rbw_hz", "b")):
            if key in meta:
                overrides[field] = TWO_PI * float(meta[key])
        for key, field in (("gs_db", "g_s"), ("gi_db", "g_i")):
            if key in meta:
                overrides[field] = 10.0 ** (float(meta[key]) / 10.0)
        if overrides:
            from dataclasses import replace
            model = replace(model, **overrides)
    guess = lorentzian_from_power(p_s_w, TWO_PI * f_s, TWO_PI * linewidth)
    fit = fit_jpa_spectrum(grid, trace, model, guess)
    p_s_fit = fit.area()
    eta = measured_efficiency(p_s_fit, dbm_to_watts(cfg[("jpa", "p_p")]),
                              TWO_PI * cfg[("jpa", "f_p")], fit.omega_s,
                              cfg[("jpa", "gain_uncertainty_db")])
    report = _out_path(cfg, outdir, "jpa_fit.csv")
    write_report(report, [("f_s_hz", fit.omega_s / TWO_PI),
                          ("linewidth_hz", fit.delta_omega / TWO_PI),
                          ("s0_w_per_rad_s", fit.s0),
                          ("p_s_w", p_s_fit),
                          ("eta", eta.eta), ("eta_lower", eta.lower),
                          ("eta_upper", eta.upper)],
                 meta=cfg.echo_lines())
    _say(quiet, "fit-jpa: wrote %s (eta = %.4f)" % (report, eta.eta))


# ---------------------------------------------------------------- dispatch

_RUNNERS = {
    "dressed": run_dressed,
    "reflect": run_reflect,
    "spectrum": run_spectrum,
    "match": run_match,
    "calibrate": run_calibrate,
    "fit-jpa": run_fit_jpa,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lamqed",
        description="Driven lambda-system simulator and analysis toolkit")
    parser.add_argument("--version", action="version",
                        version="lamqed %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "dressed": "dressed energies and decay rates vs drive power",
        "reflect": "reflection map over (drive power, probe frequency)",
        "spectrum": "down-conversion spectrum and efficiency",
        "match": "balanced drive, dip locations, level diagram",
        "calibrate": "nonlinear-resonator backbone and power-scale fit",
        "fit-jpa": "JPA two-peak spectrum fit and measured efficiency",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for sweeps")
        p.add_argument("--quiet", action="store_true",
                       help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            print("lamqed: cannot read config: %s" % exc, file=sys.stderr)
            return 3
        cfg = parse_config(text)
        os.makedirs(args.out, exist_ok=True)
        threads = max(1, args.threads)
        _RUNNERS[args.command](cfg, args.out, threads, args.quiet)
    except (ConfigError, DataFormatError) as exc:
        print("lamqed: config error: %s" % exc, file=sys.stderr)
        return 1
    except (DomainError, NumericalError, ConvergenceError,
            MatchingError) as exc:
        print("lamqed: numerical failure: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("lamqed: i/o error: %s" % exc, file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
