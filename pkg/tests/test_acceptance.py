"""Acceptance suite: the deliverable's headline numbers and invariants.

Each test pins one promised behavior at its stated tolerance.  Three
assertions record targets the implemented model cannot reach; they fail
with the measured value in the message rather than being weakened:

* test_c02_balanced_power_value -- the rate-balancing drive power comes
  out at -80.18 dBm, just outside the -80.6 +/- 0.3 dBm window.
* test_c04_weak_drive_full_reflection -- with the drive off the cavity
  line still dips to (kappa1-kappa2)/(kappa1+kappa2) = 0.90 < 0.95
  inside the probe band (consistent with test_c05).
* test_c06_weak_probe_efficiency -- internal loss and qubit decay cap
  the weak-probe efficiency near 0.888, short of 0.95 +/- 5%.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import balanced_drive_power_closed_form, lindblad_steady_state
from lamqed.calibration import (CalibDataset, NetworkModel, abcd_chain,
                                backbone_curve, fit_calibration,
                                model_resonances, s11)
from lamqed.jpa import (JpaModel, fit_jpa_spectrum, jpa_output,
                        lorentzian_from_power, measured_efficiency)
from lamqed.matching import find_balanced_drive, find_dip, level_diagram_sweep
from lamqed.spectrum import conversion_efficiency, spectrum_at
from lamqed.steady import (operating_point, reflection_at, solve_harmonics,
                           sweep_reflection)
from lamqed.system import DampingRates, ProbeSpec
from lamqed.units import TWO_PI, dbm_to_watts, watts_to_dbm

MHZ = TWO_PI * 1e6
GHZ = TWO_PI * 1e9
DELTA64 = -64.0 * MHZ
P_PROBE = dbm_to_watts(-146.2)


@pytest.fixture(scope="module")
def dip4(bare, damping):
    return find_dip(bare, damping, DELTA64, P_PROBE, branch=4)


@pytest.fixture(scope="module")
def matched_point(bare, damping, dip4):
    return operating_point(bare, damping, DELTA64, dip4.p_d_star)


@pytest.fixture(scope="module")
def matched_trace(matched_point, dip4):
    return spectrum_at(matched_point, dip4.omega_p_star, P_PROBE)


def _eta(trace, probe, point):
    w42 = point.lab_transitions()[3, 1]
    return conversion_efficiency(trace, probe,
                                 (w42 - 30.0 * MHZ, w42 + 30.0 * MHZ))


# ----------------------------------------------------------- C1

def test_c01_renormalized_frequencies(ren):
    assert abs(ren.w_ge / TWO_PI - 5.461e9) <= 1e6
    assert abs(ren.w_r / TWO_PI - 10.678e9) <= 1e6
    assert abs(2.0 * ren.chi / TWO_PI - 0.080e9) <= 1e6


# ----------------------------------------------------------- C2

def test_c02_rates_balanced_at_p_d0(bare, damping):
    p_d0 = find_balanced_drive(bare, damping, DELTA64, branch=4)
    pt = operating_point(bare, damping, DELTA64, p_d0)
    kt = pt.rates.kappa_wg + pt.rates.kappa_loss
    assert abs(kt[3, 0] - kt[3, 1]) <= 1e-3 * damping.kappa1
    assert abs(kt[2, 0] - kt[2, 1]) <= 1e-3 * damping.kappa1


def test_c02_balanced_power_value(bare, damping):
    p_d0_dbm = watts_to_dbm(find_balanced_drive(bare, damping, DELTA64,
                                                branch=4))
    assert abs(p_d0_dbm - (-80.6)) <= 0.3, (
        "balanced-rate drive power P_d0 = %.2f dBm; target window is "
        "-80.6 +/- 0.3 dBm (model value sits 0.12 dB above it)" % p_d0_dbm)


# ----------------------------------------------------------- C3

def test_c03_matching_dip_on_grid(bare, damping):
    wp = TWO_PI * np.linspace(10.664e9, 10.700e9, 73)
    pd = np.linspace(-90.0, -70.0, 41)
    res = sweep_reflection(bare, damping, DELTA64, wp, pd, P_PROBE,
                           threads=4)
    absr = np.abs(res.r)
    i, j = np.unravel_index(np.argmin(absr), absr.shape)
    assert absr[i, j] <= 0.1
    assert abs(wp[j] / TWO_PI - 10.681e9) <= 5e6
    assert abs(pd[i] - (-84.0)) <= 2.0


def test_c03_second_branch_tracks_31(bare, damping):
    dip3 = find_dip(bare, damping, DELTA64, P_PROBE, branch=3)
    assert abs(watts_to_dbm(dip3.p_d_star) - (-77.0)) <= 2.0
    assert dip3.r_min <= 0.1
    pt = operating_point(bare, damping, DELTA64, dip3.p_d_star)
    w31 = pt.lab_transitions()[2, 0]
    assert abs(dip3.omega_p_star - w31) <= damping.kappa1 + damping.kappa2


# ----------------------------------------------------------- C4

def test_c04_weak_drive_full_reflection(bare, damping):
    wp = TWO_PI * np.linspace(10.664e9, 10.700e9, 73)
    pd = np.array([-100.0, -92.0])
    res = sweep_reflection(bare, damping, DELTA64, wp, pd, P_PROBE)
    r_floor = float(np.min(np.abs(res.r)))
    assert r_floor > 0.95, (
        "min |r| over the probe band at P_d < -90 dBm is %.3f: just below "
        "-90 dBm the dressed dips are still partially developed (|r| ~ 0.6 "
        "at -92 dBm), and even in the P_d -> 0 limit the undriven cavity "
        "line keeps a (kappa1-kappa2)/(kappa1+kappa2) = 0.90 dip inside "
        "the band (cf. test_c05), so full reflection > 0.95 cannot hold"
        % r_floor)


# ----------------------------------------------------------- C5

def test_c05_undriven_matches_one_port_closed_form(bare, damping):
    pt = operating_point(bare, damping, DELTA64, 0.0)
    w_res = pt.lab_transitions()[3, 0]
    r = reflection_at(pt, w_res, dbm_to_watts(-165.0), Q=3)
    target = (damping.kappa1 - damping.kappa2) / (damping.kappa1 +
                                                  damping.kappa2)
    assert target == pytest.approx(0.9, abs=1e-12)
    assert abs(abs(r) - target) < 1e-3


def test_c05_lossless_reflection_unimodular(bare, damping):
    lossless = DampingRates(kappa1=damping.kappa1, kappa2=0.0, gamma=0.0)
    pt = operating_point(bare, lossless, DELTA64, 0.0)
    w_res = pt.lab_transitions()[3, 0]
    p_p = dbm_to_watts(-200.0)
    for w_p in w_res + MHZ * np.array([-30.0, -8.0, 0.0, 3.0, 30.0]):
        r = reflection_at(pt, w_p, p_p, Q=3)
        assert abs(abs(r) - 1.0) < 1e-6


# ----------------------------------------------------------- C6

def test_c06_principal_peak_at_down_converted_line(matched_point,
                                                   matched_trace):
    trace, _ = matched_trace
    w42 = matched_point.lab_transitions()[3, 1]
    w_peak = trace.omega_grid[np.argmax(trace.S)]
    assert abs(w_peak - w42) < 2.0 * MHZ
    assert abs(w42 / TWO_PI - 10.615e9) < 5e6


def test_c06_efficiency_at_reference_probe_power(matched_point, matched_trace,
                                                 dip4):
    trace, _ = matched_trace
    probe = ProbeSpec(w_p=dip4.omega_p_star, P_p=P_PROBE)
    eta = _eta(trace, probe, matched_point)
    assert abs(eta - 0.677) <= 0.03


def test_c06_efficiency_strictly_decreasing(matched_point, matched_trace,
                                            dip4):
    trace_146, _ = matched_trace
    etas = []
    for dbm in (-156.2, -151.2):
        probe = ProbeSpec(w_p=dip4.omega_p_star, P_p=dbm_to_watts(dbm))
        trace, _ = spectrum_at(matched_point, probe.w_p, probe.P_p)
        etas.append(_eta(trace, probe, matched_point))
    probe_146 = ProbeSpec(w_p=dip4.omega_p_star, P_p=P_PROBE)
    etas.append(_eta(trace_146, probe_146, matched_point))
    assert etas[0] > etas[1] > etas[2]


def test_c06_weak_probe_efficiency(bare, damping, ren):
    p_d0 = balanced_drive_power_closed_form(ren, ren.w_ge + DELTA64,
                                            bare.gamma_c)
    p_p = dbm_to_watts(-176.2)
    best = (np.inf, None, None)
    for db_off in np.arange(-1.5, 0.01, 0.25):
        pt = operating_point(bare, damping, DELTA64,
                             p_d0 * 10.0 ** (db_off / 10.0))
        w41 = pt.lab_transitions()[3, 0]
        for f_off in np.arange(-3.0, 0.01, 0.25):
            w_p = w41 + f_off * 2.0 * MHZ
            r = abs(reflection_at(pt, w_p, p_p))
            if r < best[0]:
                best = (r, pt, w_p)
    r_min, pt, w_p = best
    assert r_min <= 0.05
    probe = ProbeSpec(w_p=w_p, P_p=p_p)
    trace, _ = spectrum_at(pt, probe.w_p, probe.P_p)
    eta = _eta(trace, probe, pt)
    assert abs(eta - 0.95) <= 0.05 * 0.95, (
        "weak-probe eta = %.4f: the kappa1/kappa = 0.95 capture limit is "
        "structurally out of reach because internal loss drains both "
        "dressed transitions (ceiling ~0.89 at the device rates)" % eta)


# ----------------------------------------------------------- C7

def test_c07_level_diagram_tunability(bare, damping):
    deltas = np.array([-76.0, -70.0, -64.0, -56.0, -48.0]) * MHZ
    # the diagram is defined at the level-diagram probe power (module
    # default), where the dip sits closest to the balanced-rate point
    ld = level_diagram_sweep(bare, damping, deltas, branch=4, threads=4)
    # deltas ascend so |delta| descends along the arrays
    assert np.all(np.diff(ld.omega_31) < 0)
    assert np.all(np.diff(ld.omega_42) > 0)
    assert ld.omega_32.max() - ld.omega_32.min() < 3.0 * MHZ
    i = 2  # delta_omega_d / 2 pi = -64 MHz
    assert abs(ld.omega_31[i] - 10.659e9 * TWO_PI) <= 5e6 * TWO_PI
    assert abs(ld.omega_42[i] - 10.615e9 * TWO_PI) <= 5e6 * TWO_PI
    assert abs(ld.omega_32[i] - 10.593e9 * TWO_PI) <= 5e6 * TWO_PI


# ----------------------------------------------------------- C8

def test_c08_steady_state_matches_nullspace_oracle(bare, damping):
    rng = np.random.default_rng(20260825)
    for _ in range(20):
        p_d = 10.0 ** rng.uniform(-13.5, -10.0)
        pt = operating_point(bare, damping, DELTA64, p_d)
        probe = ProbeSpec(w_p=pt.drive.w_d + 5.0 * GHZ, P_p=0.0)
        state = solve_harmonics(pt.coeffs, probe, pt.drive, Q=3)
        oracle = lindblad_steady_state(pt.basis, pt.rates)
        assert np.max(np.abs(state.s_q(0) - oracle)) < 1e-8


# ----------------------------------------------------------- C9

def test_c09_calibration_round_trip():
    truth = NetworkModel()  # I0 = 0.689 uA, Z_cpw = 52.1 ohm
    x_true = 0.998
    bb = backbone_curve(truth, delta_max=1.5, n=120)
    p_dev = np.linspace(bb.p_dbm[0] + 55.0, bb.p_dbm[-1] - 1.0, 12)
    p_exp = p_dev - 10.0 * np.log10(x_true)
    rng = np.random.default_rng(7)
    w = (model_resonances(truth, x_true, p_exp, delta_max=1.5, n=120)
         + TWO_PI * 10e3 * rng.standard_normal(p_exp.size))
    data = CalibDataset(p_exp_dbm=p_exp, omega_r=w)

    start = time.perf_counter()
    fit = fit_calibration(data, NetworkModel(), guess=(1.0, 0.7e-6, 50.0))
    assert time.perf_counter() - start < 120.0
    assert abs(fit.x - x_true) / x_true < 0.01
    assert abs(fit.i0_fit - truth.i0) / truth.i0 < 0.01
    assert abs(fit.z_cpw_fit - truth.z_cpw) / truth.z_cpw < 0.01

    # losslessness along and around the fitted backbone
    fitted = replace(NetworkModel(), i0=fit.i0_fit, z_cpw=fit.z_cpw_fit)
    omegas = TWO_PI * np.linspace(10.0e9, 11.0e9, 25)[:, None]
    amps = np.linspace(0.0, 1.5, 25)[None, :]
    for model in (truth, fitted):
        t = abcd_chain(model, omegas, amps)
        det = (t[..., 0, 0] * t[..., 1, 1] - t[..., 0, 1] * t[..., 1, 0])
        assert np.max(np.abs(det - 1.0)) <= 1e-9
        assert np.max(np.abs(np.abs(s11(model, omegas, amps)) - 1.0)) <= 1e-9


# ---------------------------------------------------------- C10

def test_c10_measured_efficiency_value():
    eta = measured_efficiency(1.77e-18, 10.0 ** (-17.62),
                              TWO_PI * 10.681e9, TWO_PI * 10.6157e9)
    assert abs(eta.eta - 0.742) <= 0.005
    assert 0.66 <= eta.eta <= 0.82  # inside the 74 +/- 8 % band


def test_c10_jpa_fit_round_trip():
    model = JpaModel(omega_a=TWO_PI * 2 * 10.6485e9, b=TWO_PI * 10e3,
                     g_s=10.0 ** 2.1, g_i=10.0 ** 2.1)
    truth = lorentzian_from_power(1.77e-18, TWO_PI * 10.6157e9,
                                  TWO_PI * 1.21e6)
    grid = np.linspace(TWO_PI * 10.60e9, TWO_PI * 10.70e9, 4001)
    rng = np.random.default_rng(19)
    p_out = jpa_output(model, truth, grid) * (
        1.0 + 0.01 * rng.standard_normal(grid.size))
    guess = lorentzian_from_power(1.3e-18, TWO_PI * 10.6162e9,
                                  TWO_PI * 1.5e6)
    fit = fit_jpa_spectrum(grid, p_out, model, guess)
    assert abs(fit.omega_s - truth.omega_s) <= 0.02 * truth.delta_omega
    assert abs(fit.delta_omega - truth.delta_omega) <= 0.02 * truth.delta_omega
    assert abs(fit.s0 - truth.s0) <= 0.02 * truth.s0
    assert abs(fit.area() - 1.77e-18) <= 0.02 * 1.77e-18


# ---------------------------------------------------------- C11

def test_c11_harmonic_state_invariants(matched_trace):
    _, state = matched_trace
    for q in range(-3, 4):
        herm = state.s_q(q) - np.conj(state.s_q(-q)).T
        assert np.max(np.abs(herm)) < 1e-9
        tr = np.trace(state.s_q(q))
        assert abs(tr - (1.0 if q == 0 else 0.0)) < 1e-9
    pops = state.populations
    assert np.all(pops >= 0.0) and np.all(pops <= 1.0)
    assert pops.sum() == pytest.approx(1.0, abs=1e-9)


def test_c11_decay_rate_sum_rules(bare, damping):
    rng = np.random.default_rng(1105)
    for _ in range(50):
        p_d = 10.0 ** rng.uniform(-14.0, -10.0)
        pt = operating_point(bare, damping, DELTA64, p_d)
        kw, kl = pt.rates.kappa_wg, pt.rates.kappa_loss
        for row in (2, 3):
            assert kw[row, 0] + kw[row, 1] == pytest.approx(damping.kappa1,
                                                            rel=1e-10)
            assert kl[row, 0] + kl[row, 1] == pytest.approx(damping.kappa2,
                                                            rel=1e-10)


def test_c11_passivity(bare, damping):
    wp = TWO_PI * np.linspace(10.58e9, 10.72e9, 15)
    pd = np.linspace(-92.0, -74.0, 7)
    res = sweep_reflection(bare, damping, DELTA64, wp, pd, P_PROBE)
    assert np.all(res.flags == "ok")
    assert np.nanmax(np.abs(res.r)) <= 1.0 + 1e-6


def test_c11_q_convergence(matched_point, dip4):
    r3 = reflection_at(matched_point, dip4.omega_p_star, P_PROBE, Q=3)
    r4 = reflection_at(matched_point, dip4.omega_p_star, P_PROBE, Q=4)
    assert abs(r3 - r4) < 1e-6


def test_c11_determinism_byte_identical(tmp_path):
    from lamqed.cli import main
    cfg = tmp_path / "run.ini"
    cfg.write_text("[drive]\ndelta_f_d = -64 MHz\n"
                   "[sweep]\nn_p_d = 5\np_d_min = -86\np_d_max = -78\n"
                   "n_f_p = 1\nf_p_min = 10.681 GHz\n")
    blobs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["reflect", "--config", str(cfg), "--out", str(out),
                     "--quiet", "--threads", "2"]) == 0
        blobs.append((out / "reflect.csv").read_bytes())
    assert blobs[0] == blobs[1]
