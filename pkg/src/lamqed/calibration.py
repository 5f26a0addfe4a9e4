"""Nonlinear-resonator power calibration.

ABCD-matrix model of the readout resonator (coupling capacitor, two
CPW sections with a Josephson junction at the midpoint, qubit-side
capacitor), the oscillation-amplitude-dependent Josephson inductance
through the Bessel function J1, the backbone curve (input power vs
resonance frequency), and a three-parameter least-squares fit of
measured resonance-vs-power data.

The network is purely reactive, so |S11| = 1; the resonance is defined
by the maximum slope of the reflected phase.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericalError
from .lsq import least_squares
from .units import FLUX_QUANTUM, TWO_PI

J1_FIRST_ZERO = 3.8317059702075123

# Phase velocity default: calibrated once so that the Delta -> 0
# resonance of the fitted reference geometry (Z_cpw = 52.1 ohm,
# I0 = 0.689 uA) lands on the device resonance 10.678 GHz.
V_P_DEFAULT = 1.16875424e8  # m/s


def bessel_j1(x):
    """Bessel function of the first kind J1 by its power series.

    Accurate to ~1e-15 relative on [0, 4), which covers the model's
    validity domain [0, first J1 zero).  Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    term = half.copy()
    total = half.copy()
    # term_{k} = (-1)^k / (k! (k+1)!) * (x/2)^(2k+1)
    for k in range(1, 40):
        term = term * (-(half * half) / (k * (k + 1)))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total if total.ndim else float(total)


def _l_j(delta, l_j0):
    """L_J(Delta) for nonnegative array/scalar delta below the J1 zero."""
    d = np.asarray(delta, dtype=float)
    if np.any(d < 0.0):
        raise DomainError("oscillation amplitude delta must be >= 0")
    if np.any(d >= J1_FIRST_ZERO):
        raise DomainError(
            "delta reaches the first J1 zero (%.6g); the junction model "
            "is invalid there" % J1_FIRST_ZERO)
    num = np.where(d == 0.0, 1.0, d)
    den = np.where(d == 0.0, 1.0, 2.0 * bessel_j1(d))
    return num / den * l_j0


def josephson_inductance(delta, l_j0):
    """Amplitude-dependent Josephson inductance L_J = Delta/(2 J1(Delta)) L_J0."""
    if np.ndim(delta) != 0:
        raise DomainError("delta must be a scalar")
    return float(_l_j(float(delta), l_j0))


@dataclass(frozen=True)
class NetworkModel:
    """Reactive two-port model of the readout resonator.

    Port 1 faces the feedline through c_in; port 2 (beyond c_c, toward
    the qubit) is treated as shorted for the reflection measurement.
    """

    z0: float = 50.0          # reference impedance, ohm
    z_cpw: float = 52.1       # CPW characteristic impedance, ohm
    l: float = 2.15e-3        # single CPW section length, m
    v_p: float = V_P_DEFAULT  # phase velocity, m/s
    c_in: float = 15e-15      # feedline coupling capacitance, F
    c_c: float = 4e-15        # qubit-side coupling capacitance, F
    c_j: float = 8.5e-15      # junction self-capacitance, F
    i0: float = 0.689e-6      # junction critical current, A

    def __post_init__(self):
        for name in ("z0", "z_cpw", "l", "v_p", "c_in", "c_c", "c_j", "i0"):
            if not getattr(self, name) > 0.0:
                raise DomainError("NetworkModel.%s must be strictly positive"
                                  % name)

    @property
    def l_j0(self):
        """Linear Josephson inductance Phi0 / (2 pi I0)."""
        return FLUX_QUANTUM / (TWO_PI * self.i0)


def _series(z):
    """ABCD matrix of a series impedance, broadcast over z."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = z
    out[..., 1, 1] = 1.0
    return out


def _line(model, omega):
    """ABCD matrix of one lossless CPW section, broadcast over omega."""
    beta_l = np.asarray(omega, dtype=float) * model.l / model.v_p
    out = np.zeros(beta_l.shape + (2, 2), dtype=complex)
    c, s = np.cos(beta_l), np.sin(beta_l)
    out[..., 0, 0] = c
    out[..., 0, 1] = 1j * model.z_cpw * s
    out[..., 1, 0] = 1j * s / model.z_cpw
    out[..., 1, 1] = c
    return out


def _junction_z(model, omega, delta):
    l_j = _l_j(delta, model.l_j0)
    w = np.asarray(omega, dtype=float)
    return 1j * w * l_j / (1.0 - w * w * l_j * model.c_j)


def _check_omega(omega):
    if np.any(np.asarray(omega) <= 0.0):
        raise DomainError("omega must be strictly positive (capacitor "
                          "impedances are singular at omega = 0)")


def abcd_chain(model: NetworkModel, omega, delta):
    """ABCD matrix of C_in . CPW . junction . CPW . C_c at one amplitude.

    omega and delta may be scalars or broadcastable arrays; the result
    has the broadcast shape + (2, 2).
    """
    _check_omega(omega)
    w = np.asarray(omega, dtype=float)
    line = _line(model, w)
    t = _series(1.0 / (1j * w * model.c_in))
    t = t @ line
    t = t @ _series(_junction_z(model, w, delta))
    t = t @ line
    t = t @ _series(1.0 / (1j * w * model.c_c))
    return t if t.ndim > 2 else t.reshape(2, 2)


def s11(model: NetworkModel, omega, delta):
    """One-port reflection coefficient with port 2 shorted.

    Z_in = B/D, S11 = (B - D Z0)/(B + D Z0); exactly unimodular for
    this purely reactive network.
    """
    t = abcd_chain(model, omega, delta)
    b, d = t[..., 0, 1], t[..., 1, 1]
    den = b + d * model.z0
    if np.any(np.abs(den) == 0.0):
        raise NumericalError("S11 denominator vanished")
    return (b - d * model.z0) / den


def _drive_current_batch(model, omega, delta):
    """Source current I_RF sustaining amplitude delta at omega (batched)."""
    w = np.asarray(omega, dtype=float)
    sub = _line(model, w) @ _series(1.0 / (1j * w * model.c_c))
    m22 = sub[..., 1, 1]
    if np.any(np.abs(m22) < 1e-30):
        raise NumericalError("junction current does not couple to port 2 "
                             "(zero current sensitivity)")
    i2 = 2.0 * bessel_j1(delta) * model.i0 / np.abs(m22)
    t = abcd_chain(model, w, delta)
    v1 = t[..., 0, 1] * i2
    i1 = t[..., 1, 1] * i2
    return i1 + v1 / model.z0


def drive_and_power(model: NetworkModel, omega, delta):
    """Feedline drive (I_RF, P in dBm) sustaining amplitude delta at omega.

    Port 2 is shorted; the current through the junction must equal
    2 J1(Delta) I0.  Propagating (0, I2) from port 2 to the junction
    fixes I2, the full chain gives (V1, I1), and the source current is
    I_RF = I1 + V1/Z0 with P = 10 log10(Z0 |I_RF|^2 / 8e-3) dBm.
    """
    _check_omega(omega)
    if delta == 0.0:
        return 0.0, -np.inf
    i_rf = complex(_drive_current_batch(model, float(omega), float(delta)))
    p_dbm = 10.0 * np.log10(model.z0 * abs(i_rf) ** 2 / 8.0 / 1e-3)
    return i_rf, float(p_dbm)


# =====================================================================
# resonance location
# =====================================================================

_WINDOW_DEFAULT = (TWO_PI * 10.0e9, TWO_PI * 11.0e9)
_STENCIL = TWO_PI * 10e3    # 3-point phase-derivative stencil half step
_TOL = TWO_PI * 1e3         # golden-section frequency tolerance
_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def _phase_slope(model, omega, delta):
    """|d arg S11 / d omega| by a centered stencil, vectorized."""
    w = np.asarray(omega, dtype=float)
    hi = s11(model, w + _STENCIL, delta)
    lo = s11(model, w - _STENCIL, delta)
    dphi = np.angle(hi * np.conj(lo))   # wrapped to (-pi, pi]
    return np.abs(dphi) / (2.0 * _STENCIL)


def _golden_max_batch(model, deltas, a, b):
    """Batched golden-section maximum of the phase slope.

    a, b, deltas are aligned 1-D arrays (one bracket per amplitude);
    iterates until every bracket is narrower than the 1 kHz tolerance.
    """
    a = a.copy()
    b = b.copy()
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc = _phase_slope(model, c, deltas)
    fd = _phase_slope(model, d, deltas)
    while np.max(b - a) > _TOL:
        right = fc < fd     # maximum is in [c, b]: drop [a, c]
        a = np.where(right, c, a)
        b = np.where(right, b, d)
        # one interior point survives per row; evaluate only the new one
        c_new = np.where(right, d, b - _GOLD * (b - a))
        d_new = np.where(right, a + _GOLD * (b - a), c)
        x = np.where(right, d_new, c_new)
        fx = _phase_slope(model, x, deltas)
        fc_old = fc
        fc = np.where(right, fd, fx)
        fd = np.where(right, fx, fc_old)
        c, d = c_new, d_new
    return 0.5 * (a + b)


def resonance_frequency(model: NetworkModel, delta, window=None,
                        n_coarse=2001):
    """Frequency of maximum reflected-phase slope within the window.

    Coarse argmax on a uniform grid, then golden section to a 1 kHz
    tolerance.  Raises NumericalError when no interior extremum exists
    in the window.
    """
    if window is None:
        window = _WINDOW_DEFAULT
    lo, hi = window
    if not hi > lo:
        raise DomainError("resonance window must have positive width")
    grid = np.linspace(lo, hi, n_coarse)
    slopes = _phase_slope(model, grid, delta)
    i = int(np.argmax(slopes))
    if i == 0 or i == n_coarse - 1:
        raise NumericalError(
            "no interior phase-slope extremum in the search window "
            "[%.6g, %.6g] rad/s" % (lo, hi))
    w = _golden_max_batch(model, np.asarray([float(delta)]),
                          np.asarray([grid[i - 1]]),
                          np.asarray([grid[i + 1]]))
    return float(w[0])


# =====================================================================
# backbone curve and calibration fit
# =====================================================================

# window for batched backbone tracking: the mode is the only
# phase-slope peak below ~13 GHz, and over the fit basin (+-20% in I0
# and Z_cpw) it stays inside [9.0, 11.3] GHz for delta in [0, 1.5]
_BACKBONE_WINDOW = (TWO_PI * 8.6e9, TWO_PI * 11.8e9)


def _resonances_batch(model, deltas, window=_BACKBONE_WINDOW, n_coarse=801):
    """Resonance frequencies for a whole amplitude grid at once."""
    lo, hi = window
    grid = np.linspace(lo, hi, n_coarse)
    slopes = _phase_slope(model, grid[:, None], deltas[None, :])
    idx = np.argmax(slopes, axis=0)
    if np.any(idx == 0) or np.any(idx == n_coarse - 1):
        raise NumericalError(
            "resonance left the backbone search window "
            "[%.6g, %.6g] rad/s" % (lo, hi))
    return _golden_max_batch(model, deltas, grid[idx - 1], grid[idx + 1])


@dataclass(frozen=True)
class BackboneCurve:
    """Drive power versus resonance frequency along the amplitude grid."""

    delta: np.ndarray      # dimensionless amplitudes
    p_dbm: np.ndarray      # input power at resonance, dBm
    omega_r: np.ndarray    # resonance frequency, rad/s


def backbone_curve(model: NetworkModel, delta_max=2.0, n=200) -> BackboneCurve:
    """(P_p(Delta), omega_r(Delta)) on a logarithmic amplitude grid.

    Raises NumericalError if the curve folds (P_p not strictly
    increasing with Delta), which signals the bistable regime; truncate
    delta_max or the power range in that case.  With the default fitted
    geometry the fold sits near delta ~ 1.7.
    """
    deltas = np.logspace(np.log10(1e-4), np.log10(delta_max), n)
    omegas = _resonances_batch(model, deltas)
    i_rf = _drive_current_batch(model, omegas, deltas)
    p_dbm = 10.0 * np.log10(model.z0 * np.abs(i_rf) ** 2 / 8.0 / 1e-3)
    if np.any(np.diff(p_dbm) <= 0.0):
        raise NumericalError(
            "backbone curve folds over (P_p not single-valued in "
            "omega_r): bifurcation regime reached; reduce delta_max or "
            "truncate the power range")
    return BackboneCurve(delta=deltas, p_dbm=p_dbm, omega_r=omegas)


@dataclass(frozen=True)
class CalibDataset:
    """Measured resonance frequency versus estimated input power.

    Rows are sorted by power on construction, so the fit is invariant
    under row reordering; duplicate powers are rejected.
    """

    p_exp_dbm: np.ndarray   # estimated input power, dBm, strictly increasing
    omega_r: np.ndarray     # measured resonance, rad/s

    def __post_init__(self):
        p = np.asarray(self.p_exp_dbm, dtype=float)
        w = np.asarray(self.omega_r, dtype=float)
        if p.size < 4:
            raise DomainError("calibration dataset needs at least 4 rows")
        if p.shape != w.shape:
            raise DomainError("power and frequency columns differ in length")
        order = np.argsort(p, kind="stable")
        p, w = p[order], w[order]
        if np.any(np.diff(p) <= 0.0):
            raise DomainError("P_exp values must be distinct")
        object.__setattr__(self, "p_exp_dbm", p)
        object.__setattr__(self, "omega_r", w)


@dataclass(frozen=True)
class CalibFit:
    x: float           # dimensionless power scale, P_p = x * P_exp (linear)
    i0_fit: float      # A
    z_cpw_fit: float   # ohm
    residual: float    # rms of omega_model - omega_meas, rad/s
    iterations: int


def model_resonances(model: NetworkModel, x, p_exp_dbm, delta_max=2.0,
                     n=200):
    """omega_r predicted at device powers x * P_exp via the backbone."""
    bb = backbone_curve(model, delta_max=delta_max, n=n)
    interp = PchipInterpolator(bb.p_dbm, bb.omega_r, extrapolate=True)
    p_dev_dbm = np.asarray(p_exp_dbm, dtype=float) + 10.0 * np.log10(x)
    return interp(p_dev_dbm)


def fit_calibration(data: CalibDataset, model0: NetworkModel,
                    guess=(1.0, 0.7e-6, 50.0), delta_max=1.5,
                    n_backbone=120) -> CalibFit:
    """Fit (x, I0, Z_cpw) so the backbone reproduces the measured rows.

    The power scale x multiplies P_exp in linear watts.  Damped
    Gauss-Newton on the frequency residuals; see lsq.least_squares.
    A backbone fold at the starting point aborts with the fold error
    (truncate delta_max / the power range); folds at trial points
    during the iteration only reject that trial.
    """
    x0, i00, z0 = guess
    if not (x0 > 0.0 and i00 > 0.0 and z0 > 0.0):
        raise DomainError("initial guess must be strictly positive")
    # scale parameters to O(1) so the shared finite-difference step is sane
    p_scale = np.array([x0, i00, z0])
    first = [True]

    def residual(p):
        x, i0, z_cpw = p * p_scale
        if not (x > 0.0 and i0 > 0.0 and z_cpw > 0.0):
            return np.full(data.omega_r.size, 1e12)
        model = replace(model0, i0=i0, z_cpw=z_cpw)
        try:
            w_model = model_resonances(model, x, data.p_exp_dbm,
                                       delta_max=delta_max, n=n_backbone)
        except NumericalError:
            if first[0]:
                raise
            return np.full(data.omega_r.size, 1e12)
        finally:
            first[0] = False
        return w_model - data.omega_r

    result = least_squares(residual, np.ones(3))
    x, i0, z_cpw = result.params * p_scale
    return CalibFit(x=float(x), i0_fit=float(i0), z_cpw_fit=float(z_cpw),
                    residual=float(result.residual_rms),
                    iterations=result.iterations)
