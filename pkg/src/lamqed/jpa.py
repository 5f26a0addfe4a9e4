"""JPA output-spectrum model, Lorentzian fit, measured efficiency.

A phase-preserving parametric amplifier maps an input spectral density
S_in onto a signal peak (gain G_s) plus a mirrored idler peak (gain
G_i) about half the pump frequency; fitting the two-peak output trace
recovers the input Lorentzian, and the conversion efficiency follows
from the extracted signal power by photon-number accounting.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lsq import least_squares


def _as_gain_table(g, name):
    """Normalize a gain spec: scalar -> None grid, else (omega, gain)."""
    if np.ndim(g) == 0:
        g = float(g)
        if g < 1.0:
            raise DomainError("%s must be >= 1 (linear units)" % name)
        return None, g
    omega, gain = g
    omega = np.asarray(omega, dtype=float)
    gain = np.asarray(gain, dtype=float)
    if omega.ndim != 1 or omega.shape != gain.shape or omega.size < 2:
        raise DomainError("%s tabulation needs matching 1-D arrays" % name)
    if np.any(np.diff(omega) <= 0.0):
        raise DomainError("%s tabulation grid must be increasing" % name)
    if np.any(gain < 1.0):
        raise DomainError("%s must be >= 1 within the tabulated band" % name)
    return omega, gain


@dataclass(frozen=True)
class JpaModel:
    """Pump frequency, resolution bandwidth, and signal/idler gains.

    Gains are linear (not dB): either constants or (omega, gain)
    tabulations; evaluation outside a tabulated band is a domain error.
    """

    omega_a: float   # pump frequency, rad/s; band center is omega_a/2
    b: float         # resolution bandwidth, rad/s
    g_s: object = 1.0
    g_i: object = 1.0

    def __post_init__(self):
        if not self.omega_a > 0.0:
            raise DomainError("pump frequency must be positive")
        if not self.b > 0.0:
            raise DomainError("resolution bandwidth must be positive")
        _as_gain_table(self.g_s, "g_s")
        _as_gain_table(self.g_i, "g_i")

    def _gain(self, which, omega):
        grid, gain = _as_gain_table(getattr(self, which), which)
        if grid is None:
            return np.full_like(np.asarray(omega, dtype=float), gain)
        w = np.asarray(omega, dtype=float)
        if np.any(w < grid[0]) or np.any(w > grid[-1]):
            raise DomainError("%s evaluated outside its tabulated band"
                              % which)
        return np.interp(w, grid, gain)


@dataclass(frozen=True)
class LorentzianSignal:
    """Input spectral density: Lorentzian with FWHM delta_omega."""

    omega_s: float       # center, rad/s
    delta_omega: float   # full width at half maximum, rad/s
    s0: float            # peak spectral density, W/(rad/s)

    def __post_init__(self):
        if not self.delta_omega > 0.0:
            raise DomainError("linewidth must be positive")
        if self.s0 < 0.0:
            raise DomainError("peak spectral density must be >= 0")

    def density(self, omega):
        """S_in(omega), vectorized."""
        hw = 0.5 * self.delta_omega
        x = np.asarray(omega, dtype=float) - self.omega_s
        return self.s0 * hw * hw / (x * x + hw * hw)

    def area(self, lo=None, hi=None):
        """Closed-form integral of S_in over [lo, hi] (full line if None)."""
        hw = 0.5 * self.delta_omega
        a = -np.pi / 2 if lo is None else np.arctan((lo - self.omega_s) / hw)
        b = np.pi / 2 if hi is None else np.arctan((hi - self.omega_s) / hw)
        return self.s0 * hw * (b - a)


def lorentzian_from_power(p_s, omega_s, delta_omega):
    """Lorentzian whose full-line area integrates to the power p_s."""
    if not p_s > 0.0:
        raise DomainError("signal power must be positive")
    s0 = 2.0 * p_s / (np.pi * delta_omega)
    return LorentzianSignal(omega_s=omega_s, delta_omega=delta_omega, s0=s0)


def jpa_output(model: JpaModel, sig: LorentzianSignal, omega_grid):
    """P_out(w) = [G_s(w) S_in(w) + G_i(wa-w) S_in(wa-w)] B, in watts."""
    w = np.asarray(omega_grid, dtype=float)
    mirror = model.omega_a - w
    p = (model._gain("g_s", w) * sig.density(w)
         + model._gain("g_i", mirror) * sig.density(mirror)) * model.b
    return p if p.ndim else float(p)


def fit_jpa_spectrum(omega_grid, p_out, model: JpaModel,
                     guess: LorentzianSignal) -> LorentzianSignal:
    """Least-squares fit of (omega_s, delta_omega, S0) to a measured trace.

    Same damped Gauss-Newton engine as the calibration fit; parameters
    are scaled by the guess so the shared relative step is meaningful.
    """
    w = np.asarray(omega_grid, dtype=float)
    y = np.asarray(p_out, dtype=float)
    if w.shape != y.shape or w.size < 4:
        raise DomainError("trace needs matching grids with >= 4 points")
    scale = np.array([guess.omega_s, guess.delta_omega, guess.s0])
    if not np.all(scale > 0.0):
        raise DomainError("guess parameters must be strictly positive")

    def residual(p):
        omega_s, delta_omega, s0 = p * scale
        if not (delta_omega > 0.0 and s0 >= 0.0):
            return np.full(y.size, 1e12)
        sig = LorentzianSignal(omega_s=omega_s, delta_omega=delta_omega,
                               s0=s0)
        return jpa_output(model, sig, w) - y

    result = least_squares(residual, np.ones(3))
    omega_s, delta_omega, s0 = result.params * scale
    return LorentzianSignal(omega_s=float(omega_s),
                            delta_omega=float(delta_omega), s0=float(s0))


@dataclass(frozen=True)
class MeasuredEfficiency:
    """Efficiency with multiplicative gain-uncertainty bounds."""

    eta: float
    lower: float
    upper: float


def measured_efficiency(p_s, p_p, omega_p, omega_s,
                        gain_uncertainty_db=0.0) -> MeasuredEfficiency:
    """eta = (P_s / P_p) (omega_p / omega_s), photon-number conversion ratio.

    A +-x dB uncertainty on the amplification-chain gain propagates
    multiplicatively: bounds eta * 10^(-+ x/10).
    """
    for name, v in (("p_s", p_s), ("p_p", p_p), ("omega_p", omega_p),
                    ("omega_s", omega_s)):
        if not v > 0.0:
            raise DomainError("%s must be strictly positive" % name)
    if gain_uncertainty_db < 0.0:
        raise DomainError("gain uncertainty must be >= 0 dB")
    eta = (p_s / p_p) * (omega_p / omega_s)
    factor = 10.0 ** (gain_uncertainty_db / 10.0)
    return MeasuredEfficiency(eta=eta, lower=eta / factor, upper=eta * factor)
