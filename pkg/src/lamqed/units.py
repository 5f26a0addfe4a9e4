"""Physical constants and unit conversions.

Internal convention: every frequency/rate carried between modules is
angular (rad/s).  Ordinary Hz and dBm appear only at file and CLI
boundaries.  hbar enters the physics exclusively through the
power <-> photon-flux-amplitude conversions and the spectrum-to-watts
prefactor, so it is defined here and nowhere else.
"""

import numpy as np

HBAR = 1.054571817e-34  # J*s
FLUX_QUANTUM = 2.067833848e-15  # Wb, magnetic flux quantum Phi_0
TWO_PI = 2.0 * np.pi


def dbm_to_watts(p_dbm):
    """Convert power from dBm to watts: P[W] = 1e-3 * 10^(dBm/10)."""
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def watts_to_dbm(p_watts):
    """Convert power from watts to dBm. Zero power maps to -inf."""
    p = np.asarray(p_watts, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p / 1e-3)


def power_to_flux_amplitude(p_watts, omega):
    """Field amplitude E [s^(-1/2)] of a carrier at angular frequency
    omega carrying power P, via P = hbar * omega * E^2."""
    if omega <= 0.0:
        raise ValueError("carrier frequency must be positive")
    return float(np.sqrt(p_watts / (HBAR * omega)))


def flux_amplitude_to_power(e_amp, omega):
    """Inverse of power_to_flux_amplitude."""
    return HBAR * omega * float(e_amp) ** 2


def hz(angular):
    """Angular frequency (rad/s) -> ordinary frequency (Hz)."""
    return np.asarray(angular, dtype=float) / TWO_PI


def angular(f_hz):
    """Ordinary frequency (Hz) -> angular frequency (rad/s)."""
    return TWO_PI * np.asarray(f_hz, dtype=float)
