"""Device parameters, dispersive renormalization, rotating-frame Hamiltonian.

The model keeps the lowest four levels of a driven qubit-resonator
system, ordered as (|g,0>, |e,0>, |g,1>, |e,1>).  The qubit drive at
omega_d is absorbed into the frame rotation, so the Hamiltonian
returned here is static, real-symmetric, and exactly block-diagonal in
the photon number n = 0, 1.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .units import HBAR, TWO_PI


# =====================================================================
# Parameter containers
# =====================================================================

@dataclass(frozen=True)
class BareParams:
    """Bare (uncoupled) device frequencies and couplings, all in rad/s.

    wbar_ge, wbar_gf : qubit g->e and g->f transition frequencies
    wbar_r           : resonator frequency
    g_ge, g_ef       : resonator couplings on the g-e and e-f transitions
    gamma_c          : radiative decay of the qubit into the drive port
    """

    wbar_ge: float
    wbar_gf: float
    wbar_r: float
    g_ge: float
    g_ef: float
    gamma_c: float

    @property
    def wbar_ef(self):
        return self.wbar_gf - self.wbar_ge

    def __post_init__(self):
        for name in ("wbar_ge", "wbar_gf", "wbar_r", "g_ge", "g_ef", "gamma_c"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"BareParams.{name} must be strictly positive")
        # Dispersive-regime check is advisory only.
        det_ge = abs(self.wbar_r - self.wbar_ge)
        det_ef = abs(self.wbar_ef - self.wbar_r)
        if det_ge > 0 and self.g_ge / det_ge >= 0.25:
            warnings.warn("g_ge/|wbar_r - wbar_ge| >= 0.25: dispersive "
                          "renormalization may be inaccurate", stacklevel=2)
        if det_ef > 0 and self.g_ef / det_ef >= 0.25:
            warnings.warn("g_ef/|wbar_ef - wbar_r| >= 0.25: dispersive "
                          "renormalization may be inaccurate", stacklevel=2)


@dataclass(frozen=True)
class RenormalizedParams:
    """Renormalized frequencies (rad/s): qubit w_ge, resonator w_r,
    dispersive shift chi (resonator pull is -2*chi for the excited qubit)."""

    w_ge: float
    w_r: float
    chi: float

    def __post_init__(self):
        if self.w_ge >= self.w_r:
            raise DomainError("renormalized w_ge must lie below w_r for this "
                              "device class")


@dataclass(frozen=True)
class DampingRates:
    """Damping rates in rad/s: kappa1 (resonator -> waveguide),
    kappa2 (resonator internal loss), gamma (qubit energy decay)."""

    kappa1: float
    kappa2: float
    gamma: float

    @property
    def kappa(self):
        return self.kappa1 + self.kappa2

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "gamma"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"DampingRates.{name} must be nonnegative")


@dataclass(frozen=True)
class DriveSpec:
    """Classical qubit drive: angular frequency w_d (rad/s) and power
    P_d (W).  The flux amplitude E_d = sqrt(P_d/(hbar*w_d)) is derived."""

    w_d: float
    P_d: float

    @property
    def E_d(self):
        return np.sqrt(self.P_d / (HBAR * self.w_d))

    def delta_omega_d(self, w_ge):
        """Drive detuning from the renormalized qubit frequency."""
        return self.w_d - w_ge

    def __post_init__(self):
        if self.w_d <= 0.0:
            raise DomainError("DriveSpec.w_d must be strictly positive")
        if self.P_d < 0.0:
            raise DomainError("DriveSpec.P_d must be nonnegative")


@dataclass(frozen=True)
class ProbeSpec:
    """Weak waveguide probe: angular frequency w_p (rad/s), power P_p (W).
    E_p = sqrt(P_p/(hbar*w_p)); the same flux convention as the drive."""

    w_p: float
    P_p: float

    @property
    def E_p(self):
        return np.sqrt(self.P_p / (HBAR * self.w_p))

    def __post_init__(self):
        if self.w_p <= 0.0:
            raise DomainError("ProbeSpec.w_p must be strictly positive")
        if self.P_p < 0.0:
            raise DomainError("ProbeSpec.P_p must be nonnegative")


# =====================================================================
# Reference device
# =====================================================================

def default_bare_params():
    """Reference sample: (wbar_ge, wbar_gf, wbar_r, g_ge, g_ef)/2pi =
    (5.468, 19.362, 10.671, 0.197, 0.458) GHz, gamma_c/2pi = 0.6 kHz."""
    return BareParams(
        wbar_ge=TWO_PI * 5.468e9,
        wbar_gf=TWO_PI * 19.362e9,
        wbar_r=TWO_PI * 10.671e9,
        g_ge=TWO_PI * 0.197e9,
        g_ef=TWO_PI * 0.458e9,
        gamma_c=TWO_PI * 600.0,
    )


def default_damping_rates():
    """Reference sample: kappa/2pi = 16.4 MHz split 95%/5% between the
    waveguide and internal loss; gamma/2pi = 0.227 MHz (1/T1)."""
    kappa = TWO_PI * 16.4e6
    return DampingRates(kappa1=0.95 * kappa, kappa2=0.05 * kappa,
                        gamma=TWO_PI * 0.227e6)


# =====================================================================
# Operations
# =====================================================================

def renormalize(bare: BareParams) -> RenormalizedParams:
    """Second-order dispersive renormalization of the bare parameters.

    w_ge = wbar_ge - g_ge^2/(wbar_r - wbar_ge)
    w_r  = wbar_r  + g_ge^2/(wbar_r - wbar_ge)
    chi  = g_ge^2/(wbar_r - wbar_ge) + g_ef^2/(2*(wbar_ef - wbar_r))
    """
    det_ge = bare.wbar_r - bare.wbar_ge
    det_ef = bare.wbar_ef - bare.wbar_r
    if det_ge == 0.0:
        raise DomainError("degenerate detuning: wbar_r == wbar_ge")
    if det_ef == 0.0:
        raise DomainError("degenerate detuning: wbar_ef == wbar_r")
    lamb = bare.g_ge ** 2 / det_ge
    chi = lamb + bare.g_ef ** 2 / (2.0 * det_ef)
    return RenormalizedParams(w_ge=bare.wbar_ge - lamb,
                              w_r=bare.wbar_r + lamb,
                              chi=chi)


def nesting_margin(ren: RenormalizedParams, w_d):
    """Distances of the drive from the two edges of the nesting window.

    Returns (lower_margin, upper_margin) = (w_d - (w_ge - 2*chi),
    w_ge - w_d).  The four rotating-frame levels interleave as
    |g,0> < |e,0> < |e,1> < |g,1> iff both margins are strictly positive.
    """
    return (w_d - (ren.w_ge - 2.0 * ren.chi), ren.w_ge - w_d)


def is_nested(ren: RenormalizedParams, w_d):
    lo, hi = nesting_margin(ren, w_d)
    return lo > 0.0 and hi > 0.0


def rotating_hamiltonian(ren: RenormalizedParams, drive: DriveSpec,
                         gamma_c) -> np.ndarray:
    """4x4 rotating-frame Hamiltonian in basis (|g,0>, |e,0>, |g,1>, |e,1>).

    Diagonal: w(|g,n>) = n*(w_r - w_d), w(|e,n>) = (w_ge - w_d)
    + n*(w_r - w_d - 2*chi).  The drive couples |g,n> <-> |e,n> with
    matrix element sqrt(gamma_c)*E_d; photon-number blocks stay exactly
    uncoupled.
    """
    dge = ren.w_ge - drive.w_d
    dr = ren.w_r - drive.w_d
    rabi = np.sqrt(gamma_c) * drive.E_d
    h = np.zeros((4, 4))
    h[1, 1] = dge
    h[2, 2] = dr
    h[3, 3] = dge + dr - 2.0 * ren.chi
    h[0, 1] = h[1, 0] = rabi
    h[2, 3] = h[3, 2] = rabi
    return h


# Matrix representations of the coupling operators in the truncated
# 4-level basis: a^dag maps |g,0>->|g,1> and |e,0>->|e,1>; sigma_eg maps
# |g,n>->|e,n>.

def a_dagger_matrix():
    m = np.zeros((4, 4))
    m[2, 0] = 1.0
    m[3, 1] = 1.0
    return m


def sigma_eg_matrix():
    m = np.zeros((4, 4))
    m[1, 0] = 1.0
    m[3, 2] = 1.0
    return m
