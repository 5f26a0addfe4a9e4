"""Incoherent emission spectrum of the reflected field via the quantum
regression theorem, and the down-conversion efficiency.

The two-time correlators of the dressed transition operators evolve in
the delay tau under the same Heisenberg generator as the one-point
averages.  Written directly in the laboratory rotating frame that
generator carries the probe-drive beat exp(-i*delta_p*(t+tau)), whose
~5 GHz carrier would dominate the step size.  Every coherence has a
photon-sector grade n_i - n_j in {-1, 0, +1}, and the probe coupling
shifts grade and beat harmonic together, so conjugating the correlator
with exp(-i*delta_p*Qhat*tau) (Qhat the grade operator) makes the
generator exactly constant in tau for each stationary phase of the
beat.  Only slow frequencies (tens of MHz) survive; the transformation
is an exact change of variables, not an approximation.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.integrate import solve_ivp

from .dressed import RateTable
from .errors import DomainError, NumericalError
from .steady import CoefficientTensors, HarmonicState, solve_harmonics
from .system import ProbeSpec
from .units import HBAR, TWO_PI

_DECAY_TOL = 1e-3


# =====================================================================
# Correlator evolution
# =====================================================================

@dataclass(frozen=True)
class CorrelatorSet:
    """Connected two-time correlators for the emission spectrum.

    c[k,u,v,i,j] is the equal-time connected tensor
    <sigma~_uv sigma~_ij> - <sigma~_uv><sigma~_ij> at stationary phase
    k; gbar[k, :] is its waveguide-weighted contraction
    sum_uv A[u,v] sum_ij A[j,i] C_k(tau) evolved over tau_grid, in the
    grade-rotated frame.  decay_ratio is max|D(tau_max)| / max|D(0)|
    over the evolved 16-component correlator vectors.
    """

    c: np.ndarray
    tau_grid: np.ndarray
    t_phases: int
    gbar: np.ndarray
    decay_ratio: float


def _grade_vector(n):
    """Flattened photon-sector grade n_i - n_j of each coherence (i,j),
    for a 0/1-photon ladder with the two lowest levels in sector 0."""
    sector = np.array([0, 0, 1, 1][:n], dtype=float)
    return (sector[:, None] - sector[None, :]).reshape(n * n)


def _stationary_averages(state: HarmonicState, phases):
    """<sigma~_ab>(t_k) = sum_q s_ab^q exp(i q phi_k)."""
    qs = np.arange(-state.Q, state.Q + 1)
    phase = np.exp(1j * qs[None, :] * phases[:, None])  # (n_t, nq)
    return np.einsum("abq,kq->kab", state.s, phase)


def _connected_initial(sig, amp):
    """Equal-time connected tensor and its A-contraction over (u,v).

    c0[k,u,v,i,j] = delta_vi <sigma_uj>_k - <sigma_uv>_k <sigma_ij>_k
    d0[k,i,j]     = sum_uv A[u,v] c0[k,u,v,i,j]
    """
    n = sig.shape[1]
    eye = np.eye(n)
    c0 = (np.einsum("vi,kuj->kuvij", eye, sig)
          - np.einsum("kuv,kij->kuvij", sig, sig))
    d0 = np.einsum("uv,kuvij->kij", amp, c0)
    return c0, d0


def _rotated_generators(coeffs: CoefficientTensors, probe: ProbeSpec,
                        delta, phases):
    """Static generator G_k of the grade-rotated correlators for each
    stationary phase phi_k."""
    n = coeffs.eta1.shape[0]
    n2 = n * n
    g0 = coeffs.eta1.reshape(n2, n2) - 1j * delta * np.diag(_grade_vector(n))
    h2 = coeffs.eta2_wg.reshape(n2, n2)
    h2t = np.transpose(coeffs.eta2_wg, (1, 0, 3, 2)).reshape(n2, n2)
    e_p = probe.E_p
    gens = np.empty((phases.size, n2, n2), dtype=complex)
    for k, phi in enumerate(phases):
        gens[k] = (g0
                   - 1j * e_p * np.exp(-1j * phi) * h2
                   + 1j * np.conj(e_p) * np.exp(1j * phi) * h2t)
    return gens


def _slowest_rate(rates: RateTable):
    """Smallest positive decay rate that sets the correlator horizon."""
    candidates = [rates.gamma_qb[1, 0]]
    candidates.extend(rates.kappa_wg[2:, :2].ravel())
    candidates.extend(rates.kappa_loss[2:, :2].ravel())
    positive = [c for c in candidates if c > 0.0]
    if not positive:
        raise DomainError("all decay channels vanish; no correlator decay")
    return min(positive)


def _integrate_segments(gens, d0, tau_grid, readout, threads):
    """March the rotated correlators over tau_grid (uniform), returning
    the contracted gbar[k, :] and the final 16-component vectors."""
    n_t = d0.shape[0]
    d0 = d0.reshape(n_t, -1)
    n2 = d0.shape[1]
    scale = max(np.max(np.abs(d0)), 1e-300)
    seg = 4096

    def run(ks):
        gsub = scipy.sparse.block_diag([gens[k] for k in ks], format="csr")

        def rhs(_, y):
            return gsub @ y

        gbar = np.empty((len(ks), tau_grid.size), dtype=complex)
        y = d0[ks].reshape(-1).astype(complex)
        start = 0
        while start < tau_grid.size:
            stop = min(start + seg, tau_grid.size)
            # y holds the state at the last evaluated point, so resume there
            t0 = tau_grid[start - 1] if start > 0 else tau_grid[0]
            sol = solve_ivp(rhs, (t0, tau_grid[stop - 1]), y,
                            t_eval=tau_grid[start:stop], method="RK45",
                            rtol=1e-8, atol=1e-12 * scale)
            if not sol.success:
                raise NumericalError(
                    f"correlator integration failed: {sol.message}")
            block = sol.y.reshape(len(ks), n2, stop - start)
            gbar[:, start:stop] = np.einsum("b,kbt->kt", readout, block)
            y = block[:, :, -1].reshape(-1)
            start = stop
        return gbar, y.reshape(len(ks), n2)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        chunks = np.array_split(np.arange(n_t), min(threads, n_t))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, [c for c in chunks if c.size]))
        gbar = np.concatenate([g for g, _ in results], axis=0)
        d_end = np.concatenate([d for _, d in results], axis=0)
    else:
        gbar, d_end = run(np.arange(n_t))
    return gbar, d_end


def evolve_correlators(state: HarmonicState, rates: RateTable,
                       coeffs: CoefficientTensors, probe: ProbeSpec,
                       n_t: int = 16, tau_max=None, tau_step: float = 0.25e-9,
                       threads: int = 1) -> CorrelatorSet:
    """Evolve the connected correlators over tau for n_t stationary
    phases of the drive-probe beat.  When tau_max is omitted it starts
    at 10 / (slowest decay rate) and doubles until the correlators have
    decayed below 1e-3 of their initial magnitude."""
    delta = state.detuning
    if n_t > 1 and delta == 0.0:
        raise DomainError(
            "stationary-phase averaging (n_t > 1) needs a nonzero "
            "probe-drive detuning")
    if n_t < 1:
        raise DomainError("n_t must be >= 1")
    phases = TWO_PI * np.arange(n_t) / n_t

    sig = _stationary_averages(state, phases)
    c0, d0 = _connected_initial(sig, rates.amp_wg)
    gens = _rotated_generators(coeffs, probe, delta, phases)
    readout = rates.amp_wg.T.reshape(-1)

    d0_norm = np.max(np.abs(d0))
    if d0_norm == 0.0:  # no emission at all (e.g. probe off, cold system)
        tau_grid = np.arange(2) * tau_step
        gbar = np.zeros((n_t, 2), dtype=complex)
        return CorrelatorSet(c=c0, tau_grid=tau_grid, t_phases=n_t,
                             gbar=gbar, decay_ratio=0.0)

    doublings = 6 if tau_max is None else 0
    horizon = tau_max if tau_max is not None else 10.0 / _slowest_rate(rates)
    n_tau = int(np.ceil(horizon / tau_step)) + 1
    tau_grid = np.arange(n_tau) * tau_step
    gbar, d_end = _integrate_segments(gens, d0, tau_grid, readout, threads)
    ratio = np.max(np.abs(d_end)) / d0_norm

    while ratio >= _DECAY_TOL and doublings > 0:
        extra = np.arange(n_tau, 2 * n_tau - 1) * tau_step
        gbar_x, d_end = _extend(gens, d_end, tau_grid[-1], extra, readout,
                                threads)
        gbar = np.concatenate([gbar, gbar_x], axis=1)
        tau_grid = np.concatenate([tau_grid, extra])
        n_tau = tau_grid.size
        ratio = np.max(np.abs(d_end)) / d0_norm
        doublings -= 1

    if ratio >= _DECAY_TOL:
        raise NumericalError(
            f"correlators have not decayed at tau_max = {tau_grid[-1]:.3e} s "
            f"(residual ratio {ratio:.2e}); increase tau_max")
    return CorrelatorSet(c=c0, tau_grid=tau_grid, t_phases=n_t, gbar=gbar,
                         decay_ratio=float(ratio))


def _extend(gens, d_start, t_start, tau_points, readout, threads):
    """Continue the correlator march from t_start over tau_points."""
    shifted = np.concatenate(([t_start], tau_points)) - t_start
    gbar, d_end = _integrate_segments(gens, d_start, shifted, readout,
                                      threads)
    return gbar[:, 1:], d_end


# =====================================================================
# Spectrum assembly
# =====================================================================

@dataclass(frozen=True)
class SpectrumTrace:
    """One-sided incoherent power spectrum of the reflected field.

    omega_grid: laboratory-frame angular frequencies (rad/s)
    S: power spectral density (W per rad/s)
    flux_density: photon flux density S/(hbar*omega) (per rad/s)
    metadata: tau_max, n_t, Q, tau_step actually used
    """

    omega_grid: np.ndarray
    S: np.ndarray
    flux_density: np.ndarray
    metadata: dict


def _filon_linear(tau_grid, g, dw):
    """integral_0^taumax exp(i*dw*tau) g(tau) d tau with g piecewise
    linear on the uniform tau grid; exact for the oscillatory kernel."""
    h = tau_grid[1] - tau_grid[0]
    z = 1j * np.asarray(dw) * h
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)  # placeholder to avoid 0/0
    i0 = np.where(small, 1.0 + z / 2 + z**2 / 6 + z**3 / 24,
                  (np.exp(zs) - 1.0) / zs)
    i1 = np.where(small, 0.5 + z / 3 + z**2 / 8 + z**3 / 30,
                  (np.exp(zs) * (zs - 1.0) + 1.0) / zs**2)
    w0 = i0 - i1
    w1 = i1

    total = np.empty(dw.size, dtype=complex)
    chunk = 64
    for a in range(0, dw.size, chunk):
        b = min(a + chunk, dw.size)
        total[a:b] = np.exp(1j * np.outer(dw[a:b], tau_grid)) @ g
    tail = g[-1] * np.exp(1j * dw * tau_grid[-1])
    return h * (w0 * (total - tail) + w1 * np.exp(-z) * (total - g[0]))


def regression_spectrum(state: HarmonicState, rates: RateTable,
                        coeffs: CoefficientTensors, probe: ProbeSpec,
                        grid, n_t: int = 16, tau_max=None,
                        tau_step: float = 0.25e-9,
                        threads: int = 1) -> SpectrumTrace:
    """Power spectral density S(omega) of the reflected field on the
    laboratory-frame grid (rad/s), from the stationary (q = 0) component
    of the connected correlators:

    S(omega) = (hbar*omega/pi) Re sum_uv,ij A[u,v] A[j,i]
               integral_0^inf d tau exp(i(omega - omega_d) tau)
               <sigma~_uv, sigma~_ij(tau)>^(0)

    Only the incoherent part is produced; the connected correlators
    exclude the coherent component by construction."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise DomainError("spectrum grid must be strictly increasing, >= 2 "
                          "points")
    cs = evolve_correlators(state, rates, coeffs, probe, n_t=n_t,
                            tau_max=tau_max, tau_step=tau_step,
                            threads=threads)
    gmean = np.mean(cs.gbar, axis=0)
    # grade -1 readout: exp(i(omega-omega_d)tau) on the lab correlator
    # becomes exp(i(omega-omega_p)tau) on the rotated one
    integral = _filon_linear(cs.tau_grid, gmean, grid - probe.w_p)
    s = HBAR * grid / np.pi * np.real(integral)
    floor = -1e-12 * max(np.max(s), 0.0)
    if np.min(s) < floor - 1e-30:
        raise NumericalError(
            f"spectrum negative beyond tolerance: min {np.min(s):.3e} W/(rad/s)")
    s = np.clip(s, 0.0, None)
    return SpectrumTrace(
        omega_grid=grid, S=s, flux_density=s / (HBAR * grid),
        metadata={"tau_max": float(cs.tau_grid[-1]), "n_t": n_t,
                  "Q": state.Q, "tau_step": tau_step,
                  "decay_ratio": cs.decay_ratio})


def conversion_efficiency(trace: SpectrumTrace, probe: ProbeSpec,
                          window) -> float:
    """eta = (trapezoidal integral of photon flux density over the
    window) / |E_p|^2."""
    w_lo, w_hi = float(window[0]), float(window[1])
    if not (w_lo < w_hi):
        raise DomainError("efficiency window must satisfy w_lo < w_hi")
    grid = trace.omega_grid
    if w_lo < grid[0] or w_hi > grid[-1]:
        raise DomainError(
            "efficiency window outside the spectrum grid: "
            f"[{w_lo:.6e}, {w_hi:.6e}] vs [{grid[0]:.6e}, {grid[-1]:.6e}]")
    if probe.E_p == 0.0:
        raise DomainError("efficiency undefined for zero probe amplitude")
    inside = (grid > w_lo) & (grid < w_hi)
    w_pts = np.concatenate(([w_lo], grid[inside], [w_hi]))
    f_pts = np.concatenate((
        [np.interp(w_lo, grid, trace.flux_density)],
        trace.flux_density[inside],
        [np.interp(w_hi, grid, trace.flux_density)]))
    flux = np.trapezoid(f_pts, w_pts)
    return float(flux / np.abs(probe.E_p) ** 2)


# =====================================================================
# Convenience wrappers over an operating point
# =====================================================================

def default_spectrum_grid(point, half_width=TWO_PI * 40e6,
                          spacing=TWO_PI * 50e3):
    """Lab-frame grid centered on the down-converted line (4~ -> 2~)."""
    center = point.lab_transitions()[3, 1]
    n = int(round(half_width / spacing))
    return center + (np.arange(2 * n + 1) - n) * spacing


def spectrum_at(point, w_p, p_p_watts, grid=None, Q: int = 3,
                n_t: int = 16, tau_max=None, tau_step: float = 0.25e-9,
                threads: int = 1):
    """Solve the harmonic steady state at one probe setting and return
    (SpectrumTrace, HarmonicState)."""
    if grid is None:
        grid = default_spectrum_grid(point)
    probe = ProbeSpec(w_p=w_p, P_p=p_p_watts)
    state = solve_harmonics(point.coeffs, probe, point.drive, Q=Q)
    trace = regression_spectrum(state, point.rates, point.coeffs, probe,
                                grid, n_t=n_t, tau_max=tau_max,
                                tau_step=tau_step, threads=threads)
    return trace, state
