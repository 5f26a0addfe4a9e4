"""Heisenberg-equation coefficient tensors and the harmonic-balance
steady state under simultaneous drive and probe.

The one-point expectations <sigma~_ij(t)> of the dressed transition
operators are periodic in the drive-probe beat, so they expand as
<sigma~_ij(t)> = sum_q s_ij^q exp(i q (w_p - w_d) t).  Truncating at
|q| <= Q turns the equations of motion into one dense complex linear
system of 16*(2Q+1) unknowns, solved by LU with partial pivoting.  One
diagonal equation per harmonic is linearly dependent on the others and
is replaced by the trace constraint sum_m s_mm^q = delta_q0.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dressed import (RateTable, DressedBasis, diagonalize, decay_rates,
                      transition_frequencies, lab_frame_frequencies,
                      track_labels, apply_label_order)
from .errors import DomainError, NumericalError
from .system import (BareParams, DampingRates, DriveSpec, ProbeSpec,
                     RenormalizedParams, renormalize, rotating_hamiltonian)
from .units import dbm_to_watts


# =====================================================================
# Coefficient tensors
# =====================================================================

@dataclass(frozen=True)
class CoefficientTensors:
    """eta1[i,j,m,n] (complex, s^-1) is the drift generator of
    d<sigma~_ij>/dt; eta2_wg / eta2_qb (real, s^-1/2) couple the probe
    field through the waveguide and the qubit port respectively."""

    eta1: np.ndarray
    eta2_wg: np.ndarray
    eta2_qb: np.ndarray


def _xi_tensor(amp):
    """Dissipative tensor for one channel with signed amplitude matrix amp:

    xi[i,j,m,n] = amp[m,i]*amp[n,j]
                  - delta_im * sum_nu amp[j,nu]*amp[n,nu] / 2
                  - delta_jn * sum_nu amp[i,nu]*amp[m,nu] / 2
    """
    n = amp.shape[0]
    eye = np.eye(n)
    gram = amp @ amp.T
    xi = np.einsum("mi,nj->ijmn", amp, amp)
    xi -= 0.5 * np.einsum("im,jn->ijmn", eye, gram)
    xi -= 0.5 * np.einsum("jn,im->ijmn", eye, gram)
    return xi


def _eta2_tensor(amp):
    """eta2[i,j,m,n] = delta_im*amp[j,n] - delta_jn*amp[m,i]."""
    n = amp.shape[0]
    eye = np.eye(n)
    return (np.einsum("im,jn->ijmn", eye, amp)
            - np.einsum("jn,mi->ijmn", eye, amp))


def build_coefficients(rates: RateTable, energies,
                       channels: DampingRates) -> CoefficientTensors:
    """Assemble eta1 (free evolution + all three dissipators) and the
    probe-coupling tensors from the signed amplitude matrices."""
    energies = np.asarray(energies, dtype=float)
    n = energies.size
    eta1 = np.zeros((n, n, n, n), dtype=complex)
    idx = np.arange(n)
    eta1[idx[:, None], idx[None, :], idx[:, None], idx[None, :]] = (
        1j * (energies[:, None] - energies[None, :]))
    eta1 += _xi_tensor(rates.amp_wg)
    eta1 += _xi_tensor(rates.amp_loss)
    eta1 += _xi_tensor(rates.amp_qb)
    return CoefficientTensors(eta1=eta1,
                              eta2_wg=_eta2_tensor(rates.amp_wg),
                              eta2_qb=_eta2_tensor(rates.amp_qb))


# =====================================================================
# Harmonic-balance solve
# =====================================================================

@dataclass(frozen=True)
class HarmonicState:
    """Fourier coefficients s[i,j,q+Q] of <sigma~_ij(t)>, harmonics
    q = -Q..Q of the beat detuning (w_p - w_d, rad/s)."""

    s: np.ndarray
    Q: int
    detuning: float

    def s_q(self, q):
        if abs(q) > self.Q:
            raise DomainError(f"harmonic q={q} outside cutoff Q={self.Q}")
        return self.s[:, :, q + self.Q]

    @property
    def populations(self):
        return np.real(np.diagonal(self.s_q(0)))


def _degenerate_steady_state(dyn, n, Q):
    """Steady state of a degenerate harmonic system (e.g. a lossless
    device with the drive off, where a whole qubit manifold decouples and
    some population split is conserved).

    The harmonic coefficients evolve as d S/dt = dyn @ S, so every left
    null vector u of dyn is a conserved functional: u . S(t) = u . S(0).
    The steady manifold is the right null space; the physical point on it
    is fixed by evaluating the conserved functionals on the ground state
    (all population in dressed level 1, all harmonics zero).  Returns the
    flat solution vector, or None if the selection is itself singular.
    """
    right = scipy.linalg.null_space(dyn, rcond=1e-12)
    left = scipy.linalg.null_space(dyn.conj().T, rcond=1e-12)
    k = right.shape[1]
    if k == 0 or left.shape[1] != k:
        return None
    s_init = np.zeros(dyn.shape[0], dtype=complex)
    s_init[Q * n * n] = 1.0  # s_11^0 = 1
    sel = left.conj().T @ right
    try:
        t = scipy.linalg.solve(sel, left.conj().T @ s_init)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
        return None
    x = right @ t
    resid = np.max(np.abs(dyn @ x))
    scale = np.max(np.abs(dyn)) * max(np.max(np.abs(x)), 1.0)
    trace0 = np.sum(x[Q * n * n + np.arange(n) * n + np.arange(n)])
    if resid > 1e-6 * scale or abs(trace0 - 1.0) > 1e-8:
        return None
    return x


def solve_harmonics(coeffs: CoefficientTensors, probe: ProbeSpec,
                    drive: DriveSpec, Q: int = 3) -> HarmonicState:
    """Solve the truncated harmonic system for s_ij^q.

    i q (w_p - w_d) s_ij^q = sum_mn [ eta1[ijmn] s_mn^q
                                      - i E_p eta2[ijmn] s_mn^{q+1}
                                      + i E_p eta2[jinm] s_mn^{q-1} ]

    with s^q = 0 beyond |q| = Q.  The probe couples through the
    waveguide tensor only (the qubit-port input is vacuum).
    """
    if Q < 1:
        raise DomainError("harmonic cutoff Q must be >= 1")
    n = coeffs.eta1.shape[0]
    n2 = n * n
    nb = 2 * Q + 1
    delta = probe.w_p - drive.w_d
    e_p = probe.E_p

    h1 = coeffs.eta1.reshape(n2, n2)
    h2 = coeffs.eta2_wg.reshape(n2, n2)
    h2t = np.transpose(coeffs.eta2_wg, (1, 0, 3, 2)).reshape(n2, n2)

    m = np.zeros((nb, n2, nb, n2), dtype=complex)
    b = np.zeros((nb, n2), dtype=complex)
    eye2 = np.eye(n2)
    trace_cols = np.arange(n) * n + np.arange(n)
    for iq, q in enumerate(range(-Q, Q + 1)):
        m[iq, :, iq, :] = h1 - 1j * q * delta * eye2
        if iq + 1 < nb:
            m[iq, :, iq + 1, :] = -1j * e_p * h2
        if iq - 1 >= 0:
            m[iq, :, iq - 1, :] = 1j * e_p * h2t
    # the coefficient equations d s^q/dt = dyn @ s close on themselves, so
    # dyn is kept intact for the degenerate fallback before the diagonal
    # rows are touched
    dyn = m.reshape(nb * n2, nb * n2).copy()
    for iq, q in enumerate(range(-Q, Q + 1)):
        # the diagonal rows are linearly dependent: replace the (1,1) row
        # of every harmonic with the trace constraint
        m[iq, 0, :, :] = 0.0
        m[iq, 0, iq, trace_cols] = 1.0
        b[iq, 0] = 1.0 if q == 0 else 0.0

    mat = m.reshape(nb * n2, nb * n2)
    rhs = b.reshape(nb * n2)
    try:
        x = scipy.linalg.solve(mat, rhs)
        resid = np.max(np.abs(mat @ x - rhs))
        scale = np.max(np.abs(mat)) * max(np.max(np.abs(x)), 1.0)
        solved = np.isfinite(resid) and resid <= 1e-6 * scale
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
        solved = False
    if not solved:
        x = _degenerate_steady_state(dyn, n, Q)
        if x is None:
            raise NumericalError(
                "harmonic system solve failed: steady state singular or "
                "inconsistent, condition estimate "
                f"{np.linalg.cond(mat):.3e}")

    s = np.transpose(x.reshape(nb, n, n), (1, 2, 0))
    # populations are clamped onto [0,1]; anything beyond round-off is a
    # solver failure, not a state
    pops = np.real(s[np.arange(n), np.arange(n), Q])
    if np.any(pops < -1e-9) or np.any(pops > 1.0 + 1e-9):
        raise NumericalError(f"unphysical populations from solve: {pops}")
    clamped = np.clip(pops, 0.0, 1.0)
    s[np.arange(n), np.arange(n), Q] = (
        clamped + 1j * np.imag(s[np.arange(n), np.arange(n), Q]))
    return HarmonicState(s=s, Q=Q, detuning=delta)


def reflection(state: HarmonicState, rates: RateTable,
               probe: ProbeSpec) -> complex:
    """Complex reflection coefficient of the probe:
    r = 1 - i * sum_mn A[m,n] * s_nm^{-1} / E_p."""
    if probe.E_p == 0.0:
        raise DomainError("reflection undefined for zero probe amplitude")
    sm1 = state.s_q(-1)
    return 1.0 - 1j * np.sum(rates.amp_wg * sm1.T) / probe.E_p


# =====================================================================
# Operating-point pipeline
# =====================================================================

@dataclass(frozen=True)
class OperatingPoint:
    """Everything derived from (device, delta_omega_d, P_d) in one place."""

    ren: RenormalizedParams
    drive: DriveSpec
    basis: DressedBasis
    rates: RateTable
    coeffs: CoefficientTensors

    def lab_transitions(self):
        table = lab_frame_frequencies(transition_frequencies(self.basis),
                                      self.drive.w_d)
        return table


def operating_point(bare: BareParams, damping: DampingRates,
                    delta_omega_d, p_d_watts, *,
                    label_order=None) -> OperatingPoint:
    """Renormalize, build the rotating Hamiltonian, diagonalize, and
    assemble rate tables and coefficient tensors for one drive setting."""
    ren = renormalize(bare)
    drive = DriveSpec(w_d=ren.w_ge + delta_omega_d, P_d=p_d_watts)
    basis = diagonalize(rotating_hamiltonian(ren, drive, bare.gamma_c))
    if label_order is not None:
        basis = apply_label_order(basis, label_order)
    rates = decay_rates(basis, damping)
    coeffs = build_coefficients(rates, basis.energies, damping)
    return OperatingPoint(ren=ren, drive=drive, basis=basis, rates=rates,
                          coeffs=coeffs)


def reflection_at(point: OperatingPoint, w_p, p_p_watts, Q=3):
    """Reflection coefficient at one (probe frequency, probe power)."""
    probe = ProbeSpec(w_p=w_p, P_p=p_p_watts)
    state = solve_harmonics(point.coeffs, probe, point.drive, Q=Q)
    return reflection(state, point.rates, probe)


# =====================================================================
# 2-D reflection sweep
# =====================================================================

@dataclass
class SweepResult:
    """Reflection map over (P_d, w_p) plus label-tracked transition
    frequency overlay curves (laboratory frame, rad/s)."""

    wp_grid: np.ndarray
    pd_dbm_grid: np.ndarray
    r: np.ndarray            # complex, shape (n_pd, n_wp); NaN on failure
    flags: np.ndarray        # string per point: "ok" or "error:<...>"
    transitions: dict        # keys "41","31","42","32" -> arrays (n_pd,)
    ambiguous: np.ndarray    # bool per P_d row: label tracking degenerate


def sweep_reflection(bare: BareParams, damping: DampingRates, delta_omega_d,
                     wp_grid, pd_dbm_grid, probe_power_watts, Q: int = 3,
                     threads: int = 1) -> SweepResult:
    """Reflection magnitude/phase map over a probe-frequency x drive-power
    grid, with dressed labels tracked continuously along the power axis."""
    wp_grid = np.atleast_1d(np.asarray(wp_grid, dtype=float))
    pd_dbm_grid = np.atleast_1d(np.asarray(pd_dbm_grid, dtype=float))
    if wp_grid.size == 0 or pd_dbm_grid.size == 0:
        raise DomainError("sweep grids must be nonempty")
    if np.any(np.diff(wp_grid) <= 0) or np.any(np.diff(pd_dbm_grid) <= 0):
        raise DomainError("sweep grids must be strictly increasing")

    n_pd, n_wp = pd_dbm_grid.size, wp_grid.size
    points = []
    ambiguous = np.zeros(n_pd, dtype=bool)
    prev_basis = None
    order = None
    for k, pd_dbm in enumerate(pd_dbm_grid):
        pt = operating_point(bare, damping, delta_omega_d,
                             dbm_to_watts(pd_dbm))
        if prev_basis is not None:
            match = track_labels(prev_basis, pt.basis)
            ambiguous[k] = match.ambiguous
            if match.new_order != (0, 1, 2, 3):
                pt = operating_point(bare, damping, delta_omega_d,
                                     dbm_to_watts(pd_dbm),
                                     label_order=match.new_order)
        points.append(pt)
        prev_basis = pt.basis

    trans = {key: np.empty(n_pd) for key in ("41", "31", "42", "32")}
    for k, pt in enumerate(points):
        lab = pt.lab_transitions()
        trans["41"][k] = lab[3, 0]
        trans["31"][k] = lab[2, 0]
        trans["42"][k] = lab[3, 1]
        trans["32"][k] = lab[2, 1]

    r = np.full((n_pd, n_wp), np.nan + 0j, dtype=complex)
    flags = np.full((n_pd, n_wp), "ok", dtype=object)

    def run_row(k):
        pt = points[k]
        for iw, w_p in enumerate(wp_grid):
            try:
                r[k, iw] = reflection_at(pt, w_p, probe_power_watts, Q=Q)
            except NumericalError as exc:
                flags[k, iw] = f"error:{exc}"

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_row, range(n_pd)))
    else:
        for k in range(n_pd):
            run_row(k)

    return SweepResult(wp_grid=wp_grid, pd_dbm_grid=pd_dbm_grid, r=r,
                       flags=flags, transitions=trans, ambiguous=ambiguous)
