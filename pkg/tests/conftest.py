"""Shared fixtures: reference device, derived operating points, and an
independent dense steady-state oracle used by the solver tests."""

import numpy as np
import pytest

from lamqed.system import (default_bare_params, default_damping_rates,
                           renormalize, rotating_hamiltonian, DriveSpec)
from lamqed.units import HBAR, TWO_PI


@pytest.fixture(scope="session")
def bare():
    return default_bare_params()


@pytest.fixture(scope="session")
def damping():
    return default_damping_rates()


@pytest.fixture(scope="session")
def ren(bare):
    return renormalize(bare)


def balanced_drive_power_closed_form(ren, w_d, gamma_c):
    """Independent two-level closed form for the balanced-rate drive power.

    With the Hamiltonian exactly block-diagonal, the n=0 block mixes
    (|g,0>,|e,0>) with detuning d_L = -(w_d - w_ge) and the n=1 block
    mixes (|e,1>,|g,1>) with detuning d_U = 2*chi + (w_d - w_ge), both
    with Rabi element Omega = sqrt(gamma_c)*E_d.  The two radiative
    rates out of each upper dressed state are equal exactly when the
    combined mixing angle theta_L + theta_U = 45 deg, i.e. when
    4*Omega^2 = d_L*d_U.
    """
    delta = w_d - ren.w_ge
    d_lower = -delta
    d_upper = 2.0 * ren.chi + delta
    if d_lower <= 0 or d_upper <= 0:
        raise ValueError("outside the nesting regime")
    omega_bal_sq = d_lower * d_upper / 4.0
    return HBAR * w_d * omega_bal_sq / gamma_c


def drive_at(ren, bare, delta_omega_d, p_d_watts):
    return DriveSpec(w_d=ren.w_ge + delta_omega_d, P_d=p_d_watts)


def hamiltonian_at(ren, bare, delta_omega_d, p_d_watts):
    drv = drive_at(ren, bare, delta_omega_d, p_d_watts)
    return rotating_hamiltonian(ren, drv, bare.gamma_c), drv


def lindblad_steady_state(basis, rates):
    """Independent dense steady-state oracle.

    Builds the 16x16 Liouvillian (column-stacking convention) for the
    drive-only problem with one collapse operator per damping channel,
    takes its null space, and returns the one-point expectations
    s0[i,j] = <sigma~_ij> = rho[j,i].
    """
    import scipy.linalg

    h = np.diag(basis.energies).astype(complex)
    eye = np.eye(4, dtype=complex)
    liou = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    # collapse operators: L[b,a] = amp[a,b] represents sum_ab amp[a][b] *
    # |b~><a~| (the dressed-frame lowering operator of that channel)
    for amp in (rates.amp_wg, rates.amp_loss, rates.amp_qb):
        L = amp.T.astype(complex)
        LdL = L.conj().T @ L
        liou += (np.kron(L.conj(), L)
                 - 0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye)))
    null = scipy.linalg.null_space(liou, rcond=1e-10)
    assert null.shape[1] == 1, "steady state not unique"
    rho = null[:, 0].reshape(4, 4, order="F")
    rho = rho / np.trace(rho)
    return rho.T
