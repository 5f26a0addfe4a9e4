"""Dressed states: diagonalization, transition frequencies, decay rates.

Dressed states |1~>..|4~> are the eigenstates of the rotating-frame
Hamiltonian, labeled in ascending energy order.  Decay channels are
carried as *signed* amplitude matrices, e.g.
A[i][j] = sqrt(kappa1) * <i~|a^dag|j~>, because the interference terms
in the steady-state coefficient tensors need the relative signs; the
conventional rates are the squares, kappa_tilde[i][j] = A[i][j]^2.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .system import DampingRates, a_dagger_matrix, sigma_eg_matrix

_BLOCK_TOL = 0.0  # rotating_hamiltonian produces exact zeros


@dataclass(frozen=True)
class DressedBasis:
    """Eigen-decomposition of the rotating-frame Hamiltonian.

    energies : ascending eigenfrequencies (rad/s), shape (4,)
    basis_change : real orthogonal U, column j = |j~> in the bare basis
    """

    energies: np.ndarray
    basis_change: np.ndarray

    def photon_sector(self):
        """0/1 per dressed state: which photon-number block supports it."""
        u = self.basis_change
        return np.where(np.abs(u[2:4, :]).max(axis=0) > np.abs(u[0:2, :]).max(axis=0),
                        1, 0)


def _fix_column_signs(u):
    """Make the largest-magnitude entry of each column positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0.0] = 1.0
    return u * signs


def diagonalize(h: np.ndarray) -> DressedBasis:
    """Diagonalize a real-symmetric 4x4 Hamiltonian into a DressedBasis.

    When h is exactly block-diagonal in photon number (as produced by
    rotating_hamiltonian), each 2x2 block is diagonalized separately so
    that the cross-block components of the eigenvectors are exact zeros.
    """
    h = np.asarray(h, dtype=float)
    if np.max(np.abs(h - h.T)) != 0.0:
        h = 0.5 * (h + h.T)
    off = max(np.max(np.abs(h[0:2, 2:4])), np.max(np.abs(h[2:4, 0:2])))
    if off <= _BLOCK_TOL:
        w = np.empty(4)
        u = np.zeros((4, 4))
        for sl in (slice(0, 2), slice(2, 4)):
            wb, ub = np.linalg.eigh(h[sl, sl])
            w[sl] = wb
            u[sl, sl] = ub
    else:
        w, u = np.linalg.eigh(h)
    order = np.argsort(w, kind="stable")
    w = w[order]
    u = u[:, order]
    return DressedBasis(energies=w, basis_change=_fix_column_signs(u))


def transition_frequencies(basis: DressedBasis) -> np.ndarray:
    """Antisymmetric 4x4 table w~[i][j] = w~_i - w~_j (rotating frame)."""
    e = basis.energies
    return e[:, None] - e[None, :]


def lab_frame_frequencies(table: np.ndarray, w_d) -> np.ndarray:
    """Rotating-frame transition table -> laboratory frame (adds w_d)."""
    return table + w_d


@dataclass(frozen=True)
class RateTable:
    """Signed transition amplitudes for the three damping channels.

    amp_wg[i][j]   = sqrt(kappa1) * <i~|a^dag|j~>   (waveguide)
    amp_loss[i][j] = sqrt(kappa2) * <i~|a^dag|j~>   (internal loss)
    amp_qb[i][j]   = sqrt(gamma)  * <i~|sigma_eg|j~> (qubit decay)

    Rates are the elementwise squares (kappa_wg etc.).  Indices are
    0-based; dressed state |k~> is row/column k-1.
    """

    amp_wg: np.ndarray
    amp_loss: np.ndarray
    amp_qb: np.ndarray

    @property
    def kappa_wg(self):
        return self.amp_wg ** 2

    @property
    def kappa_loss(self):
        return self.amp_loss ** 2

    @property
    def gamma_qb(self):
        return self.amp_qb ** 2


def decay_rates(basis: DressedBasis, damping: DampingRates) -> RateTable:
    """Signed dressed-frame amplitude matrices for all damping channels."""
    u = basis.basis_change
    adag = u.T @ a_dagger_matrix() @ u
    seg = u.T @ sigma_eg_matrix() @ u
    return RateTable(amp_wg=np.sqrt(damping.kappa1) * adag,
                     amp_loss=np.sqrt(damping.kappa2) * adag,
                     amp_qb=np.sqrt(damping.gamma) * seg)


@dataclass(frozen=True)
class LabelMatch:
    """Result of track_labels: new_order[k] is the index (in `next`) of
    the dressed state that continues prev state k.  `ambiguous` is set
    when two assignments score within 1e-6 of each other; the permutation
    then falls back to plain energy ordering."""

    new_order: tuple
    ambiguous: bool


def track_labels(prev: DressedBasis, next_basis: DressedBasis) -> LabelMatch:
    """Match dressed labels across a sweep step by maximal overlap.

    Chooses the permutation pi maximizing sum_k |<k~_prev | pi(k)_next>|
    over all 4! assignments (the problem is tiny, brute force is exact).
    """
    overlap = np.abs(prev.basis_change.T @ next_basis.basis_change)
    best, second = None, -np.inf
    best_perm = None
    for perm in permutations(range(4)):
        score = sum(overlap[k, perm[k]] for k in range(4))
        if best is None or score > best:
            second = best if best is not None else -np.inf
            best, best_perm = score, perm
        elif score > second:
            second = score
    if best - second < 1e-6:
        return LabelMatch(new_order=(0, 1, 2, 3), ambiguous=True)
    return LabelMatch(new_order=best_perm, ambiguous=False)


def apply_label_order(basis: DressedBasis, order) -> DressedBasis:
    """Reorder dressed states of `basis` according to track_labels output."""
    idx = list(order)
    return DressedBasis(energies=basis.energies[idx],
                        basis_change=basis.basis_change[:, idx])
