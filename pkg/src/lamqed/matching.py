"""Impedance-matching operating points.

Locates the balanced-rate drive power P_d0 (where the dressed emission
rates out of the chosen upper level are equal), the reflection-dip
optimum (P_d*, omega_p*) for either upper branch, and the matched
transition-frequency curves versus drive detuning.

All optimizers are deterministic (bisection / golden section with fixed
iteration rules), so repeated runs are bit-identical.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MatchingError
from .steady import OperatingPoint, operating_point, reflection_at
from .system import BareParams, DampingRates, renormalize, is_nested
from .units import dbm_to_watts, watts_to_dbm

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

# find_balanced_drive search window and bracket ladder (dBm)
_BRACKET_LO_DBM = -110.0
_BRACKET_START_DBM = -100.0
_BRACKET_HI_DBM = -60.0
_BRACKET_STEP_DB = 2.0


def _require_nested(bare: BareParams, delta_omega_d):
    ren = renormalize(bare)
    if not is_nested(ren, ren.w_ge + delta_omega_d):
        raise DomainError(
            "drive detuning delta_omega_d = %.6g rad/s is outside the "
            "nesting window (-2*chi, 0); dressed levels do not interleave"
            % delta_omega_d)


def _branch_row(branch):
    if branch not in (3, 4):
        raise DomainError("branch must be 3 or 4, got %r" % (branch,))
    return branch - 1


def _rate_imbalance(bare, damping, delta_omega_d, p_d_watts, row):
    """kappa~_{b1} - kappa~_{b2} for upper level b at one drive power."""
    pt = operating_point(bare, damping, delta_omega_d, p_d_watts)
    kt = pt.rates.kappa_wg + pt.rates.kappa_loss
    return kt[row, 0] - kt[row, 1]


def find_balanced_drive(bare: BareParams, damping: DampingRates,
                        delta_omega_d, branch=4):
    """Drive power (W) where the branch's two emission rates are equal.

    Brackets the sign change of kappa~_{b1} - kappa~_{b2} by geometric
    expansion from -100 dBm upward (falling back to the -110..-100 dBm
    decade), then bisects to a relative power tolerance of 1e-4.
    """
    _require_nested(bare, delta_omega_d)
    row = _branch_row(branch)

    def f(p):
        return _rate_imbalance(bare, damping, delta_omega_d, p, row)

    lo_dbm, hi_dbm = _BRACKET_START_DBM, _BRACKET_START_DBM + _BRACKET_STEP_DB
    bracket = None
    while hi_dbm <= _BRACKET_HI_DBM:
        a, b = dbm_to_watts(lo_dbm), dbm_to_watts(hi_dbm)
        if f(a) * f(b) <= 0.0:
            bracket = (a, b)
            break
        lo_dbm, hi_dbm = hi_dbm, hi_dbm + _BRACKET_STEP_DB
    if bracket is None:
        lo_dbm, hi_dbm = _BRACKET_LO_DBM, _BRACKET_LO_DBM + _BRACKET_STEP_DB
        while hi_dbm <= _BRACKET_START_DBM:
            a, b = dbm_to_watts(lo_dbm), dbm_to_watts(hi_dbm)
            if f(a) * f(b) <= 0.0:
                bracket = (a, b)
                break
            lo_dbm, hi_dbm = hi_dbm, hi_dbm + _BRACKET_STEP_DB
    if bracket is None:
        raise MatchingError(
            "no balanced-rate crossing for branch %d within [-110, -60] dBm"
            % branch)

    a, b = bracket
    fa = f(a)
    while (b - a) > 1e-4 * b:
        m = 0.5 * (a + b)
        fm = f(m)
        if fa * fm <= 0.0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


@dataclass(frozen=True)
class MatchPoint:
    """Converged reflection-dip optimum for one upper branch."""

    p_d_star: float        # drive power, W
    omega_p_star: float    # probe frequency, rad/s
    r_min: float           # |r| at the optimum
    branch: int            # 3 or 4


def _golden_section(f, a, b, f_tol=1e-4, min_iter=12, max_iter=100):
    """Deterministic golden-section minimum of f on [a, b].

    Stops once the improvement of the best value between iterations
    falls below f_tol (after min_iter iterations).  Returns (x, f(x)).
    """
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best = min(fc, fd)
    for it in range(max_iter):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        new_best = min(fc, fd)
        if it + 1 >= min_iter and best - new_best < f_tol:
            best = min(best, new_best)
            break
        best = min(best, new_best)
    if fc < fd:
        return c, fc
    return d, fd


def _inner_dip(bare, damping, delta_omega_d, p_p_watts, p_d_watts, row,
               half_width, n_scan=81):
    """Minimum |r| over probe frequency at one drive power.

    Coarse scan followed by golden section.  The +-2*kappa window can
    contain BOTH branch dips (they approach each other near the nesting
    edges), so branch selection uses the interior local minimum nearest
    the branch transition, not the global argmin.  Returns
    (omega_p, |r|, at_boundary).
    """
    pt = operating_point(bare, damping, delta_omega_d, p_d_watts)
    center = pt.lab_transitions()[row, 0]
    grid = np.linspace(center - half_width, center + half_width, n_scan)

    def f(w):
        return abs(reflection_at(pt, w, p_p_watts))

    vals = np.array([f(w) for w in grid])
    interior = np.arange(1, n_scan - 1)
    is_min = (vals[interior] <= vals[interior - 1]) & \
             (vals[interior] <= vals[interior + 1])
    candidates = interior[is_min]
    if candidates.size == 0:
        i = int(np.argmin(vals))
        return grid[i], vals[i], True
    i = int(candidates[np.argmin(np.abs(grid[candidates] - center))])
    w, r = _golden_section(f, grid[i - 1], grid[i + 1])
    return w, r, False


def find_dip(bare: BareParams, damping: DampingRates, delta_omega_d,
             p_p_watts, branch=4, p_d0_watts=None) -> MatchPoint:
    """Reflection-dip optimum (P_d*, omega_p*) for one upper branch.

    Nested 1-D minimization: golden section over P_d (in dB, within
    +-6 dB of the balanced power P_d0) around an inner golden section
    over omega_p (within +-2*kappa of the branch transition).  A
    minimizer pinned at a window edge widens the window once; a second
    pin raises MatchingError.
    """
    _require_nested(bare, delta_omega_d)
    row = _branch_row(branch)
    if p_d0_watts is None:
        p_d0_watts = find_balanced_drive(bare, damping, delta_omega_d,
                                         branch=branch)
    p_d0_dbm = watts_to_dbm(p_d0_watts)
    kappa = damping.kappa1 + damping.kappa2

    def solve(db_window, w_window):
        def outer(p_dbm):
            _, r, _ = _inner_dip(bare, damping, delta_omega_d, p_p_watts,
                                 dbm_to_watts(p_dbm), row, w_window)
            return r

        lo, hi = p_d0_dbm - db_window, p_d0_dbm + db_window
        p_dbm, _ = _golden_section(outer, lo, hi)
        # boundary pins only count at the converged optimum; edge hits
        # probed far from it during the search are harmless
        w_star, r_star, inner_edge = _inner_dip(bare, damping,
                                                delta_omega_d, p_p_watts,
                                                dbm_to_watts(p_dbm),
                                                row, w_window)
        at_edge = (inner_edge
                   or p_dbm - lo < 0.05 * db_window
                   or hi - p_dbm < 0.05 * db_window)
        return p_dbm, w_star, r_star, at_edge

    p_dbm, w_star, r_star, at_edge = solve(6.0, 2.0 * kappa)
    if at_edge:
        p_dbm, w_star, r_star, at_edge = solve(12.0, 4.0 * kappa)
        if at_edge:
            raise MatchingError(
                "dip minimizer pinned at the search boundary for branch %d "
                "even after widening to +-12 dB / +-4 kappa" % branch)
    p_star = dbm_to_watts(p_dbm)
    pt = operating_point(bare, damping, delta_omega_d, p_star)
    r_min = abs(reflection_at(pt, w_star, p_p_watts))
    return MatchPoint(p_d_star=p_star, omega_p_star=w_star,
                      r_min=r_min, branch=branch)


@dataclass(frozen=True)
class LevelDiagram:
    """Matched transition-frequency curves versus drive detuning."""

    delta_omega_d: np.ndarray   # rad/s
    omega_31: np.ndarray        # lab frame, rad/s
    omega_42: np.ndarray
    omega_32: np.ndarray
    p_d_star: np.ndarray        # W
    r_min: np.ndarray


def level_diagram_sweep(bare: BareParams, damping: DampingRates,
                        delta_omega_d_values,
                        p_p_watts=dbm_to_watts(-141.2), branch=4,
                        threads=1) -> LevelDiagram:
    """Matched lab-frame omega~31, omega~42, omega~32 over a detuning sweep.

    For each detuning: converge the branch dip at the given probe power,
    then read the transition table at (delta_omega_d, P_d*).
    """
    deltas = np.atleast_1d(np.asarray(delta_omega_d_values, dtype=float))

    def one(delta):
        mp = find_dip(bare, damping, delta, p_p_watts, branch=branch)
        pt = operating_point(bare, damping, delta, mp.p_d_star)
        lab = pt.lab_transitions()
        return lab[2, 0], lab[3, 1], lab[2, 1], mp.p_d_star, mp.r_min

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, deltas))
    else:
        rows = [one(d) for d in deltas]
    w31, w42, w32, pd, rmin = (np.array(col) for col in zip(*rows))
    return LevelDiagram(delta_omega_d=deltas, omega_31=w31, omega_42=w42,
                        omega_32=w32, p_d_star=pd, r_min=rmin)
