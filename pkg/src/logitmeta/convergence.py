"""Total variation, exact mixing and hitting times, and the mixing/hitting
bound suite."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .chain import HALF_SLACK, bottleneck_star, subset_table, _as_mask
from .errors import CapError, InputError, LimitReached, NumericalError
from .game import SubsetMask
from . import spectral

STEP_CAP = 10**7
DENSE_CAP = spectral.DENSE_CAP
MONOTONE_TOL = 1e-12


def tv_distance(mu, nu):
    """Half the ℓ1 distance between two distributions on the same space."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise InputError(f"distributions of sizes {mu.shape} and {nu.shape}")
    return 0.5 * float(np.abs(mu - nu).sum())


def _rows_tv(rows, target):
    return 0.5 * np.abs(rows - target[None, :]).sum(axis=1)


def _support_block(chain):
    idx = chain.support.members()
    if idx.size > DENSE_CAP:
        raise CapError(f"{idx.size} states exceed the dense cap {DENSE_CAP}")
    return chain.P[idx][:, idx].toarray(), idx


def distance_profile(chain, t):
    """d(t) = max_x TV(P^t(x, ·), π), rows evolved by sparse products.

    For restricted chains the maximum runs over the support and the target
    is π_L.
    """
    t = int(t)
    if t < 0:
        raise InputError("t must be nonnegative")
    idx = chain.support.members()
    if idx.size > DENSE_CAP:
        raise CapError(f"{idx.size} starting rows exceed the dense cap {DENSE_CAP}")
    P = chain.P[idx][:, idx].tocsr()
    pi = chain.pi[idx]
    rows = np.eye(idx.size)
    for _ in range(t):
        rows = (P.T @ rows.T).T
    return float(_rows_tv(rows, pi).max())


class _Powers:
    """Cached powers K^(2^j) of a dense matrix."""

    def __init__(self, K):
        self.mats = [K]

    def get(self, j):
        while len(self.mats) <= j:
            self.mats.append(self.mats[-1] @ self.mats[-1])
        return self.mats[j]


def _first_time(K, value_of, eps, cap, what):
    """Least t >= 1 with value_of(K^t) <= eps given value_of(K^0) > eps.

    ``value_of`` maps a power of K to per-row values that are non-increasing
    in t; the returned array holds, per row, the first such t.  Doubling
    finds a power of two past every row's answer, then binary lifting fixes
    the bits from high to low.  Every evaluated (row, t, value) triple is
    checked for monotonicity in t.
    """
    m = K.shape[0]
    rows = np.arange(m)
    log_r, log_t, log_v = [], [], []
    powers = _Powers(K)
    j = 0
    while True:
        t = 1 << j
        v = value_of(powers.get(j))
        log_r.append(rows)
        log_t.append(np.full(m, t))
        log_v.append(v)
        if np.all(v <= eps):
            break
        if t >= cap:
            raise LimitReached(f"{what} exceeds the step cap {cap}", lower_bound=t + 1)
        j += 1
    cur = np.eye(m)
    tcur = np.zeros(m, dtype=np.int64)
    for k in range(j - 1, -1, -1):
        cand = cur @ powers.get(k)
        v = value_of(cand)
        log_r.append(rows)
        log_t.append(tcur + (1 << k))
        log_v.append(v)
        move = v > eps
        cur[move] = cand[move]
        tcur[move] += 1 << k
    _assert_monotone(np.concatenate(log_r), np.concatenate(log_t), np.concatenate(log_v))
    return tcur + 1


def _assert_monotone(r, t, v):
    order = np.lexsort((t, r))
    r, t, v = r[order], t[order], v[order]
    same = r[1:] == r[:-1]
    later = t[1:] > t[:-1]
    rise = v[1:] - v[:-1]
    bad = same & later & (rise > MONOTONE_TOL)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NumericalError(
            f"monotone quantity rose from {v[k]:.3g} to {v[k + 1]:.3g} at t={t[k + 1]}"
        )


def mixing_time(chain, eps=0.25, cap=STEP_CAP):
    """t_mix(ε) = min{t : d(t) <= ε} by doubling and binary search.

    Raises LimitReached (with a lower bound) past ``cap`` steps.
    """
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    K, idx = _support_block(chain)
    pi = chain.pi[idx]
    if 1.0 - pi.min() <= eps:
        return 0
    # the maximum over rows is what must drop below eps; replicate it per row
    def d_of(A):
        return np.full(A.shape[0], _rows_tv(A, pi).max())
    return int(_first_time(K, d_of, eps, cap, "mixing time")[0])


def _kill_block(chain, L):
    L = _as_mask(chain, L)
    idx = L.members()
    if idx.size > DENSE_CAP:
        raise CapError(f"{idx.size} states exceed the dense cap {DENSE_CAP}")
    K = chain.P[idx][:, idx].toarray()
    exit_flow = np.asarray(chain.P[idx][:, ~L.mask].sum(axis=1)).ravel()
    return K, exit_flow, idx


def survival(chain, L, ts):
    """Pr_x[τ_{S∖L} > t] for x in L (rows) and t in ``ts`` (columns).

    Evaluated as K^t 1 with K the killed block, using cached squarings.
    """
    K, _, _ = _kill_block(chain, L)
    return _survival_block(K, ts)


def _survival_block(K, ts):
    powers = _Powers(K)
    out = np.empty((K.shape[0], len(ts)))
    for c, t in enumerate(ts):
        t = int(t)
        v = np.ones(K.shape[0])
        j = 0
        while t:
            if t & 1:
                v = powers.get(j) @ v
            t >>= 1
            j += 1
        out[:, c] = v
    return out


def escape_probability(chain, L, t):
    """Pr_x[τ_{S∖L} <= t] for each x in L, as a sum of nonnegative terms.

    e_0 = 0 and e_{s+1} = exit + K e_s, so tiny escape probabilities keep
    their relative precision.
    """
    t = int(t)
    L = _as_mask(chain, L)
    idx = L.members()
    if L.card == chain.size:
        return np.zeros(idx.size)
    Ks = chain.P[idx][:, idx].tocsr()
    exit_flow = np.asarray(chain.P[idx][:, ~L.mask].sum(axis=1)).ravel()
    if t <= 200_000:
        e = np.zeros(idx.size)
        for _ in range(t):
            e = exit_flow + Ks @ e
        return e
    # (K, exit) doubling: e_{2s} = e_s + K^s e_s
    K = Ks.toarray()
    e = np.zeros(idx.size)
    Kpow, epow = K, exit_flow.copy()
    while t:
        if t & 1:
            e = epow + Kpow @ e
        epow = epow + Kpow @ epow
        Kpow = Kpow @ Kpow
        t >>= 1
    return e


def expected_hitting_times(chain, L):
    """E_x[τ_{S∖L}] for x in L by solving (I − K) h = 1."""
    L = _as_mask(chain, L)
    idx = L.members()
    if L.card == chain.size:
        raise InputError("the target S∖L is empty")
    if idx.size <= DENSE_CAP:
        K = chain.P[idx][:, idx].toarray()
        A = np.eye(idx.size) - K
        h = np.linalg.solve(A, np.ones(idx.size))
        # one step of iterative refinement
        r = np.ones(idx.size) - A @ h
        h = h + np.linalg.solve(A, r)
    else:
        A = sparse.identity(idx.size, format="csc") - chain.P[idx][:, idx].tocsc()
        h = spla.spsolve(A, np.ones(idx.size))
        res = np.abs(A @ h - 1).max()
        if res > 1e-12 * max(1.0, np.abs(h).max()):
            raise NumericalError(f"hitting-time solve residual {res:.3g}")
    if not np.all(np.isfinite(h)) or np.any(h < 0):
        raise NumericalError("singular hitting-time system; the target is unreachable")
    return h


def eps_hitting_times(chain, L, eps, cap=STEP_CAP):
    """T^ε_{S∖L}(x): least t with Pr_x[τ_{S∖L} > t] <= ε, for x in L."""
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    K, _, idx = _kill_block(chain, L)
    if idx.size == chain.size:
        raise LimitReached("S∖L is empty so it is never hit", lower_bound=cap + 1)
    return _eps_times_block(K, eps, cap)


def _eps_times_block(K, eps, cap=STEP_CAP):
    return _first_time(K, lambda A: A.sum(axis=1), eps, cap, "ε-hitting time")


@dataclass
class HittingProfile:
    target: SubsetMask
    starts: np.ndarray
    grid: np.ndarray
    tails: np.ndarray  # shape (len(starts), len(grid))
    expected: np.ndarray
    eps: float
    eps_times: np.ndarray


def doubling_grid(tmax=1024):
    return np.array([1 << k for k in range(int(math.log2(tmax)) + 1)], dtype=np.int64)


def hitting_profile(chain, target, eps=0.25, grid=None, cap=STEP_CAP):
    target = _as_mask(chain, target)
    if target.card == 0:
        raise InputError("target set must be nonempty")
    L = target.complement()
    grid = doubling_grid() if grid is None else np.asarray(grid, dtype=np.int64)
    tails = survival(chain, L, grid)
    h = expected_hitting_times(chain, L)
    te = eps_hitting_times(chain, L, eps, cap)
    return HittingProfile(target, L.members(), grid, tails, h, eps, te)


# ---------------------------------------------------------------------------
# bound suite


@dataclass
class Violation:
    inequality: str
    subset: tuple
    t: int
    x: int
    lhs: float
    rhs: float

    @property
    def excess(self):
        return self.lhs - self.rhs


@dataclass
class SuiteCheck:
    checked: int = 0
    skipped: int = 0
    worst_slack: float = math.inf
    violations: list = field(default_factory=list)

    def record(self, lhs, rhs, tol, where):
        """Record ``lhs <= rhs`` (slack rhs − lhs)."""
        self.checked += 1
        slack = rhs - lhs
        if slack < self.worst_slack:
            self.worst_slack = slack
        if slack < -tol:
            self.violations.append(Violation(where[0], where[1], where[2], where[3], lhs, rhs))


INEQUALITIES = (
    "relaxation_lower",      # (t_rel − 1) log 2 <= t_mix
    "relaxation_upper",      # t_mix <= log(4/π_min) t_rel
    "bottleneck_mixing",     # 1/(4B(L)) <= t_mix for π(L) <= 1/2
    "survival_lower",        # λ^t <= max_{x in L} Pr_x[τ > t]
    "survival_upper",        # Pr_x[τ > t] <= λ^t / sqrt(π_L(x))
    "escape_upper",          # min_{x in L} Pr_x[τ <= t] <= t B/(1 − B)
    "eps_hitting_upper",     # T^ε(x) <= (B^L_*)^{-2} (2(1−ε)/ε + log(1/π_L(x)))
)


@dataclass
class BoundSuiteReport:
    checks: dict
    t_mix: int = None
    t_rel: float = None
    tag: object = None

    @property
    def violations(self):
        return [v for c in self.checks.values() for v in c.violations]

    @property
    def passed(self):
        return not self.violations


def submask_bstar_table(chain, cap=20, half=True):
    """Array f[mask] = min over A ⊆ mask with π(A) <= 1/2 of B(A), full chain.

    ``mask`` ranges over bitmasks of the whole profile space, so this is only
    for |S| <= cap.  Entries with no admissible A are +inf.  With
    ``half=False`` every nonempty A ⊆ mask is admissible.
    """
    if chain.size > cap:
        raise CapError(f"submask table needs |S| <= {cap}")
    _, mass, cut = subset_table(chain, SubsetMask.full(chain.size), cap=cap)
    f = np.full(mass.size, np.inf)
    ok = mass > 0
    if half:
        ok &= mass <= 0.5 + HALF_SLACK
    f[ok] = cut[ok] / mass[ok]
    masks = np.arange(mass.size)
    for b in range(chain.size):
        has = (masks >> b) & 1 == 1
        f[has] = np.minimum(f[has], f[masks[has] ^ (1 << b)])
    return f


def bstar_within(chain, L, cap=20):
    """B^L_* = min over A ⊆ L with π(A) <= 1/2 of B(A) in the full chain."""
    L = _as_mask(chain, L)
    if L.card > cap:
        return None
    res = bottleneck_star(chain, scope=L, mode="exhaustive", cap=cap)
    return None if res is None else res.value


def verify_bound_suite(chain, subsets, t_grid=None, eps=0.25, tol=1e-8,
                       mixing=True, bstar=None, tag=None, bstar_cap=20):
    """Check every mixing and hitting inequality on the given subsets.

    ``bstar`` optionally maps a SubsetMask to B^L_* (or None when no
    admissible A exists); by default it is computed exhaustively for
    |L| <= ``bstar_cap`` and the dependent inequality is skipped otherwise.
    """
    t_grid = doubling_grid() if t_grid is None else np.asarray(t_grid, dtype=np.int64)
    checks = {name: SuiteCheck() for name in INEQUALITIES}
    pi = chain.pi
    t_mix = t_rel = None
    if mixing:
        spec = spectral.spectrum(chain)
        t_rel = spec.t_rel
        t_mix = mixing_time(chain, 0.25)
        checks["relaxation_lower"].record((t_rel - 1) * math.log(2), t_mix, tol,
                                          ("relaxation_lower", (), 0, -1))
        checks["relaxation_upper"].record(t_mix, math.log(4 / pi.min()) * t_rel, tol,
                                          ("relaxation_upper", (), 0, -1))
    Pd = chain.P.toarray() if chain.size <= DENSE_CAP else None
    for L in subsets:
        L = _as_mask(chain, L)
        members = tuple(int(v) for v in L.members())
        idx = L.members()
        mass = float(pi[idx].sum())
        if Pd is None:
            rows = chain.P[idx].toarray()
        else:
            rows = Pd[idx]
        K = rows[:, idx]
        exit_flow = rows[:, ~L.mask].sum(axis=1)
        B = float(np.dot(pi[idx], exit_flow)) / mass
        if mixing and mass <= 0.5 + HALF_SLACK:
            lhs = math.inf if B == 0 else 1.0 / (4.0 * B)
            checks["bottleneck_mixing"].record(lhs, t_mix, tol, ("bottleneck_mixing", members, 0, -1))
        if L.card == chain.size:
            for name in ("survival_lower", "survival_upper", "escape_upper", "eps_hitting_upper"):
                checks[name].skipped += 1
            continue
        lam = float(np.linalg.eigvalsh(spectral.symmetrized(K))[-1])
        tails = _survival_block(K, t_grid)
        piL = pi[idx] / mass
        for c, t in enumerate(t_grid):
            t = int(t)
            lam_t = lam**t
            checks["survival_lower"].record(lam_t, tails[:, c].max(), tol,
                                            ("survival_lower", members, t, -1))
            ub = lam_t / np.sqrt(piL)
            k = int(np.argmax(tails[:, c] - ub))
            checks["survival_upper"].record(tails[k, c], ub[k], tol,
                                            ("survival_upper", members, t, members[k]))
            if B < 1:
                esc = 1.0 - tails[:, c]
                checks["escape_upper"].record(esc.min(), t * B / (1 - B), tol,
                                              ("escape_upper", members, t, -1))
            else:
                checks["escape_upper"].skipped += 1
        bl = bstar(L) if bstar is not None else bstar_within(chain, L, bstar_cap)
        if bl is None or not math.isfinite(bl) or bl <= 0:
            checks["eps_hitting_upper"].skipped += 1
            continue
        te = _eps_times_block(K, eps)
        ub = bl**-2 * (2 * (1 - eps) / eps + np.log(1 / piL))
        k = int(np.argmax(te - ub))
        checks["eps_hitting_upper"].record(float(te[k]), float(ub[k]), tol,
                                           ("eps_hitting_upper", members, 0, members[k]))
    return BoundSuiteReport(checks, t_mix, t_rel, tag)
