"""Metastable distributions: drift certificates, pseudo-mixing times, the
restricted measures π_L, their mixtures and the hitting-weighted mixtures ν_x."""

from dataclasses import dataclass, field

import numpy as np

from .chain import _as_mask, bottleneck, restrict_loop, stationary_restricted
from .convergence import DENSE_CAP, STEP_CAP, eps_hitting_times, escape_probability
from .errors import CapError, InputError, NumericalError
from .game import SubsetMask

STEP_BUDGET = 100_000
WEIGHT_TOL = 1e-12

__all__ = [
    "MetaCertificate", "PseudoMixResult", "is_metastable", "one_step_drift",
    "drift_curve", "stationary_restricted", "pseudo_mixing_time", "window_check",
    "convex_combination", "CombinationReport", "combination_report", "NuResult",
    "nu_distribution", "nu_check", "CouplingReport", "restriction_coupling_check",
]


def _dist(chain, mu):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (chain.size,):
        raise InputError(f"distribution has shape {mu.shape}, expected ({chain.size},)")
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
        raise InputError("not a probability vector")
    return mu


def _tv(a, b):
    return 0.5 * float(np.abs(a - b).sum())


class _Stepper:
    """Right-multiplication by P, dense when the space is small."""

    def __init__(self, chain):
        self.dense = chain.P.toarray() if chain.size <= DENSE_CAP else None
        self.PT = None if self.dense is not None else chain.P.T.tocsr()

    def __call__(self, rows):
        if self.dense is not None:
            return rows @ self.dense
        if rows.ndim == 1:
            return self.PT @ rows
        return (self.PT @ rows.T).T


@dataclass
class MetaCertificate:
    mu: np.ndarray
    eps: float
    T: float
    observed: float
    grid: np.ndarray
    mode: str            # "step" or "bound"
    passed: bool
    first_violation: int = None

    def to_dict(self):
        return {
            "eps": self.eps, "T": self.T, "observed": self.observed, "mode": self.mode,
            "passed": self.passed, "grid_points": int(len(self.grid)),
            "first_violation": self.first_violation,
        }


def one_step_drift(chain, mu):
    """‖μP − μ‖_TV."""
    mu = _dist(chain, mu)
    return _tv(_Stepper(chain)(mu), mu)


def drift_curve(chain, mu, T):
    """‖μP^t − μ‖_TV for t = 0..T."""
    mu = _dist(chain, mu)
    step = _Stepper(chain)
    out = np.zeros(int(T) + 1)
    cur = mu
    for t in range(1, int(T) + 1):
        cur = step(cur)
        out[t] = _tv(cur, mu)
    return out


def is_metastable(chain, mu, eps, T, mode="auto", step_budget=STEP_BUDGET, tol=1e-12):
    """Certify ‖μP^t − μ‖ <= ε for all 0 <= t <= T.

    ``mode="step"`` evolves μ exactly and stops at the first violation.
    ``mode="bound"`` uses the one-step drift δ: drift after t steps is at most
    tδ, so δT <= ε certifies the whole horizon (a failure in this mode only
    means the shortcut is inconclusive).  ``"auto"`` steps when T fits in
    ``step_budget`` and falls back to the bound otherwise.  ``tol`` absorbs
    rounding in the TV sums (μ = π gives drifts of order 1e-16).
    """
    if T < 0:
        raise InputError("T must be nonnegative")
    if not eps >= 0:
        raise InputError("eps must be nonnegative")
    mu = _dist(chain, mu)
    if mode == "auto":
        mode = "step" if T <= step_budget else "bound"
    if mode == "bound":
        delta = one_step_drift(chain, mu)
        observed = delta * T
        return MetaCertificate(mu, eps, T, observed, np.array([0, 1]), "bound", observed <= eps + tol)
    if mode != "step":
        raise InputError(f"unknown mode {mode!r}")
    step = _Stepper(chain)
    cur = mu
    worst = 0.0
    T = int(T)
    for t in range(1, T + 1):
        cur = step(cur)
        d = _tv(cur, mu)
        worst = max(worst, d)
        if d > eps + tol:
            return MetaCertificate(mu, eps, T, worst, np.arange(t + 1), "step", False, t)
    return MetaCertificate(mu, eps, T, worst, np.arange(T + 1), "step", True)


@dataclass
class PseudoMixResult:
    mu: np.ndarray
    starts: SubsetMask
    eps: float
    value: int = None
    lower_bound: int = None

    @property
    def finite(self):
        return self.value is not None


def _start_rows(chain, idx):
    rows = np.zeros((idx.size, chain.size))
    rows[np.arange(idx.size), idx] = 1.0
    return rows


def pseudo_mixing_time(chain, mu, L, eps, budget=STEP_CAP):
    """t_μ^L(ε): first t with max_{x in L} ‖P^t(x, ·) − μ‖ <= ε.

    TV to a non-stationary μ need not be monotone in t, so the rows are
    evolved one step at a time.  Past ``budget`` steps the result carries a
    lower bound instead of a value.
    """
    mu = _dist(chain, mu)
    L = _as_mask(chain, L)
    if L.card == 0:
        raise InputError("the start set must be nonempty")
    idx = L.members()
    if idx.size > DENSE_CAP:
        raise CapError(f"{idx.size} start rows exceed the dense cap {DENSE_CAP}")
    step = _Stepper(chain)
    rows = _start_rows(chain, idx)
    for t in range(int(budget) + 1):
        if 0.5 * np.abs(rows - mu).sum(axis=1).max() <= eps:
            return PseudoMixResult(mu, L, eps, value=t)
        rows = step(rows)
    return PseudoMixResult(mu, L, eps, lower_bound=int(budget) + 1)


def window_check(chain, mu, L, eps, T, t0=None):
    """max over t0 <= t <= t0 + T and x in L of ‖P^t(x, ·) − μ‖.

    With μ (ε, T)-metastable and t0 = t_μ^L(ε) this stays below 2ε.
    Returns (t0, worst).
    """
    mu = _dist(chain, mu)
    L = _as_mask(chain, L)
    if t0 is None:
        res = pseudo_mixing_time(chain, mu, L, eps)
        if not res.finite:
            raise NumericalError("pseudo-mixing time not reached within the budget")
        t0 = res.value
    step = _Stepper(chain)
    rows = _start_rows(chain, L.members())
    for _ in range(t0):
        rows = step(rows)
    worst = 0.0
    for t in range(int(T) + 1):
        worst = max(worst, float(0.5 * np.abs(rows - mu).sum(axis=1).max()))
        if t < T:
            rows = step(rows)
    return t0, worst


def convex_combination(parts):
    """sum_i α_i μ_i for ``parts`` = [(α_i, μ_i), ...]."""
    if not parts:
        raise InputError("empty combination")
    w = np.array([float(a) for a, _ in parts])
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise InputError(f"weights must be nonnegative and sum to 1, got {w.tolist()}")
    out = np.zeros_like(np.asarray(parts[0][1], dtype=float))
    for a, mu in parts:
        if a == 1.0:
            return np.array(mu, dtype=float)
        if a:
            out = out + a * np.asarray(mu, dtype=float)
    return out


@dataclass
class CombinationReport:
    mixture: np.ndarray
    eps: float           # max of the parts' ε
    T: int               # min of the parts' T
    certificate: MetaCertificate
    part_observed: list

    @property
    def passed(self):
        return self.certificate.passed


def combination_report(chain, parts, eps_list, T_list, mode="auto"):
    """Mix the parts and re-check the mixture at (max ε_i, min T_i)."""
    mixture = convex_combination(parts)
    eps = float(max(eps_list))
    T = min(T_list)
    cert = is_metastable(chain, mixture, eps, T, mode=mode)
    observed = [is_metastable(chain, mu, e, t, mode=mode).observed
                for (_, mu), e, t in zip(parts, eps_list, T_list)]
    return CombinationReport(mixture, eps, T, cert, observed)


@dataclass
class NuResult:
    nu: np.ndarray
    weights: np.ndarray
    T_eps: int
    absorbed: float      # total mass absorbed into the cores by T_eps


def nu_distribution(chain, x, cores, mus, residual, eps):
    """ν_x = sum_i μ_i Pr_x[X_τ in T_i | τ <= T^ε(x)] with τ the hitting time of S∖N.

    The cores partition S∖N.  Mass still inside N at T^ε is dropped by the
    conditioning.
    """
    N = _as_mask(chain, residual)
    cores = [_as_mask(chain, c) for c in cores]
    if len(cores) != len(mus) or not cores:
        raise InputError("need one distribution per core")
    if not N.mask[int(x)]:
        raise InputError("the start profile must lie in the residual set")
    cover = SubsetMask(np.zeros(chain.size, dtype=bool))
    for c in cores:
        if not c.isdisjoint(cover) or not c.isdisjoint(N):
            raise InputError("cores must be disjoint from each other and from N")
        cover = cover.union(c)
    if cover.union(N).card != chain.size:
        raise InputError("cores and N must cover the profile space")
    idx = N.members()
    pos = int(np.searchsorted(idx, int(x)))
    T = int(eps_hitting_times(chain, N, eps)[pos])
    P = chain.P
    K = P[idx][:, idx].toarray()
    into = np.stack([np.asarray(P[idx][:, c.mask].sum(axis=1)).ravel() for c in cores], axis=1)
    v = np.zeros(idx.size)
    v[pos] = 1.0
    absorbed = np.zeros(len(cores))
    for _ in range(T):
        absorbed += v @ into
        v = v @ K
    total = float(absorbed.sum())
    if not total > 0:
        raise NumericalError("no mass reached the cores by T^ε")
    w = absorbed / total
    nu = sum(wi * np.asarray(mu, dtype=float) for wi, mu in zip(w, mus))
    return NuResult(nu, w, T, total)


def nu_check(chain, x, cores, mus, residual, eps):
    """TV(P^{t*}(x, ·), ν_x) at t* = T^ε(x) + max_i t_{μ_i}^{T_i}(ε).

    Returns (t_star, tv, nu_result); the bound to compare with is 3ε.
    """
    res = nu_distribution(chain, x, cores, mus, residual, eps)
    inner = []
    for c, mu in zip(cores, mus):
        pm = pseudo_mixing_time(chain, mu, c, eps)
        if not pm.finite:
            raise NumericalError("pseudo-mixing time from a core not reached within the budget")
        inner.append(pm.value)
    t_star = res.T_eps + max(inner)
    step = _Stepper(chain)
    row = np.zeros(chain.size)
    row[int(x)] = 1.0
    for _ in range(t_star):
        row = step(row)
    return t_star, _tv(row, res.nu), res


@dataclass
class CouplingReport:
    grid: np.ndarray
    coupling_slack: float      # min of Pr[τ <= t] − ‖P^t − P̊^t‖
    restricted_slack: float    # min of rhs − lhs in the π_L comparison
    tol: float
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def restriction_coupling_check(chain, L, t_grid, tol=1e-10):
    """Compare the chain with its loop restriction on L, for every x in L.

    Checks ‖P^t(x,·) − P̊_L^t(x,·)‖ <= Pr_x[τ_{S∖L} <= t] and
    ‖P^t(x,·) − π_L‖ <= ‖P̊_L^t(x,·) − π_L‖ + Pr_x[τ_{S∖L} <= t].
    """
    L = _as_mask(chain, L)
    grid = np.sort(np.asarray(t_grid, dtype=np.int64))
    if grid.size and grid[0] < 0:
        raise InputError("times must be nonnegative")
    loop = restrict_loop(chain, L)
    piL = stationary_restricted(chain.pi, L)
    idx = L.members()
    step, step_loop = _Stepper(chain), _Stepper(loop)
    A = _start_rows(chain, idx)
    B = A.copy()
    t = 0
    c_slack = r_slack = np.inf
    violations = []
    for target in grid:
        while t < target:
            A, B = step(A), step_loop(B)
            t += 1
        esc = escape_probability(chain, L, t)
        d_ab = 0.5 * np.abs(A - B).sum(axis=1)
        d_a = 0.5 * np.abs(A - piL).sum(axis=1)
        d_b = 0.5 * np.abs(B - piL).sum(axis=1)
        s1 = esc - d_ab
        s2 = d_b + esc - d_a
        c_slack = min(c_slack, float(s1.min()))
        r_slack = min(r_slack, float(s2.min()))
        for name, s in (("coupling", s1), ("restricted", s2)):
            for k in np.flatnonzero(s < -tol):
                violations.append((name, int(t), int(idx[k]), float(s[k])))
    return CouplingReport(grid, c_slack, r_slack, tol, violations)


def drift_vs_bottleneck(chain, L):
    """(‖π_L P − π_L‖, B(L)); the first never exceeds the second."""
    L = _as_mask(chain, L)
    return one_step_drift(chain, stationary_restricted(chain.pi, L)), bottleneck(chain, L)
