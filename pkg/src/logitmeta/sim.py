"""Monte Carlo trajectories of the logit dynamics and the birth-death
projections of exchangeable binary games.

Random streams: trajectory ``k`` of a run with seed ``s`` draws from a
Philox generator keyed by ``s + (k << 64)`` (so ``s`` must fit in 64 bits).
One-step sampling batches use ``k = 2**63 + b`` for batch ``b``.  Each step
consumes two doubles: the first picks the player, the second samples the
Boltzmann update.  Results therefore do not depend on the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .chain import _check_beta, update_probabilities
from .errors import InputError, PreconditionError
from .game import SubsetMask

CHUNK = 1 << 16
BATCH = 1 << 16
_BATCH_DOMAIN = 1 << 63


def stream(seed, k):
    """Counter-based generator for trajectory (or batch) ``k``."""
    seed = int(seed)
    if not 0 <= seed < 1 << 64:
        raise InputError("seed must be an integer in [0, 2**64)")
    return np.random.Generator(np.random.Philox(key=seed + (int(k) << 64)))


@dataclass
class Trajectory:
    seed: int
    index: int
    start: int
    steps: int
    final: int
    first_hit: np.ndarray     # per tracked set, -1 when never hit; 0 if the start is inside
    occupancy: np.ndarray     # (tracked, windows) visit counts per window of steps
    window: int
    visits: np.ndarray = None
    path: np.ndarray = None

    def to_row(self):
        row = {"trajectory": self.index, "seed": self.seed, "start": self.start,
               "steps": self.steps, "final": self.final}
        for k, h in enumerate(self.first_hit):
            row[f"first_hit_{k}"] = int(h)
        return row


def _arrays(g):
    idx = g.index
    util = np.ascontiguousarray(g.utilities, dtype=np.float64)
    return util, np.asarray(idx.radices, dtype=np.int64), np.asarray(idx.strides, dtype=np.int64)


def _tracked_matrix(g, tracked):
    rows = []
    for T in tracked:
        if isinstance(T, SubsetMask):
            mask = T.mask
        else:
            mask = SubsetMask.from_indices(g.size, T).mask
        rows.append(mask)
    if not rows:
        return np.zeros((0, g.size), dtype=np.uint8)
    return np.ascontiguousarray(np.array(rows, dtype=np.uint8))


def _run(g, beta, start, steps, seed, k, tracked, window, keep_visits, keep_path):
    util, radices, strides = _arrays(g)
    tr = _tracked_matrix(g, tracked)
    nt = tr.shape[0]
    first = -np.ones(nt, dtype=np.int64)
    for j in range(nt):
        if tr[j, start]:
            first[j] = 0
    window = int(window) if window else max(int(steps), 1)
    occ = np.zeros((nt, max(1, -(-int(steps) // window))), dtype=np.int64)
    visits = np.zeros(g.size if keep_visits else 0, dtype=np.int64)
    path = np.zeros(int(steps) if keep_path else 0, dtype=np.int64)
    rng = stream(seed, k)
    x = int(start)
    done = 0
    while done < steps:
        m = min(CHUNK, steps - done)
        u = rng.random((m, 2))
        seg = path[done:done + m] if keep_path else path
        x = kernels.simulate_path(util, radices, strides, float(beta), x, u, done,
                                  tr, first, occ, window, visits, seg)
        done += m
    return Trajectory(int(seed), int(k), int(start), int(steps), int(x), first, occ, window,
                      visits if keep_visits else None, path if keep_path else None)


def simulate(g, beta, start, steps, seed=0, tracked=(), window=None,
             keep_visits=True, keep_path=False, trajectory=0):
    """One trajectory of ``steps`` logit steps from profile index ``start``."""
    beta = _check_beta(beta)
    start = g.index._check(start)
    if steps < 0:
        raise InputError("steps must be nonnegative")
    return _run(g, beta, start, int(steps), seed, trajectory, tracked, window, keep_visits, keep_path)


def simulate_many(g, beta, starts, steps, seed=0, tracked=(), window=None,
                  keep_visits=False, workers=1):
    """Independent trajectories, trajectory ``k`` starting at ``starts[k]``.

    Trajectories run on a thread pool and come back ordered by index, so the
    output is identical for every worker count.
    """
    beta = _check_beta(beta)
    starts = [g.index._check(s) for s in starts]
    if workers < 1:
        raise InputError("workers must be at least 1")

    def one(k):
        return _run(g, beta, starts[k], int(steps), seed, k, tracked, window, keep_visits, False)

    if workers == 1:
        return [one(k) for k in range(len(starts))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(starts))))


def sample_transitions(g, beta, x, count, seed=0, workers=1):
    """Counts of X_1 over ``count`` independent single steps from profile ``x``."""
    beta = _check_beta(beta)
    x = g.index._check(x)
    util, radices, strides = _arrays(g)
    nb = -(-int(count) // BATCH)

    def batch(b):
        m = min(BATCH, count - b * BATCH)
        states = np.full(m, x, dtype=np.int64)
        u = stream(seed, _BATCH_DOMAIN + b).random((m, 2))
        kernels.step_batch(util, radices, strides, float(beta), states, u)
        return np.bincount(states, minlength=g.size)

    if workers == 1:
        parts = [batch(b) for b in range(nb)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(batch, range(nb)))
    out = np.zeros(g.size, dtype=np.int64)
    for p in parts:
        out += p
    return out


def empirical_hitting_cdf(trajs, k, grid):
    """Fraction of trajectories with first_hit[k] <= t and its standard error."""
    hits = np.array([tr.first_hit[k] for tr in trajs])
    grid = np.asarray(grid)
    F = np.array([np.mean((hits >= 0) & (hits <= t)) for t in grid])
    se = np.sqrt(F * (1 - F) / len(trajs))
    return F, se


# ---------------------------------------------------------------------------
# birth-death projections


@dataclass
class BirthDeathChain:
    """States 0..m; p[i] up, q[i] down, r[i] stay."""

    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.p, self.q, self.r = (np.asarray(a, dtype=float) for a in (self.p, self.q, self.r))
        if not (self.p.shape == self.q.shape == self.r.shape):
            raise InputError("p, q, r must have the same length")
        if np.any(self.p < 0) or np.any(self.q < 0) or np.any(self.r < 0):
            raise InputError("rates must be nonnegative")
        if np.abs(self.p + self.q + self.r - 1).max() > 1e-12:
            raise InputError("p + q + r must equal 1 in every state")
        if self.q[0] != 0 or self.p[-1] != 0:
            raise InputError("boundary rates must satisfy q_0 = p_m = 0")

    @property
    def m(self):
        return self.p.size - 1

    def matrix(self):
        k = self.p.size
        P = np.diag(self.r)
        P[np.arange(k - 1), np.arange(1, k)] = self.p[:-1]
        P[np.arange(1, k), np.arange(k - 1)] = self.q[1:]
        return P

    def stationary(self):
        """Product-form stationary law from detailed balance."""
        logw = np.zeros(self.p.size)
        with np.errstate(divide="ignore"):
            logw[1:] = np.cumsum(np.log(self.p[:-1]) - np.log(self.q[1:]))
        w = np.exp(logw - logw.max())
        return w / w.sum()

    def detailed_balance_residual(self):
        pi = self.stationary()
        return float(np.abs(pi[:-1] * self.p[:-1] - pi[1:] * self.q[1:]).max())

    def hitting_times(self, target):
        """Expected hitting time of the state set ``target`` from every state.

        Down-sets {0..a} and up-sets {b..m} use the one-step recursion
        t_j = (1 + p_j t_{j+1}) / q_j (and its mirror), which only adds
        positive terms; other targets fall back to a dense solve.
        """
        target = np.isin(np.arange(self.p.size), list(target))
        if not target.any():
            raise InputError("target set is empty")
        hit = np.flatnonzero(target)
        m = self.m
        if np.array_equal(hit, np.arange(hit[-1] + 1)):
            a = hit[-1]
            step = np.zeros(m + 2)
            for j in range(m, a, -1):
                step[j] = (1.0 + self.p[j] * step[j + 1]) / self.q[j]
            h = np.zeros(m + 1)
            h[a + 1:] = np.cumsum(step[a + 1:m + 1])
            return h
        if np.array_equal(hit, np.arange(hit[0], m + 1)):
            b = hit[0]
            step = np.zeros(m + 1)
            prev = 0.0
            for j in range(0, b):
                prev = (1.0 + self.q[j] * prev) / self.p[j]
                step[j] = prev
            h = np.zeros(m + 1)
            h[:b] = np.cumsum(step[:b][::-1])[::-1]
            return h
        P = self.matrix()
        free = np.flatnonzero(~target)
        h = np.zeros(self.p.size)
        if free.size:
            A = np.eye(free.size) - P[np.ix_(free, free)]
            h[free] = np.linalg.solve(A, np.ones(free.size))
        return h


def _plus_count(g):
    return g.n - g.index.digits.sum(axis=1)


def magnetization_projection(g, beta, tol=1e-12):
    """Project an exchangeable binary game onto the number of +1 players.

    State i holds the profiles with i players at strategy 0 (the +1 spin),
    so magnetization is 2i − n.  Rates are read off the exact update
    probabilities and must agree across every profile with the same count.
    """
    if any(m != 2 for m in g.strategy_counts):
        raise InputError("the projection needs a binary-strategy game")
    sig = update_probabilities(g, beta)
    d = g.index.digits
    n = g.n
    count = _plus_count(g)
    # probability that the chosen player switches
    switch = np.empty_like(sig)
    for i in range(n):
        switch[i] = 1.0 - sig[i]
    up = ((d == 1).T * switch).sum(axis=0) / n     # a minus player turns plus
    down = ((d == 0).T * switch).sum(axis=0) / n   # a plus player turns minus
    p = np.zeros(n + 1)
    q = np.zeros(n + 1)
    for c in range(n + 1):
        sel = count == c
        for arr, out, name in ((up, p, "up"), (down, q, "down")):
            vals = arr[sel]
            if vals.max() - vals.min() > tol:
                raise InputError(f"game is not exchangeable: {name} rates differ at count {c}")
            out[c] = vals[0]
    p[n] = 0.0
    q[0] = 0.0
    return BirthDeathChain(p, q, 1.0 - p - q)


def count_to_magnetization(n, i):
    return 2 * np.asarray(i) - n


def coordination_proof_chain(m):
    """The auxiliary chain on 0..m used for the pure-coordination core:
    p_i = (m−i)/(4m), q_i = (m+i)/(4m), r_i = 1/2 inside, with
    p_0 = r_0 = 1/2, q_0 = 0 and q_m = r_m = 1/2, p_m = 0."""
    if m < 1:
        raise InputError("m must be at least 1")
    i = np.arange(m + 1, dtype=float)
    p = (m - i) / (4 * m)
    q = (m + i) / (4 * m)
    r = np.full(m + 1, 0.5)
    p[0], q[0] = 0.5, 0.0
    p[m], q[m] = 0.0, 0.5
    return BirthDeathChain(p, q, r)


def growth_trend(ms, values):
    """Descriptive growth report for a positive sequence over ``ms``.

    Returns local log-log slopes (the degree a polynomial would need between
    consecutive points), whether they increase, and the residuals of a
    single power-law fit and of an exponential fit.
    """
    ms = np.asarray(ms, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        raise InputError("values must be positive")
    lm, lv = np.log(ms), np.log(v)
    slopes = np.diff(lv) / np.diff(lm)
    pw = np.polyfit(lm, lv, 1)
    ex = np.polyfit(ms, lv, 1)
    return {
        "local_degree": slopes.tolist(),
        "degree_increasing": bool(np.all(np.diff(slopes) > 0)),
        "power_fit_degree": float(pw[0]),
        "power_fit_rms": float(np.sqrt(np.mean((np.polyval(pw, lm) - lv) ** 2))),
        "exp_fit_rate": float(ex[0]),
        "exp_fit_rms": float(np.sqrt(np.mean((np.polyval(ex, ms) - lv) ** 2))),
    }


def cw_drift(x, b):
    """(e^{bx}(1−x) − e^{−bx}(1+x)) / (e^{bx}(1−x) + e^{−bx}(1+x)) = tanh(bx − atanh x)."""
    x = np.asarray(x, dtype=float)
    return np.tanh(b * x - np.arctanh(x))


def solve_cw_zeta(b, n=None):
    """Positive root of the Curie-Weiss drift.

    ``b`` is the normalized inverse temperature; when ``n`` is given, ``b``
    is the game's β and the normalized value is β·n (the game's couplings
    are not divided by n).  Needs b > 1.
    """
    b = float(b) * (n if n is not None else 1)
    lo, hi = 1e-9, 1.0 - 1e-16
    g = lambda x: b * x - math.atanh(x)
    if not g(lo) > 0:
        raise PreconditionError(f"no positive root: normalized β = {b:.6g} is not above 1")
    if g(hi) >= 0:
        return hi
    # the drift is steep near 1, so bisect down to adjacent doubles rather
    # than stopping at an interval of width ZETA_TOL
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(cw_drift(lo, b)) <= abs(cw_drift(hi, b)) else hi
