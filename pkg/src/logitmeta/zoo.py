"""Named game families with exact potentials.

Binary families use strategy 0 for +1 and strategy 1 for -1.
"""

from functools import lru_cache
import math

import numpy as np

from .errors import InputError
from .game import GameSpec, ProfileIndex

FAMILIES = (
    "pure_coordination",
    "curie_weiss",
    "ring_coordination",
    "pigou",
    "counterexample",
    "random_potential",
    "ladder2",
)

SCHEDULE_MAX_J = 4
SCHEDULE_MAX_N = 10**6


def spins(n):
    """Array (2^n, n) of ±1 spins for every binary profile."""
    d = ProfileIndex((2,) * n).digits
    return 1 - 2 * d


def magnetization(n):
    """M(x) = sum_i x_i for every binary profile of ``n`` players."""
    return spins(n).sum(axis=1)


def _from_potential(counts, phi, name, params):
    phi = np.asarray(phi, dtype=float)
    util = np.tile(-phi, (len(counts), 1))
    return GameSpec(tuple(counts), util, phi, name=name, params=params)


def make_ladder2():
    """Two binary players with potential (0, 1, 1, 2) and u_i = -Φ."""
    return _from_potential((2, 2), [0.0, 1.0, 1.0, 2.0], "ladder2", {})


def make_pure_coordination(n):
    if n < 1:
        raise InputError("pure coordination needs n >= 1")
    x = spins(n)
    consensus = np.all(x == x[:, :1], axis=1)
    util = np.tile(consensus.astype(float), (n, 1))
    phi = -consensus.astype(float)
    return GameSpec((2,) * n, util, phi, name="pure_coordination", params={"n": n})


def make_curie_weiss(n):
    """u_i(x) = x_i sum_{j != i} x_j with Φ(x) = -sum_{j<k} x_j x_k."""
    if n < 2:
        raise InputError("Curie-Weiss needs n >= 2")
    x = spins(n).astype(float)
    m = x.sum(axis=1)
    util = (x * (m[:, None] - x)).T
    # sum_{j<k} x_j x_k = (M^2 - n) / 2 since x_j^2 = 1
    phi = -(m**2 - n) / 2.0
    return GameSpec((2,) * n, util, phi, name="curie_weiss", params={"n": n})


def _edge_payoff(a, b, c, d):
    # payoff[own, other] with 0 = +1, 1 = -1
    return np.array([[a, c], [d, b]], dtype=float)


def _edge_potential(a, b, c, d):
    # exact potential in the convention Φ(x) - Φ(y) = u(y) - u(x),
    # anchored at φ(+,+) = 0
    off = a - d
    return np.array([[0.0, off], [off, off - (b - c)]])


def make_ring_coordination(n, a, b, c, d):
    if n < 3:
        raise InputError("ring coordination needs n >= 3")
    if not (a > d and b > c):
        raise InputError(f"ring needs a > d and b > c, got a={a}, b={b}, c={c}, d={d}")
    digits = ProfileIndex((2,) * n).digits
    pay = _edge_payoff(a, b, c, d)
    phi_e = _edge_potential(a, b, c, d)
    util = np.zeros((n, digits.shape[0]))
    phi = np.zeros(digits.shape[0])
    for i in range(n):
        j = (i + 1) % n
        si, sj = digits[:, i], digits[:, j]
        util[i] += pay[si, sj]
        util[j] += pay[sj, si]
        phi += phi_e[si, sj]
    params = {"n": n, "a": float(a), "b": float(b), "c": float(c), "d": float(d)}
    return GameSpec((2,) * n, util, phi, name="ring_coordination", params=params)


def pigou_potential(n, c):
    """(n - c) + (1/n) sum_{i=1}^c i, with c players on the variable link."""
    return (n - c) + c * (c + 1) / (2.0 * n)


def make_pigou(n):
    """Strategy 0 is the fixed-cost link, strategy 1 the link costing c/n."""
    if n < 1:
        raise InputError("Pigou needs n >= 1")
    digits = ProfileIndex((2,) * n).digits
    c = digits.sum(axis=1)
    cost = np.where(digits == 1, c[:, None] / n, 1.0)
    util = -cost.T
    phi = pigou_potential(n, c)
    return GameSpec((2,) * n, util, phi, name="pigou", params={"n": n})


def iterated_log(x, j):
    """log applied ``j`` times, or nan where some iterate leaves the domain."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    for _ in range(j):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(out > 0, np.log(np.where(out > 0, out, 1.0)), np.nan)
    return out


def schedule_p(j, n):
    return np.asarray(n, dtype=float) ** j


def schedule_q(j, n):
    n = np.asarray(n, dtype=float)
    return np.exp(np.log(n) * iterated_log(n, j))


@lru_cache(maxsize=None)
def counterexample_schedule(eps):
    """Crossover points n_1 < n_2 < ... of the T(n) schedule.

    ``n_j`` is the least ``n > n_{j-1}`` with ``p_j(n) < q_j(n) - eps``; the
    comparison is false wherever ``log^{(j)} n`` is undefined.  Scanning stops
    at ``j = SCHEDULE_MAX_J`` or ``n = SCHEDULE_MAX_N``; the last ``n_j`` may
    then be ``None`` meaning "beyond the scanned range".
    """
    grid = np.arange(1, SCHEDULE_MAX_N + 1, dtype=float)
    points = []
    prev = 1
    for j in range(1, SCHEDULE_MAX_J + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            ok = schedule_p(j, grid) < schedule_q(j, grid) - eps
        ok &= grid > prev
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            points.append(None)
            break
        prev = int(grid[hits[0]])
        points.append(prev)
    return tuple(points)


def schedule_index(n, eps):
    """The j with n_{j-1} < n <= n_j (n_0 = 1)."""
    pts = counterexample_schedule(eps)
    if not 2 <= n <= SCHEDULE_MAX_N:
        raise InputError(f"counterexample schedule covers 2 <= n <= {SCHEDULE_MAX_N}, got n={n}")
    for j, nj in enumerate(pts, start=1):
        if nj is None or n <= nj:
            return j
    raise InputError(
        f"n={n} lies beyond the last crossover n_{len(pts)}={pts[-1]} found with j <= {SCHEDULE_MAX_J}"
    )


def schedule_T(n, eps):
    j = schedule_index(n, eps)
    t = float(schedule_q(j, n)) - eps
    if not (math.isfinite(t) and t > eps):
        raise InputError(f"T({n}) = {t} is not above eps = {eps}")
    return t


def make_counterexample(n, beta, eps, literal_sign=False):
    """Game whose all-ones profile is left with probability eps / T(n) per step.

    Φ(x) = n - t with t the number of players at strategy 1, except that the
    all-ones profile gets 1 - k_n, k_n = log(T(n)/eps - 1) / beta.  With
    ``literal_sign`` it gets 1 + k_n instead.
    """
    if not beta > 0:
        raise InputError("counterexample needs beta > 0")
    if not 0 < eps < 0.25:
        raise InputError("counterexample needs 0 < eps < 1/4")
    if n < 2:
        raise InputError("counterexample needs n >= 2")
    T = schedule_T(n, eps)
    k = math.log(T / eps - 1.0) / beta
    digits = ProfileIndex((2,) * n).digits
    t = digits.sum(axis=1)
    phi = (n - t).astype(float)
    phi[-1] = 1.0 + k if literal_sign else 1.0 - k
    params = {"n": n, "beta": beta, "eps": eps, "T": T, "k": k, "literal_sign": bool(literal_sign)}
    return _from_potential((2,) * n, phi, "counterexample", params)


def make_random_potential(n, strategy_counts=None, seed=0, range=1.0):
    if strategy_counts is None:
        strategy_counts = (2,) * n
    counts = tuple(int(m) for m in strategy_counts)
    if len(counts) != n:
        raise InputError(f"{len(counts)} strategy counts for n={n}")
    size = ProfileIndex(counts).size
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, float(range), size=size)
    params = {"n": n, "seed": seed, "range": float(range)}
    g = _from_potential(counts, phi, "random_potential", params)
    return g


def make_game(family, **params):
    """Construct a zoo game by family name."""
    builders = {
        "pure_coordination": lambda p: make_pure_coordination(int(p["n"])),
        "curie_weiss": lambda p: make_curie_weiss(int(p["n"])),
        "ring_coordination": lambda p: make_ring_coordination(
            int(p["n"]), p.get("a", 1.0), p.get("b", 1.0), p.get("c", 0.0), p.get("d", 0.0)
        ),
        "pigou": lambda p: make_pigou(int(p["n"])),
        "counterexample": lambda p: make_counterexample(
            int(p["n"]), p.get("beta", 5.0), p.get("eps", 0.1), bool(p.get("literal_sign", False))
        ),
        "random_potential": lambda p: make_random_potential(
            int(p["n"]), p.get("strategy_counts"), int(p.get("seed", 0)), p.get("range", 1.0)
        ),
        "ladder2": lambda p: make_ladder2(),
    }
    if family not in builders:
        raise InputError(f"unknown family {family!r}; valid families: {', '.join(FAMILIES)}")
    if family != "ladder2" and "n" not in params:
        raise InputError(f"family {family} needs parameter n")
    return builders[family](params)
