"""Logit-dynamics transition matrices, Gibbs measures and bottleneck ratios."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as spla

from .errors import CapError, InputError, NumericalError
from .game import SubsetMask
from . import kernels

EXHAUSTIVE_CAP = 22
CONNECTED_COUNT_CAP = 200_000
# π(L) <= 1/2 is tested with this absolute slack so that symmetric halves
# whose mass rounds to 0.5000000000000001 stay admissible
HALF_SLACK = 1e-12
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ChainMatrix:
    """Sparse transition matrix over the full profile space.

    ``kind`` is ``"full"``, ``"restricted_loop"`` or ``"substochastic"``.  Rows
    and columns outside ``support`` are zero for the restricted kinds.  ``pi``
    is the reference distribution (π, or π_L for restrictions).
    """

    P: sparse.csr_matrix
    kind: str
    beta: float
    pi: np.ndarray
    support: SubsetMask
    game: object = None

    @property
    def size(self):
        return self.P.shape[0]

    def dense(self):
        return self.P.toarray()

    def block(self):
        """Dense |L| x |L| block on the support plus the member indices."""
        idx = self.support.members()
        return self.P[idx][:, idx].toarray(), idx

    def row_sums(self):
        return np.asarray(self.P.sum(axis=1)).ravel()


def _check_beta(beta):
    beta = float(beta)
    if not beta >= 0 or not np.isfinite(beta):
        raise InputError(f"beta must be a finite nonnegative real, got {beta}")
    return beta


def _log_softmax(values, axis):
    mx = values.max(axis=axis, keepdims=True)
    shifted = values - mx
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def update_probabilities(g, beta):
    """Array (n, |S|) with entry [i, z] = σ_i(z_i | z_{-i})."""
    beta = _check_beta(beta)
    idx = g.index
    out = np.empty((g.n, g.size))
    for i in range(g.n):
        t = (beta * g.utilities[i]).reshape(idx.tensor_shape)
        out[i] = np.exp(_log_softmax(t, idx.axis(i))).ravel()
    return out


def boltzmann_update(g, beta, i, x):
    """σ_i(· | x_{-i}) as a vector over player ``i``'s strategies."""
    beta = _check_beta(beta)
    idx = g.index
    if not 0 <= i < g.n:
        raise InputError(f"player {i} outside 0..{g.n - 1}")
    x = idx._check(x)
    stride = int(idx.strides[i])
    xi = x // stride % g.strategy_counts[i]
    targets = x + (np.arange(g.strategy_counts[i]) - xi) * stride
    v = beta * g.utilities[i, targets]
    return np.exp(_log_softmax(v, 0))


def log_gibbs(g, beta):
    beta = _check_beta(beta)
    phi = g.require_potential()
    w = -beta * phi
    w = w - w.max()
    return w - np.log(np.exp(w).sum())


def gibbs(g, beta):
    """π(x) ∝ exp(-βΦ(x)), normalized in the log domain."""
    return np.exp(log_gibbs(g, beta))


def transition_matrix(g, beta):
    """Sparse P of the logit dynamics with sorted column indices."""
    sig = update_probabilities(g, beta)
    idx = g.index
    table = idx.neighbor_table
    players = np.repeat(np.arange(g.n), [m - 1 for m in g.strategy_counts])
    off = sig[players[None, :], table] / g.n
    diag = sig.sum(axis=0) / g.n
    rows = np.concatenate([np.arange(g.size), np.repeat(np.arange(g.size), idx.degree)])
    cols = np.concatenate([np.arange(g.size), table.ravel()])
    vals = np.concatenate([diag, off.ravel()])
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(g.size, g.size))
    P.sort_indices()
    return P


def stationary_numeric(P, tol=1e-13, max_iter=100_000):
    """Left fixed point of a stochastic matrix.

    A sparse direct solve gives the starting vector; power iteration then
    polishes it until max|πP − π| <= tol.
    """
    size = P.shape[0]
    if size == 1:
        return np.ones(1)
    A = (P.T - sparse.identity(size, format="csr")).tolil()
    A[size - 1, :] = np.ones(size)
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    pi = spla.spsolve(A.tocsc(), rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    PT = P.T.tocsr()
    for _ in range(max_iter):
        nxt = PT @ pi
        nxt /= nxt.sum()
        res = np.abs(nxt - pi).max()
        pi = nxt
        if res <= tol:
            return pi
    raise NumericalError(f"power iteration stalled with residual {res:.3g}")


def build_chain(g, beta):
    """Full logit chain with Gibbs π, or the numerical fixed point for general games."""
    beta = _check_beta(beta)
    P = transition_matrix(g, beta)
    pi = gibbs(g, beta) if g.has_potential else stationary_numeric(P)
    pi.setflags(write=False)
    return ChainMatrix(P, "full", beta, pi, SubsetMask.full(g.size), g)


def stationarity_residual(chain, pi=None):
    pi = chain.pi if pi is None else pi
    return float(np.abs(chain.P.T @ pi - pi).max())


@dataclass
class ReversibilityCheck:
    passed: bool
    worst: float
    x: int = None
    y: int = None


def check_reversibility(chain, pi=None, tol=1e-12):
    """Worst |π(x)P(x,y) − π(y)P(y,x)| over all pairs."""
    pi = chain.pi if pi is None else np.asarray(pi, dtype=float)
    if pi.shape != (chain.size,):
        raise InputError("distribution size does not match the chain")
    F = sparse.diags(pi) @ chain.P
    R = (F - F.T).tocoo()
    if R.nnz == 0:
        return ReversibilityCheck(True, 0.0)
    k = int(np.argmax(np.abs(R.data)))
    worst = float(abs(R.data[k]))
    return ReversibilityCheck(worst <= tol, worst, int(R.row[k]), int(R.col[k]))


def _as_mask(chain, L):
    if isinstance(L, SubsetMask):
        if L.size != chain.size:
            raise InputError("subset lives in a different profile space")
        return L
    return SubsetMask.from_indices(chain.size, L)


def _embed(block, idx, size):
    block = sparse.coo_matrix(block)
    P = sparse.csr_matrix(
        (block.data, (idx[block.row], idx[block.col])), shape=(size, size)
    )
    P.sort_indices()
    return P


def stationary_restricted(pi, L):
    """π_L(x) = π(x)/π(L) on L, zero elsewhere."""
    mask = L.mask if isinstance(L, SubsetMask) else np.asarray(L, dtype=bool)
    mass = pi[mask].sum()
    if not mass > 0:
        raise InputError("π(L) = 0; the restriction is undefined")
    out = np.where(mask, pi, 0.0) / mass
    return out


def restrict_loop(chain, L):
    """P̊_L: moves leaving L are turned into self-loops."""
    L = _as_mask(chain, L)
    if L.card == 0:
        raise InputError("cannot restrict to an empty set")
    idx = L.members()
    rows = chain.P[idx]
    inside = rows[:, idx].tolil()
    leaked = np.asarray(rows[:, ~L.mask].sum(axis=1)).ravel()
    inside.setdiag(inside.diagonal() + leaked)
    P = _embed(inside, idx, chain.size)
    pi = stationary_restricted(chain.pi, L)
    return ChainMatrix(P, "restricted_loop", chain.beta, pi, L, chain.game)


def restrict_kill(chain, L):
    """P_{L̄}: entries outside L x L set to zero (sub-stochastic)."""
    L = _as_mask(chain, L)
    if L.card == 0:
        raise InputError("cannot restrict to an empty set")
    idx = L.members()
    P = _embed(chain.P[idx][:, idx], idx, chain.size)
    pi = stationary_restricted(chain.pi, L)
    return ChainMatrix(P, "substochastic", chain.beta, pi, L, chain.game)


def edge_flow(chain, L, pi=None):
    """Q(L, S∖L) = sum_{x in L, y not in L} π(x) P(x, y)."""
    L = _as_mask(chain, L)
    pi = chain.pi if pi is None else pi
    idx = L.members()
    out = np.asarray(chain.P[idx][:, ~L.mask].sum(axis=1)).ravel()
    return float(np.dot(pi[idx], out))


def bottleneck(chain, L, pi=None):
    """B(L) = Q(L, S∖L) / π(L)."""
    L = _as_mask(chain, L)
    pi = chain.pi if pi is None else pi
    mass = float(pi[L.mask].sum())
    if not mass > 0:
        raise InputError("π(L) = 0; the bottleneck ratio is undefined")
    return edge_flow(chain, L, pi) / mass


@dataclass
class BottleneckResult:
    value: float
    subset: SubsetMask
    mass: float
    family: str
    candidates: int


def _select(cands):
    """Minimum B, then smallest π(L), then smallest bitmask.

    ``cands`` holds tuples (B, mass, bits, payload).  B and mass ties are
    judged with relative tolerance TIE_RTOL.
    """
    best_b = min(c[0] for c in cands)
    tied = [c for c in cands if c[0] <= best_b * (1 + TIE_RTOL)]
    best_m = min(c[1] for c in tied)
    tied = [c for c in tied if c[1] <= best_m * (1 + TIE_RTOL)]
    return min(tied, key=lambda c: c[2])


def _local_flows(chain, scope_idx, pi):
    """Per-state inputs of ``kernels.subset_flows`` for a scope."""
    size = chain.size
    local = -np.ones(size, dtype=np.int64)
    local[scope_idx] = np.arange(scope_idx.size)
    sub = chain.P[scope_idx].tocoo()
    q = pi[scope_idx][sub.row] * sub.data
    target = local[sub.col]
    keep = scope_idx[sub.row] != sub.col
    inside = keep & (target >= 0)
    outside = keep & (target < 0)
    exit_flow = np.zeros(scope_idx.size)
    # accumulate in column order for determinism
    order = np.lexsort((sub.col[outside], sub.row[outside]))
    np.add.at(exit_flow, sub.row[outside][order], q[outside][order])
    qi = sparse.csr_matrix(
        (q[inside], (sub.row[inside], target[inside])), shape=(scope_idx.size, scope_idx.size)
    )
    qi.sort_indices()
    return pi[scope_idx].copy(), exit_flow, qi


def subset_table(chain, scope, pi=None, cap=EXHAUSTIVE_CAP):
    """Mass and cut flow of every subset of ``scope`` (indexed by local bitmask)."""
    scope = _as_mask(chain, scope)
    pi = chain.pi if pi is None else pi
    if scope.card > cap:
        raise CapError(
            f"exhaustive enumeration over {scope.card} states exceeds the cap {cap}; "
            "use the 'connected' or 'heuristic' family"
        )
    idx = scope.members()
    p, exit_flow, qi = _local_flows(chain, idx, pi)
    mass, cut = kernels.subset_flows(
        np.ascontiguousarray(p), exit_flow,
        qi.indptr.astype(np.int64), qi.indices.astype(np.int64), qi.data.astype(float),
    )
    return idx, mass, cut


def _local_to_global(idx, local_bits, size):
    members = idx[[b for b in range(idx.size) if local_bits >> b & 1]]
    return SubsetMask.from_indices(size, members)


def _exhaustive(chain, scope, pi, cap):
    idx, mass, cut = subset_table(chain, scope, pi, cap)
    ok = np.flatnonzero((mass <= 0.5 + HALF_SLACK) & (mass > 0))
    ok = ok[ok > 0]
    if ok.size == 0:
        return None
    B = cut[ok] / mass[ok]
    best = B.min()
    tied = ok[B <= best * (1 + TIE_RTOL)]
    tm = mass[tied]
    tied = tied[tm <= tm.min() * (1 + TIE_RTOL)]
    # local bit order follows global index order, so the smallest local
    # bitmask is also the smallest global one
    pick = int(tied.min())
    L = _local_to_global(idx, pick, chain.size)
    return BottleneckResult(float(cut[pick] / mass[pick]), L, float(mass[pick]), "exhaustive", int(ok.size))


def connected_subsets(index, scope, max_size=None):
    """Every connected subset of ``scope`` up to ``max_size`` states, once each.

    Connectivity is in the Hamming-neighbor graph.  Enumeration follows the
    extension-set scheme: a subset is grown only from its smallest member
    ``v``, and a vertex joins the extension set only when it is larger than
    ``v`` and not yet adjacent to the current subset, which gives every
    connected subset a unique parent.  Yields sorted tuples of indices.
    """
    mask = scope.mask if isinstance(scope, SubsetMask) else np.asarray(scope, dtype=bool)
    members = np.flatnonzero(mask)
    if max_size is None:
        max_size = members.size
    table = index.neighbor_table
    nbrs = {int(v): tuple(int(u) for u in table[v] if mask[u]) for v in members}

    def extend(sub, ext, closed, v):
        yield tuple(sorted(sub))
        if len(sub) == max_size:
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            new = [u for u in nbrs[w] if u > v and u not in closed]
            grown = closed | set(nbrs[w])
            yield from extend(sub | {w}, ext + sorted(set(new) - set(ext)), grown | {w}, v)

    for v in members:
        v = int(v)
        start_ext = sorted(u for u in nbrs[v] if u > v)
        yield from extend({v}, start_ext, {v} | set(nbrs[v]), v)


def _score(chain, members, pi):
    members = np.asarray(members, dtype=np.int64)
    mask = np.zeros(chain.size, dtype=bool)
    mask[members] = True
    mass = float(pi[members].sum())
    rows = chain.P[members]
    flow = float(np.dot(pi[members], np.asarray(rows[:, ~mask].sum(axis=1)).ravel()))
    return mask, mass, flow


def _bits_of(members):
    b = 0
    for v in members:
        b |= 1 << int(v)
    return b


def _scored_family(chain, pi, sets, family):
    cands = []
    for members in sets:
        mask, mass, flow = _score(chain, members, pi)
        if 0 < mass <= 0.5 + HALF_SLACK:
            cands.append((flow / mass, mass, _bits_of(members), members))
    if not cands:
        return None
    B, mass, _, members = _select(cands)
    L = SubsetMask.from_indices(chain.size, members)
    return BottleneckResult(B, L, mass, family, len(cands))


def _connected(chain, scope, pi, max_size, max_count):
    sets = []
    for k, s in enumerate(connected_subsets(chain.game.index, scope, max_size)):
        if k >= max_count:
            raise CapError(
                f"more than {max_count} connected subsets; raise the count cap or use 'heuristic'"
            )
        sets.append(s)
    return _scored_family(chain, pi, sets, "connected")


def components(index, mask):
    """Connected components of ``mask`` in the Hamming graph, as index arrays."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    sub = index.adjacency[idx][:, idx]
    k, labels = csgraph.connected_components(sub, directed=False)
    return [idx[labels == c] for c in range(k)]


def is_connected(index, L):
    mask = L.mask if isinstance(L, SubsetMask) else np.asarray(L, dtype=bool)
    return len(components(index, mask)) == 1


def structural_sets(g, scope_mask):
    """Sublevel/superlevel sets of Φ, magnetization half-spaces and singletons.

    Every set is intersected with the scope and split into its connected
    components, so each returned candidate is connected.
    """
    raw = []
    if g.has_potential:
        phi = g.potential
        levels = np.unique(phi[scope_mask])
        for c in levels:
            raw.append(scope_mask & (phi <= c))
            raw.append(scope_mask & (phi >= c))
    if all(m == 2 for m in g.strategy_counts):
        M = g.n - 2 * g.index.digits.sum(axis=1)
        for k in np.unique(M):
            raw.append(scope_mask & (M >= k))
            raw.append(scope_mask & (M <= k))
    seen = {}
    for mask in raw:
        for comp in components(g.index, mask):
            seen.setdefault(comp.tobytes(), tuple(int(v) for v in comp))
    for v in np.flatnonzero(scope_mask):
        seen.setdefault(np.array([v], dtype=np.int64).tobytes(), (int(v),))
    return sorted(seen.values(), key=lambda s: (len(s), s))


def bottleneck_star(chain, scope=None, mode="exhaustive", pi=None, cap=EXHAUSTIVE_CAP,
                    max_size=None, max_count=CONNECTED_COUNT_CAP):
    """B* = min B(L) over candidate subsets L of ``scope`` with π(L) <= 1/2.

    Returns a BottleneckResult, or None when no candidate has π(L) <= 1/2.
    """
    scope = SubsetMask.full(chain.size) if scope is None else _as_mask(chain, scope)
    if scope.card == 0:
        raise InputError("scope must be nonempty")
    pi = chain.pi if pi is None else pi
    if mode == "exhaustive":
        return _exhaustive(chain, scope, pi, cap)
    if chain.game is None:
        raise InputError(f"family {mode!r} needs the chain's game")
    if mode == "connected":
        return _connected(chain, scope, pi, max_size, max_count)
    if mode == "heuristic":
        return _scored_family(chain, pi, structural_sets(chain.game, scope.mask), "heuristic")
    raise InputError(f"unknown subset family {mode!r}; use exhaustive, connected or heuristic")
