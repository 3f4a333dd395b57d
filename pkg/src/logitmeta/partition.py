"""The partitioning algorithm A_{p,q}, the partitioned-game verifier and the
bottleneck classification sweep."""

from dataclasses import dataclass, field
import math

import numpy as np

from . import exprs
from .chain import (
    CONNECTED_COUNT_CAP, EXHAUSTIVE_CAP, HALF_SLACK, _as_mask, bottleneck,
    build_chain, connected_subsets, is_connected, restrict_loop,
    structural_sets, subset_table,
)
from .convergence import eps_hitting_times, escape_probability, mixing_time
from .errors import CapError, InputError, LimitReached, PreconditionError
from .game import SubsetMask
from .metastability import is_metastable, pseudo_mixing_time
from . import zoo

FAMILIES = ("exhaustive", "connected", "heuristic")
SCAN_RANGE = (1, 200)


@dataclass
class PQConfig:
    p: object
    q: object
    eps: float = 0.1
    family: str = "connected"
    exhaustive_cap: int = EXHAUSTIVE_CAP
    count_cap: int = CONNECTED_COUNT_CAP
    max_size: int = None

    def __post_init__(self):
        self.p = exprs.parse(self.p)
        self.q = exprs.parse(self.q)
        if not 0 < self.eps < 1:
            raise InputError("eps must lie in (0, 1)")
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; use one of {', '.join(FAMILIES)}")

    def check(self, lo=SCAN_RANGE[0], hi=SCAN_RANGE[1]):
        """p non-decreasing and >= 1 on [lo, hi]; q/p increasing over the top half."""
        ns = np.arange(lo, hi + 1, dtype=float)
        p, q = self.p(ns), self.q(ns)
        if not np.all(np.isfinite(p)) or np.any(p < 1) or np.any(np.diff(p) < 0):
            raise InputError(f"p = {self.p.text} must be finite, >= 1 and non-decreasing on [{lo}, {hi}]")
        with np.errstate(all="ignore"):
            ratio = np.log(q) - np.log(p)
        top = ratio[ns.size // 2:]
        if not np.all(np.isfinite(top)) or np.any(np.diff(top) <= 0):
            raise InputError(f"q/p = ({self.q.text})/({self.p.text}) is not increasing on the scan range")
        return True

    def to_dict(self):
        return {"p": self.p.text, "q": self.q.text, "eps": self.eps, "family": self.family}


@dataclass
class Block:
    R: SubsetMask
    T: SubsetMask
    B: float
    mass: float
    t_mix: int
    escape: np.ndarray      # Pr_y[τ_{S∖R} <= t_mix] for y in R (member order)
    family: str

    def to_dict(self):
        return {
            "R": [int(v) for v in self.R.members()], "T": [int(v) for v in self.T.members()],
            "B": self.B, "pi": self.mass, "t_mix": self.t_mix,
            "max_escape_on_T": float(self.escape[self.T.mask[self.R.members()]].max())
            if self.T.card else None,
            "family": self.family,
        }


@dataclass
class PartitionResult:
    blocks: list
    residual: SubsetMask
    residual_eps_times: np.ndarray
    stop_reason: str
    config: PQConfig = None

    @property
    def k(self):
        return len(self.blocks)

    def to_dict(self):
        return {
            "blocks": [b.to_dict() for b in self.blocks],
            "residual": [int(v) for v in self.residual.members()],
            "residual_eps_times": None if self.residual_eps_times is None
            else [int(v) for v in self.residual_eps_times],
            "stop_reason": self.stop_reason,
            "config": None if self.config is None else self.config.to_dict(),
        }


def _qualifying(chain, N, threshold, cfg):
    """Candidates L ⊆ N with π(L) <= 1/2 and B(L) <= threshold as (B, mass, bits, members)."""
    pi = chain.pi
    out = []
    if cfg.family == "exhaustive":
        idx, mass, cut = subset_table(chain, N, cap=cfg.exhaustive_cap)
        with np.errstate(divide="ignore", invalid="ignore"):
            B = np.where(mass > 0, cut / np.where(mass > 0, mass, 1.0), np.inf)
        ok = np.flatnonzero((mass > 0) & (mass <= 0.5 + HALF_SLACK) & (B <= threshold))
        for b in ok:
            members = tuple(int(idx[j]) for j in range(idx.size) if int(b) >> j & 1)
            out.append((float(B[b]), float(mass[b]), _bits(members), members))
        return out
    if cfg.family == "connected":
        sets = []
        for k, s in enumerate(connected_subsets(chain.game.index, N, cfg.max_size)):
            if k >= cfg.count_cap:
                raise CapError(f"more than {cfg.count_cap} connected subsets; use the heuristic family")
            sets.append(s)
    else:
        sets = structural_sets(chain.game, N.mask)
    for members in sets:
        m = np.asarray(members)
        mass = float(pi[m].sum())
        if not 0 < mass <= 0.5 + HALF_SLACK:
            continue
        mask = np.zeros(chain.size, dtype=bool)
        mask[m] = True
        flow = float(np.dot(pi[m], np.asarray(chain.P[m][:, ~mask].sum(axis=1)).ravel()))
        if flow / mass <= threshold:
            out.append((flow / mass, mass, _bits(members), tuple(members)))
    return out


def _bits(members):
    b = 0
    for v in members:
        b |= 1 << int(v)
    return b


def _pick_min_mass(cands):
    best = min(c[1] for c in cands)
    tied = [c for c in cands if c[1] <= best * (1 + 1e-12)]
    return min(tied, key=lambda c: c[2])


def _block_for(chain, R, eps, family):
    loop = restrict_loop(chain, R)
    t_mix = mixing_time(loop, eps)
    esc = escape_probability(chain, R, t_mix)
    keep = R.members()[esc <= eps]
    T = SubsetMask.from_indices(chain.size, keep)
    return Block(R, T, bottleneck(chain, R), float(chain.pi[R.mask].sum()), int(t_mix), esc, family)


def run_A_pq(g, beta, cfg, chain=None):
    """Algorithm A_{p,q} with the qualifying family chosen by ``cfg.family``.

    Each round picks, among L ⊆ N with π(L) <= 1/2 and B(L) <= 1/q(n), one
    of minimal π (smaller bitmask on ties) as R_i, computes t_mix of the
    loop restriction to R_i, keeps as T_i the states of R_i that leave R_i
    by that time with probability at most ε, and removes T_i from N.  The
    loop stops when no L qualifies or T_i is empty.
    """
    chain = build_chain(g, beta) if chain is None else chain
    n = g.n
    threshold = 1.0 / cfg.q(n)
    N = SubsetMask.full(chain.size)
    blocks = []
    stop = None
    while N.card:
        cands = _qualifying(chain, N, threshold, cfg)
        if not cands:
            stop = "stationary regime" if not blocks else "no qualifying subset"
            break
        _, _, _, members = _pick_min_mass(cands)
        R = SubsetMask.from_indices(chain.size, members)
        if not is_connected(g.index, R):
            raise PreconditionError("a minimal-mass qualifying set was disconnected")
        block = _block_for(chain, R, cfg.eps, cfg.family)
        if block.T.card == 0:
            stop = "empty core"
            break
        blocks.append(block)
        N = N.minus(block.T)
    else:
        stop = "residual exhausted"
    te = None
    if 0 < N.card < chain.size and blocks:
        try:
            te = eps_hitting_times(chain, N, cfg.eps)
        except LimitReached:
            # some residual state takes longer than the step cap to leave
            te = None
    return PartitionResult(blocks, N, te, stop, cfg)


@dataclass
class ConditionReport:
    name: str
    passed: bool
    values: list             # per block (conditions 1-3) or [value] (condition 4)
    bound: float

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "values": self.values, "bound": self.bound}


@dataclass
class VerifyReport:
    conditions: list
    blocks: list
    residual: SubsetMask
    p: float
    q: float
    eps: float

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def to_dict(self):
        return {
            "passed": self.passed, "p": self.p, "q": self.q, "eps": self.eps,
            "conditions": [c.to_dict() for c in self.conditions],
            "blocks": [b.to_dict() for b in self.blocks],
            "residual": [int(v) for v in self.residual.members()],
        }


def check_structure(g, Rs, Ts, N):
    """Raise InputError naming the first broken structural rule."""
    size = g.size
    if len(Rs) != len(Ts):
        raise InputError("need one core T_i per block R_i")
    cover = np.zeros(size, dtype=int)
    for i, (R, T) in enumerate(zip(Rs, Ts), start=1):
        if R.card == 0:
            raise InputError(f"R_{i} is empty")
        if not T.issubset(R):
            raise InputError(f"T_{i} is not contained in R_{i}")
        if not is_connected(g.index, R):
            raise InputError(f"R_{i} is not connected")
        cover += T.mask
    cover += N.mask
    if np.any(cover > 1):
        raise InputError("the cores and N overlap")
    if np.any(cover == 0):
        raise InputError("the cores and N do not cover the profile space")


def verify_partition(g, beta, Rs, Ts, N, p, q, eps, chain=None):
    """Check the four partitioned-game conditions with exact numbers.

    (1) B(R_i) <= 1/q(n); (2) t_mix of the loop restriction to R_i <= p(n);
    (3) max_{x in T_i} Pr_x[τ_{S∖R_i} <= t_mix^{R_i}(ε)] <= ε;
    (4) min_{x in N} Pr_x[τ_{∪T_i} <= p(n)] >= 1 − ε.
    """
    chain = build_chain(g, beta) if chain is None else chain
    Rs = [_as_mask(chain, R) for R in Rs]
    Ts = [_as_mask(chain, T) for T in Ts]
    N = _as_mask(chain, N)
    check_structure(g, Rs, Ts, N)
    p, q = exprs.parse(p), exprs.parse(q)
    pn, qn = p(g.n), q(g.n)
    blocks = []
    c1, c2, c3 = [], [], []
    for R, T in zip(Rs, Ts):
        try:
            b = _block_for(chain, R, eps, "given")
        except LimitReached as exc:
            raise PreconditionError(f"t_mix of a restricted block is beyond the cap: {exc}") from None
        b.T = T
        blocks.append(b)
        c1.append(b.B)
        c2.append(b.t_mix)
        on_T = b.escape[T.mask[R.members()]]
        c3.append(float(on_T.max()) if on_T.size else 0.0)
    conds = [
        ConditionReport("bottleneck", all(v <= 1.0 / qn for v in c1), c1, 1.0 / qn),
        ConditionReport("restricted_mixing", all(v <= pn for v in c2), c2, pn),
        ConditionReport("core_stickiness", all(v <= eps for v in c3), c3, eps),
    ]
    if N.card:
        reach = escape_probability(chain, N, int(math.floor(pn)))
        worst = float(reach.min())
        conds.append(ConditionReport("residual_escape", worst >= 1 - eps, [worst], 1 - eps))
    else:
        conds.append(ConditionReport("residual_escape", True, [], 1 - eps))
    return VerifyReport(conds, blocks, N, pn, qn, eps)


@dataclass
class PipelineReport:
    metastable: list          # MetaCertificate per block
    pseudo_mixing: list       # t_{μ_i}^{T_i}(2ε) per block (None when beyond the budget)
    t_mix: list

    @property
    def passed(self):
        ok = all(c.passed for c in self.metastable)
        return ok and all(pm is not None and pm <= t for pm, t in zip(self.pseudo_mixing, self.t_mix))


def pipeline_check(chain, blocks, q_value, eps):
    """μ_i = π_{R_i}: bound-certified (ε, ε q)-metastable and fast from T_i."""
    certs, pms, tm = [], [], []
    for b in blocks:
        mu = np.where(b.R.mask, chain.pi, 0.0) / b.mass
        certs.append(is_metastable(chain, mu, eps, eps * q_value, mode="bound"))
        if b.T.card:
            res = pseudo_mixing_time(chain, mu, b.T, 2 * eps, budget=max(10 * b.t_mix, 1000))
            pms.append(res.value)
        else:
            pms.append(0)
        tm.append(b.t_mix)
    return PipelineReport(certs, pms, tm)


def structural_subsets(g):
    """Named candidate subsets: consensus singletons, magnetization half-spaces
    and potential sublevel sets at the lowest levels."""
    out = {}
    size = g.size
    out["consensus_first"] = SubsetMask.from_indices(size, [0])
    out["consensus_last"] = SubsetMask.from_indices(size, [size - 1])
    if all(m == 2 for m in g.strategy_counts):
        M = g.n - 2 * g.index.digits.sum(axis=1)
        out["magnetization_pos"] = SubsetMask(M > 0)
        out["magnetization_neg"] = SubsetMask(M < 0)
    if g.has_potential:
        levels = np.unique(g.potential)
        for k, c in enumerate(levels[:3]):
            out[f"sublevel_{k}"] = SubsetMask(g.potential <= c)
    return out


def classify(B, p_value, q_value):
    """poly-side if B >= 1/p, super-side if B <= 1/q, unclassified between.

    When p(n) >= q(n) the two sides overlap and a value on both is "both".
    """
    poly = B >= 1.0 / p_value
    sup = B <= 1.0 / q_value
    if poly and sup:
        return "both"
    if poly:
        return "poly-side"
    if sup:
        return "super-side"
    return "unclassified"


@dataclass
class SweepRow:
    n: int
    beta: float
    subset: str
    size: int
    mass: float
    B: float
    classes: dict            # pair label -> class

    def to_dict(self):
        return {"n": self.n, "beta": self.beta, "subset": self.subset, "size": self.size,
                "pi": self.mass, "B": self.B, "classes": self.classes}


def classification_sweep(family, ns, beta_rule, pairs, subsets=None, params=None):
    """Exact B of named subsets across n, classified under each (p, q) pair.

    ``beta_rule`` is an expression in n; ``pairs`` maps a label to (p, q)
    expressions; ``subsets`` restricts the named subsets (default all).
    """
    params = dict(params or {})
    beta_rule = exprs.parse(beta_rule)
    parsed = {label: (exprs.parse(p), exprs.parse(q)) for label, (p, q) in pairs.items()}
    rows = []
    for n in ns:
        n = int(n)
        beta = beta_rule(n)
        if family == "counterexample":
            params["beta"] = beta
        g = zoo.make_game(family, n=n, **params)
        chain = build_chain(g, beta)
        named = structural_subsets(g)
        for name, L in named.items():
            if subsets is not None and name not in subsets:
                continue
            if L.card == 0 or L.card == chain.size:
                continue
            B = bottleneck(chain, L)
            classes = {label: classify(B, p(n), q(n)) for label, (p, q) in parsed.items()}
            rows.append(SweepRow(n, beta, name, L.card, float(chain.pi[L.mask].sum()), B, classes))
    return rows


def class_changes(rows, subset, label):
    """n values where the class of ``subset`` under ``label`` differs from the previous n."""
    seq = [(r.n, r.classes[label]) for r in rows if r.subset == subset]
    return [(n, prev, cur) for (_, prev), (n, cur) in zip(seq, seq[1:]) if prev != cur]
