"""Finite strategic games, mixed-radix profile indexing and potential checks.

Profiles are identified with integers in ``0..|S|-1``.  Player 0 is the least
significant digit, so profile ``(s_0, ..., s_{n-1})`` has index
``sum_i s_i * prod_{j<i} m_j``.  Players are numbered from 0.
"""

from dataclasses import dataclass, field
from functools import cached_property
import json

import numpy as np
from scipy import sparse

from .errors import CapError, InputError, PreconditionError
from . import serialize

DEFAULT_STATE_CAP = 16384


class ProfileIndex:
    """Bijection between strategy profiles and dense indices."""

    def __init__(self, radices):
        radices = tuple(int(m) for m in radices)
        if not radices:
            raise InputError("a game needs at least one player")
        if any(m < 1 for m in radices):
            raise InputError(f"strategy counts must be positive, got {radices}")
        self.radices = radices
        self.n = len(radices)
        strides = np.ones(self.n, dtype=np.int64)
        for i in range(1, self.n):
            strides[i] = strides[i - 1] * radices[i - 1]
        self.strides = strides
        self.size = int(strides[-1] * radices[-1])

    def __repr__(self):
        return f"ProfileIndex({self.radices})"

    def encode(self, strategies):
        strategies = tuple(int(s) for s in strategies)
        if len(strategies) != self.n:
            raise InputError(f"profile has {len(strategies)} entries, expected {self.n}")
        for i, (s, m) in enumerate(zip(strategies, self.radices)):
            if not 0 <= s < m:
                raise InputError(f"strategy {s} of player {i} outside 0..{m - 1}")
        return int(np.dot(strategies, self.strides))

    def decode(self, x):
        x = self._check(x)
        return tuple(int(x // self.strides[i] % self.radices[i]) for i in range(self.n))

    def _check(self, x):
        x = int(x)
        if not 0 <= x < self.size:
            raise InputError(f"profile index {x} outside 0..{self.size - 1}")
        return x

    @cached_property
    def digits(self):
        """Array of shape (|S|, n) holding every decoded profile."""
        idx = np.arange(self.size, dtype=np.int64)
        out = (idx[:, None] // self.strides[None, :]) % np.asarray(self.radices)
        out.setflags(write=False)
        return out

    @property
    def tensor_shape(self):
        """Shape for reshaping a flat table so that the last axis is player 0."""
        return self.radices[::-1]

    def axis(self, i):
        """Tensor axis carrying the strategy of player ``i``."""
        return self.n - 1 - i

    def neighbors(self, x):
        """All unilateral deviations of ``x`` as ``(player, profile)`` pairs."""
        x = self._check(x)
        out = []
        for i in range(self.n):
            stride = int(self.strides[i])
            xi = x // stride % self.radices[i]
            for s in range(self.radices[i]):
                if s != xi:
                    out.append((i, x + (s - xi) * stride))
        return out

    @property
    def degree(self):
        return sum(m - 1 for m in self.radices)

    @cached_property
    def neighbor_table(self):
        """Array (|S|, degree) of neighbor indices in ``neighbors`` order."""
        d = self.digits
        table = np.empty((self.size, self.degree), dtype=np.int64)
        base = np.arange(self.size, dtype=np.int64)
        k = 0
        for i in range(self.n):
            xi = d[:, i]
            # targets in increasing strategy order, skipping x_i itself
            for r in range(self.radices[i] - 1):
                s = np.where(r < xi, r, r + 1)
                table[:, k] = base + (s - xi) * self.strides[i]
                k += 1
        table.setflags(write=False)
        return table

    @cached_property
    def adjacency(self):
        """Sparse 0/1 adjacency of the Hamming-neighbor graph."""
        rows = np.repeat(np.arange(self.size, dtype=np.int64), self.degree)
        cols = self.neighbor_table.ravel()
        data = np.ones(rows.size, dtype=np.int8)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.size, self.size))

    def hamming(self, x, y):
        return sum(a != b for a, b in zip(self.decode(x), self.decode(y)))


class SubsetMask:
    """Immutable subset of profile indices backed by a boolean vector."""

    __slots__ = ("_mask", "_card", "_bits")

    def __init__(self, mask):
        mask = np.array(mask, dtype=bool)
        if mask.ndim != 1:
            raise InputError("subset mask must be one-dimensional")
        mask.setflags(write=False)
        self._mask = mask
        self._card = int(mask.sum())
        self._bits = None

    @classmethod
    def from_indices(cls, size, indices):
        mask = np.zeros(size, dtype=bool)
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= size):
            raise InputError(f"subset member outside 0..{size - 1}")
        mask[idx] = True
        return cls(mask)

    @classmethod
    def from_bits(cls, size, bits):
        bits = int(bits)
        if bits < 0 or bits >> size:
            raise InputError("bitmask has members outside the profile space")
        raw = bits.to_bytes((size + 7) // 8, "little")
        mask = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:size]
        return cls(mask.astype(bool))

    @classmethod
    def full(cls, size):
        return cls(np.ones(size, dtype=bool))

    @property
    def mask(self):
        return self._mask

    @property
    def size(self):
        return self._mask.size

    @property
    def card(self):
        return self._card

    def __len__(self):
        return self._card

    @property
    def bits(self):
        """Integer bitmask with bit ``x`` set for each member ``x``."""
        if self._bits is None:
            packed = np.packbits(self._mask, bitorder="little")
            self._bits = int.from_bytes(packed.tobytes(), "little")
        return self._bits

    def members(self):
        return np.flatnonzero(self._mask)

    def __contains__(self, x):
        return bool(self._mask[int(x)])

    def complement(self):
        return SubsetMask(~self._mask)

    def union(self, other):
        return SubsetMask(self._mask | other.mask)

    def intersect(self, other):
        return SubsetMask(self._mask & other.mask)

    def minus(self, other):
        return SubsetMask(self._mask & ~other.mask)

    def issubset(self, other):
        return not np.any(self._mask & ~other.mask)

    def isdisjoint(self, other):
        return not np.any(self._mask & other.mask)

    def __eq__(self, other):
        return isinstance(other, SubsetMask) and np.array_equal(self._mask, other.mask)

    def __hash__(self):
        return hash((self.size, self.bits))

    def __repr__(self):
        m = self.members()
        shown = ", ".join(str(v) for v in m[:8])
        more = ", ..." if m.size > 8 else ""
        return f"SubsetMask({{{shown}{more}}} of {self.size})"


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A finite game with dense utility table ``utilities[i, x]``."""

    strategy_counts: tuple
    utilities: np.ndarray
    potential: np.ndarray = None
    name: str = None
    params: dict = field(default_factory=dict)
    state_cap: int = DEFAULT_STATE_CAP

    def __post_init__(self):
        counts = tuple(int(m) for m in self.strategy_counts)
        index = ProfileIndex(counts)
        if index.size > self.state_cap:
            raise CapError(
                f"|S| = {index.size} exceeds the state cap {self.state_cap}; "
                "raise state_cap explicitly for larger games"
            )
        u = np.array(self.utilities, dtype=float)
        if u.shape != (index.n, index.size):
            raise InputError(
                f"utility table has shape {u.shape}, expected {(index.n, index.size)}"
            )
        if not np.all(np.isfinite(u)):
            raise InputError("utilities must be finite reals")
        u.setflags(write=False)
        phi = None
        if self.potential is not None:
            phi = np.array(self.potential, dtype=float)
            if phi.shape != (index.size,):
                raise InputError(f"potential has shape {phi.shape}, expected ({index.size},)")
            if not np.all(np.isfinite(phi)):
                raise InputError("potential must be finite")
            phi.setflags(write=False)
        object.__setattr__(self, "strategy_counts", counts)
        object.__setattr__(self, "utilities", u)
        object.__setattr__(self, "potential", phi)
        object.__setattr__(self, "params", dict(self.params or {}))
        object.__setattr__(self, "_index", index)

    @property
    def n(self):
        return len(self.strategy_counts)

    @property
    def index(self):
        return self._index

    @property
    def size(self):
        return self._index.size

    @property
    def has_potential(self):
        return self.potential is not None

    def require_potential(self):
        if self.potential is None:
            raise PreconditionError(f"game {self.name or '<anonymous>'} has no potential table")
        return self.potential

    def to_dict(self):
        d = {
            "name": self.name,
            "n": self.n,
            "strategy_counts": list(self.strategy_counts),
            "utilities": self.utilities.tolist(),
            "params": dict(self.params),
        }
        if self.potential is not None:
            d["potential"] = self.potential.tolist()
        return d

    def fingerprint(self):
        return serialize.content_hash(self.to_dict())


def game_from_dict(d, state_cap=DEFAULT_STATE_CAP):
    """Build a GameSpec from the game-spec JSON object."""
    try:
        n = int(d["n"])
        counts = [int(m) for m in d["strategy_counts"]]
        util = np.asarray(d["utilities"], dtype=float)
    except KeyError as exc:
        raise InputError(f"game spec is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"game spec field has the wrong type: {exc}") from None
    if len(counts) != n:
        raise InputError(f"n = {n} but {len(counts)} strategy counts given")
    size = int(np.prod(counts)) if counts else 0
    if util.ndim == 1:
        if util.size != n * size:
            raise InputError(f"flat utility list has {util.size} entries, expected {n * size}")
        util = util.reshape(n, size)
    return GameSpec(
        strategy_counts=tuple(counts),
        utilities=util,
        potential=d.get("potential"),
        name=d.get("name"),
        params=d.get("params") or {},
        state_cap=state_cap,
    )


def save_game(g, path):
    serialize.write_atomic(path, serialize.dumps(g.to_dict(), indent=1) + "\n")


def load_game(path, state_cap=DEFAULT_STATE_CAP):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read game file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"game file {path} is not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise InputError("game file must hold a JSON object")
    return game_from_dict(d, state_cap=state_cap)


@dataclass
class PotentialCheck:
    passed: bool
    worst: float
    player: int = None
    x: int = None
    y: int = None


def _fibers(index, values, i):
    """View ``values`` with the strategy of player ``i`` on the last axis."""
    t = np.asarray(values).reshape(index.tensor_shape)
    return np.moveaxis(t, index.axis(i), -1)


def verify_potential(g, tol=1e-9):
    """Check Φ(x) − Φ(y) = u_i(y) − u_i(x) over every unilateral deviation.

    The identity says ``Φ + u_i`` is constant along each player-``i`` fiber,
    so the worst violation on a fiber is its max minus its min.
    """
    phi = g.require_potential()
    idx = g.index
    worst, where = 0.0, None
    for i in range(g.n):
        if g.strategy_counts[i] < 2:
            continue
        w = _fibers(idx, phi + g.utilities[i], i)
        spread = w.max(axis=-1) - w.min(axis=-1)
        k = int(np.argmax(spread))
        if spread.flat[k] > worst:
            worst = float(spread.flat[k])
            where = (i, k, w.reshape(-1, w.shape[-1])[k])
    if where is None:
        return PotentialCheck(True, 0.0)
    i, k, fiber = where
    # recover the two profiles realizing the spread on that fiber
    ids = _fibers(idx, np.arange(g.size), i).reshape(-1, g.strategy_counts[i])[k]
    x, y = int(ids[np.argmax(fiber)]), int(ids[np.argmin(fiber)])
    return PotentialCheck(worst <= tol, worst, i, x, y)


def lipschitz_delta(g):
    """Largest potential difference between two Hamming neighbors."""
    phi = g.require_potential()
    best = 0.0
    for i in range(g.n):
        if g.strategy_counts[i] < 2:
            continue
        f = _fibers(g.index, phi, i)
        best = max(best, float((f.max(axis=-1) - f.min(axis=-1)).max()))
    return best
