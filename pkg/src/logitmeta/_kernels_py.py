"""Pure-Python/numpy versions of the hot kernels.

Every routine here performs the same floating-point operations in the same
order as its compiled twin in ``_kernels.pyx``, so both backends return
bit-identical results.
"""

import math

import numpy as np


def subset_flows(pi, exit_flow, indptr, indices, qvals, chunk=1 << 16):
    """Stationary mass and cut flow of every subset of a ``k``-state scope.

    Subset ``mask`` contains local state ``x`` iff bit ``x`` is set.  The cut
    of a subset is ``sum_{x in mask} (exit_flow[x] + sum_{y not in mask} q(x, y))``
    where ``q`` is given in CSR form over local indices.  Only nonnegative
    terms are added, so tiny cuts keep full relative precision.
    """
    k = len(pi)
    total = 1 << k
    mass = np.empty(total)
    cut = np.empty(total)
    for start in range(0, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(k)) & 1).astype(float)
        m = np.zeros(masks.size)
        c = np.zeros(masks.size)
        for x in range(k):
            bx = bits[:, x]
            m += bx * pi[x]
            c += bx * exit_flow[x]
            for e in range(indptr[x], indptr[x + 1]):
                c += bx * (1.0 - bits[:, indices[e]]) * qvals[e]
        mass[start:start + masks.size] = m
        cut[start:start + masks.size] = c
    return mass, cut


def _choose(util, radices, strides, beta, x, u0, u1, n):
    i = int(u0 * n)
    if i >= n:
        i = n - 1
    m = radices[i]
    stride = strides[i]
    xi = (x // stride) % m
    base = x - xi * stride
    mx = -math.inf
    for s in range(m):
        v = beta * util[i, base + s * stride]
        if v > mx:
            mx = v
    total = 0.0
    for s in range(m):
        total += math.exp(beta * util[i, base + s * stride] - mx)
    target = u1 * total
    cum = 0.0
    pick = m - 1
    for s in range(m):
        cum += math.exp(beta * util[i, base + s * stride] - mx)
        if target < cum:
            pick = s
            break
    return base + pick * stride


def simulate_path(util, radices, strides, beta, x0, uniforms, t_offset,
                  tracked, first_hit, occupancy, window, visits, path):
    """Advance one trajectory through ``len(uniforms)`` logit steps.

    ``uniforms[t]`` drives step ``t_offset + t + 1``: its first entry picks the
    player, its second samples the Boltzmann update.  ``first_hit``,
    ``occupancy`` (per window of ``window`` steps), ``visits`` and ``path`` are
    updated in place; empty arrays switch the corresponding statistic off.
    Returns the final state.
    """
    n = len(radices)
    radices = [int(v) for v in radices]
    strides = [int(v) for v in strides]
    n_tracked = tracked.shape[0]
    want_visits = len(visits) > 0
    want_path = len(path) > 0
    want_occ = occupancy.shape[1] > 0 if occupancy.ndim == 2 else False
    x = int(x0)
    for t in range(len(uniforms)):
        x = _choose(util, radices, strides, beta, x, uniforms[t, 0], uniforms[t, 1], n)
        step = t_offset + t + 1
        for k in range(n_tracked):
            if tracked[k, x]:
                if first_hit[k] < 0:
                    first_hit[k] = step
                if want_occ:
                    occupancy[k, (step - 1) // window] += 1
        if want_visits:
            visits[x] += 1
        if want_path:
            path[t] = x
    return x


def step_batch(util, radices, strides, beta, states, uniforms):
    """One logit step from each entry of ``states`` (updated in place)."""
    n = len(radices)
    radices = [int(v) for v in radices]
    strides = [int(v) for v in strides]
    for j in range(len(states)):
        states[j] = _choose(util, radices, strides, beta, int(states[j]),
                            uniforms[j, 0], uniforms[j, 1], n)
