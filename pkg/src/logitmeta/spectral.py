"""Spectra of logit chains and their restrictions, Dirichlet forms and the
spectral identities used as oracles (trace, determinant, null covector)."""

from dataclasses import dataclass, field
import itertools

import numpy as np

from .chain import bottleneck, build_chain, check_reversibility, restrict_kill
from .errors import CapError, InputError, NumericalError

DENSE_CAP = 4096
REVERSIBLE_TOL = 1e-12


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    kind: str
    symmetric: bool
    complex_count: int = 0

    @property
    def lam_star(self):
        """max_{i >= 2} |λ_i|."""
        ev = self.eigenvalues
        return float(np.abs(ev[1:]).max()) if ev.size > 1 else 0.0

    @property
    def t_rel(self):
        gap = 1.0 - self.lam_star
        return np.inf if gap <= 0 else 1.0 / gap

    @property
    def lambda2(self):
        return float(self.eigenvalues[1].real) if self.eigenvalues.size > 1 else 0.0


def _block(chain):
    idx = chain.support.members()
    if idx.size > DENSE_CAP:
        raise CapError(f"dense spectral work on {idx.size} states exceeds the cap {DENSE_CAP}")
    return chain.P[idx][:, idx].toarray(), idx


def symmetrized(block):
    """sqrt(P(x,y) P(y,x)), equal to D^{1/2} P D^{-1/2} for reversible P.

    The product form avoids dividing by stationary weights that may
    underflow at large β.
    """
    S = np.sqrt(block * block.T)
    return 0.5 * (S + S.T)


def is_reversible(chain, tol=REVERSIBLE_TOL):
    return check_reversibility(chain, chain.pi, tol).passed


def spectrum(chain):
    """Eigenvalues in non-increasing order (real part order for complex ones)."""
    block, _ = _block(chain)
    if is_reversible(chain):
        ev = np.linalg.eigvalsh(symmetrized(block))[::-1]
        return Spectrum(ev, chain.kind, True)
    ev = np.linalg.eigvals(block)
    real = np.abs(ev.imag) <= 1e-9
    out = np.where(real, ev.real, ev)
    order = np.lexsort((-np.abs(out), -out.real))
    out = out[order]
    if np.all(real):
        out = out.real
    return Spectrum(out, chain.kind, False, int((~real).sum()))


@dataclass
class KilledTop:
    value: float
    vector: np.ndarray  # right eigenvector, zero outside L, max |entry| = 1


def _power_top(S, tol=1e-12, max_iter=1_000_000):
    v = np.ones(S.shape[0]) / np.sqrt(S.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = S @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0, v
        w /= norm
        new = float(w @ (S @ w))
        if abs(new - lam) <= tol and np.linalg.norm(S @ w - new * w) <= np.sqrt(tol):
            return new, w
        lam, v = new, w
    raise NumericalError(f"power iteration did not converge; last residual {abs(new - lam):.3g}")


def killed_top(kill_chain):
    """Largest eigenvalue of P_{L̄} and its right eigenvector.

    A dense symmetric eigensolve is used up to DENSE_CAP states and power
    iteration on the sparse symmetrized form beyond that.
    """
    if kill_chain.kind != "substochastic":
        raise InputError("killed_top expects a substochastic chain")
    idx = kill_chain.support.members()
    if idx.size <= DENSE_CAP:
        block = kill_chain.P[idx][:, idx].toarray()
        vals, vecs = np.linalg.eigh(symmetrized(block))
        lam, psi = float(vals[-1]), vecs[:, -1]
    else:
        B = kill_chain.P[idx][:, idx]
        S = B.multiply(B.T).sqrt()
        lam, psi = _power_top(S.tocsr())
    pi = kill_chain.pi[idx]
    with np.errstate(divide="ignore"):
        scale = np.sqrt(pi.max() / pi)
    phi_local = psi * scale
    phi_local[~np.isfinite(phi_local)] = 0.0
    phi_local /= np.abs(phi_local).max()
    if phi_local.sum() < 0:
        phi_local = -phi_local
    phi = np.zeros(kill_chain.size)
    phi[idx] = phi_local
    return KilledTop(lam, phi)


def lambda_max_killed(kill_chain):
    return killed_top(kill_chain).value


def dirichlet_form(chain, pi, phi):
    """E(φ) = 1/2 sum_{x,y} π(x) P(x,y) (φ(x) − φ(y))^2."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise InputError("φ must be finite")
    C = chain.P.tocoo()
    d = phi[C.row] - phi[C.col]
    return 0.5 * float(np.sum(pi[C.row] * C.data * d * d))


def rayleigh_quotient(chain, phi):
    phi = np.asarray(phi, dtype=float)
    den = float(np.dot(chain.pi, phi * phi))
    return dirichlet_form(chain, chain.pi, phi) / den


@dataclass
class RayleighReport:
    gap: float
    eigvec_quotient: float
    min_random_quotient: float
    tol: float
    attains: bool = field(init=False)
    lower_bound_holds: bool = field(init=False)

    def __post_init__(self):
        self.attains = abs(self.eigvec_quotient - self.gap) <= self.tol
        self.lower_bound_holds = self.min_random_quotient >= self.gap - self.tol

    @property
    def passed(self):
        return self.attains and self.lower_bound_holds


def rayleigh_check(chain, L, draws=200, seed=0, tol=1e-8):
    """1 − λ^{L̄}_max against E_P(φ)/E_π[φ²] for φ supported on L."""
    kill = restrict_kill(chain, L)
    top = killed_top(kill)
    gap = 1.0 - top.value
    q_top = rayleigh_quotient(chain, top.vector)
    rng = np.random.default_rng(seed)
    idx = kill.support.members()
    qmin = np.inf
    for _ in range(draws):
        phi = np.zeros(chain.size)
        phi[idx] = rng.standard_normal(idx.size)
        qmin = min(qmin, rayleigh_quotient(chain, phi))
    return RayleighReport(gap, q_top, float(qmin), tol)


def trace_formula(strategy_counts):
    """(1/n) sum_i prod_{j != i} m_j."""
    m = np.asarray(strategy_counts, dtype=float)
    n = m.size
    return float(sum(np.prod(np.delete(m, i)) for i in range(n)) / n)


def null_covector(index, anchor=0):
    """Appendix covector f with fᵀP = 0, built from shells around ``anchor``.

    Each player deviates to s_i* = (x_i + 1) mod m_i; a profile reached by
    switching j players gets (−1)^(j+1).
    """
    if any(m < 2 for m in index.radices):
        raise InputError("the null covector needs every player to have two strategies")
    x = index.decode(anchor)
    star = tuple((xi + 1) % m for xi, m in zip(x, index.radices))
    f = np.zeros(index.size)
    for J in itertools.product((0, 1), repeat=index.n):
        z = tuple(s if j else xi for xi, s, j in zip(x, star, J))
        f[index.encode(z)] = -1.0 if sum(J) % 2 == 0 else 1.0
    return f


def loop_identity_residual(chain):
    """max_x |P(x,x) − sum_i P((x_{-i}, s_i*), x)| with s_i* = (x_i + 1) mod m_i."""
    idx = chain.game.index
    d = idx.digits
    P = chain.P.tocsr()
    x = np.arange(chain.size)
    total = np.zeros(chain.size)
    for i in range(idx.n):
        m = idx.radices[i]
        shift = ((d[:, i] + 1) % m - d[:, i]) * idx.strides[i]
        total += np.asarray(P[x + shift, x]).ravel()
    return float(np.abs(P.diagonal() - total).max())


@dataclass
class TraceDetReport:
    trace_formula: float
    traces: dict
    det: float
    min_abs_eig: float
    null_residual: float
    loop_residual: float
    anchor: int

    def checks(self, trace_tol=1e-10, det_tol=1e-9, null_tol=1e-9, loop_tol=1e-12):
        return {
            "trace": all(abs(t - self.trace_formula) <= trace_tol for t in self.traces.values()),
            "det": abs(self.det) <= det_tol,
            "null_covector": self.null_residual <= null_tol,
            "loop_identity": self.loop_residual <= loop_tol,
        }

    @property
    def passed(self):
        return all(self.checks().values())


def trace_and_det_report(g, beta, extra_betas=(0.0, 1.0, 5.0), anchor=0):
    chain = build_chain(g, beta)
    traces = {float(beta): float(chain.P.diagonal().sum())}
    for b in extra_betas:
        traces[float(b)] = float(build_chain(g, b).P.diagonal().sum())
    block, _ = _block(chain)
    if g.has_potential and is_reversible(chain):
        ev = np.linalg.eigvalsh(symmetrized(block))
        det = float(np.prod(ev))
        min_abs = float(np.abs(ev).min())
    else:
        sv = np.linalg.svd(block, compute_uv=False)
        det = float(np.linalg.det(block))
        min_abs = float(sv.min())
    f = null_covector(g.index, anchor)
    null_res = float(np.abs(chain.P.T @ f).max())
    return TraceDetReport(
        trace_formula(g.strategy_counts), traces, det, min_abs, null_res,
        loop_identity_residual(chain), anchor,
    )


@dataclass
class SandwichReport:
    lower: float
    middle: float
    upper: float
    tol: float

    @property
    def passed(self):
        return self.lower <= self.middle + self.tol and self.middle <= self.upper + self.tol

    @property
    def slack(self):
        return min(self.middle - self.lower, self.upper - self.middle)


def cheeger_sandwich(spec, bstar, tol=1e-8):
    """B*²/2 <= 1 − λ_2 <= 2B*."""
    return SandwichReport(bstar**2 / 2.0, 1.0 - spec.lambda2, 2.0 * bstar, tol)


def killed_sandwich(chain, L, bstar_L, tol=1e-8):
    """(B^L_*)²/2 <= 1 − λ^{L̄}_max <= B(L)."""
    lam = lambda_max_killed(restrict_kill(chain, L))
    return SandwichReport(bstar_L**2 / 2.0, 1.0 - lam, bottleneck(chain, L), tol)
