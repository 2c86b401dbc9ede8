"""Transfer entropy of channels with place-dependent probabilities.

For ``Phi(rho) = sum_i tr(Q_i rho) U_i rho U_i^*`` the transfer entropy is

    h_Q(rho) = sum_i tr(Q_i rho) sum_j eta(tr(Q_j U_i rho U_i^*)),

with ``eta(x) = -x ln x``.  Natural logarithms are used throughout, so
entropies are in nats.  The inner measurement (index ``j``) defaults to the
channel's own POVM but any POVM with ``M`` outcomes may be supplied, in which
case the upper bound is ``log M``.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .channels import NonlinearChannel, check_povm
from .errors import (
    BarycenterMismatch, BranchCountMismatch, DimensionMismatch, InvalidProbabilityVector,
    NegativeArgument,
)
from .matkernel import hermitian_eig, partial_trace

NEG_TOL = 1e-12
BARYCENTER_TOL = 1e-6


def eta(x):
    """``-x ln x`` with ``eta(0) = 0``; works elementwise on arrays."""
    a = np.asarray(x, dtype=np.float64)
    if np.any(a < 0.0):
        raise NegativeArgument(f"eta needs x >= 0, got min {a.min():.3e}")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0.0, -a * np.log(np.where(a > 0.0, a, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def _clip_probs(p):
    # rounding can leave tr(Q rho) at -1e-17; anything worse is a real error
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < -NEG_TOL):
        raise NegativeArgument(f"negative probability {p.min():.3e}")
    return np.clip(p, 0.0, None)


def shannon(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < -NEG_TOL) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidProbabilityVector(f"not a probability vector: {p}")
    return float(math.fsum(eta(_clip_probs(p))))


def von_neumann_entropy(rho):
    w, _ = hermitian_eig(rho)
    return float(math.fsum(eta(np.clip(w, 0.0, None))))


def kl_divergence(p, q):
    """``sum_j p_j (log p_j - log q_j)``; ``inf`` if ``q_j = 0 < p_j``."""
    p = _clip_probs(p)
    q = _clip_probs(q)
    pos = p > 0.0
    if np.any(q[pos] <= 0.0):
        return math.inf
    return float(math.fsum(p[pos] * (np.log(p[pos]) - np.log(q[pos]))))


@dataclass
class EntropyReport:
    value: float
    branch_terms: np.ndarray  # p_i(rho) * S_i(rho)
    branch_probs: np.ndarray
    branch_entropies: np.ndarray
    bound: float
    bounds_checked: bool = field(default=False)

    def to_dict(self):
        return {
            "value": self.value, "bound": self.bound, "bounds_checked": self.bounds_checked,
            "branch_terms": [float(v) for v in self.branch_terms],
            "branch_probs": [float(v) for v in self.branch_probs],
            "branch_entropies": [float(v) for v in self.branch_entropies],
        }


def _inner_povm(channel, inner):
    if inner is None:
        return channel.povm
    q = check_povm(inner)
    if q.shape[1] != channel.n:
        raise DimensionMismatch(f"inner POVM on C^{q.shape[1]} for a channel on C^{channel.n}")
    return q


def branch_distributions(channel, rho, inner_povm=None):
    """Matrix ``eta[i, j] = tr(Q_j U_i rho U_i^*)``."""
    q = _inner_povm(channel, inner_povm)
    rho = np.asarray(rho, dtype=np.complex128)
    imgs = channel.unitaries @ rho @ np.conj(np.swapaxes(channel.unitaries, 1, 2))
    return _clip_probs(np.einsum("jab,iba->ij", q, imgs).real)


def transfer_entropy(channel, rho, inner_povm=None):
    """``h_Q(rho)`` together with its per-branch decomposition."""
    if not isinstance(channel, NonlinearChannel):
        raise TypeError("transfer entropy is defined for channels with a POVM")
    rho = np.asarray(rho, dtype=np.complex128)
    p = _clip_probs(channel.probabilities(rho))
    dist = branch_distributions(channel, rho, inner_povm)
    s = eta(dist).sum(axis=1)
    terms = p * s
    value = float(math.fsum(terms))
    bound = math.log(dist.shape[1])
    ok = -NEG_TOL <= value <= bound + 1e-12
    return EntropyReport(value, terms, p, s, bound, ok)


def relative_transfer_entropy(channel_a, channel_b, rho):
    """``sum_i tr(Q_i^A rho) KL(q_i^A || q_i^B)`` with ``q_i^X[j] = tr(Q_j^X U_i^X rho U_i^X*)``.

    Branches with ``tr(Q_i^A rho) = 0`` are dropped.  Returns ``inf`` when a
    B-probability vanishes where the A-probability does not.
    """
    if channel_a.k != channel_b.k:
        raise BranchCountMismatch(f"{channel_a.k} branches vs {channel_b.k}")
    if channel_a.n != channel_b.n:
        raise DimensionMismatch(f"channels on C^{channel_a.n} and C^{channel_b.n}")
    rho = np.asarray(rho, dtype=np.complex128)
    w = _clip_probs(channel_a.probabilities(rho))
    da = branch_distributions(channel_a, rho)
    db = branch_distributions(channel_b, rho)
    total = []
    for i in range(channel_a.k):
        if w[i] == 0.0:
            continue
        d = kl_divergence(da[i], db[i])
        if math.isinf(d):
            return math.inf
        total.append(w[i] * d)
    return float(math.fsum(total))


def relative_entropy_states(channel, rho, sigma, weights=None):
    """``sum_i w_i KL(q(U_i rho U_i^*) || q(U_i sigma U_i^*))`` for fixed weights.

    ``q`` is the outcome distribution of the channel's POVM.  With weights not
    depending on the states this is jointly convex in ``(rho, sigma)``.  The
    default weights are ``tr(Q_i) / n``, the branch probabilities at the
    maximally mixed state.
    """
    if weights is None:
        weights = np.trace(channel.povm, axis1=1, axis2=2).real / channel.n
    da = branch_distributions(channel, rho)
    db = branch_distributions(channel, sigma)
    out = []
    for i, wi in enumerate(weights):
        if wi == 0.0:
            continue
        d = kl_divergence(da[i], db[i])
        if math.isinf(d):
            return math.inf
        out.append(wi * d)
    return float(math.fsum(out))


def joint_convexity_margin(channel, rho1, rho2, sigma1, sigma2, lam, weights=None):
    """Right side minus left side of the joint convexity inequality (>= 0 when it holds)."""
    lhs = relative_entropy_states(channel, lam * rho1 + (1 - lam) * rho2,
                                  lam * sigma1 + (1 - lam) * sigma2, weights)
    rhs = (lam * relative_entropy_states(channel, rho1, sigma1, weights)
           + (1 - lam) * relative_entropy_states(channel, rho2, sigma2, weights))
    if math.isinf(rhs):
        return math.inf
    return rhs - lhs


def check_concavity_inequality(channel, rho1, rho2, alpha_grid=(0.1, 0.25, 0.5, 0.75, 0.9),
                               slack=1e-10):
    """Check ``h(a r1 + (1-a) r2) >= a^2 h(r1) + (1-a)^2 h(r2)`` on a grid.

    Returns ``(holds, worst_margin)``.
    """
    h1 = transfer_entropy(channel, rho1).value
    h2 = transfer_entropy(channel, rho2).value
    worst = math.inf
    for a in alpha_grid:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {a}")
        mid = a * np.asarray(rho1) + (1 - a) * np.asarray(rho2)
        margin = transfer_entropy(channel, mid).value - (a * a * h1 + (1 - a) ** 2 * h2)
        worst = min(worst, margin)
    return worst >= -slack, float(worst)


@dataclass
class EofReport:
    candidates: list
    min_entropy_integral: float
    min_transfer_integral: float
    inequality_holds: bool

    def to_dict(self):
        return {"candidates": self.candidates, "E_candidate": self.min_entropy_integral,
                "E_hQ_candidate": self.min_transfer_integral,
                "inequality_holds": self.inequality_holds}


def eof_inequality_demo(omega, candidate_measures, channel, dims=(2, 2)):
    """Compare ``min int S(r(.)) dmu`` and ``min int h_Q(r(.)) dmu`` over candidates.

    ``r`` traces out the second factor.  Each candidate must have barycenter
    ``omega``; only the supplied candidates are evaluated, so nothing is
    claimed about the true infimum.
    """
    omega = np.asarray(omega, dtype=np.complex128)
    rows = []
    for idx, mu in enumerate(candidate_measures):
        b = np.einsum("a,aij->ij", mu.weights, mu.atoms)
        err = float(np.abs(b - omega).max())
        if err > BARYCENTER_TOL:
            raise BarycenterMismatch(f"candidate {idx} has barycenter off by {err:.3e}")
        reduced = [partial_trace(a, dims, keep=0) for a in mu.atoms]
        s = math.fsum(w * von_neumann_entropy(r) for w, r in zip(mu.weights, reduced))
        h = math.fsum(w * transfer_entropy(channel, r).value
                      for w, r in zip(mu.weights, reduced))
        rows.append({"index": idx, "entropy_integral": s, "transfer_entropy_integral": h})
    e = min(r["entropy_integral"] for r in rows)
    eh = min(r["transfer_entropy_integral"] for r in rows)
    return EofReport(rows, e, eh, eh <= e + 1e-12)
