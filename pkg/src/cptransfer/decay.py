"""Decay of correlations for the normalized contractive transfer operator.

With ``L = k^{-1} T_c`` the leading eigenfunction is the constant 1 and the
eigenmeasure is the point mass at the zero matrix, so ``L^n phi -> phi(0)``.
For a reference measure ``m`` on the cone (here: ``t * rho`` with ``t`` uniform
and ``rho`` Hilbert-Schmidt random) the correlation

    C_n = | int psi (L^n phi) dm - phi(0) int psi dm |

decays exponentially.  ``L^n phi(A) = E_J phi(p_J U_J A U_J^*)`` over uniform
words ``J`` of length ``n``, which is what both the exact and the Monte Carlo
modes evaluate.

Also here: convergence of channel iterates to the fixed point, governed by the
second eigenvalue modulus ``|kappa|`` of the superoperator.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats

from . import _kernels
from .channels import (
    MixedUnitaryChannel, fixed_points, fixed_space_projector, spectrum, superoperator_matrix,
    unvec, vec,
)
from .errors import (
    ExactBudgetExceeded, InsufficientPoints, NonPositiveValues, NonUniqueFixedPoint, ProbabilityOnBoundary,
)
from .matkernel import random_cone_batch, random_density_batch, rng_from, trace_norm
from .projective import ConeSpec, d1_upper_bound
from .transfer import CONE_DIAM_FROBENIUS, EXACT_BUDGET

NOISE_FACTOR = 10.0
CHUNK = 1 << 18
KAPPA_ZERO = 1e-12


def rate_fit(ns, values):
    """Least squares of ``log v_n = log K + n log r``; returns ``rate, intercept, r_squared``."""
    ns = np.asarray(ns, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if ns.size < 3:
        raise InsufficientPoints(f"need at least 3 points, got {ns.size}")
    if np.any(v <= 0.0):
        raise NonPositiveValues("rate fit needs strictly positive values")
    res = stats.linregress(ns, np.log(v))
    r2 = float(res.rvalue ** 2) if np.ptp(np.log(v)) > 0 else 1.0
    return {"rate": float(math.exp(res.slope)), "intercept": float(res.intercept),
            "r_squared": r2}


def _word_unitaries(channel, n):
    """Products ``U_J`` (first letter applied first) and weights ``p_J`` for all words."""
    us = np.eye(channel.n, dtype=np.complex128)[None]
    ps = np.ones(1)
    for _ in range(n):
        us = np.einsum("kab,wbc->wkac", channel.unitaries, us).reshape(-1, channel.n, channel.n)
        ps = (ps[:, None] * channel.probs[None, :]).ravel()
    return us, ps


def _ln_exact(channel, phi, states, n):
    """``(L^n phi)(A)`` for every state by summing all ``k^n`` words."""
    if channel.k ** n > EXACT_BUDGET:
        raise ExactBudgetExceeded(f"k**n = {channel.k}**{n} exceeds the exact budget")
    us, ps = _word_unitaries(channel, n)
    out = np.empty(states.shape[0])
    step = max(1, CHUNK // us.shape[0])
    for lo in range(0, states.shape[0], step):
        part = states[lo:lo + step]
        imgs = _kernels.conjugate_batch(part, us, ps)
        out[lo:lo + step] = phi.func(imgs).reshape(part.shape[0], -1).mean(axis=1)
    return out


@dataclass
class DecayReport:
    n_values: np.ndarray
    C_n: np.ndarray
    stderr: np.ndarray
    signed: np.ndarray  # int psi (L^n phi - phi(0)) dm before the absolute value
    integrals: np.ndarray  # int psi L^n phi dm
    mode: str
    fitted_rate: float = None
    intercept: float = None
    r_squared: float = None
    fit_range: tuple = None
    signal_below_noise: int = None
    lambda1: float = None  # 1 - exp(-D1) with the analytic D1 bound
    cone_lambda1: float = None  # (max p)^nu
    pmax_nu: float = None
    kappa_mod: float = None
    K_fit: float = None
    K_prime: float = None
    limit_phi0: float = None
    limit_int_phi: float = None
    checks: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n_values": [int(n) for n in self.n_values],
            "C_n": [float(c) for c in self.C_n],
            "stderr": [float(s) for s in self.stderr],
            "signed": [float(s) for s in self.signed],
            "integrals": [float(s) for s in self.integrals],
            "mode": self.mode, "fitted_rate": self.fitted_rate, "intercept": self.intercept,
            "r_squared": self.r_squared,
            "fit_range": list(self.fit_range) if self.fit_range else None,
            "signal_below_noise": self.signal_below_noise,
            "lambda1": self.lambda1, "cone_lambda1": self.cone_lambda1,
            "pmax_nu": self.pmax_nu, "kappa_mod": self.kappa_mod, "K_fit": self.K_fit,
            "K_prime": self.K_prime, "limit_phi0": self.limit_phi0,
            "limit_int_phi": self.limit_int_phi, "checks": self.checks,
        }

    def bounds(self):
        """Per-n envelopes ``K_fit Lambda1^n`` and ``K' ((max p)^nu)^n``."""
        kf = self.K_fit if self.K_fit is not None else math.nan
        return (kf * self.lambda1 ** self.n_values, self.K_prime * self.pmax_nu ** self.n_values)

    def csv_rows(self):
        b1, b2 = self.bounds()
        rows = [("n", "C_n", "stderr", "bound_lambda1", "bound_pmax")]
        for i, n in enumerate(self.n_values):
            rows.append((int(n), repr(float(self.C_n[i])), repr(float(self.stderr[i])),
                         repr(float(b1[i])), repr(float(b2[i]))))
        return rows


def correlation_decay(channel, phi, psi, m_samples=4096, n_max=12, seed=0, mode="monte_carlo",
                      spec=ConeSpec(), sampler="importance"):
    """Correlations ``C_n`` for ``n = 1..n_max`` with a log-linear rate fit.

    The same reference samples ``rho_s ~ m`` are used for every ``n`` and
    both modes; Monte Carlo draws one word per sample from a stream derived
    from ``(seed, n)``.  ``sampler="uniform"`` draws uniform words;
    ``"importance"`` draws ``J`` with probability ``p_J`` and reweights by
    ``1/(k^n p_J)``, which keeps the summands bounded when ``phi`` is
    Hoelder at the zero matrix.  The fit stops at the first ``n`` where
    ``C_n <= 10 stderr``.
    """
    if not isinstance(channel, MixedUnitaryChannel):
        raise TypeError("correlation decay is implemented for mixed-unitary channels")
    p = channel.probs
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ProbabilityOnBoundary("every branch probability must lie in (0, 1)")
    if phi.holder is None:
        raise ValueError("phi needs a Hoelder certificate (H, nu)")
    if mode not in ("monte_carlo", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    if sampler not in ("importance", "uniform"):
        raise ValueError(f"unknown sampler {sampler!r}")
    h, nu = phi.holder
    k = channel.k
    root = np.random.SeedSequence(seed)
    state_seq, word_seq = root.spawn(2)
    rho = random_cone_batch(channel.n, m_samples, np.random.default_rng(state_seq))
    w = psi(rho)
    zero = np.zeros((channel.n, channel.n), dtype=np.complex128)
    phi0 = phi(zero)
    ns = np.arange(1, n_max + 1)
    cn, se, signed, integrals = [], [], [], []
    for n, sq in zip(ns, word_seq.spawn(n_max)):
        if mode == "exact":
            vals = _ln_exact(channel, phi, rho, int(n))
            x = w * (vals - phi0)
        elif sampler == "uniform":
            words = np.random.default_rng(sq).integers(0, k, size=(m_samples, n))
            vals = phi.func(_kernels.apply_words_multi(rho, channel.unitaries, p, words))
            x = w * (vals - phi0)
        else:
            # words drawn with probability p_J, reweighted by 1 / (k^n p_J)
            words = np.random.default_rng(sq).choice(k, size=(m_samples, n), p=p)
            pj = np.prod(p[words], axis=1)
            imgs = _kernels.apply_words_multi(rho, channel.unitaries, p, words)
            x = w * (phi.func(imgs) - phi0) / (float(k) ** n * pj)
        signed.append(float(x.mean()))
        integrals.append(signed[-1] + float(phi0 * np.mean(w)))
        cn.append(abs(signed[-1]))
        se.append(float(x.std(ddof=1) / math.sqrt(m_samples)))
    cn, se = np.array(cn), np.array(se)

    stop = next((i for i in range(len(ns)) if cn[i] <= NOISE_FACTOR * se[i]), None)
    upto = len(ns) if stop is None else stop
    lam1 = 1.0 - math.exp(-d1_upper_bound(float(p.max()) ** spec.nu, spec))
    pmax_nu = float(p.max()) ** nu
    k_prime = float(np.mean(np.abs(w))) * h * CONE_DIAM_FROBENIUS ** nu
    rep = DecayReport(ns, cn, se, np.array(signed), np.array(integrals), mode,
                      signal_below_noise=None if stop is None else int(ns[stop]),
                      lambda1=lam1, cone_lambda1=float(p.max()) ** spec.nu, pmax_nu=pmax_nu,
                      kappa_mod=float(spectrum(channel).kappa_mod), K_prime=k_prime,
                      limit_phi0=float(phi0 * np.mean(w)),
                      limit_int_phi=float(np.mean(phi(rho)) * np.mean(w)))
    if upto >= 3:
        fit = rate_fit(ns[:upto], cn[:upto])
        rep.fitted_rate, rep.intercept, rep.r_squared = fit["rate"], fit["intercept"], fit["r_squared"]
        rep.K_fit = math.exp(fit["intercept"])
        rep.fit_range = (int(ns[0]), int(ns[upto - 1]))
    b1, b2 = rep.bounds()
    rep.checks = {
        "rate_within_bounds": (bool(rep.fitted_rate <= min(lam1, pmax_nu) + 0.05)
                               if rep.fitted_rate is not None else None),
        "lambda1_envelope": bool(np.all(cn[:upto] <= b1[:upto] + 4 * se[:upto]))
        if rep.K_fit is not None else None,
        "pmax_envelope": bool(np.all(cn <= b2 + 4 * se)),
        "closer_limit": ("phi(0)" if abs(integrals[-1] - rep.limit_phi0)
                         <= abs(integrals[-1] - rep.limit_int_phi) else "int phi dm"),
    }
    return rep


def compare_modes(exact, mc, z=4.0):
    """Largest ``|C_exact - C_mc| / combined stderr`` and whether it is within ``z``."""
    comb = np.sqrt(exact.stderr ** 2 + mc.stderr ** 2)
    diff = np.abs(exact.signed - mc.signed)
    ok = diff <= z * comb + 1e-15
    ratio = np.where(comb > 0, diff / np.where(comb > 0, comb, 1.0), 0.0)
    return bool(np.all(ok)), float(ratio.max())


# ---------------------------------------------------------------------------
# convergence of channel iterates

@dataclass
class ConvergenceReport:
    n_values: np.ndarray
    distances: np.ndarray
    kappa_mod: float
    fixed_space_dim: int
    mode: str  # "unique" or "projector"
    fitted_rate: float = None
    slope_error: float = None
    C_fit: float = None
    matches: bool = None

    def to_dict(self):
        return {
            "n_values": [int(n) for n in self.n_values],
            "trace_distances": [float(d) for d in self.distances],
            "kappa_mod": self.kappa_mod, "fixed_space_dim": self.fixed_space_dim,
            "mode": self.mode, "fitted_rate": self.fitted_rate,
            "slope_error": self.slope_error, "C_fit": self.C_fit, "matches": self.matches,
        }


def cpt_convergence(channel, rho_samples=8, n_max=None, seed=0, strict=False, floor=1e-11,
                    n_min=2, tol=0.05):
    """``max_rho ||Phi^n(rho) - rho_inf||_tr`` and its log-linear slope.

    ``rho_inf`` is the unique fixed point, or the image of ``rho`` under the
    spectral projector onto the fixed space when that space has dimension
    above one (``strict=True`` raises :class:`NonUniqueFixedPoint` instead).
    The slope is fitted while distances stay above ``floor``, over the later
    half of that range (and ``n >= n_min``), and compared with ``log |kappa|``.
    """
    sp = spectrum(channel)
    kap = sp.kappa_mod
    if sp.fixed_space_dim > 1 and strict:
        raise NonUniqueFixedPoint(f"fixed space has dimension {sp.fixed_space_dim}")
    n = channel.n
    if isinstance(rho_samples, (int, np.integer)):
        rhos = random_density_batch(n, int(rho_samples), rng_from(seed))
    else:
        rhos = np.asarray(rho_samples, dtype=np.complex128)
    m = superoperator_matrix(channel)
    if sp.fixed_space_dim == 1:
        target = np.broadcast_to(vec(fixed_points(channel)[0]), (rhos.shape[0], n * n))
        mode = "unique"
    else:
        proj = fixed_space_projector(channel)
        target = np.array([proj @ vec(r) for r in rhos])
        mode = "projector"
    if n_max is None:
        n_max = 10 if kap <= KAPPA_ZERO else int(min(200, max(10, math.ceil(math.log(1e-10) / math.log(kap)))))
    cur = np.array([vec(r) for r in rhos])
    dist = []
    for _ in range(n_max):
        cur = cur @ m.T
        diff = np.array([unvec(c - t, n) for c, t in zip(cur, target)])
        dist.append(float(np.max(trace_norm(diff))))
    ns = np.arange(1, n_max + 1)
    dist = np.array(dist)
    rep = ConvergenceReport(ns, dist, float(kap), sp.fixed_space_dim, mode)
    if kap <= KAPPA_ZERO:
        # all non-fixed modes die in one step; only round-off remains
        rep.matches = bool(np.all(dist <= floor))
        return rep
    keep = (ns >= n_min) & (dist > floor)
    # stop at the first point under the floor so the fit never sees round-off
    below = np.nonzero(dist <= floor)[0]
    if below.size:
        keep &= ns < ns[below[0]]
    # the rate is asymptotic: fit the later half, where sub-leading modes have died out
    if keep.any():
        tail = keep & (ns >= math.ceil(ns[keep][-1] / 2))
        if tail.sum() >= 3:
            keep = tail
    if keep.sum() >= 3:
        fit = rate_fit(ns[keep], dist[keep])
        rep.fitted_rate = fit["rate"]
        rep.slope_error = abs(math.log(fit["rate"]) - math.log(kap))
        rep.C_fit = float(np.max(dist / kap ** ns))
        rep.matches = rep.slope_error <= tol
    return rep
