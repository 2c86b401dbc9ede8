"""Transfer operators induced by mixed-unitary and nonlinear channels.

For a mixed-unitary channel with branches ``(p_i, U_i)``:

* barycentric   ``(T_b f)(rho) = sum_i p_i f(U_i rho U_i^*)``
* contractive   ``(T_c f)(A)   = sum_i f(p_i U_i A U_i^*)``

and for a nonlinear channel with POVM ``{Q_i}``:

* ``(T' f)(rho) = sum_i tr(Q_i rho) f(U_i rho U_i^*)``.

Iterates expand over words ``J = (j_1, ..., j_n)``.  Exact mode sums all
``k**n`` words (at most ``EXACT_BUDGET``); Monte Carlo mode samples paths and
returns an unbiased estimate with its standard error.
"""
from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from . import _kernels
from .channels import MixedUnitaryChannel, NonlinearChannel
from .errors import ExactBudgetExceeded, ProbabilityOnBoundary
from .matkernel import frobenius_norm, random_cone_batch, rng_from
from .observables import Observable, constant

EXACT_BUDGET = 10 ** 6
CHUNK_STATES = 1 << 16
CONE_DIAM_FROBENIUS = math.sqrt(2.0)
OPERATORS = ("Tb", "Tc", "Tprime")


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0
    exact: bool = True
    samples: int = 0

    def __float__(self):
        return self.value

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "exact": self.exact,
                "samples": self.samples}


def _require(channel, op):
    if op in ("Tb", "Tc") and not isinstance(channel, MixedUnitaryChannel):
        raise TypeError(f"{op} needs a MixedUnitaryChannel, got {type(channel).__name__}")
    if op == "Tprime" and not isinstance(channel, NonlinearChannel):
        raise TypeError(f"Tprime needs a NonlinearChannel, got {type(channel).__name__}")
    if op not in OPERATORS:
        raise ValueError(f"unknown operator {op!r}; expected one of {OPERATORS}")


def _expand(op, channel, states, weights):
    """One level of the word tree: every state spawns ``k`` children."""
    k = channel.k
    if op == "Tc":
        kids = _kernels.conjugate_batch(states, channel.unitaries, channel.probs)
        return kids, np.repeat(weights, k)
    kids = _kernels.conjugate_batch(states, channel.unitaries, np.ones(k))
    if op == "Tb":
        return kids, (weights[:, None] * channel.probs[None, :]).ravel()
    return kids, (weights[:, None] * channel.probabilities(states)).ravel()


def iter_word_images(op, channel, rho, n, chunk=CHUNK_STATES):
    """Yield ``(states, weights)`` batches covering all ``k**n`` words.

    ``sum(weights * f(states))`` over the batches is ``(op**n f)(rho)``.  Batches
    come out in lexicographic word order, first letter applied first.
    """
    _require(channel, op)
    rho = np.asarray(rho, dtype=np.complex128)

    k = channel.k

    def rec(states, weights, depth):
        if depth == 0 or states.shape[0] * k ** depth <= chunk:
            for _ in range(depth):
                states, weights = _expand(op, channel, states, weights)
            yield states, weights
        elif states.shape[0] > 1:
            step = max(1, chunk // k ** depth)
            for lo in range(0, states.shape[0], step):
                yield from rec(states[lo:lo + step], weights[lo:lo + step], depth)
        else:
            states, weights = _expand(op, channel, states, weights)
            yield from rec(states, weights, depth - 1)

    yield from rec(rho[None], np.ones(1), n)


def word_images(op, channel, rho, n):
    """All word images at once; see :func:`iter_word_images`."""
    _check_budget(channel.k, n)
    parts = list(iter_word_images(op, channel, rho, n, chunk=EXACT_BUDGET))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _check_budget(k, n, budget=EXACT_BUDGET):
    if k ** n > budget:
        raise ExactBudgetExceeded(f"k**n = {k}**{n} exceeds the exact budget {budget}")


def apply_Tb(channel, phi):
    _require(channel, "Tb")
    p, u = channel.probs, channel.unitaries

    def f(x):
        kids = _kernels.conjugate_batch(x, u, np.ones(channel.k))
        return (phi.func(kids).reshape(x.shape[0], channel.k) * p).sum(axis=1)

    return Observable(f, phi.holder, f"Tb({phi.name})")


def apply_Tc(channel, phi):
    _require(channel, "Tc")
    p, u = channel.probs, channel.unitaries

    def f(x):
        kids = _kernels.conjugate_batch(x, u, p)
        return phi.func(kids).reshape(x.shape[0], channel.k).sum(axis=1)

    holder = None
    if phi.holder is not None:
        h, nu = phi.holder
        holder = (h * float(np.sum(p ** nu)), nu)
    return Observable(f, holder, f"Tc({phi.name})")


def apply_Tprime(channel, phi):
    _require(channel, "Tprime")
    u = channel.unitaries

    def f(x):
        kids = _kernels.conjugate_batch(x, u, np.ones(channel.k))
        vals = phi.func(kids).reshape(x.shape[0], channel.k)
        return (vals * channel.probabilities(x)).sum(axis=1)

    return Observable(f, None, f"T'({phi.name})")


APPLY = {"Tb": apply_Tb, "Tc": apply_Tc, "Tprime": apply_Tprime}


def iterate(op, channel, phi, rho, n, mode="exact", samples=10_000, seed=0):
    """``(op**n phi)(rho)`` for ``op`` in ``{"Tb", "Tc", "Tprime"}``.

    ``mode="exact"`` sums every word and raises :class:`ExactBudgetExceeded`
    if ``k**n`` is above budget.  ``mode="monte_carlo"`` samples ``samples``
    paths: uniform words weighted by ``k**n`` for ``Tc``, ``p``-distributed
    words for ``Tb`` and place-dependent paths for ``Tprime``.
    """
    _require(channel, op)
    rho = np.asarray(rho, dtype=np.complex128)
    if n == 0:
        return Estimate(phi(rho))
    if mode == "exact":
        _check_budget(channel.k, n)
        total = 0.0
        for states, weights in iter_word_images(op, channel, rho, n):
            total += float(np.dot(weights, phi.func(states)))
        return Estimate(total)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    rng = rng_from(seed)
    vals = _mc_values(op, channel, phi, rho, n, samples, rng)
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)),
                    exact=False, samples=samples)


def _mc_values(op, channel, phi, rho, n, samples, rng):
    k = channel.k
    if op == "Tc":
        words = rng.integers(0, k, size=(samples, n))
        states = _kernels.apply_words(rho, channel.unitaries, channel.probs, words)
        return float(k) ** n * phi.func(states)
    if op == "Tb":
        words = rng.choice(k, size=(samples, n), p=channel.probs)
        states = _kernels.apply_words(rho, channel.unitaries, np.ones(k), words)
        return phi.func(states)
    uniforms = rng.random((samples, n))
    states = _kernels.walk_place_dependent(rho, channel.unitaries, channel.povm, uniforms)
    return phi.func(states)


def normalized_Tc_limit(channel, phi, rho, n, mode="exact", samples=10_000, seed=0):
    """``k**(-n) (T_c**n phi)(rho)``, which tends to ``phi(0)``."""
    est = iterate("Tc", channel, phi, rho, n, mode, samples, seed)
    scale = float(channel.k) ** (-n)
    return Estimate(est.value * scale, est.stderr * scale, est.exact, est.samples)


def holder_envelope(channel, holder, n, diam=CONE_DIAM_FROBENIUS):
    """Bound ``H * (max p)**(n nu) * diam**nu`` on ``|k^-n T_c^n phi - phi(0)|``."""
    h, nu = holder
    return h * float(channel.probs.max()) ** (n * nu) * diam ** nu


@dataclass(frozen=True)
class RuelleData:
    lambda_: float
    h: Observable
    mu_atom: np.ndarray
    eigenfunction_residual: float
    eigenmeasure_mass: float
    normalization: float

    def to_dict(self):
        return {
            "lambda": self.lambda_,
            "h": self.h.describe(),
            "mu_atom": [[float(z.real), float(z.imag)] for z in self.mu_atom.ravel()],
            "eigenfunction_residual": self.eigenfunction_residual,
            "eigenmeasure_mass": self.eigenmeasure_mass,
            "normalization": self.normalization,
        }


def _check_interior(channel):
    p = channel.probs
    if channel.k < 1 or np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ProbabilityOnBoundary(f"branch probabilities must lie in (0, 1), got {p}")


def ruelle_data(channel, samples=100, seed=0):
    """Leading eigendata of ``T_c``: ``lambda = k``, ``h = 1``, ``mu = delta_0``.

    The branch maps ``A -> p_i U_i A U_i^*`` are strict contractions of the cone
    toward the zero matrix, so the invariant compact set is ``{0}``.  Both
    eigen-equations are checked numerically and the residuals are reported.
    """
    _check_interior(channel)
    k = channel.k
    h = constant(1.0)
    pts = random_cone_batch(channel.n, samples, seed)
    resid = float(np.max(np.abs(apply_Tc(channel, h)(pts) / k - h(pts))))
    zero = np.zeros((1, channel.n, channel.n), dtype=np.complex128)
    images = _kernels.conjugate_batch(zero, channel.unitaries, channel.probs)
    # P_e delta_0 = sum_i delta_{F_i(0)}: every image must be the zero matrix
    if np.max(np.abs(images)) > 0.0:
        raise AssertionError("branch maps do not fix the zero matrix")
    return RuelleData(float(k), h, zero[0], resid, float(images.shape[0]), float(h(zero[0])))


@dataclass
class JiangReport:
    m: int
    lhs: float
    rhs: float
    holds: bool
    gamma: dict = field(repr=False)
    mode: str = "analytic"
    max_deviation: float = 0.0

    def to_dict(self):
        return {
            "m": self.m, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, "mode": self.mode,
            "max_deviation_from_analytic": self.max_deviation,
            "gamma": {",".join(str(j + 1) for j in w): g for w, g in sorted(self.gamma.items())},
        }


def jiang_condition(channel, m, mode="analytic", pairs=256, seed=0, budget=EXACT_BUDGET):
    """Check ``sup_rho sum_{|J|=m} gamma_J(rho) < r(T_c)**m = k**m``.

    ``gamma_J`` is the Frobenius Lipschitz constant of ``F_J``.  Unitary
    conjugation is a Frobenius isometry, so analytically ``gamma_J = p_J``
    and the left side is ``(sum p_i)**m = 1``.  Sampled mode takes the largest
    difference quotient over random cone-point pairs instead.  Words are
    0-based tuples; the dict form in reports is 1-based.
    """
    _require(channel, "Tc")
    k = channel.k
    _check_budget(k, m, budget)
    words = list(itertools.product(range(k), repeat=m))
    analytic = {w: float(np.prod(channel.probs[list(w)])) for w in words}
    if mode == "analytic":
        gamma = analytic
    elif mode == "sampled":
        rng = rng_from(seed)
        a = random_cone_batch(channel.n, pairs, rng)
        b = random_cone_batch(channel.n, pairs, rng)
        d = frobenius_norm(a - b)
        gamma = {}
        for w in words:
            fa, fb = a, b
            for j in w:
                u, p = channel.unitaries[j:j + 1], channel.probs[j:j + 1]
                fa = _kernels.conjugate_batch(fa, u, p)
                fb = _kernels.conjugate_batch(fb, u, p)
            gamma[w] = float(np.max(frobenius_norm(fa - fb) / d))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    lhs = float(math.fsum(gamma.values()))
    rhs = float(k) ** m
    dev = max(abs(gamma[w] - analytic[w]) for w in words)
    return JiangReport(m, lhs, rhs, lhs < rhs, gamma, mode, float(dev))
