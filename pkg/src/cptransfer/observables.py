"""Real-valued test functions on density matrices and on the positive cone.

An :class:`Observable` wraps a vectorized evaluator mapping a stack of
matrices with shape ``(m, n, n)`` to an array of shape ``(m,)``.  It may
carry a Hoelder certificate ``(H, nu)`` meaning
``|f(A) - f(B)| <= H * ||A - B||_F ** nu`` on the cone
``{A >= 0, tr A <= 1}``.

The named library (used by the CLI) is built by :func:`from_spec`.
"""
from dataclasses import dataclass, field
import json
from typing import Callable, Optional

import numpy as np

from .channels import pairs_to_matrix
from .matkernel import frobenius_norm, random_cone_batch, rng_from


@dataclass(frozen=True)
class Observable:
    func: Callable[[np.ndarray], np.ndarray]
    holder: Optional[tuple] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.complex128)
        if x.ndim == 2:
            return float(np.asarray(self.func(x[None]))[0])
        return np.asarray(self.func(x), dtype=np.float64)

    def describe(self):
        out = {"name": self.name}
        out.update(self.params)
        if self.holder is not None:
            out["holder"] = [float(self.holder[0]), float(self.holder[1])]
        return out

    def with_holder(self, h, nu):
        return Observable(self.func, (float(h), float(nu)), self.name, self.params)


def constant(c=1.0):
    c = float(c)
    return Observable(lambda x: np.full(x.shape[0], c), (0.0, 1.0), "constant", {"c": c})


def linear(a):
    """``rho -> Re tr(A rho)``; Lipschitz constant ``||A||_F``."""
    a = np.asarray(a, dtype=np.complex128)
    return Observable(lambda x: np.einsum("ij,mji->m", a, x).real,
                      (float(np.linalg.norm(a)), 1.0), "linear", {"A": _short(a)})


def frobenius_dist(sigma):
    sigma = np.asarray(sigma, dtype=np.complex128)
    return Observable(lambda x: frobenius_norm(x - sigma), (1.0, 1.0),
                      "frobenius_dist", {"sigma": _short(sigma)})


def exp_neg_dist(sigma, scale=1.0):
    sigma = np.asarray(sigma, dtype=np.complex128)
    scale = float(scale)
    return Observable(lambda x: np.exp(-scale * frobenius_norm(x - sigma)), (scale, 1.0),
                      "exp_neg_dist", {"sigma": _short(sigma), "scale": scale})


def purity():
    """``tr(rho^2) = ||rho||_F^2``; 2-Lipschitz on the cone since ``||rho||_F <= 1``."""
    return Observable(lambda x: frobenius_norm(x) ** 2, (2.0, 1.0), "purity", {})


def entry(i, j, part="re"):
    if part not in ("re", "im"):
        raise ValueError("part must be 're' or 'im'")
    take = np.real if part == "re" else np.imag
    return Observable(lambda x: take(x[:, i, j]), (1.0, 1.0), "entry",
                      {"i": int(i), "j": int(j), "part": part})


def norm_power(nu):
    """``A -> ||A||_F ** nu``, a ``(1, nu)``-Hoelder function vanishing at 0."""
    nu = float(nu)
    return Observable(lambda x: frobenius_norm(x) ** nu, (1.0, nu), "norm_power", {"nu": nu})


def exp_trace(a, b=1.0):
    """``rho -> exp(b * Re tr(A rho))``, strictly positive."""
    a = np.asarray(a, dtype=np.complex128)
    b = float(b)
    return Observable(lambda x: np.exp(b * np.einsum("ij,mji->m", a, x).real), None,
                      "exp_trace", {"A": _short(a), "b": b})


def _short(m):
    m = np.asarray(m)
    return [[float(z.real), float(z.imag)] for z in m.ravel()]


def estimate_holder(phi, n, nu=1.0, pairs=10_000, seed=0, inflate=1.5):
    """Hoelder constant estimate: largest sampled difference quotient times ``inflate``.

    Half of the pairs are independent cone points and half are small
    perturbations, so both global and local quotients are probed.
    """
    rng = rng_from(seed)
    half = pairs // 2
    a = random_cone_batch(n, pairs, rng)
    b = random_cone_batch(n, pairs, rng)
    s = 10.0 ** rng.uniform(-6, 0, pairs - half)
    b[half:] = (1.0 - s)[:, None, None] * a[half:] + s[:, None, None] * b[half:]
    d = frobenius_norm(a - b)
    ok = d > 1e-14
    q = np.abs(phi(a[ok]) - phi(b[ok])) / d[ok] ** nu
    return float(inflate * q.max()), float(nu)


def holder_split(phi, offset):
    """Return ``(phi_plus, phi_minus)`` with ``phi = phi_plus - phi_minus``.

    ``phi_pm = (|phi| +- phi) / 2 + offset``; both parts keep the Hoelder
    exponent of ``phi`` and are bounded below by ``offset``.
    """
    offset = float(offset)

    def plus(x):
        v = phi.func(x)
        return 0.5 * (np.abs(v) + v) + offset

    def minus(x):
        v = phi.func(x)
        return 0.5 * (np.abs(v) - v) + offset

    return (Observable(plus, phi.holder, phi.name + "+", {"offset": offset}),
            Observable(minus, phi.holder, phi.name + "-", {"offset": offset}))


def named_state(spec, n):
    """Matrices referred to by name in observable and CLI specs."""
    if isinstance(spec, (list, tuple)):
        return pairs_to_matrix(spec, n)
    if spec in ("maximally_mixed", "mixed"):
        return np.eye(n, dtype=np.complex128) / n
    if spec == "zero":
        return np.zeros((n, n), dtype=np.complex128)
    if spec == "identity":
        return np.eye(n, dtype=np.complex128)
    if spec == "plus":
        psi = np.ones(n, dtype=np.complex128) / np.sqrt(n)
        return np.outer(psi, psi.conj())
    if isinstance(spec, str) and spec.startswith("basis:"):
        i = int(spec.split(":")[1])
        out = np.zeros((n, n), dtype=np.complex128)
        out[i, i] = 1.0
        return out
    if isinstance(spec, str) and spec.startswith("pauli:"):
        from .channels import PAULI
        return PAULI[spec.split(":")[1]].copy()
    raise ValueError(f"unknown matrix name {spec!r}")


LIBRARY = ("constant", "linear", "frobenius_dist", "exp_neg_dist", "purity", "entry",
           "norm_power", "exp_trace")


def from_spec(spec, n):
    """Build an observable from a name or a JSON object / string.

    ``"purity"``, ``{"name": "linear", "A": "pauli:Z"}``,
    ``{"name": "exp_neg_dist", "sigma": "maximally_mixed", "scale": 2}``.
    """
    if isinstance(spec, str):
        s = spec.strip()
        spec = json.loads(s) if s.startswith("{") else {"name": s}
    name = spec.get("name")
    if name == "constant":
        return constant(spec.get("c", 1.0))
    if name == "linear":
        return linear(named_state(spec.get("A", "pauli:Z"), n))
    if name == "frobenius_dist":
        return frobenius_dist(named_state(spec.get("sigma", "maximally_mixed"), n))
    if name == "exp_neg_dist":
        return exp_neg_dist(named_state(spec.get("sigma", "maximally_mixed"), n),
                            spec.get("scale", 1.0))
    if name == "purity":
        return purity()
    if name == "entry":
        return entry(int(spec.get("i", 0)), int(spec.get("j", 0)), spec.get("part", "re"))
    if name == "norm_power":
        return norm_power(spec.get("nu", 0.5))
    if name == "exp_trace":
        return exp_trace(named_state(spec.get("A", "pauli:Z"), n), spec.get("b", 1.0))
    raise ValueError(f"unknown observable {name!r}; known: {', '.join(LIBRARY)}")
