"""Quantum channels and their superoperator spectra.

Three channel types are provided:

``KrausChannel``
    ``rho -> sum_i V_i rho V_i^*``.
``MixedUnitaryChannel``
    ``rho -> sum_i p_i U_i rho U_i^*``; the branch maps of the associated
    iterated function system are ``F_i(A) = p_i U_i A U_i^*``.
``NonlinearChannel``
    ``rho -> sum_i tr(Q_i rho) U_i rho U_i^*`` with place-dependent
    probabilities given by a POVM ``{Q_i}``.

Superoperators use column-stacking vectorization, ``vec(A)[i + n*j] = A[i, j]``,
so that ``vec(A X B) = (B^T kron A) vec(X)`` and a unitary conjugation has
matrix ``conj(U) kron U``.
"""
from dataclasses import dataclass, field
import json
import re

import numpy as np

from . import _kernels
from .errors import (
    ChannelInvalid, DimensionMismatch, InvalidProbabilityVector, InvalidPovm,
    NoFixedDensityFound, NonlinearChannelUnsupported,
)
from .matkernel import as_matrix, dagger, random_haar_unitary, rng_from, trace_norm

FIXED_EIG_TOL = 1e-8
TP_TOL = 1e-9
PROB_TOL = 1e-12
UNITARY_TOL = 1e-10
POVM_TOL = 1e-10

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def vec(m):
    """Column-stacking vectorization."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, n):
    return np.asarray(v).reshape(n, n, order="F")


def _check_unitary(u):
    n = u.shape[0]
    err = np.linalg.norm(u.conj().T @ u - np.eye(n))
    if err > UNITARY_TOL:
        raise ChannelInvalid(f"branch matrix is not unitary (||U*U - I|| = {err:.2e})")


def _check_probabilities(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidProbabilityVector("probabilities must be a non-empty vector")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0):
        raise InvalidProbabilityVector(f"probabilities must be finite and nonnegative: {p}")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise InvalidProbabilityVector(f"probabilities sum to {p.sum():.15g}, not 1")
    return p


@dataclass(frozen=True)
class KrausChannel:
    kraus_ops: np.ndarray  # (r, n, n)

    def __post_init__(self):
        ops = np.asarray(self.kraus_ops, dtype=np.complex128)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise DimensionMismatch(f"Kraus operators must have shape (r, n, n), got {ops.shape}")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def n(self):
        return self.kraus_ops.shape[1]

    @property
    def trace_preserving(self):
        s = np.einsum("rji,rjk->ik", self.kraus_ops.conj(), self.kraus_ops)
        return bool(np.linalg.norm(s - np.eye(self.n)) <= TP_TOL)

    def __call__(self, rho):
        return apply(self, rho)


@dataclass(frozen=True)
class MixedUnitaryChannel:
    probs: np.ndarray  # (k,)
    unitaries: np.ndarray  # (k, n, n)

    def __post_init__(self):
        p = _check_probabilities(self.probs)
        u = np.asarray(self.unitaries, dtype=np.complex128)
        if u.ndim != 3 or u.shape[1] != u.shape[2] or u.shape[0] != p.size:
            raise DimensionMismatch(
                f"need {p.size} unitaries of shape (n, n), got array of shape {u.shape}")
        for ui in u:
            _check_unitary(ui)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "unitaries", u)

    @property
    def n(self):
        return self.unitaries.shape[1]

    @property
    def k(self):
        return self.probs.size

    @property
    def branches(self):
        return list(zip(self.probs, self.unitaries))

    @property
    def kraus_ops(self):
        return np.sqrt(self.probs)[:, None, None] * self.unitaries

    def __call__(self, rho):
        return apply(self, rho)


@dataclass(frozen=True)
class NonlinearChannel:
    povm: np.ndarray  # (k, n, n)
    unitaries: np.ndarray  # (k, n, n)

    def __post_init__(self):
        q = np.asarray(self.povm, dtype=np.complex128)
        u = np.asarray(self.unitaries, dtype=np.complex128)
        if q.ndim != 3 or q.shape != u.shape or q.shape[1] != q.shape[2]:
            raise DimensionMismatch(
                f"POVM and unitaries must both have shape (k, n, n); got {q.shape}, {u.shape}")
        check_povm(q)
        for ui in u:
            _check_unitary(ui)
        object.__setattr__(self, "povm", q)
        object.__setattr__(self, "unitaries", u)

    @property
    def n(self):
        return self.unitaries.shape[1]

    @property
    def k(self):
        return self.unitaries.shape[0]

    def probabilities(self, rho):
        """Branch probabilities ``tr(Q_i rho)``; ``rho`` may be a batch."""
        return np.einsum("kab,...ba->...k", self.povm, rho).real

    def __call__(self, rho):
        return apply(self, rho)


def check_povm(q, tol=POVM_TOL):
    q = np.asarray(q, dtype=np.complex128)
    n = q.shape[-1]
    for qi in q:
        if np.linalg.norm(qi - qi.conj().T) > tol:
            raise InvalidPovm("POVM element is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (qi + qi.conj().T))[0] < -tol:
            raise InvalidPovm("POVM element is not positive semidefinite")
    err = np.linalg.norm(q.sum(axis=0) - np.eye(n))
    if err > tol:
        raise InvalidPovm(f"POVM elements do not sum to the identity (error {err:.2e})")
    return q


def _check_dim(channel, rho):
    if rho.shape[-1] != channel.n or rho.shape[-2] != channel.n:
        raise DimensionMismatch(f"state of size {rho.shape[-1]} for a channel on C^{channel.n}")


def apply(channel, rho):
    """Apply ``channel`` to a matrix or a stack of matrices (last two axes)."""
    rho = np.asarray(rho, dtype=np.complex128)
    _check_dim(channel, rho)
    if isinstance(channel, MixedUnitaryChannel):
        u = channel.unitaries
        out = np.einsum("k,kij,...jl,kml->...im", channel.probs, u, rho, u.conj(), optimize=True)
        return out
    if isinstance(channel, KrausChannel):
        v = channel.kraus_ops
        return np.einsum("kij,...jl,kml->...im", v, rho, v.conj(), optimize=True)
    if isinstance(channel, NonlinearChannel):
        p = channel.probabilities(rho)
        u = channel.unitaries
        conj = np.einsum("kij,...jl,kml->...kim", u, rho, u.conj(), optimize=True)
        return np.einsum("...k,...kim->...im", p, conj)
    raise TypeError(f"unknown channel type {type(channel).__name__}")


def kraus_of(channel):
    if isinstance(channel, (MixedUnitaryChannel, KrausChannel)):
        return channel.kraus_ops
    raise NonlinearChannelUnsupported(
        f"{type(channel).__name__} has no linear superoperator")


def superoperator_matrix(channel):
    """Matrix ``M`` with ``vec(channel(rho)) = M @ vec(rho)`` (column stacking)."""
    ops = kraus_of(channel)
    return sum(np.kron(v.conj(), v) for v in ops)


@dataclass(frozen=True)
class SuperoperatorSpectrum:
    eigenvalues: np.ndarray
    fixed_space_dim: int
    kappa: complex
    peripheral: np.ndarray = field(repr=False)

    @property
    def kappa_mod(self):
        return abs(self.kappa)

    def to_dict(self):
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "fixed_space_dim": int(self.fixed_space_dim),
            "kappa": [float(self.kappa.real), float(self.kappa.imag)],
            "kappa_mod": float(abs(self.kappa)),
            "peripheral": [[float(z.real), float(z.imag)] for z in self.peripheral],
        }


def _sort_desc(ev):
    # descending modulus, ties broken by angle for a stable order
    order = np.lexsort((np.round(np.angle(ev), 12), -np.round(np.abs(ev), 12)))
    return ev[order]


def spectrum(channel, tol=FIXED_EIG_TOL):
    """Eigenvalues of the superoperator, sorted by descending modulus.

    ``fixed_space_dim`` counts eigenvalues within ``tol`` of 1.  ``kappa`` is the
    largest-modulus eigenvalue outside that cluster (0 if there is none), which
    is the rate controlling convergence of the iterates to the fixed space.
    """
    m = superoperator_matrix(channel)
    ev = _sort_desc(np.linalg.eigvals(m))
    at_one = np.abs(ev - 1.0) <= tol
    rest = ev[~at_one]
    kappa = complex(rest[0]) if rest.size else 0j
    peripheral = ev[np.abs(np.abs(ev) - 1.0) <= tol]
    return SuperoperatorSpectrum(ev, int(at_one.sum()), kappa, peripheral)


def _null_space(a, dim):
    # ``dim`` right singular vectors with the smallest singular values
    _, _, vh = np.linalg.svd(a)
    return vh[-dim:].conj().T if dim else np.zeros((a.shape[1], 0), dtype=a.dtype)


def fixed_space_projector(channel, tol=FIXED_EIG_TOL):
    """Spectral projector onto ``ker(Phi - I)`` as an ``n^2 x n^2`` matrix.

    Eigenvalue 1 of a channel is semisimple, so with right and left kernel bases
    ``R`` and ``L`` the projector is ``R (L^* R)^{-1} L^*``.  This equals the
    Cesaro limit of the superoperator powers.
    """
    m = superoperator_matrix(channel)
    d = spectrum(channel, tol).fixed_space_dim
    if d == 0:
        raise NoFixedDensityFound("superoperator has no eigenvalue at 1")
    eye = np.eye(m.shape[0])
    r = _null_space(m - eye, d)
    l = _null_space((m - eye).conj().T, d)
    return r @ np.linalg.solve(l.conj().T @ r, l.conj().T)


def _spanning_densities(n):
    out = [np.diag(np.eye(n)[i]).astype(np.complex128) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for phase in (1.0, 1j):
                psi = np.zeros(n, dtype=np.complex128)
                psi[i] = 1.0
                psi[j] = phase
                psi /= np.sqrt(2.0)
                out.append(np.outer(psi, psi.conj()))
    return out


def fixed_points(channel, tol=FIXED_EIG_TOL):
    """Density matrices spanning the fixed space of a linear channel.

    The Cesaro projector is applied to a spanning set of density matrices; the
    images are fixed density matrices, and a linearly independent subset of
    size ``dim ker(Phi - I)`` is returned.
    """
    n = channel.n
    proj = fixed_space_projector(channel, tol)
    d = int(round(np.real(np.trace(proj))))
    basis, vecs = [], []
    for rho in _spanning_densities(n):
        sigma = unvec(proj @ vec(rho), n)
        sigma = 0.5 * (sigma + sigma.conj().T)
        tr = np.trace(sigma).real
        if tr <= 1e-12:
            continue
        sigma = sigma / tr
        cand = np.array(vecs + [vec(sigma)])
        if np.linalg.matrix_rank(cand, tol=1e-8) > len(vecs):
            vecs.append(vec(sigma))
            basis.append(sigma)
        if len(basis) == d:
            break
    if not basis:
        raise NoFixedDensityFound("no fixed density matrix found")
    for sigma in basis:
        if trace_norm(apply(channel, sigma) - sigma) > 1e-8:
            raise NoFixedDensityFound("fixed-space extraction failed the residual check")
    return basis


def cesaro_average(channel, rho, n):
    """``(1/n) sum_{t<n} Phi^t(rho)``."""
    acc = np.zeros_like(np.asarray(rho, dtype=np.complex128))
    cur = np.asarray(rho, dtype=np.complex128)
    for _ in range(n):
        acc += cur
        cur = apply(channel, cur)
    return acc / n


# ---------------------------------------------------------------------------
# constructors

def identity_channel(n=2):
    return MixedUnitaryChannel(np.array([1.0]), np.eye(n, dtype=np.complex128)[None])


def phase_flip(p):
    return pauli([1.0 - p, 0.0, 0.0, p])


def bit_flip(p):
    return pauli([1.0 - p, p, 0.0, 0.0])


def pauli(weights):
    """Qubit Pauli channel with weights on ``I, X, Y, Z``; zero weights are dropped."""
    w = _check_probabilities(weights)
    if w.size != 4:
        raise InvalidProbabilityVector("Pauli channel needs four weights")
    keep = w > 0.0
    mats = np.array([PAULI[c] for c in "IXYZ"])
    return MixedUnitaryChannel(w[keep], mats[keep])


def random_mixed_unitary(k, n=2, seed=None, probs=None):
    """``k`` Haar unitaries with Dirichlet(1, ..., 1) weights unless ``probs`` is given."""
    rng = rng_from(seed)
    p = rng.dirichlet(np.ones(k)) if probs is None else np.asarray(probs, dtype=float)
    p = p / p.sum()
    u = np.array([random_haar_unitary(n, rng) for _ in range(k)])
    return MixedUnitaryChannel(p, u)


def random_povm(k, n=2, seed=None):
    rng = rng_from(seed)
    g = rng.standard_normal((k, n, n)) + 1j * rng.standard_normal((k, n, n))
    pos = g @ dagger(g)
    s = pos.sum(axis=0)
    w, v = np.linalg.eigh(s)
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    q = s_inv_half @ pos @ s_inv_half
    q = 0.5 * (q + dagger(q))
    # remove the residual drift so the sum is the identity to machine precision
    q[-1] += np.eye(n) - q.sum(axis=0)
    return q


def random_nonlinear(k, n=2, seed=None):
    rng = rng_from(seed)
    q = random_povm(k, n, rng)
    u = np.array([random_haar_unitary(n, rng) for _ in range(k)])
    return NonlinearChannel(q, u)


def mix_channels(channels, weights):
    """Convex combination of mixed-unitary channels, merged branch lists."""
    w = _check_probabilities(weights)
    probs = np.concatenate([wi * c.probs for wi, c in zip(w, channels)])
    units = np.concatenate([c.unitaries for c in channels])
    keep = probs > 0.0
    probs = probs[keep] / probs[keep].sum()
    return MixedUnitaryChannel(probs, units[keep])


def depolarize_mix(channel, weight):
    """``weight * channel + (1 - weight) * uniform Pauli`` on a qubit."""
    if channel.n != 2:
        raise DimensionMismatch("depolarizing mix is defined for qubit channels")
    if weight >= 1.0:
        return channel
    return mix_channels([channel, pauli([0.25] * 4)], [weight, 1.0 - weight])


_NAMED = re.compile(r"^([a-z_]+)(?::(.*))?$")


def named_channel(spec):
    """Build a channel from a short text spec.

    Recognized forms: ``identity[:n]``, ``phase_flip:p``, ``bit_flip:p``,
    ``pauli:p0,p1,p2,p3``, ``random_mixed_unitary:k[:seedS][:nN]``,
    ``random_nonlinear:k[:seedS][:nN]``.
    """
    m = _NAMED.match(spec.strip())
    if not m:
        raise ChannelInvalid(f"cannot parse channel spec {spec!r}")
    name, rest = m.group(1), m.group(2) or ""
    args = [a for a in rest.split(":") if a] if rest else []
    try:
        if name == "identity":
            return identity_channel(int(args[0]) if args else 2)
        if name == "phase_flip":
            return phase_flip(float(args[0]))
        if name == "bit_flip":
            return bit_flip(float(args[0]))
        if name == "pauli":
            return pauli([float(x) for x in args[0].split(",")])
        if name in ("random_mixed_unitary", "random_nonlinear"):
            k = int(args[0])
            seed, n = 0, 2
            for a in args[1:]:
                if a.startswith("seed"):
                    seed = int(a[4:])
                elif a.startswith("n"):
                    n = int(a[1:])
                else:
                    raise ChannelInvalid(f"unknown option {a!r} in {spec!r}")
            if name == "random_mixed_unitary":
                return random_mixed_unitary(k, n, seed)
            return random_nonlinear(k, n, seed)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, (ChannelInvalid, InvalidProbabilityVector)):
            raise
        raise ChannelInvalid(f"bad arguments in channel spec {spec!r}: {exc}") from exc
    raise ChannelInvalid(f"unknown channel name {name!r}")


# ---------------------------------------------------------------------------
# JSON serialization: {n, kind, branches: [{p | Q | V, U}]} with matrices as
# row-major lists of [re, im] pairs.

def matrix_to_pairs(m):
    m = np.asarray(m, dtype=np.complex128)
    return [[float(z.real), float(z.imag)] for z in m.ravel(order="C")]


def pairs_to_matrix(pairs, n):
    a = np.asarray(pairs, dtype=np.float64)
    if a.ndim == 3:  # nested rows of pairs
        a = a.reshape(-1, 2)
    if a.shape != (n * n, 2):
        raise ChannelInvalid(f"matrix entry list has shape {a.shape}, expected ({n * n}, 2)")
    return (a[:, 0] + 1j * a[:, 1]).reshape(n, n)


def channel_to_dict(channel):
    if isinstance(channel, MixedUnitaryChannel):
        branches = [{"p": float(p), "U": matrix_to_pairs(u)} for p, u in channel.branches]
        kind = "mixed_unitary"
    elif isinstance(channel, NonlinearChannel):
        branches = [{"Q": matrix_to_pairs(q), "U": matrix_to_pairs(u)}
                    for q, u in zip(channel.povm, channel.unitaries)]
        kind = "nonlinear"
    elif isinstance(channel, KrausChannel):
        branches = [{"V": matrix_to_pairs(v)} for v in channel.kraus_ops]
        kind = "kraus"
    else:
        raise TypeError(f"cannot serialize {type(channel).__name__}")
    return {"n": int(channel.n), "kind": kind, "branches": branches}


def channel_from_dict(doc):
    try:
        n = int(doc["n"])
        kind = doc["kind"]
        branches = doc["branches"]
        if kind == "mixed_unitary":
            p = np.array([b["p"] for b in branches], dtype=float)
            u = np.array([pairs_to_matrix(b["U"], n) for b in branches])
            return MixedUnitaryChannel(p, u)
        if kind == "nonlinear":
            q = np.array([pairs_to_matrix(b["Q"], n) for b in branches])
            u = np.array([pairs_to_matrix(b["U"], n) for b in branches])
            return NonlinearChannel(q, u)
        if kind == "kraus":
            return KrausChannel(np.array([pairs_to_matrix(b["V"], n) for b in branches]))
    except (KeyError, TypeError) as exc:
        raise ChannelInvalid(f"malformed channel document: {exc!r}") from exc
    except (InvalidProbabilityVector, InvalidPovm, DimensionMismatch) as exc:
        raise ChannelInvalid(str(exc)) from exc
    raise ChannelInvalid(f"unknown channel kind {kind!r}")


def dumps_channel(channel):
    return json.dumps(channel_to_dict(channel), indent=2, sort_keys=True)


def loads_channel(text):
    return channel_from_dict(json.loads(text))


def load_channel(path):
    with open(path) as fh:
        return loads_channel(fh.read())


def save_channel(channel, path):
    with open(path, "w") as fh:
        fh.write(dumps_channel(channel) + "\n")
