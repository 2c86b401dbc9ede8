"""Hilbert projective metric on the PSD cone and on cones of positive functions.

For a closed convex cone ``C`` and ``v1, v2`` in it,

    alpha(v1, v2) = sup{t > 0 : v2 - t v1 in C}
    beta(v1, v2)  = inf{s > 0 : s v1 - v2 in C}
    theta(v1, v2) = log(beta / alpha).

On positive definite matrices ``alpha`` and ``beta`` are the extreme
generalized eigenvalues of the pencil ``(B, A)``.  On function cones we only
ever see finitely many sample points, so every function-cone value here is an
estimate computed on samples.  It is a lower bound for the true ``theta``
because ``alpha`` is an infimum and ``beta`` a supremum over the samples.

The Hoelder cone is ``C(a, nu) = {psi > 0 : psi(x) <= exp(a d(x, y)^nu) psi(y)
whenever d(x, y) <= delta0}`` on the set ``{A >= 0, tr A <= 1}``.
"""
from dataclasses import asdict, dataclass
import math

import numpy as np
import scipy.linalg
import scipy.optimize

from . import _kernels
from .channels import MixedUnitaryChannel, apply
from .errors import NonPositiveFunctionValue, NotPositiveDefinite, ProbabilityOnBoundary
from .matkernel import (
    as_matrix, frobenius_norm, random_cone_batch, random_density_batch, random_pure_batch,
    rng_from, trace_norm,
)
from .observables import Observable, frobenius_dist, linear

PD_TOL = 1e-10
MEMBERSHIP_SLACK = 1e-12
CONE_DIAMETER = math.sqrt(2.0)  # Frobenius diameter of {A >= 0, tr A <= 1}


@dataclass(frozen=True)
class ConeSpec:
    a: float = 5.0
    nu: float = 1.0
    delta0: float = 0.5
    metric: str = "frobenius"

    def __post_init__(self):
        if not (self.a > 0 and 0 < self.nu <= 1 and self.delta0 > 0):
            raise ValueError(f"invalid cone parameters a={self.a}, nu={self.nu}, "
                             f"delta0={self.delta0}")
        if self.metric not in ("frobenius", "trace"):
            raise ValueError(f"unknown metric {self.metric!r}")

    @classmethod
    def parse(cls, text):
        """``"a,nu,delta0"`` as used on the command line."""
        a, nu, d0 = (float(x) for x in text.split(","))
        return cls(a, nu, d0)

    def distance(self, x, y):
        return frobenius_norm(x - y) if self.metric == "frobenius" else trace_norm(x - y)

    def to_dict(self):
        return asdict(self)


@dataclass
class MetricReport:
    theta: float
    alpha: float
    beta: float
    samples_used: int = 0

    def to_dict(self):
        return asdict(self)


def _theta(alpha, beta):
    if alpha <= 0.0 or not math.isfinite(beta):
        return math.inf
    return max(0.0, math.log(beta / alpha))


def hilbert_metric_psd(a, b):
    """Hilbert metric between two positive definite matrices."""
    a = as_matrix(a)
    b = as_matrix(b)
    for name, m in (("A", a), ("B", b)):
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < PD_TOL:
            raise NotPositiveDefinite(f"{name} has min eigenvalue {lo:.3e} < {PD_TOL}")
    ha = 0.5 * (a + a.conj().T)
    hb = 0.5 * (b + b.conj().T)
    w = scipy.linalg.eigh(hb, ha, eigvals_only=True)
    alpha, beta = float(w[0]), float(w[-1])
    return MetricReport(_theta(alpha, beta), alpha, beta, 1)


def is_positive_definite(m, tol=PD_TOL):
    m = np.asarray(m, dtype=np.complex128)
    return bool(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] >= tol)


def theta_plus(phi1, phi2, points):
    """Sampled Hilbert metric in the cone of positive functions.

    ``log sup (phi2(x) phi1(y)) / (phi1(x) phi2(y))`` over pairs of sample points.
    """
    pts = np.asarray(points, dtype=np.complex128)
    f1 = phi1(pts)
    f2 = phi2(pts)
    if np.any(f1 <= 0.0) or np.any(f2 <= 0.0):
        raise NonPositiveFunctionValue("theta_plus needs strictly positive functions")
    r = f2 / f1
    alpha, beta = float(r.min()), float(r.max())
    return MetricReport(_theta(alpha, beta), alpha, beta, int(pts.shape[0]))


def orthant_metric(x, y):
    """Hilbert metric on the open positive orthant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(x <= 0) or np.any(y <= 0):
        raise NonPositiveFunctionValue("orthant metric needs strictly positive vectors")
    r = y / x
    return MetricReport(_theta(r.min(), r.max()), float(r.min()), float(r.max()), x.size)


def matrix_projective_diameter(t):
    """Diameter of ``T(R^n_+)`` in the orthant metric (max over column pairs)."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        return math.inf
    cols = t.T
    return max(orthant_metric(c1, c2).theta for c1 in cols for c2 in cols)


def birkhoff_coefficient_2x2(t):
    """Closed form of the projective diameter of a positive 2x2 matrix."""
    t = np.asarray(t, dtype=np.float64)
    return abs(math.log(t[0, 0] * t[1, 1] / (t[0, 1] * t[1, 0])))


def birkhoff_lemma_check(t_map, pairs, metric_in, metric_out, diameter, slack=1e-9):
    """Check ``theta_out(T v1, T v2) <= (1 - exp(-D)) theta_in(v1, v2)`` on pairs.

    Returns ``(holds, worst_margin)`` where the margin is right side minus
    left side.  With ``D = inf`` the factor is 1.
    """
    factor = 1.0 if not math.isfinite(diameter) else 1.0 - math.exp(-diameter)
    worst = math.inf
    for v1, v2 in pairs:
        lhs = metric_out(t_map(v1), t_map(v2)).theta
        rhs = factor * metric_in(v1, v2).theta
        if math.isinf(rhs) and math.isinf(lhs):
            continue
        worst = min(worst, rhs - lhs)
    return worst >= -slack, float(worst)


# ---------------------------------------------------------------------------
# Hoelder cones of functions

def sample_pairs(n, spec, pairs, seed=0, local_fraction=0.5):
    """Pairs of cone points at distance ``<= delta0``.

    A fraction of the pairs are independent draws kept only when close
    (rejection sampling); the rest are small perturbations ``x -> (1-s) x + s y``
    with ``s`` log-uniform, which probes short scales.
    """
    rng = rng_from(seed)
    n_local = int(round(pairs * local_fraction))
    n_far = pairs - n_local
    xs, ys = [], []
    got = 0
    while got < n_far:
        a = random_cone_batch(n, 4 * (n_far - got) + 16, rng)
        b = random_cone_batch(n, a.shape[0], rng)
        ok = spec.distance(a, b) <= spec.delta0
        a, b = a[ok][:n_far - got], b[ok][:n_far - got]
        xs.append(a)
        ys.append(b)
        got += a.shape[0]
    a = random_cone_batch(n, n_local, rng)
    b = random_cone_batch(n, n_local, rng)
    d = np.maximum(spec.distance(a, b), 1e-300)
    s = np.minimum(10.0 ** rng.uniform(-6.0, 0.0, n_local), 0.999 * spec.delta0 / d)
    b = (1.0 - s)[:, None, None] * a + s[:, None, None] * b
    xs.append(a)
    ys.append(b)
    return np.concatenate(xs), np.concatenate(ys)


def cone_membership(psi, spec, pairs=2000, seed=0, n=2, points=None):
    """Statistical test of ``psi in C(a, nu)`` on sampled close pairs.

    Returns ``{"member", "worst_margin", "pairs"}``.  The margin is
    ``a d^nu - |log psi(x) - log psi(y)|``; a non-positive value of ``psi``
    gives margin ``-inf``.
    """
    x, y = sample_pairs(n, spec, pairs, seed) if points is None else points
    fx = psi(x)
    fy = psi(y)
    if np.any(fx <= 0.0) or np.any(fy <= 0.0):
        return {"member": False, "worst_margin": -math.inf, "pairs": int(x.shape[0])}
    d = spec.distance(x, y)
    margin = spec.a * d ** spec.nu - np.abs(np.log(fx) - np.log(fy))
    worst = float(margin.min())
    return {"member": worst >= -MEMBERSHIP_SLACK, "worst_margin": worst,
            "pairs": int(x.shape[0])}


def cone_metric(phi1, phi2, spec, points, pairs):
    """Sampled Hilbert metric of the cone ``C(a, nu)``.

    For ``phi1, phi2`` in a strictly smaller cone ``C(lambda a, nu)``,
    ``phi2 - t phi1 in C(a, nu)`` iff ``t <= phi2/phi1`` everywhere and
    ``t <= (e^{a d^nu} phi2(y) - phi2(x)) / (e^{a d^nu} phi1(y) - phi1(x))``
    for all close pairs; ``beta`` is the mirror image.  Both are evaluated on
    the given samples.
    """
    f1 = phi1(points)
    f2 = phi2(points)
    if np.any(f1 <= 0.0) or np.any(f2 <= 0.0):
        raise NonPositiveFunctionValue("cone metric needs strictly positive functions")
    r = f2 / f1
    alpha, beta = float(r.min()), float(r.max())
    x, y = pairs
    if x.shape[0]:
        e = np.exp(spec.a * spec.distance(x, y) ** spec.nu)
        g1x, g1y, g2x, g2y = phi1(x), phi1(y), phi2(x), phi2(y)
        den = e * g1y - g1x
        ok = den > 0.0
        q = (e[ok] * g2y[ok] - g2x[ok]) / den[ok]
        if q.size:
            alpha = min(alpha, float(q.min()))
            beta = max(beta, float(q.max()))
    return MetricReport(_theta(alpha, beta), alpha, beta, int(points.shape[0] + x.shape[0]))


def lambda1(channel, spec):
    """Cone contraction factor ``(max_i p_i)^nu`` of the contractive transfer operator."""
    p = np.asarray(channel.probs)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ProbabilityOnBoundary("cone contraction needs every p_i in (0, 1)")
    return float(p.max() ** spec.nu)


def random_cone_function(n, spec, seed=0, terms=None):
    """A random member of ``C(a, nu)`` with ``delta0 <= 1``.

    Sums of ``exp(c g)`` with ``g`` 1-Lipschitz in the Frobenius distance and
    ``|c| <= a``; since ``d <= 1`` on close pairs, ``a d <= a d^nu``.
    """
    rng = rng_from(seed)
    terms = int(rng.integers(1, 4)) if terms is None else terms
    parts = []
    for _ in range(terms):
        c = rng.uniform(-spec.a, spec.a)
        if rng.random() < 0.5:
            h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            h = 0.5 * (h + h.conj().T)
            g = linear(h / np.linalg.norm(h))
        else:
            g = frobenius_dist(random_cone_batch(n, 1, rng)[0])
        parts.append((c, g, rng.uniform(0.5, 2.0)))

    def func(x):
        return sum(wt * np.exp(c * g.func(x)) for c, g, wt in parts)

    return Observable(func, None, "random_cone_function", {"terms": terms})


def contractive_transfer(channel, psi):
    """``(T_c psi)(A) = sum_i psi(p_i U_i A U_i^*)`` as an observable."""
    k = channel.k

    def func(x):
        imgs = _kernels.conjugate_batch(x, channel.unitaries, channel.probs)
        return psi.func(imgs).reshape(x.shape[0], k).sum(axis=1)

    return Observable(func, None, "T_c(" + psi.name + ")", {})


def verify_cone_contraction(channel, spec=ConeSpec(), samples=20, seed=0, pairs=2000):
    """Check that the contractive transfer operator maps ``C(a, nu)`` into ``C(lambda1 a, nu)``."""
    if not isinstance(channel, MixedUnitaryChannel):
        raise TypeError("cone contraction is stated for mixed-unitary channels")
    lam = lambda1(channel, spec)
    rng = rng_from(seed)
    inner = ConeSpec(lam * spec.a, spec.nu, spec.delta0, spec.metric)
    pts = sample_pairs(channel.n, spec, pairs, rng)
    worst_in, worst_out = math.inf, math.inf
    ok = True
    for _ in range(samples):
        psi = random_cone_function(channel.n, spec, rng)
        m_in = cone_membership(psi, spec, points=pts)
        m_out = cone_membership(contractive_transfer(channel, psi), inner, points=pts)
        worst_in = min(worst_in, m_in["worst_margin"])
        worst_out = min(worst_out, m_out["worst_margin"])
        ok &= m_in["member"] and m_out["member"]
    return {"lambda1": lam, "pass": bool(ok), "worst_margin_input": worst_in,
            "worst_margin_image": worst_out, "samples": samples, "cone": spec.to_dict()}


def d1_upper_bound(lam, spec, diameter=CONE_DIAMETER):
    """Upper bound for the ``C(a, nu)``-diameter of ``C(lam a, nu)``.

    For ``phi`` in the smaller cone, the pair quotients in :func:`cone_metric`
    with ``phi1 = 1`` lie in ``[(1 - lam) phi(y), (1 + lam) phi(y)]``, so
    ``theta(1, phi) <= log((1 + lam)/(1 - lam)) + log(sup phi / inf phi)``.
    Chaining ``m = ceil(diameter/delta0)`` steps of length ``diameter/m`` gives
    ``log(sup/inf) <= lam a m^(1-nu) diameter^nu``.  The triangle inequality
    through the constant function doubles both terms.
    """
    if not 0.0 <= lam < 1.0:
        return math.inf
    m = math.ceil(diameter / spec.delta0)
    return (2.0 * math.log((1.0 + lam) / (1.0 - lam))
            + 2.0 * lam * spec.a * m ** (1.0 - spec.nu) * diameter ** spec.nu)


def estimate_D1(channel, spec=ConeSpec(), function_samples=20, point_samples=512, seed=0,
                pairs=2000):
    """Sampled lower estimate and analytic upper bound of ``D1``; ``Lambda1 = 1 - e^{-D1}``."""
    lam = lambda1(channel, spec)
    rng = rng_from(seed)
    inner = ConeSpec(lam * spec.a, spec.nu, spec.delta0, spec.metric)
    pts = random_cone_batch(channel.n, point_samples, rng)
    prs = sample_pairs(channel.n, spec, pairs, rng)
    funcs = [random_cone_function(channel.n, inner, rng) for _ in range(function_samples)]
    lower = 0.0
    for i in range(len(funcs)):
        for j in range(i + 1, len(funcs)):
            lower = max(lower, cone_metric(funcs[i], funcs[j], spec, pts, prs).theta)
    upper = d1_upper_bound(lam, spec)
    return {"lambda1": lam, "D1_lower": lower, "D1_upper": upper,
            "Lambda1": 1.0 - math.exp(-upper) if math.isfinite(upper) else 1.0,
            "cone": spec.to_dict()}


def _singular_probes(channel):
    """Pure states whose images are most likely to be singular.

    For ``U_i psi`` parallel to ``U_j psi`` the two branches overlap, which
    for two branches on a qubit makes the image rank one and the projective
    diameter infinite.  Such ``psi`` are eigenvectors of ``U_j^* U_i``.
    """
    if not isinstance(channel, MixedUnitaryChannel):
        return []
    out = []
    u = channel.unitaries
    for i in range(channel.k):
        for j in range(i + 1, channel.k):
            _, vecs = np.linalg.eig(u[j].conj().T @ u[i])
            out.extend(np.outer(v, v.conj()) / np.vdot(v, v).real for v in vecs.T)
    return out


def _pure_from_real(z, n):
    v = z[:n] + 1j * z[n:]
    return np.outer(v, v.conj()) / np.vdot(v, v).real


def _image_theta(channel, x, y):
    fx, fy = apply(channel, x), apply(channel, y)
    if not (is_positive_definite(fx) and is_positive_definite(fy)):
        return math.inf
    return hilbert_metric_psd(fx, fy).theta


def _refine_diameter(channel, starts, maxiter=400):
    """Nelder-Mead ascent of the image Hilbert metric from pure-state pairs."""
    n = channel.n
    best = 0.0

    def neg(z):
        t = _image_theta(channel, _pure_from_real(z[:2 * n], n), _pure_from_real(z[2 * n:], n))
        return -t if math.isfinite(t) else -1e300

    for z0 in starts:
        res = scipy.optimize.minimize(neg, z0, method="Nelder-Mead",
                                      options={"maxiter": maxiter, "xatol": 1e-8, "fatol": 1e-10})
        if res.fun <= -1e300:
            return math.inf
        best = max(best, -float(res.fun))
    return best


def tanh_contraction_check(channel, pairs=1000, seed=0, margin=0.1, refine=4):
    """Diagnostic for ``||Phi(rho) - Phi(eta)||_tr <= tanh(Delta/4) ||rho - eta||_tr``.

    ``Delta`` is the running sampled sup of the Hilbert metric between images,
    inflated by ``margin``.  The metric is quasi-convex in each argument, so
    the image diameter is reached on pure states: the diameter sample uses
    pure pairs and the ``refine`` best of them are improved by a local
    Nelder-Mead search.  The checked pairs are pure and Hilbert-Schmidt
    random states and also feed the running sup.  If an image is not
    positive definite the diameter is infinite, the coefficient is 1 and the
    check is vacuous.  Besides random states, eigenvectors of ``U_j^* U_i``
    are probed, since they are where images can degenerate.
    """
    rng = rng_from(seed)
    n = channel.n
    half = pairs // 2

    def draw(m):
        return np.concatenate([random_pure_batch(n, m // 2, rng),
                               random_density_batch(n, m - m // 2, rng)])

    # diameter sample first, then fresh pairs that also feed the running sup
    za = rng.standard_normal((half, 2 * n))
    zb = rng.standard_normal((half, 2 * n))
    rho, eta = draw(pairs - half), draw(pairs - half)
    finite = all(is_positive_definite(apply(channel, x)) for x in _singular_probes(channel))
    thetas = np.zeros(half)
    for i in range(half):
        if not finite:
            break
        thetas[i] = _image_theta(channel, _pure_from_real(za[i], n), _pure_from_real(zb[i], n))
        finite = math.isfinite(thetas[i])
    delta = float(thetas.max()) if half and finite else 0.0
    if finite and refine and half:
        top = np.argsort(thetas)[::-1][:refine]
        found = _refine_diameter(channel, [np.concatenate([za[i], zb[i]]) for i in top])
        finite = math.isfinite(found)
        delta = max(delta, found)
    violations = 0
    worst = -math.inf
    coeff = 1.0
    for x, y in zip(rho, eta):
        fx, fy = apply(channel, x), apply(channel, y)
        if finite:
            if is_positive_definite(fx) and is_positive_definite(fy):
                delta = max(delta, hilbert_metric_psd(fx, fy).theta)
            else:
                finite = False
        coeff = math.tanh((1.0 + margin) * delta / 4.0) if finite else 1.0
        din = float(trace_norm(x - y))
        dout = float(trace_norm(fx - fy))
        if din > 0:
            worst = max(worst, dout / din)
        if dout > coeff * din + 1e-12:
            violations += 1
    return {"delta_phi_estimate": delta if finite else math.inf, "finite": finite,
            "tanh_coeff": coeff, "violations": violations, "worst_ratio": worst,
            "pairs": pairs}
