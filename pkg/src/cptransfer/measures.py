"""Empirical measures on states, Markov operators and the barycenter theorem.

An :class:`EmpiricalMeasure` is a finite list of weighted atoms (matrices).
Three Markov operators act on it, each dual to a transfer operator:

``"Pb"``       atom ``(rho, w) -> {(U_i rho U_i^*, w p_i)}``            dual to ``T_b``
``"Pprime"``   atom ``(rho, w) -> {(U_i rho U_i^*, w tr(Q_i rho))}``    dual to ``T'``
``"Pe"``       atom ``(rho, w) -> {(p_i U_i rho U_i^*, w)}``            dual to ``T_c``

``Pb`` and ``Pprime`` preserve total mass; ``Pe`` multiplies it by ``k``.
"""
from dataclasses import dataclass
import csv
import io
import math

import numpy as np

from . import _kernels
from .channels import (
    MixedUnitaryChannel, NonlinearChannel, apply, fixed_points, matrix_to_pairs, spectrum,
)
from .errors import BudgetExceeded, DimensionMismatch
from .matkernel import (
    dagger, frobenius_norm, random_density_hs, random_hermitian, random_pure_state,
    rng_from, trace_norm,
)
from .observables import Observable, exp_neg_dist, frobenius_dist, linear, purity

DEFAULT_CAP = 100_000
MARKOV_KINDS = ("Pb", "Pprime", "Pe")
INVARIANCE_TOL = 1e-3
_HASH_MULT = np.array([(0x9E3779B97F4A7C15 >> (3 * i)) | 1 for i in range(64)], dtype=np.uint64)


@dataclass(frozen=True)
class EmpiricalMeasure:
    atoms: np.ndarray  # (m, n, n)
    weights: np.ndarray  # (m,)

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=np.complex128)
        w = np.asarray(self.weights, dtype=np.float64)
        if a.ndim != 3 or a.shape[1] != a.shape[2] or w.shape != (a.shape[0],):
            raise DimensionMismatch(f"atoms {a.shape} and weights {w.shape} do not match")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, rho, weight=1.0):
        return cls(np.asarray(rho, dtype=np.complex128)[None], np.array([float(weight)]))

    @classmethod
    def uniform(cls, atoms):
        atoms = np.asarray(atoms, dtype=np.complex128)
        return cls(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))

    @property
    def n(self):
        return self.atoms.shape[1]

    @property
    def size(self):
        return self.atoms.shape[0]

    @property
    def mass(self):
        return float(math.fsum(self.weights))

    @property
    def normalized(self):
        return abs(self.mass - 1.0) <= 1e-12

    def integrate(self, g):
        """``<g, mu> = sum_a w_a g(rho_a)``."""
        return float(np.dot(self.weights, g.func(self.atoms)))

    def normalize(self):
        return EmpiricalMeasure(self.atoms, self.weights / self.mass)

    def scaled(self, c):
        return EmpiricalMeasure(self.atoms, self.weights * float(c))

    def _groups(self, h):
        # cell index of every atom on a grid of side h, folded into one key
        flat = self.atoms.reshape(self.size, -1)
        cells = np.floor(np.concatenate([flat.real, flat.imag], axis=1) / h).astype(np.int64)
        key = (cells.astype(np.uint64) * _HASH_MULT[:cells.shape[1]]).sum(axis=1)
        uniq, first, inverse = np.unique(key, return_index=True, return_inverse=True)
        return flat, uniq.size, first, inverse

    def compress(self, tol=1e-12):
        """Merge atoms that fall in the same cell of side ``tol``; the first atom is kept."""
        if self.size <= 1:
            return self
        _, m, first, inverse = self._groups(tol)
        if m == self.size:
            return self
        w = np.bincount(inverse, weights=self.weights, minlength=m)
        order = np.argsort(first)
        return EmpiricalMeasure(self.atoms[first[order]], w[order])

    def merge_cells(self, h):
        """Replace the atoms in each grid cell of side ``h`` by their weighted mean.

        Cells live on the real and imaginary parts of the entries.  Every linear
        functional, in particular the barycenter and the mass, is unchanged.
        """
        if self.size <= 1 or h <= 0:
            return self
        flat, m, first, inverse = self._groups(h)
        if m == self.size:
            return self
        w = np.bincount(inverse, weights=self.weights, minlength=m)
        acc = np.empty((m, flat.shape[1]), dtype=np.complex128)
        for c in range(flat.shape[1]):
            wc = self.weights * flat[:, c]
            acc[:, c] = (np.bincount(inverse, weights=wc.real, minlength=m)
                         + 1j * np.bincount(inverse, weights=wc.imag, minlength=m))
        keep = w > 0
        order = np.argsort(first[keep])
        atoms = (acc[keep] / w[keep, None])[order].reshape(-1, self.n, self.n)
        atoms = 0.5 * (atoms + dagger(atoms))
        return EmpiricalMeasure(atoms, w[keep][order])

    def resample(self, cap, seed=0):
        """Systematic resampling to ``cap`` equal-weight atoms; total mass kept."""
        if self.size <= cap:
            return self
        rng = rng_from(seed)
        mass = self.mass
        cum = np.cumsum(self.weights) / mass
        cum[-1] = 1.0
        pos = (rng.uniform() + np.arange(cap)) / cap
        idx = np.searchsorted(cum, pos, side="right")
        idx = np.minimum(idx, self.size - 1)
        return EmpiricalMeasure(self.atoms[idx], np.full(cap, mass / cap))


def mixture(measures, coefficients):
    """``sum_j c_j mu_j`` as one atom list (atoms concatenated in order)."""
    atoms = np.concatenate([m.atoms for m in measures])
    weights = np.concatenate([c * m.weights for c, m in zip(coefficients, measures)])
    return EmpiricalMeasure(atoms, weights)


def barycenter(mu):
    """``sum_a w_a rho_a`` (Hermitized)."""
    b = np.einsum("a,aij->ij", mu.weights, mu.atoms)
    return 0.5 * (b + b.conj().T)


def _check_kind(kind, channel):
    if kind not in MARKOV_KINDS:
        raise ValueError(f"unknown Markov operator {kind!r}; expected one of {MARKOV_KINDS}")
    want = NonlinearChannel if kind == "Pprime" else MixedUnitaryChannel
    if not isinstance(channel, want):
        raise TypeError(f"{kind} needs a {want.__name__}, got {type(channel).__name__}")


def pushforward(kind, channel, mu, cap=DEFAULT_CAP, seed=0, compress=False):
    """Image of ``mu`` under the Markov operator ``kind``.

    Children are ordered parent-major.  If the result has more than ``cap``
    atoms it is systematically resampled to ``cap`` atoms using ``seed``.
    """
    _check_kind(kind, channel)
    if mu.n != channel.n:
        raise DimensionMismatch(f"measure on C^{mu.n} for a channel on C^{channel.n}")
    k = channel.k
    if kind == "Pe":
        atoms = _kernels.conjugate_batch(mu.atoms, channel.unitaries, channel.probs)
        weights = np.repeat(mu.weights, k)
    else:
        atoms = _kernels.conjugate_batch(mu.atoms, channel.unitaries, np.ones(k))
        if kind == "Pb":
            branch = np.broadcast_to(channel.probs, (mu.size, k))
        else:
            branch = np.clip(channel.probabilities(mu.atoms), 0.0, None)
        weights = (mu.weights[:, None] * branch).ravel()
    out = EmpiricalMeasure(atoms, weights)
    if compress:
        out = out.compress()
    if cap is not None and out.size > cap:
        out = out.resample(cap, seed)
    return out


def markov_kind_for(channel):
    return "Pprime" if isinstance(channel, NonlinearChannel) else "Pb"


# ---------------------------------------------------------------------------
# chaos game

def chaos_game_states(channel, rho_start, steps, seed=0):
    """Trajectory ``rho_0, ..., rho_steps`` of the Markov chain of ``channel``."""
    rng = rng_from(seed)
    rho = np.asarray(rho_start, dtype=np.complex128)
    if isinstance(channel, NonlinearChannel):
        return _kernels.trajectory_place_dependent(
            rho, channel.unitaries, channel.povm, rng.random(steps))
    idx = rng.choice(channel.k, size=steps, p=channel.probs)
    return _kernels.trajectory(rho, channel.unitaries, idx)


def chaos_game(channel, rho_start, steps, burn_in=0, seed=0):
    """Uniform empirical measure of the states at times ``burn_in+1 .. steps``."""
    if steps <= burn_in:
        raise ValueError("steps must exceed burn_in")
    states = chaos_game_states(channel, rho_start, steps, seed)
    return EmpiricalMeasure.uniform(states[burn_in + 1:])


def chaos_game_endpoints(channel, rho_start, t, runs, seed=0):
    """States at time ``t`` of ``runs`` independent chains started at ``rho_start``."""
    rng = rng_from(seed)
    rho = np.asarray(rho_start, dtype=np.complex128)
    if t == 0:
        return np.broadcast_to(rho, (runs,) + rho.shape).copy()
    if isinstance(channel, NonlinearChannel):
        return _kernels.walk_place_dependent(rho, channel.unitaries, channel.povm,
                                             rng.random((runs, t)))
    words = rng.choice(channel.k, size=(runs, t), p=channel.probs)
    return _kernels.apply_words(rho, channel.unitaries, np.ones(channel.k), words)


# ---------------------------------------------------------------------------
# witness panel

@dataclass(frozen=True)
class Witness:
    observable: Observable
    matrix: np.ndarray = None  # set for linear witnesses rho -> Re tr(A rho)

    @property
    def name(self):
        return self.observable.name


def _unit_oscillation(a):
    a = 0.5 * (a + a.conj().T)
    w = np.linalg.eigvalsh(a)
    return a / (w[-1] - w[0])


def witness_panel(n, name="default", seed=20240601):
    """Fixed panel of test functions with oscillation at most 1 on density matrices.

    ``default`` is 24 linear plus 8 nonlinear witnesses; ``linear`` and
    ``nonlinear`` select either part.
    """
    rng = np.random.default_rng(seed + n)
    lin = []
    # generalized Gell-Mann matrices first, then random Hermitian directions
    for i in range(n):
        for j in range(i + 1, n):
            for part in (1.0, 1j):
                a = np.zeros((n, n), dtype=np.complex128)
                a[i, j] = part
                a[j, i] = np.conj(part)
                lin.append(_unit_oscillation(a))
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        lin.append(_unit_oscillation(np.diag(d).astype(np.complex128)))
    while len(lin) < 24:
        lin.append(_unit_oscillation(random_hermitian(n, rng)))
    lin = lin[:24]
    panel = [Witness(linear(a), a) for a in lin]
    sig = [random_pure_state(n, rng) for _ in range(3)]
    mixed = random_density_hs(n, rng)
    sq = lin[0]
    nonlin = [
        purity(),
        Observable(lambda x: frobenius_dist(np.eye(n) / n).func(x) / math.sqrt(2.0), None,
                   "frobenius_dist_center"),
        Observable(lambda x, s=sig[0]: frobenius_norm(x - s) / math.sqrt(2.0), None,
                   "frobenius_dist_pure0"),
        Observable(lambda x, s=sig[1]: frobenius_norm(x - s) / math.sqrt(2.0), None,
                   "frobenius_dist_pure1"),
        exp_neg_dist(sig[2], 1.0),
        exp_neg_dist(mixed, 2.0),
        Observable(lambda x: np.einsum("ij,mji->m", sq, x).real ** 2, None, "linear_squared"),
        Observable(lambda x: np.abs(x[:, 0, n - 1]), None, "abs_corner"),
    ]
    panel += [Witness(o) for o in nonlin]
    if name == "default":
        return panel
    if name == "linear":
        return panel[:24]
    if name == "nonlinear":
        return panel[24:]
    raise ValueError(f"unknown witness panel {name!r}")


def witness_values(mu, panel):
    """``<g, mu>`` for every witness; linear ones go through the barycenter."""
    b = barycenter(mu)
    out = np.empty(len(panel))
    for i, w in enumerate(panel):
        if w.matrix is not None:
            out[i] = float(np.trace(w.matrix @ b).real)
        else:
            out[i] = mu.integrate(w.observable)
    return out


def invariance_residual(channel, mu, panel=None, chunk=1 << 18):
    """``max_g |<g, P mu> - <g, mu>|`` over the witness panel.

    The pushforward is computed exactly (no resampling) in chunks.
    """
    panel = witness_panel(mu.n) if panel is None else panel
    kind = markov_kind_for(channel)
    before = witness_values(mu, panel)
    after = np.zeros(len(panel))
    for lo in range(0, mu.size, chunk):
        part = EmpiricalMeasure(mu.atoms[lo:lo + chunk], mu.weights[lo:lo + chunk])
        after += witness_values(pushforward(kind, channel, part, cap=None), panel)
    return float(np.max(np.abs(after - before))), after - before


# ---------------------------------------------------------------------------
# Cesaro scans

@dataclass
class CesaroReport:
    g: str
    values: np.ndarray  # values[n-1, j] = (1/n) sum_{i<n} <g, P^{i+j} mu>
    limsup_estimate: float
    liminf_estimate: float
    stderr: float
    n_used: int
    converged: bool
    orbit: np.ndarray  # <g, P^t mu> for t = 0, 1, ...
    final_measure: EmpiricalMeasure = None

    def to_dict(self):
        return {
            "g": self.g, "limsup_estimate": self.limsup_estimate,
            "liminf_estimate": self.liminf_estimate, "stderr": self.stderr,
            "n_used": self.n_used, "converged": self.converged,
            "orbit": [float(v) for v in self.orbit],
            "block_averages_last_row": [float(v) for v in self.values[-1]],
        }


def cesaro_scan(channel, g, mu_start, n_max=200, j_max=20, mode="exact", cap=DEFAULT_CAP,
                seed=0, tol=1e-6):
    """Block averages ``(1/n) sum_{i<n} <g, P^{i+j} mu>`` for ``n <= n_max, j <= j_max``.

    ``limsup_estimate`` is ``min_n max_j`` and ``liminf_estimate`` is
    ``max_n min_j`` of the block averages.  In ``"exact"`` mode duplicate atoms
    are merged after every step and exceeding ``cap`` raises
    :class:`BudgetExceeded`; in ``"resample"`` mode the measure is
    systematically resampled to ``cap`` atoms.  The scan stops early once a
    full row moves by less than ``tol``.
    """
    if mode not in ("exact", "resample"):
        raise ValueError(f"unknown mode {mode!r}")
    kind = markov_kind_for(channel)
    rng = rng_from(seed)
    mu = mu_start.compress()
    orbit = [mu.integrate(g)]
    spread = []
    rows = []
    converged = False

    def advance(mu):
        nxt = pushforward(kind, channel, mu, cap=None, compress=True)
        if nxt.size > cap:
            if mode == "exact":
                raise BudgetExceeded(
                    f"exact Cesaro scan needs {nxt.size} atoms after {len(orbit)} steps (cap {cap})")
            vals = g.func(nxt.atoms)
            spread.append(float(np.sqrt(np.dot(nxt.weights, (vals - orbit[-1]) ** 2)
                                        / nxt.mass) / math.sqrt(cap)))
            nxt = nxt.resample(cap, rng)
        return nxt

    for _ in range(j_max):
        mu = advance(mu)
        orbit.append(mu.integrate(g))
    for n in range(1, n_max + 1):
        if n > 1:
            mu = advance(mu)
            orbit.append(mu.integrate(g))
        cs = np.concatenate([[0.0], np.cumsum(orbit)])
        row = np.array([(cs[j + n] - cs[j]) / n for j in range(j_max + 1)])
        if rows and np.max(np.abs(row - rows[-1])) < tol:
            rows.append(row)
            converged = True
            break
        rows.append(row)
    values = np.array(rows)
    limsup = float(np.min(values.max(axis=1)))
    liminf = float(np.max(values.min(axis=1)))
    stderr = float(math.sqrt(np.mean(np.square(spread)))) if spread else 0.0
    return CesaroReport(getattr(g, "name", "g"), values, limsup, liminf, stderr, len(rows),
                        converged, np.array(orbit), mu)


# ---------------------------------------------------------------------------
# barycenter theorem

@dataclass
class BarycenterReport:
    forward_pass: bool
    reverse_pass: bool
    forward: list
    reverse: list
    tol: float
    convergence_not_reached: bool

    def to_dict(self):
        return {
            "forward_pass": self.forward_pass, "reverse_pass": self.reverse_pass,
            "tol": self.tol, "convergence_not_reached": self.convergence_not_reached,
            "forward": self.forward, "reverse": self.reverse,
        }


def auto_burn_in(channel, target=1e-5, minimum=64, maximum=20_000):
    """Steps after which ``|kappa|^t <= target`` (clamped to ``[minimum, maximum]``)."""
    kap = abs(spectrum(channel).kappa)
    if kap <= 0.0:
        return minimum
    if kap >= 1.0:
        return maximum
    return int(min(maximum, max(minimum, math.ceil(math.log(target) / math.log(kap)))))


def cesaro_invariant_measure(channel, rho, burn_in=None, window=64, grid=0.02,
                             cap=DEFAULT_CAP, seed=0, burn_grid=0.1):
    """Cesaro average ``(1/W) sum_{t=j}^{j+W-1} P^t delta_rho`` with ``j = burn_in``.

    Pushforwards are exact; after each one the atoms are merged on a grid
    (weighted means, so barycenters are kept exactly) and only if that still
    leaves more than ``cap`` atoms is the measure resampled.  The burn-in runs
    on the coarser ``burn_grid``; it only changes the starting measure of the
    window.  ``burn_in=None`` picks it from the spectral gap of the channel.
    Orbits that are finite, such as a point fixed by every branch, stay exact.
    """
    kind = markov_kind_for(channel)
    rng = rng_from(seed)
    if burn_in is None:
        burn_in = auto_burn_in(channel)
    nu = EmpiricalMeasure.dirac(rho)
    parts = []
    for t in range(burn_in + window):
        h = burn_grid if t < burn_in - 1 else grid
        nu = pushforward(kind, channel, nu, cap=None).merge_cells(h)
        if nu.size > cap:
            nu = nu.resample(cap, rng)
        if t >= burn_in - 1 and len(parts) < window:
            parts.append(nu)
    mu = mixture(parts, [1.0 / len(parts)] * len(parts))
    return mu.compress().merge_cells(grid)


def verify_barycenter_theorem(channel, trials=2, seed=0, tol=INVARIANCE_TOL, panel="default",
                              burn_in=None, window=64, grid=0.02, cap=DEFAULT_CAP):
    """Numerical check of both directions of the barycenter theorem.

    Forward: each fixed point ``rho0`` of the channel is the barycenter of an
    invariant measure obtained from ``delta_rho0``.  Reverse: measures built
    from random starts that pass the witness-panel invariance test have
    barycenters fixed by the channel.  Residuals are trace norms and
    witness-panel invariance residuals, both compared with ``tol``.
    """
    rng = rng_from(seed)
    wp = witness_panel(channel.n, panel)
    forward, reverse = [], []
    not_converged = False
    for rho0 in fixed_points(channel):
        mu = cesaro_invariant_measure(channel, rho0, burn_in, window, grid, cap, rng)
        inv, _ = invariance_residual(channel, mu, wp)
        bres = float(trace_norm(barycenter(mu) - rho0))
        forward.append({"invariance_residual": inv, "barycenter_residual": bres,
                        "atoms": mu.size, "pass": inv <= tol and bres <= tol})
        not_converged |= inv > tol
    for _ in range(trials):
        rho = random_density_hs(channel.n, rng)
        mu = cesaro_invariant_measure(channel, rho, burn_in, window, grid, cap, rng)
        inv, _ = invariance_residual(channel, mu, wp)
        b = barycenter(mu)
        fres = float(trace_norm(apply(channel, b) - b))
        reverse.append({"invariance_residual": inv, "fixed_residual": fres,
                        "barycenter": matrix_to_pairs(b),
                        "atoms": mu.size, "pass": inv <= tol and fres <= tol})
        not_converged |= inv > tol
    return BarycenterReport(all(f["pass"] for f in forward), all(r["pass"] for r in reverse),
                            forward, reverse, tol, not_converged)


# ---------------------------------------------------------------------------
# CSV dump: atom_index, weight, then re/im of every entry row-major

def measure_to_csv(mu):
    n = mu.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["atom_index", "weight"]
    for i in range(n):
        for j in range(n):
            cols += [f"re_{i}_{j}", f"im_{i}_{j}"]
    w.writerow(cols)
    for a in range(mu.size):
        flat = mu.atoms[a].ravel(order="C")
        row = [a, repr(float(mu.weights[a]))]
        for z in flat:
            row += [repr(float(z.real)), repr(float(z.imag))]
        w.writerow(row)
    return buf.getvalue()


def measure_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    n = int(round(math.sqrt((len(header) - 2) / 2)))
    if 2 + 2 * n * n != len(header):
        raise DimensionMismatch(f"CSV has {len(header)} columns; not 2 + 2n^2")
    weights = np.array([float(r[1]) for r in body])
    vals = np.array([[float(x) for x in r[2:]] for r in body]).reshape(len(body), n * n, 2)
    atoms = (vals[..., 0] + 1j * vals[..., 1]).reshape(len(body), n, n)
    return EmpiricalMeasure(atoms, weights)
