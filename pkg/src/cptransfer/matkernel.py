"""Dense complex linear algebra and random ensembles on small Hilbert spaces.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  The
helpers here validate the three kinds of square matrices used throughout the
package:

* general complex matrices (finite entries),
* density matrices (Hermitian, PSD, unit trace),
* cone points (Hermitian, PSD, trace in ``[0, 1]``), the domain on which the
  contractive branch maps ``A -> p U A U^*`` act.  The zero matrix is a cone
  point.

Random samplers are pure functions of their arguments and an explicit seed.
"""
import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, DimensionMismatch, NotHermitian

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_INPUT_TOL = 1e-8

__all__ = [
    "hermitian_eig", "trace_norm", "frobenius_norm", "partial_trace",
    "random_haar_unitary", "random_density_hs", "random_cone_point",
    "random_pure_state", "random_hermitian", "is_density_matrix", "is_cone_point",
    "check_density_matrix", "check_cone_point", "as_matrix", "rng_from",
    "dagger", "ket_to_dm",
]


def rng_from(seed):
    """Return a ``numpy.random.Generator``; generators pass through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_matrix(m, square=True):
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def ket_to_dm(psi):
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def hermitian_eig(m, tol=EIG_INPUT_TOL):
    """Eigen-decomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and the
    eigenvectors as columns of a unitary matrix.  The input is symmetrized
    before LAPACK is called, after checking ``||m - m^*||_F <= tol``.
    """
    a = as_matrix(m)
    asym = np.linalg.norm(a - a.conj().T)
    if asym > tol * max(1.0, np.linalg.norm(a)):
        raise NotHermitian(f"matrix is not Hermitian (||m - m*||_F = {asym:.3e})")
    h = 0.5 * (a + a.conj().T)
    try:
        w, v = scipy.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc
    return w, v


def trace_norm(m):
    """Sum of singular values."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"trace norm needs square input, got shape {a.shape}")
    return np.linalg.svd(a, compute_uv=False).sum(axis=-1)


def frobenius_norm(m):
    a = np.asarray(m)
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def partial_trace(m, dims, keep=0):
    """Trace out every tensor factor except ``keep``.

    ``dims`` is ``(n_A, n_B)`` (or longer); ``keep`` indexes the factor kept.
    """
    a = as_matrix(m)
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if a.shape[0] != total:
        raise DimensionMismatch(f"matrix of size {a.shape[0]} does not match dims {dims}")
    if not 0 <= keep < len(dims):
        raise DimensionMismatch(f"keep={keep} out of range for {len(dims)} factors")
    nf = len(dims)
    t = a.reshape(dims + dims)
    # contract every factor other than ``keep`` pairwise (row i with column i)
    for ax in sorted((i for i in range(nf) if i != keep), reverse=True):
        cur_n = t.ndim // 2
        t = np.trace(t, axis1=ax, axis2=ax + cur_n)
    return t.reshape(dims[keep], dims[keep])


def random_haar_unitary(n, seed=None):
    """Haar-random unitary from the QR decomposition of a Ginibre matrix.

    The phases of the diagonal of ``R`` are absorbed into ``Q`` so the result is
    exactly Haar distributed.
    """
    rng = rng_from(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    ph = d / np.abs(d)
    return q * ph[None, :]


def random_density_hs(n, seed=None):
    """Hilbert-Schmidt random density matrix ``G G^* / tr(G G^*)``."""
    rng = rng_from(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_cone_point(n, seed=None):
    """``t * rho`` with ``t ~ U[0, 1]`` and ``rho`` Hilbert-Schmidt random."""
    rng = rng_from(seed)
    t = rng.uniform(0.0, 1.0)
    return t * random_density_hs(n, rng)


def random_pure_state(n, seed=None):
    rng = rng_from(seed)
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return ket_to_dm(psi)


def random_hermitian(n, seed=None, scale=1.0):
    rng = rng_from(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (g + g.conj().T)


def random_density_batch(n, size, seed=None):
    """``size`` independent Hilbert-Schmidt density matrices as one array."""
    rng = rng_from(seed)
    g = rng.standard_normal((size, n, n)) + 1j * rng.standard_normal((size, n, n))
    rho = g @ dagger(g)
    tr = np.trace(rho, axis1=1, axis2=2).real
    return rho / tr[:, None, None]


def random_cone_batch(n, size, seed=None):
    rng = rng_from(seed)
    rho = random_density_batch(n, size, rng)
    t = rng.uniform(0.0, 1.0, size)
    return rho * t[:, None, None]


def random_pure_batch(n, size, seed=None):
    rng = rng_from(seed)
    psi = rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n))
    psi /= np.linalg.norm(psi, axis=1)[:, None]
    return psi[:, :, None] * psi.conj()[:, None, :]


def _psd_report(m):
    a = as_matrix(m)
    herm = np.linalg.norm(a - a.conj().T)
    h = 0.5 * (a + a.conj().T)
    lam_min = np.linalg.eigvalsh(h)[0]
    return herm, lam_min, np.trace(a)


def is_density_matrix(m, tol=HERMITIAN_TOL):
    try:
        herm, lam_min, tr = _psd_report(m)
    except (ValueError, DimensionMismatch):
        return False
    return herm <= tol and lam_min >= -PSD_TOL and abs(tr - 1.0) <= TRACE_TOL


def is_cone_point(m, tol=HERMITIAN_TOL):
    try:
        herm, lam_min, tr = _psd_report(m)
    except (ValueError, DimensionMismatch):
        return False
    return (herm <= tol and lam_min >= -PSD_TOL and abs(tr.imag) <= TRACE_TOL
            and -TRACE_TOL <= tr.real <= 1.0 + TRACE_TOL)


def check_density_matrix(m):
    if not is_density_matrix(m):
        herm, lam_min, tr = _psd_report(m)
        raise ValueError(
            f"not a density matrix: ||m-m*||={herm:.2e}, min eig={lam_min:.2e}, tr={tr:.6g}")
    return as_matrix(m)


def check_cone_point(m):
    if not is_cone_point(m):
        herm, lam_min, tr = _psd_report(m)
        raise ValueError(
            f"not a cone point: ||m-m*||={herm:.2e}, min eig={lam_min:.2e}, tr={tr:.6g}")
    return as_matrix(m)
