import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from cptransfer import matkernel as mk
from cptransfer.errors import NotHermitian

X = np.array([[0, 1], [1, 0]], dtype=complex)


def test_eig_identity_and_diagonal():
    w, _ = mk.hermitian_eig(np.eye(2))
    assert np.allclose(w, [1, 1])
    w, _ = mk.hermitian_eig(np.diag([3.0, -1.0]))
    assert np.allclose(w, [-1, 3])


def test_eig_pauli_x_closed_form():
    w, v = mk.hermitian_eig(X)
    assert np.allclose(w, [-1, 1])
    minus = np.array([1, -1]) / np.sqrt(2)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(abs(np.vdot(minus, v[:, 0])) - 1) < 1e-12
    assert abs(abs(np.vdot(plus, v[:, 1])) - 1) < 1e-12


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        mk.hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_eig_reconstructs(n, seed):
    h = mk.random_hermitian(n, seed)
    w, v = mk.hermitian_eig(h)
    assert np.all(np.diff(w) >= 0)
    assert np.linalg.norm(v @ np.diag(w) @ v.conj().T - h) <= 1e-9 * max(1, np.linalg.norm(h))
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-10)


def test_trace_norm_examples():
    assert mk.trace_norm(np.diag([1.0, -1.0])) == pytest.approx(2.0)
    assert mk.trace_norm(np.zeros((2, 2))) == 0.0
    assert mk.trace_norm(np.array([[0, 1], [0, 0]], dtype=complex)) == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_trace_norm_matches_svd(seed):
    r = np.random.default_rng(seed)
    m = r.standard_normal((3, 3)) + 1j * r.standard_normal((3, 3))
    assert mk.trace_norm(m) == pytest.approx(np.linalg.svd(m, compute_uv=False).sum(), rel=1e-10)


def _ptrace_loops(m, da, db):
    out = np.zeros((da, da), dtype=complex)
    for i in range(da):
        for j in range(da):
            out[i, j] = sum(m[i * db + b, j * db + b] for b in range(db))
    return out


def test_partial_trace_examples():
    ra, rb = mk.random_density_hs(2, 1), mk.random_density_hs(2, 2)
    assert np.allclose(mk.partial_trace(np.kron(ra, rb), (2, 2), keep=0), ra)
    bell = np.zeros(4, dtype=complex)
    bell[[0, 3]] = 1 / np.sqrt(2)
    assert np.allclose(mk.partial_trace(np.outer(bell, bell.conj()), (2, 2), 0), np.eye(2) / 2)
    assert np.allclose(mk.partial_trace(np.eye(4) / 4, (2, 2), 0), np.eye(2) / 2)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 2), (2, 3), (3, 2)]))
def test_partial_trace_matches_loops(seed, dims):
    m = mk.random_density_hs(dims[0] * dims[1], seed)
    assert np.allclose(mk.partial_trace(m, dims, 0), _ptrace_loops(m, *dims))


def test_haar_scalar_and_determinism():
    u = mk.random_haar_unitary(1, 3)
    assert abs(abs(u[0, 0]) - 1) < 1e-12
    assert np.array_equal(mk.random_haar_unitary(3, 9), mk.random_haar_unitary(3, 9))


def test_haar_first_moment():
    r = np.random.default_rng(0)
    vals = np.array([abs(mk.random_haar_unitary(2, r)[0, 0]) ** 2 for _ in range(10_000)])
    # |U00|^2 is uniform on [0, 1] for n = 2
    assert abs(vals.mean() - 0.5) <= 3 * np.sqrt(1 / 12 / vals.size)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_random_states_satisfy_invariants(n, seed):
    assert mk.is_density_matrix(mk.random_density_hs(n, seed))
    assert mk.is_density_matrix(mk.random_pure_state(n, seed))
    assert mk.is_cone_point(mk.random_cone_point(n, seed))


def test_hs_mean_is_maximally_mixed():
    s = mk.random_density_batch(2, 100_000, 0)
    dev = s.mean(axis=0) - np.eye(2) / 2
    for part in (np.real, np.imag):
        se = part(s).std(axis=0) / np.sqrt(s.shape[0])
        assert np.all(np.abs(part(dev)) <= 3 * se + 1e-12)


def test_cone_trace_uniform_ks():
    s = mk.random_cone_batch(2, 5000, 1)
    tr = np.trace(s, axis1=1, axis2=2).real
    assert stats.kstest(tr, "uniform").pvalue > 0.01


def test_checks_reject_bad_input():
    assert not mk.is_density_matrix(np.diag([1.5, -0.5]))
    assert not mk.is_cone_point(np.eye(2))
    with pytest.raises(ValueError):
        mk.check_density_matrix(np.eye(2))
