import os
import subprocess
import sys

import numpy as np
import pytest

from cptransfer import _kernels as K
from cptransfer.channels import random_mixed_unitary, random_povm
from cptransfer.matkernel import random_cone_batch, random_density_hs

PAIRS = [
    ("conjugate_batch_numba", "conjugate_batch_numpy"),
    ("apply_words_numba", "apply_words_numpy"),
]


@pytest.fixture
def setup():
    c = random_mixed_unitary(3, 2, 0)
    rng = np.random.default_rng(1)
    return c, rng


def test_conjugate_batch_backends_agree(setup):
    c, _ = setup
    x = random_cone_batch(2, 50, 2)
    a = K.conjugate_batch_numba(x, c.unitaries, c.probs)
    b = K.conjugate_batch_numpy(x, c.unitaries, c.probs)
    assert a.shape == (150, 2, 2)
    assert np.allclose(a, b, atol=1e-14)
    # row s*k + i is p_i U_i x_s U_i^*
    u = c.unitaries[1]
    assert np.allclose(a[3 * 7 + 1], c.probs[1] * u @ x[7] @ u.conj().T)


def test_word_kernels_agree(setup):
    c, rng = setup
    rho = random_density_hs(2, 3)
    words = rng.integers(0, 3, size=(40, 5))
    a = K.apply_words_numba(rho, c.unitaries, c.probs, words)
    assert np.allclose(a, K.apply_words_numpy(rho, c.unitaries, c.probs, words), atol=1e-14)
    states = random_cone_batch(2, 40, 4)
    m1 = K.apply_words_multi_numba(states, c.unitaries, c.probs, words)
    m2 = K.apply_words_multi_numpy(states, c.unitaries, c.probs, words)
    assert np.allclose(m1, m2, atol=1e-14)
    # first letter acts first
    w = words[0]
    x = states[0]
    for j in w:
        x = c.probs[j] * c.unitaries[j] @ x @ c.unitaries[j].conj().T
    assert np.allclose(m1[0], x)


def test_left_multiply_agrees(setup):
    c, _ = setup
    mats = np.array([np.eye(2), c.unitaries[0]], dtype=complex)
    assert np.allclose(K.left_multiply_batch_numba(mats, c.unitaries),
                       K.left_multiply_batch_numpy(mats, c.unitaries))


def test_place_dependent_kernels_agree(setup):
    c, rng = setup
    q = random_povm(3, 2, 5)
    rho = random_density_hs(2, 6)
    u = rng.random((30, 6))
    a = K.walk_place_dependent_numba(rho, c.unitaries, q, u)
    b = K.walk_place_dependent_numpy(rho, c.unitaries, q, u)
    assert np.allclose(a, b, atol=1e-12)
    t1 = K.trajectory_place_dependent_numba(rho, c.unitaries, q, u[0])
    t2 = K.trajectory_place_dependent_numpy(rho, c.unitaries, q, u[0])
    assert np.allclose(t1, t2, atol=1e-12)
    idx = rng.integers(0, 3, 20)
    assert np.allclose(K.trajectory_numba(rho, c.unitaries, idx),
                       K.trajectory_numpy(rho, c.unitaries, idx))


def test_env_var_selects_numpy_backend():
    env = dict(os.environ, RCL_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c",
                          "from cptransfer import _kernels as K; print(K.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
