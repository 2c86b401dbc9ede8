import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cptransfer import channels as ch
from cptransfer import entropy as en
from cptransfer.errors import BarycenterMismatch, BranchCountMismatch, NegativeArgument
from cptransfer.matkernel import random_density_hs, random_haar_unitary, random_pure_state
from cptransfer.measures import EmpiricalMeasure

from conftest import pure


def test_eta_examples():
    assert en.eta(0.0) == 0.0
    assert en.eta(1.0) == 0.0
    assert en.eta(1 / math.e) == pytest.approx(1 / math.e)
    with pytest.raises(NegativeArgument):
        en.eta(-0.1)


def test_state_entropies():
    assert en.von_neumann_entropy(random_pure_state(3, 0)) == pytest.approx(0.0, abs=1e-12)
    assert en.von_neumann_entropy(np.eye(3) / 3) == pytest.approx(math.log(3))
    want = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    assert en.von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(want)
    assert en.shannon([0.75, 0.25]) == pytest.approx(want)


def _h_loops(c, rho):
    # direct evaluation of sum_i tr(Q_i rho) sum_j eta(tr(Q_j U_i rho U_i^*))
    total = 0.0
    for qi, ui in zip(c.povm, c.unitaries):
        pi = np.trace(qi @ rho).real
        img = ui @ rho @ ui.conj().T
        s = 0.0
        for qj in c.povm:
            x = np.trace(qj @ img).real
            s += -x * math.log(x) if x > 0 else 0.0
        total += pi * s
    return total


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(2, 3))
def test_transfer_entropy_matches_loops(seed, k, n):
    c = ch.random_nonlinear(k, n, seed)
    rho = random_density_hs(n, seed + 1)
    rep = en.transfer_entropy(c, rho)
    assert rep.value == pytest.approx(_h_loops(c, rho), abs=1e-12)
    assert rep.bounds_checked and rep.bound == pytest.approx(math.log(k))


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_shannon_reduction(seed, k):
    r = np.random.default_rng(seed)
    w = r.dirichlet(np.ones(k))
    us = np.array([random_haar_unitary(2, r) for _ in range(k)])
    c = ch.NonlinearChannel(w[:, None, None] * np.eye(2), us)
    h = en.transfer_entropy(c, random_density_hs(2, r)).value
    assert abs(h - en.shannon(w)) <= 1e-12


def test_projective_povm_degenerate_case():
    q = np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]).astype(complex)
    c = ch.NonlinearChannel(q, np.array([np.eye(2)] * 2))
    assert en.transfer_entropy(c, np.diag([1.0, 0]).astype(complex)).value == 0.0


def test_transfer_entropy_bounds_many():
    r = np.random.default_rng(0)
    for _ in range(1000):
        k = int(r.integers(1, 5))
        c = ch.random_nonlinear(k, 2, r)
        v = en.transfer_entropy(c, random_density_hs(2, r)).value
        assert -1e-12 <= v <= math.log(k) + 1e-12


def test_inner_povm_bound():
    c = ch.random_nonlinear(2, 2, 1)
    inner = ch.random_povm(5, 2, 2)
    rep = en.transfer_entropy(c, random_density_hs(2, 3), inner)
    assert rep.bound == pytest.approx(math.log(5)) and rep.bounds_checked


def test_relative_entropy_examples():
    c = ch.random_nonlinear(3, 2, 4)
    rho = random_density_hs(2, 5)
    assert en.relative_transfer_entropy(c, c, rho) == 0.0
    p, q = np.array([0.5, 0.3, 0.2]), np.array([0.2, 0.2, 0.6])
    us = np.array([random_haar_unitary(2, i) for i in range(3)])
    a = ch.NonlinearChannel(p[:, None, None] * np.eye(2), us)
    b = ch.NonlinearChannel(q[:, None, None] * np.eye(2), us)
    kl = float(np.sum(p * np.log(p / q)))
    assert en.relative_transfer_entropy(a, b, rho) == pytest.approx(kl, abs=1e-12)
    with pytest.raises(BranchCountMismatch):
        en.relative_transfer_entropy(c, ch.random_nonlinear(2, 2, 6), rho)


def test_relative_entropy_infinite():
    q = np.array([np.diag([1.0, 0]), np.diag([0, 1.0])]).astype(complex)
    us = np.array([np.eye(2)] * 2)
    a = ch.NonlinearChannel(np.array([np.eye(2) / 2] * 2), us)
    b = ch.NonlinearChannel(q, us)
    # B gives a vanishing outcome probability where A does not
    assert math.isinf(en.relative_transfer_entropy(a, b, np.diag([1.0, 0]).astype(complex)))


@given(st.integers(0, 2**32 - 1))
def test_klein_positivity(seed):
    r = np.random.default_rng(seed)
    a, b = ch.random_nonlinear(3, 2, r), ch.random_nonlinear(3, 2, r)
    assert en.relative_transfer_entropy(a, b, random_density_hs(2, r)) >= -1e-12


@pytest.mark.parametrize("lam", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_joint_convexity_grid(lam):
    r = np.random.default_rng(int(lam * 100))
    for _ in range(50):
        c = ch.random_nonlinear(3, 2, r)
        states = [random_density_hs(2, r) for _ in range(4)]
        assert en.joint_convexity_margin(c, *states, lam) >= -1e-9


def test_concavity_trivial_cases():
    c = ch.random_nonlinear(3, 2, 7)
    rho = random_density_hs(2, 8)
    ok, worst = en.check_concavity_inequality(c, rho, rho)
    assert ok and worst >= 0
    ok, worst = en.check_concavity_inequality(c, random_density_hs(2, 9), rho, alpha_grid=[1e-9])
    assert ok and worst == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(ValueError):
        en.check_concavity_inequality(c, rho, rho, alpha_grid=[1.0])


def test_concavity_random():
    r = np.random.default_rng(1)
    for _ in range(1000):
        c = ch.random_nonlinear(int(r.integers(2, 5)), 2, r)
        ok, _ = en.check_concavity_inequality(c, random_density_hs(2, r), random_density_hs(2, r),
                                              alpha_grid=[r.uniform(0.01, 0.99)])
        assert ok


def test_eof_demo_product_and_bell():
    c = ch.random_nonlinear(2, 2, 10)
    prod = np.kron(pure([1, 0]), pure([1, 1]))
    rep = en.eof_inequality_demo(prod, [EmpiricalMeasure.dirac(prod)], c)
    assert rep.min_entropy_integral == pytest.approx(0.0, abs=1e-12)
    bell = pure([1, 0, 0, 1])
    rep = en.eof_inequality_demo(bell, [EmpiricalMeasure.dirac(bell)], c)
    assert rep.min_entropy_integral == pytest.approx(math.log(2))
    assert rep.inequality_holds
    assert len(rep.candidates) == 1


def test_eof_demo_rejects_wrong_barycenter():
    c = ch.random_nonlinear(2, 2, 11)
    with pytest.raises(BarycenterMismatch):
        en.eof_inequality_demo(np.eye(4) / 4, [EmpiricalMeasure.dirac(pure([1, 0, 0, 0]))], c)
