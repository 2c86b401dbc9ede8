import numpy as np
import pytest
from hypothesis import given, strategies as st

from cptransfer import channels as ch
from cptransfer import observables as ob
from cptransfer import transfer as tr
from cptransfer.errors import ExactBudgetExceeded, ProbabilityOnBoundary
from cptransfer.matkernel import random_cone_batch, random_density_hs, frobenius_norm

Z = ch.PAULI["Z"]


def test_Tb_constant_and_linear():
    c = ch.random_mixed_unitary(3, 2, 0)
    x = random_cone_batch(2, 20, 1)
    assert np.allclose(tr.apply_Tb(c, ob.constant(1.0))(x), 1.0)
    a = random_density_hs(2, 2)
    lin = ob.linear(a)
    images = np.array([c(r) for r in x])
    assert np.allclose(tr.apply_Tb(c, lin)(x), lin(images))


def test_Tb_phase_flip_diagonal_entry():
    c = ch.phase_flip(0.3)
    x = random_cone_batch(2, 10, 3)
    phi = ob.entry(0, 0)
    assert np.allclose(tr.apply_Tb(c, phi)(x), phi(x))


def test_Tc_examples():
    c = ch.random_mixed_unitary(3, 2, 4)
    x = random_cone_batch(2, 20, 5)
    assert np.allclose(tr.apply_Tc(c, ob.constant(1.0))(x), 3.0)
    trace = ob.linear(np.eye(2))
    assert np.allclose(tr.apply_Tc(c, trace)(x), trace(x))
    same = ch.MixedUnitaryChannel(np.array([0.5, 0.5]), np.array([np.eye(2)] * 2))
    fro = ob.norm_power(1.0)
    assert np.allclose(tr.apply_Tc(same, fro)(x), frobenius_norm(x))


def test_Tprime_examples():
    c = ch.random_nonlinear(3, 2, 6)
    x = random_cone_batch(2, 10, 7)
    rhos = np.array([r / np.trace(r).real for r in x])
    assert np.allclose(tr.apply_Tprime(c, ob.constant(2.5))(rhos), 2.5)
    base = ch.random_mixed_unitary(3, 2, 8)
    deg = ch.NonlinearChannel(base.probs[:, None, None] * np.eye(2), base.unitaries)
    phi = ob.purity()
    assert np.allclose(tr.apply_Tprime(deg, phi)(rhos), tr.apply_Tb(base, phi)(rhos))


def test_Tprime_preserves_concavity_on_chords():
    # homogeneous case: constant probabilities, phi = von Neumann-like concave -purity
    base = ch.random_mixed_unitary(2, 2, 9)
    deg = ch.NonlinearChannel(base.probs[:, None, None] * np.eye(2), base.unitaries)
    phi = ob.Observable(lambda x: -frobenius_norm(x) ** 2, None, "neg_purity")
    t = tr.apply_Tprime(deg, phi)
    r1, r2 = random_density_hs(2, 10), random_density_hs(2, 11)
    for lam in np.linspace(0.05, 0.95, 10):
        assert t(lam * r1 + (1 - lam) * r2) >= lam * t(r1) + (1 - lam) * t(r2) - 1e-12


def test_iterate_examples():
    c = ch.random_mixed_unitary(2, 2, 12)
    rho = random_density_hs(2, 13)
    phi = ob.purity()
    assert tr.iterate("Tb", c, phi, rho, 0).value == phi(rho)
    for n in (1, 4, 9):
        assert tr.iterate("Tc", c, ob.constant(1.0), rho, n).value == pytest.approx(2.0 ** n)


def _brute(op, c, phi, rho, n):
    # recursive oracle straight from the definitions
    if n == 0:
        return phi(rho)
    total = 0.0
    for p, u in zip(c.probs, c.unitaries):
        img = u @ rho @ u.conj().T
        if op == "Tb":
            total += p * _brute(op, c, phi, img, n - 1)
        else:
            total += _brute(op, c, phi, p * img, n - 1)
    return total


@given(st.integers(0, 2**32 - 1), st.sampled_from(["Tb", "Tc"]), st.integers(1, 4))
def test_iterate_matches_recursion(seed, op, n):
    c = ch.random_mixed_unitary(2, 2, seed)
    rho = random_density_hs(2, seed)
    phi = ob.exp_neg_dist(np.eye(2) / 2)
    assert tr.iterate(op, c, phi, rho, n).value == pytest.approx(_brute(op, c, phi, rho, n),
                                                                rel=1e-12)


@pytest.mark.parametrize("op", ["Tb", "Tc"])
def test_iterate_exact_vs_monte_carlo(op):
    fails = 0
    for s in range(5):
        c = ch.random_mixed_unitary(2, 2, 100 + s)
        rho = random_density_hs(2, s)
        # not unitarily invariant, so the word sum has real variance
        phi = ob.frobenius_dist(np.diag([1.0, 0.0]))
        ex = tr.iterate(op, c, phi, rho, 10).value
        mc = tr.iterate(op, c, phi, rho, 10, mode="monte_carlo", samples=10_000, seed=s)
        assert mc.stderr > 1e-6
        fails += abs(ex - mc.value) > 4 * mc.stderr
    assert fails == 0


def test_iterate_budget():
    c = ch.random_mixed_unitary(4, 2, 0)
    with pytest.raises(ExactBudgetExceeded):
        tr.iterate("Tc", c, ob.purity(), np.eye(2) / 2, 11)


def test_normalized_limit_examples():
    c = ch.random_mixed_unitary(2, 2, 14)
    rho = random_density_hs(2, 15)
    trace = ob.linear(np.eye(2))
    for n in (1, 5, 10):
        # every word scales the trace by p_J, and sum_J p_J = 1
        assert tr.normalized_Tc_limit(c, trace, rho, n).value == pytest.approx(2.0 ** -n)
    assert tr.normalized_Tc_limit(c, ob.constant(3.0), rho, 7).value == pytest.approx(3.0)
    half = ch.MixedUnitaryChannel(np.array([0.5, 0.5]), c.unitaries)
    v = tr.normalized_Tc_limit(half, ob.norm_power(1), rho, 20, mode="monte_carlo",
                               samples=2000).value
    assert abs(v) <= 2.0 ** -20 * np.linalg.norm(rho) + 1e-15


def test_ruelle_data():
    c = ch.random_mixed_unitary(3, 2, 16)
    d = tr.ruelle_data(c)
    assert d.lambda_ == 3.0
    assert d.eigenfunction_residual <= 1e-12
    assert d.eigenmeasure_mass == 3.0
    assert np.all(d.mu_atom == 0)
    with pytest.raises(ProbabilityOnBoundary):
        tr.ruelle_data(ch.identity_channel(2))


def test_jiang_examples():
    for k in (2, 3, 4):
        rep = tr.jiang_condition(ch.random_mixed_unitary(k, 2, k), 1)
        assert rep.lhs == pytest.approx(1.0) and rep.rhs == k and rep.holds
    pf = ch.phase_flip(0.3)
    rep = tr.jiang_condition(pf, 1, mode="sampled", pairs=64)
    assert rep.max_deviation <= 1e-6
    assert rep.gamma[(1,)] == pytest.approx(0.3, abs=1e-6)
    deg = tr.jiang_condition(ch.identity_channel(2), 1)
    assert deg.lhs == 1.0 and deg.rhs == 1.0 and not deg.holds


def test_holder_envelope_bounds_limit():
    c = ch.random_mixed_unitary(2, 2, 17)
    phi = ob.frobenius_dist(np.eye(2) / 2)
    zero = np.zeros((2, 2))
    for rho in random_cone_batch(2, 5, 18):
        for n in range(1, 9):
            v = tr.normalized_Tc_limit(c, phi, rho, n).value
            assert abs(v - phi(zero)) <= tr.holder_envelope(c, phi.holder, n) + 1e-12
