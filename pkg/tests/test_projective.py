import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cptransfer import channels as ch
from cptransfer import observables as ob
from cptransfer import projective as pj
from cptransfer.errors import NotPositiveDefinite
from cptransfer.matkernel import random_density_hs, random_haar_unitary, random_pure_batch

Z = ch.PAULI["Z"]


def pd(seed, n=2):
    return random_density_hs(n, seed) + 0.05 * np.eye(n)


def test_hilbert_metric_examples():
    a = pd(0)
    assert pj.hilbert_metric_psd(a, a).theta == pytest.approx(0.0, abs=1e-12)
    assert pj.hilbert_metric_psd(np.eye(2), np.diag([2.0, 1.0])).theta == pytest.approx(math.log(2))
    assert pj.hilbert_metric_psd(3.7 * a, a).theta == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(NotPositiveDefinite):
        pj.hilbert_metric_psd(np.diag([1.0, 0.0]), np.eye(2))


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_hilbert_metric_against_plain_eigs(seed, n):
    a, b = pd(seed, n), pd(seed + 1, n)
    w = np.sort(np.linalg.eigvals(np.linalg.solve(a, b)).real)
    assert pj.hilbert_metric_psd(a, b).theta == pytest.approx(math.log(w[-1] / w[0]), rel=1e-9)


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_hilbert_metric_axioms(seed, c):
    a, b, d = pd(seed), pd(seed + 1), pd(seed + 2)
    th = lambda x, y: pj.hilbert_metric_psd(x, y).theta
    assert th(a, b) == pytest.approx(th(b, a), abs=1e-9)
    assert th(c * a, b) == pytest.approx(th(a, b), abs=1e-9)
    assert th(a, d) <= th(a, b) + th(b, d) + 1e-9
    ch_ = ch.random_mixed_unitary(3, 2, seed)
    assert th(ch_(a), ch_(b)) <= th(a, b) + 1e-9


def test_theta_plus_examples():
    pts = np.concatenate([random_pure_batch(2, 500, 0), [np.diag([1.0, 0]), np.diag([0, 1.0])]])
    f = ob.exp_neg_dist(np.eye(2) / 2)
    assert pj.theta_plus(f, f, pts).theta == 0.0
    g = ob.Observable(lambda x: 4.0 * f.func(x), None, "scaled")
    assert pj.theta_plus(f, g, pts).theta == pytest.approx(0.0, abs=1e-12)
    # sup/inf of tr(Z rho) are +1 and -1, reached at the basis states
    assert pj.theta_plus(ob.constant(1.0), ob.exp_trace(Z), pts).theta == pytest.approx(2.0)


def test_cone_membership_examples():
    spec = pj.ConeSpec(a=2.0, nu=1.0)
    assert pj.cone_membership(ob.constant(0.3), spec, pairs=500)["member"]
    # |tr(Z(x - y))| <= ||Z||_F ||x - y||_F = sqrt 2 d
    b = 1.0
    assert pj.cone_membership(ob.exp_trace(Z, b), pj.ConeSpec(a=math.sqrt(2) * b), pairs=500)["member"]
    assert not pj.cone_membership(ob.exp_trace(Z, 5.0), pj.ConeSpec(a=1.0), pairs=2000)["member"]
    zero = pj.cone_membership(ob.norm_power(1.0), spec, pairs=200)
    assert not zero["member"] or zero["worst_margin"] == -math.inf


def test_zero_value_is_not_member():
    vanish = ob.Observable(lambda x: np.zeros(x.shape[0]), None, "zero")
    assert not pj.cone_membership(vanish, pj.ConeSpec(), pairs=50)["member"]


def test_lambda1_examples():
    u = np.array([random_haar_unitary(2, i) for i in range(2)])
    c = ch.MixedUnitaryChannel(np.array([0.5, 0.5]), u)
    assert pj.lambda1(c, pj.ConeSpec(nu=1.0)) == pytest.approx(0.5)
    c = ch.MixedUnitaryChannel(np.array([0.9, 0.1]), u)
    assert pj.lambda1(c, pj.ConeSpec(nu=0.5)) == pytest.approx(0.9 ** 0.5)


@pytest.mark.parametrize("seed", range(3))
def test_cone_contraction(seed):
    c = ch.random_mixed_unitary(2 + seed, 2, seed)
    rep = pj.verify_cone_contraction(c, pj.ConeSpec(), samples=10, seed=seed, pairs=1000)
    assert rep["pass"]
    const = pj.contractive_transfer(c, ob.constant(1.0))
    inner = pj.ConeSpec(rep["lambda1"] * 5.0)
    assert pj.cone_membership(const, inner, pairs=200)["member"]


def test_D1_estimates():
    c = ch.random_mixed_unitary(2, 2, 3)
    spec = pj.ConeSpec()
    d = pj.estimate_D1(c, spec, function_samples=4, point_samples=128, pairs=400)
    assert 0.0 <= d["D1_lower"] <= d["D1_upper"]
    assert math.isfinite(d["D1_upper"]) and d["Lambda1"] < 1.0
    pts = random_density_hs(2, 0)[None]
    f = pj.random_cone_function(2, spec, 1)
    prs = pj.sample_pairs(2, spec, 50, 2)
    assert pj.cone_metric(f, f, spec, pts, prs).theta == pytest.approx(0.0, abs=1e-12)
    more = pj.estimate_D1(c, spec, function_samples=8, point_samples=128, pairs=400)
    assert more["D1_lower"] >= d["D1_lower"] - 1e-12


def test_d1_bound_formula():
    spec = pj.ConeSpec(a=5.0, nu=1.0, delta0=0.5)
    lam = 0.5
    m = math.ceil(math.sqrt(2) / 0.5)
    want = 2 * math.log(3.0) + 2 * lam * 5.0 * m ** 0 * math.sqrt(2)
    assert pj.d1_upper_bound(lam, spec) == pytest.approx(want)
    assert pj.d1_upper_bound(1.0, spec) == math.inf


def test_tanh_examples():
    u = random_haar_unitary(2, 4)
    unitary = ch.MixedUnitaryChannel(np.array([1.0]), u[None])
    rep = pj.tanh_contraction_check(unitary, pairs=100)
    assert not rep["finite"] and rep["tanh_coeff"] == 1.0 and rep["violations"] == 0
    q = 0.1
    depol = ch.depolarize_mix(ch.MixedUnitaryChannel(np.array([1.0]), u[None]), q)
    rep = pj.tanh_contraction_check(depol, pairs=400)
    assert rep["finite"] and rep["delta_phi_estimate"] < 1.0
    assert rep["violations"] == 0 and rep["tanh_coeff"] < 1.0
    full = pj.tanh_contraction_check(ch.pauli([0.25] * 4), pairs=100)
    assert full["delta_phi_estimate"] == pytest.approx(0.0, abs=1e-9)
    assert full["violations"] == 0


def test_birkhoff_examples():
    r = np.random.default_rng(0)
    pairs = [(r.uniform(0.1, 1, 2), r.uniform(0.1, 1, 2)) for _ in range(200)]
    ok, _ = pj.birkhoff_lemma_check(lambda v: v, pairs, pj.orthant_metric, pj.orthant_metric,
                                    math.inf)
    assert ok
    t = np.array([[0.7, 0.2], [0.3, 0.8]])
    d = pj.matrix_projective_diameter(t)
    assert d == pytest.approx(pj.birkhoff_coefficient_2x2(t))
    assert d == pytest.approx(math.log(0.7 * 0.8 / (0.2 * 0.3)))
    ok, worst = pj.birkhoff_lemma_check(lambda v: t @ v, pairs, pj.orthant_metric,
                                        pj.orthant_metric, d)
    assert ok and worst >= -1e-9


def test_birkhoff_on_hoelder_cone():
    c = ch.random_mixed_unitary(2, 2, 5)
    spec = pj.ConeSpec()
    lam = pj.lambda1(c, spec)
    pts = random_density_hs(2, 0)[None]
    pts = np.concatenate([pts, random_pure_batch(2, 64, 1)])
    prs = pj.sample_pairs(2, spec, 200, 2)
    funcs = [pj.random_cone_function(2, spec, s) for s in range(4)]
    metric = lambda f, g: pj.cone_metric(f, g, spec, pts, prs)
    pairs = [(funcs[i], funcs[j]) for i in range(4) for j in range(i + 1, 4)]
    ok, _ = pj.birkhoff_lemma_check(lambda f: pj.contractive_transfer(c, f), pairs, metric,
                                    metric, pj.d1_upper_bound(lam, spec))
    assert ok


def test_cone_spec_parse():
    s = pj.ConeSpec.parse("3,0.5,0.25")
    assert (s.a, s.nu, s.delta0) == (3.0, 0.5, 0.25)
    with pytest.raises(ValueError):
        pj.ConeSpec(a=-1)


def test_tanh_detects_infinite_diameter():
    # two branches on a qubit: eigenvectors of U2^* U1 have rank-one images
    c = ch.random_mixed_unitary(2, 2, 3)
    rep = pj.tanh_contraction_check(c, pairs=200)
    assert not rep["finite"] and rep["tanh_coeff"] == 1.0 and rep["violations"] == 0
