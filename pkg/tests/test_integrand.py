import math

import numpy as np
import pytest

from dplab.integrand import (
    ConjugateUnboundedError,
    GrowthFunction,
    IntegrandSpec,
    SingularGradientError,
    V_sp,
    conjugate_H,
    conjugate_H_radial,
    eval_E_star,
    eval_H,
    eval_L,
    eval_modular_G,
    grad_L,
    hess_L,
    hessian_eigenvalues,
)

LOG = IntegrandSpec(GrowthFunction("log"), q=1.8, s=0.5)


def _random_z(rng, m, lo=-2.0, hi=4.0):
    return rng.standard_normal((m, 2)) * np.exp(rng.uniform(lo, hi, (m, 1)))


# ---------------------------------------------------------------------------
# eval_L


def test_L_zero_is_zero():
    for kind, level in (("one", 1), ("log", 1), ("iterated-log", 2)):
        spec = IntegrandSpec(GrowthFunction(kind, level))
        assert eval_L(spec, np.zeros(2)) == 0.0
    area = IntegrandSpec(kindL="area", p=1.5, q=1.5)
    assert eval_L(area, np.zeros(2)) == pytest.approx(0.0, abs=1e-15)


def test_L_log_closed_form():
    # f(t) = t log(1+t) at t = e-1 equals e-1
    z = np.array([math.e - 1.0, 0.0])
    spec = IntegrandSpec(GrowthFunction("log"))
    assert eval_L(spec, z) == pytest.approx(math.e - 1.0, rel=1e-14)


def test_L_growth_sandwich_sampled():
    rng = np.random.default_rng(0)
    z = _random_z(rng, 10_000)
    r = np.sqrt(np.sum(z * z, axis=-1))
    for kind, level in (("log", 1), ("iterated-log", 2)):
        spec = IntegrandSpec(GrowthFunction(kind, level))
        L = eval_L(spec, z)
        gr = r * spec.growth.value(r)
        assert np.all(L >= gr / spec.Lambda - 1e-12)
        assert np.all(L <= spec.Lambda * gr + spec.Lambda + 1e-12)


# ---------------------------------------------------------------------------
# grad_L / hess_L


def test_grad_L_log_closed_form():
    # d/dt [t log(1+t)] at t=1 -> log 2 + 1/2, direction e1
    spec = IntegrandSpec(GrowthFunction("log"))
    g = grad_L(spec, np.array([1.0, 0.0]))
    assert g[0] == pytest.approx(math.log(2.0) + 0.5, rel=1e-14)
    assert g[1] == 0.0


def test_grad_singular_origin_guard():
    spec = IntegrandSpec(GrowthFunction("one"), q=1.5, s=0.0)
    with pytest.raises(SingularGradientError):
        grad_L(spec, np.zeros(2))
    # delta smoothing removes the singularity
    smooth = IntegrandSpec(GrowthFunction("one"), q=1.5, s=0.0,
                           delta_moll=1e-3)
    assert np.all(np.isfinite(grad_L(smooth, np.zeros(2))))


def test_hess_L_matches_finite_differences():
    rng = np.random.default_rng(1)
    spec = LOG
    for _ in range(100):
        z = rng.standard_normal(2)
        z *= rng.uniform(0.1, 100.0) / np.linalg.norm(z)
        H = hess_L(spec, z)
        assert np.allclose(H, H.T)
        h = 1e-6 * max(1.0, np.linalg.norm(z))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (grad_L(spec, z + e) - grad_L(spec, z - e)) / (2 * h)
            assert np.allclose(H[:, k], fd, rtol=1e-5, atol=1e-7)


def test_eigenvalue_sandwich_all_growths():
    rng = np.random.default_rng(2)
    z = _random_z(rng, 10_000)
    r = np.sqrt(np.sum(z * z, axis=-1))
    specs = [(IntegrandSpec(GrowthFunction("log")), z, r)]
    specs += [(IntegrandSpec(GrowthFunction("iterated-log", lv)), z, r)
              for lv in (1, 2, 3)]
    # the area profile with p != 2 degenerates at the origin (eigenvalues
    # scale like |z|^(p-2) there), so its sandwich is sampled away from 0
    za = z * (0.5 + r)[:, None] / r[:, None]
    ra = np.sqrt(np.sum(za * za, axis=-1))
    specs += [(IntegrandSpec(kindL="area", p=p, q=1.5), za, ra)
              for p in (1.5, 2, 3)]
    for spec, z_, r_ in specs:
        z, r = z_, r_
        lo, hi = hessian_eigenvalues(spec, z)
        low_bound = 1.0 / (spec.Lambda * (1.0 + r * r) ** (spec.mu / 2.0))
        up_bound = (spec.Lambda * (spec.modular_growth.value(r) + 1.0)
                    / np.sqrt(1.0 + r * r))
        assert np.all(lo >= low_bound * (1.0 - 1e-8))
        assert np.all(hi <= up_bound * (1.0 + 1e-8))


def test_area_mu_is_p_plus_one_and_rejected_by_E_star():
    spec = IntegrandSpec(kindL="area", p=2.0, q=1.5)
    assert spec.mu == 3.0
    with pytest.raises(ValueError):
        eval_E_star(spec, 1.0, 2.0)


# ---------------------------------------------------------------------------
# eval_H / eval_modular_G


def test_H_closed_form():
    spec = IntegrandSpec(GrowthFunction("log"), q=1.8, s=0.0)
    z = np.array([2.0, 0.0])
    expected = 2.0 * math.log(3.0) + 2.0**1.8
    assert eval_H(spec, 1.0, z) == pytest.approx(expected, rel=1e-14)


def test_H_dominates_a_zq():
    rng = np.random.default_rng(3)
    z = _random_z(rng, 2000)
    a = rng.uniform(0.01, 2.0, 2000)
    spec = IntegrandSpec(GrowthFunction("log"), q=1.8, s=0.0)
    r = np.sqrt(np.sum(z * z, axis=-1))
    assert np.all(eval_H(spec, a, z) >= a * r**1.8 - 1e-12)


def test_modular_G_closed_form_and_zero():
    one = IntegrandSpec(GrowthFunction("one"), q=2.0)
    assert eval_modular_G(one, 1.0, np.zeros(2)) == 0.0
    z = np.array([3.0, 0.0])
    assert eval_modular_G(one, 1.0, z) == pytest.approx(12.0, rel=1e-14)


def test_modular_energy_comparison_sampled():
    # G <= Lambda H + Lambda and H <= 2^q Lambda G + c on random samples
    rng = np.random.default_rng(4)
    z = _random_z(rng, 10_000)
    a = rng.uniform(0.0, 2.0, 10_000)
    spec = LOG
    H = eval_H(spec, a, z)
    G = eval_modular_G(spec, a, z)
    c = spec.Lambda * (1.0 + 2.0**spec.q)
    assert np.all(G <= spec.Lambda * H + spec.Lambda + 1e-10)
    assert np.all(H <= 2.0**spec.q * spec.Lambda * G + c + 1e-10)


# ---------------------------------------------------------------------------
# eval_E_star


def test_E_star_mu1_closed_form():
    spec = IntegrandSpec(GrowthFunction("log"), q=1.5, s=0.0)
    assert spec.mu == 1.0
    t = np.linspace(0.0, 20.0, 64)
    expected = np.sqrt(1.0 + t * t) - 1.0
    assert np.allclose(eval_E_star(spec, 0.0, t), expected, rtol=1e-13)
    assert eval_E_star(spec, 1.0, 0.0) == 0.0


def test_E_star_increasing_convex():
    spec = IntegrandSpec(GrowthFunction("log"), q=1.8, s=0.5)
    t = np.linspace(0.0, 50.0, 400)
    v = eval_E_star(spec, 0.7, t)
    d1 = np.diff(v)
    assert np.all(d1 > 0)
    assert np.all(np.diff(d1) > -1e-12)


def test_E_star_threshold_inequality():
    # |z| <= 2 E(x,|z|)^(1/(2-mu)) for |z| large (mu=1: |z| <= 2(sqrt(1+t^2)-1))
    spec = IntegrandSpec(GrowthFunction("log"), q=1.8, s=0.0)
    t = np.linspace(2.0, 1e4, 500)
    E = eval_E_star(spec, 0.0, t)
    assert np.all(t <= 2.0 * E ** (1.0 / (2.0 - spec.mu)) + 1e-9)


# ---------------------------------------------------------------------------
# conjugates


def test_conjugate_zero_is_zero():
    # with s = 0 the density vanishes at z = 0, so the conjugate does too
    spec = IntegrandSpec(GrowthFunction("log"), q=1.8, s=0.0)
    assert conjugate_H(spec, 1.0, np.zeros(2)) == pytest.approx(0.0, abs=1e-10)


def test_conjugate_quadratic_closed_form():
    # H(z) = |z| + |z|^2 (growth one, a=1, q=2, s=0):
    # H*(w) = ((|w|-1)_+)^2 / 4
    spec = IntegrandSpec(GrowthFunction("one"), q=2.0, s=0.0)
    for w in (0.5, 1.0, 3.0, 10.0):
        expected = max(w - 1.0, 0.0) ** 2 / 4.0
        got = np.asarray(conjugate_H_radial(spec, 1.0, np.array([w]))).item()
        assert got == pytest.approx(expected, rel=1e-8, abs=1e-10)


def test_conjugate_unbounded_guard():
    # linear growth, a = 0: slope of L is 1, conjugate of |w| > 1 explodes
    spec = IntegrandSpec(GrowthFunction("one"), q=2.0, s=0.0)
    with pytest.raises(ConjugateUnboundedError):
        conjugate_H_radial(spec, 0.0, np.array([2.0]))


def test_fenchel_young_sampled():
    rng = np.random.default_rng(5)
    m = 10_000
    z = _random_z(rng, m)
    w = rng.standard_normal((m, 2)) * np.exp(rng.uniform(-2, 3, (m, 1)))
    spec = LOG
    a = 1.0
    Hs = conjugate_H(spec, a, w)
    H = eval_H(spec, a, z)
    pair = np.sum(z * w, axis=-1)
    assert np.all(H + Hs >= pair - 1e-8 * (1.0 + np.abs(pair)))


def test_conjugate_convex_along_radial_segments():
    spec = LOG
    w = np.linspace(0.0, 40.0, 200)
    v = np.asarray(conjugate_H_radial(spec, 0.8, w))
    assert np.all(np.diff(v, 2) > -1e-8)


def test_ellipticity_ratio_log_growth():
    # ||d2H|| / min-eig <= C(q) (1 + a|z|^(q-1)) (1 + log(1+|z|))
    rng = np.random.default_rng(6)
    z = _random_z(rng, 5000)
    r = np.sqrt(np.sum(z * z, axis=-1))
    spec = IntegrandSpec(GrowthFunction("log"), q=1.8, s=0.5)
    for a in (0.0, 0.5, 2.0):
        lo, hi = hessian_eigenvalues(spec, z, delta=0.0)
        qterm_lo = a * spec.q * (spec.s**2 + r * r) ** (spec.q / 2 - 1)
        ratio = (hi + qterm_lo * (spec.q - 1.0) * 4.0) / (lo + qterm_lo)
        bound = 40.0 * (1.0 + a * r ** (spec.q - 1.0)) * (1.0 + np.log1p(r))
        assert np.all(ratio <= bound)


# ---------------------------------------------------------------------------
# V_sp


def test_V_sp_trivial_cases():
    z = np.array([2.0, 0.0])
    assert np.allclose(V_sp(0.7, 2.0, z), z)
    assert np.allclose(V_sp(0.0, 4.0, z), np.array([4.0, 0.0]))


def test_V_sp_comparability_and_monotonicity():
    rng = np.random.default_rng(7)
    m = 10_000
    z1 = _random_z(rng, m)
    z2 = _random_z(rng, m)
    s, p = 0.5, 1.8
    dV = np.linalg.norm(V_sp(s, p, z1) - V_sp(s, p, z2), axis=-1)
    base = (s**2 + np.sum(z1 * z1, -1) + np.sum(z2 * z2, -1)) ** ((p - 2) / 4)
    dist = np.linalg.norm(z1 - z2, axis=-1)
    ok = dist > 1e-10
    ratio = dV[ok] / (base[ok] * dist[ok])
    # two-sided comparability with recorded constants
    assert ratio.max() <= 4.0 and ratio.min() >= 0.2
    # scalar monotonicity: | |t1|^{p-1} t1 - |t2|^{p-1} t2 | >= c |t1-t2|^p
    t1 = rng.uniform(-5, 5, m)
    t2 = rng.uniform(-5, 5, m)
    lhs = np.abs(np.abs(t1) ** (p - 1) * t1 - np.abs(t2) ** (p - 1) * t2)
    assert np.all(lhs >= 2.0 ** (1 - p) / p * np.abs(t1 - t2) ** p - 1e-12)
