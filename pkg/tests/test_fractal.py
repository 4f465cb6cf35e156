import math

import numpy as np
import pytest

from dplab.fractal import (
    AtomCollisionError,
    CantorParams,
    CounterexampleConfig,
    SingularPlaneError,
    build_cantor,
    calibrate_pairing,
    competitor_u_star,
    competitor_u_tilde,
    cutoffs,
    dist_to_cantor,
    dual_field_z,
    fractal_coefficient_a,
    grad_u_star,
    pairing_quadrature,
    select_parameters,
    self_similar_layer_integral,
    true_neighborhood_measure,
    true_neighborhood_measure_deriv,
    weight_b,
)


# ---------------------------------------------------------------------------
# Cantor construction


def test_lambda_formula():
    p = CantorParams(n=2, eps=0.5, depth=4)
    assert p.lam == pytest.approx(0.25, rel=1e-15)
    p = CantorParams(n=2, eps=0.15, depth=4)
    assert p.lam == pytest.approx(0.5 ** (1.0 / 0.85), rel=1e-14)
    assert 0.0 < p.lam < 0.5


def test_interval_sequence_invariants():
    # l_i = lam^i with l_i > 2 l_{i+1} and gaps shrinking monotonically
    p = CantorParams(n=2, eps=0.15, depth=10)
    l = [p.lam**i for i in range(p.depth + 1)]
    for i in range(1, p.depth):
        assert l[i] > 2.0 * l[i + 1]
        assert l[i - 1] - 2.0 * l[i] > l[i] - 2.0 * l[i + 1]


def test_eps_out_of_range_rejected():
    with pytest.raises(ValueError):
        CantorParams(n=2, eps=1.5, depth=3)
    with pytest.raises(ValueError):
        CantorParams(n=2, eps=0.0, depth=3)


def test_intervals_nested_disjoint_and_total_length():
    prev = [(-0.5, 0.5)]
    for depth in range(1, 7):
        p = CantorParams(n=2, eps=0.15, depth=depth)
        approx, _ = build_cantor(p)
        ints = list(zip(approx.lefts, approx.rights))
        assert len(ints) == 2**depth
        for (a1, b1), (a2, b2) in zip(ints, ints[1:]):
            assert b1 < a2  # disjoint, ordered
        for a, b in ints:
            assert b - a == pytest.approx(p.lam**depth, rel=1e-12)
            assert any(pa - 1e-15 <= a and b <= pb + 1e-15 for pa, pb in prev)
        prev = ints
    total = sum(b - a for a, b in ints)
    assert total == pytest.approx((2.0 * p.lam) ** p.depth, rel=1e-12)


def test_box_counting_slopes():
    for eps in (0.15, 0.5):
        p = CantorParams(n=2, eps=eps, depth=10)
        approx, _ = build_cantor(p)
        target = 1.0 - eps
        assert approx.box_counting_slope() == pytest.approx(target, abs=1e-12)
        assert abs(approx.dyadic_box_counting_slope() - target) < 0.05


def test_measure_atoms():
    p = CantorParams(n=2, eps=0.15, depth=8)
    _, measure = build_cantor(p)
    assert len(measure.atoms) == 2**8
    assert measure.weight == pytest.approx(2.0**-8, rel=1e-15)
    assert measure.total_mass == pytest.approx(1.0, rel=1e-12)


def test_distance_basics():
    p = CantorParams(n=2, eps=0.5, depth=1)
    approx, _ = build_cantor(p)
    # depth-1 intervals are [-1/2,-1/4] and [1/4,1/2]; the origin is 1/4 away
    assert dist_to_cantor(approx, np.array([0.0])) == pytest.approx(0.25)
    assert dist_to_cantor(approx, np.array([0.3])) == 0.0
    # 1-Lipschitz in xbar
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 200)
    y = rng.uniform(-1, 1, 200)
    dx = np.asarray(dist_to_cantor(approx, x[:, None]))
    dy = np.asarray(dist_to_cantor(approx, y[:, None]))
    assert np.all(np.abs(dx - dy) <= np.abs(x - y) + 1e-12)


def test_distance_monotone_in_depth():
    # deeper constructions are smaller sets, so distances only grow with J
    xs = np.linspace(-0.9, 0.9, 301)[:, None]
    prev = None
    for J in (2, 4, 6, 8):
        approx, _ = build_cantor(CantorParams(n=2, eps=0.15, depth=J))
        d = np.asarray(dist_to_cantor(approx, xs))
        if prev is not None:
            assert np.all(d >= prev - 1e-14)
        prev = d


def test_true_neighborhood_measure():
    p = CantorParams(n=2, eps=0.15, depth=10)
    b = (1.0 - 2.0 * p.lam) / 2.0
    # above the half central gap: m(s) = 1 + 2s
    assert true_neighborhood_measure(p, 0.5) == pytest.approx(2.0, rel=1e-12)
    for k in (0, 1, 3, 7):
        lo = b * p.lam**k
        hi = b * p.lam ** (k - 1) if k else 0.5
        s_mid = 0.5 * (lo + hi)
        # closed form m(s) = (2 lam)^k (1 + 2 s / lam^k) in band k
        expected = (2.0 * p.lam) ** k * (1.0 + 2.0 * s_mid / p.lam**k)
        assert true_neighborhood_measure(p, s_mid) == pytest.approx(
            expected, rel=1e-12)
        got = true_neighborhood_measure_deriv(p, s_mid)
        assert got == pytest.approx(2.0 ** (k + 1), rel=1e-12)
        # consistency with a finite difference of the measure itself
        h = 1e-7 * p.lam**k
        fd = (true_neighborhood_measure(p, s_mid + h)
              - true_neighborhood_measure(p, s_mid - h)) / (2 * h)
        assert fd == pytest.approx(got, rel=1e-6)


def test_self_similar_layer_integral_against_brute_force():
    p = CantorParams(n=2, eps=0.15, depth=10)
    t = 2.0**-6

    def dens(r):
        return 1.0 / (1.0 + r)

    got = self_similar_layer_integral(p, dens, t, 2.0, 4.0)
    # brute force: integrate dens(s/t) dm(s) over s in [2t, 4t] by fine
    # Riemann sum against the closed-form measure derivative
    s = np.linspace(2.0 * t, 4.0 * t, 400_001)
    w = np.array([true_neighborhood_measure_deriv(p, si) for si in s[::400]])
    s_c = s[::400]
    brute = np.trapezoid(dens(s_c / t) * w, s_c)
    assert got == pytest.approx(brute, rel=5e-3)


# ---------------------------------------------------------------------------
# cutoffs, competitors, coefficient, weight


def test_cutoff_values_at_key_ratios(config_j8):
    approx = config_j8.approx
    on_set = approx.lefts[-1] + 0.5 * approx.length  # inside an interval
    X = np.array([[on_set, 0.1]])  # dist/|x_n| = 0: inside both plateaus
    chi_s, chi_a, _, _ = cutoffs(config_j8, X)
    assert chi_s[0] == 1.0 and chi_a[0] == 1.0
    X5 = np.array([[0.0, 0.005]])  # dist/|x_n| > 5 -> both cutoffs vanish
    r5 = np.asarray(dist_to_cantor(approx, X5[:, :1])).item() / 0.005
    assert r5 > 5.0
    chi_s, chi_a, _, _ = cutoffs(config_j8, X5)
    assert chi_s[0] == 0.0 and chi_a[0] == 0.0


def test_cutoffs_singular_plane_guard(config_j8):
    with pytest.raises(SingularPlaneError):
        cutoffs(config_j8, np.array([[0.3, 0.0]]))


def test_cutoff_gradient_finite_difference(config_j8):
    rng = np.random.default_rng(1)
    X = np.column_stack([rng.uniform(-0.6, 0.6, 40),
                         rng.uniform(0.05, 0.4, 40)])
    _, _, g_s, g_a = cutoffs(config_j8, X)
    h = 1e-7
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        sp, ap_, _, _ = cutoffs(config_j8, X + e)
        sm, am, _, _ = cutoffs(config_j8, X - e)
        fd_s = (sp - sm) / (2 * h)
        fd_a = (ap_ - am) / (2 * h)
        on_ramp = np.abs(fd_s) + np.abs(np.asarray(g_s)[:, axis]) > 1e-3
        assert np.allclose(np.asarray(g_s)[on_ramp, axis], fd_s[on_ramp],
                           rtol=1e-4, atol=1e-5)
        on_ramp = np.abs(fd_a) + np.abs(np.asarray(g_a)[:, axis]) > 1e-3
        assert np.allclose(np.asarray(g_a)[on_ramp, axis], fd_a[on_ramp],
                           rtol=1e-4, atol=1e-5)


def test_competitor_values(config_j8):
    # on the plateau (r <= 2, x_n > 0) the jump competitor is exactly 1/2
    X = np.array([[0.31, 0.05], [0.31, -0.05]])
    u = competitor_u_star(config_j8, X)
    assert u[0] == pytest.approx(0.5) and u[1] == pytest.approx(-0.5)
    # u_tilde vanishes on the inner box
    rng = np.random.default_rng(2)
    Xi = rng.uniform(-0.74, 0.74, (100, 2))
    Xi = Xi[np.abs(Xi[:, 1]) > 1e-3]
    assert np.all(competitor_u_tilde(config_j8, Xi) == 0.0)
    # traces agree on the boundary frame (|x|_inf >= 5/6)
    Xb = np.column_stack([rng.uniform(-1, 1, 50), np.full(50, 0.9)])
    assert np.allclose(competitor_u_tilde(config_j8, Xb),
                       competitor_u_star(config_j8, Xb))


def test_grad_u_star_support_and_bound(config_j8):
    rng = np.random.default_rng(3)
    X = np.column_stack([rng.uniform(-0.6, 0.6, 3000),
                         rng.uniform(0.01, 0.3, 3000)])
    G = grad_u_star(config_j8, X)
    mag = np.sqrt(np.sum(G * G, axis=-1))
    t = X[:, 1]
    r = np.asarray(dist_to_cantor(config_j8.approx, X[:, :1])) / t
    off = (r < 2.0 - 1e-9) | (r > 4.0 + 1e-9)
    assert np.all(mag[off] == 0.0)
    # |Du_*| <= C / |x_n| on the ramp ring (C from the cubic ramp, slope 3)
    assert np.all(mag <= 3.2 * np.sqrt(1.0 + 16.0) / (2.0 * t) + 1e-9)


def test_coefficient_and_weight_closed_forms(config_j8):
    X = np.array([[0.31, 0.5]])
    r = np.asarray(dist_to_cantor(config_j8.approx, X[:, :1])).item() / 0.5
    assert r < 0.5  # chi_a plateau
    a = fractal_coefficient_a(config_j8, X)
    assert a[0] == pytest.approx(math.sqrt(0.5), rel=1e-12)
    Xb = np.array([[0.31, 0.25]])
    b = weight_b(config_j8, Xb)
    assert b[0] == pytest.approx(0.25**-0.15, rel=1e-12)


def test_support_disjointness_sampled(config_j8):
    # {|Du_*| != 0} subset {a = 0} and {b != 0} subset {a = |x_n|^alpha}
    rng = np.random.default_rng(4)
    t = 2.0 ** rng.uniform(-12, -1, 100_000)
    x1 = rng.uniform(-0.7, 0.7, 100_000)
    X = np.column_stack([x1, t])
    G = grad_u_star(config_j8, X)
    mag = np.sqrt(np.sum(G * G, axis=-1))
    a = np.asarray(fractal_coefficient_a(config_j8, X))
    b = np.asarray(weight_b(config_j8, X))
    assert np.all(a[mag > 0] == 0.0)
    assert np.allclose(a[b > 0], t[b > 0] ** config_j8.alpha, rtol=1e-12)


# ---------------------------------------------------------------------------
# dual field


def test_dual_field_vanishes_far_from_atoms(config_j8):
    X = np.array([[0.0, 0.01], [0.05, 0.005]])
    for row in X:
        d = np.asarray(dist_to_cantor(config_j8.approx,
                                      row[None, :1])).item()
        if d > abs(row[1]):
            z = dual_field_z(config_j8, row[None])
            assert np.all(z == 0.0)


def test_dual_field_atom_collision_guard(config_j8):
    atom = float(config_j8.measure.atoms[3, 0])
    X = np.array([[atom, 1e-14]])
    with pytest.raises((AtomCollisionError, SingularPlaneError)):
        dual_field_z(config_j8, X)


def test_dual_field_divergence_free(config_j8):
    # integral of <D phi, z> vanishes for bumps supported away from C
    rng = np.random.default_rng(5)
    res = 220
    xs = np.linspace(-1, 1, res + 1)[:-1] + 1.0 / res
    Xg, Yg = np.meshgrid(xs, xs, indexing="ij")
    P = np.column_stack([Xg.ravel(), Yg.ravel()])
    keep = np.abs(P[:, 1]) > 0.05
    z = np.zeros((P.shape[0], 2))
    z[keep] = dual_field_z(config_j8, P[keep])
    for _ in range(5):
        cx, cy = rng.uniform(-0.4, 0.4), rng.uniform(0.25, 0.6)
        sgn = rng.choice([-1.0, 1.0])
        rad = 0.12
        d2 = (P[:, 0] - cx) ** 2 + (P[:, 1] - sgn * cy) ** 2
        arg = np.clip(1.0 - d2 / rad**2, 0.0, None)
        # D of bump (1 - d2/rad^2)^2
        dphi = (-4.0 * arg / rad**2)[:, None] * np.column_stack(
            [P[:, 0] - cx, P[:, 1] - sgn * cy])
        val = np.sum(dphi * z) * (2.0 / res) ** 2
        assert abs(val) < 5e-3


def test_pairing_close_to_one(config_j8):
    raw = pairing_quadrature(config_j8)
    # frozen quadrature value at depth 8, resolution 512: 1.000269
    assert raw == pytest.approx(1.000269, abs=5e-4)
    assert 0.98 <= raw <= 1.02


def test_pairing_calibration_and_linearity(config_j8):
    cal = calibrate_pairing(config_j8)
    assert cal.scale == pytest.approx(1.0 / cal.raw, rel=1e-12)
    assert abs(cal.scale - 1.0) < 0.02


def test_config_serialization_roundtrip(config_j8):
    calibrate_pairing(config_j8)
    text = config_j8.to_text()
    clone = CounterexampleConfig.from_text(text)
    assert clone.cantor.eps == config_j8.cantor.eps
    assert clone.cantor.depth == config_j8.cantor.depth
    assert clone.alpha == config_j8.alpha
    assert clone.q == config_j8.q
    assert clone.z_scale == pytest.approx(config_j8.z_scale, rel=1e-15)
    assert clone.to_text() == text


# ---------------------------------------------------------------------------
# parameter selection arithmetic


def test_selection_feasibility_guard():
    # q <= 1 + alpha is rejected (either at construction or selection)
    with pytest.raises(ValueError):
        cfg = CounterexampleConfig(
            cantor=CantorParams(n=2, eps=0.15, depth=4), alpha=0.5, q=1.4)
        select_parameters(cfg)


def test_selection_exponent_arithmetic():
    # q' = 2.25 and alpha q' - (1+alpha) = -0.375 < 0 for (0.5, 1.8)
    alpha, q = 0.5, 1.8
    qp = q / (q - 1.0)
    assert qp == pytest.approx(2.25)
    assert alpha * qp - (1.0 + alpha) == pytest.approx(-0.375)
    # layer exponent of the conjugate chain is integrable:
    eps = 0.15
    expo = -(alpha + eps * q) / (q - 1.0) + eps
    assert expo == pytest.approx(-0.8125)
    assert expo > -1.0
