import math

import numpy as np
import pytest
import sympy
from scipy import stats

from seeds_sde import DomainError, RngStream, VpLinear, ZeroStream
from seeds_sde.errors import ConfigError
from seeds_sde.noise import (
    chasles_refine,
    correlated_pair,
    raw_increment_var,
    staged_noise_seeds2,
    staged_noise_seeds3,
    weak_point_increment,
    weighted_increment_std,
)

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def quad_exp_neg2(lam_a, lam_b):
    mid, half = 0.5 * (lam_a + lam_b), 0.5 * (lam_b - lam_a)
    return float(np.sum(GL_WEIGHTS * np.exp(-2.0 * (mid + half * GL_NODES))) * half)


class FixedGen:
    """Generator stub feeding preset unit normals / uniforms."""

    def __init__(self, normals=(), uniforms=()):
        self._normals = list(normals)
        self._uniforms = list(uniforms)

    def standard_normal(self, shape=()):
        v = self._normals.pop(0)
        return np.full(shape, v) if shape else np.float64(v)

    def random(self, shape=()):
        v = self._uniforms.pop(0)
        return np.full(shape, v) if shape else np.float64(v)


# -- keyed substreams ---------------------------------------------------------


def test_gauss_deterministic():
    stream = RngStream(42)
    a = stream.gauss(0, 0, 0, 3)
    b = stream.gauss(0, 0, 0, 3)
    assert np.array_equal(a, b)
    assert a.shape == (3,)


def test_distinct_streams_differ():
    stream = RngStream(42)
    base = stream.gauss(5, 7, 1, 4)
    for other in (stream.gauss(6, 7, 1, 4), stream.gauss(5, 8, 1, 4), stream.gauss(5, 7, 2, 4)):
        assert not np.allclose(base, other)
    assert not np.allclose(base, RngStream(43).gauss(5, 7, 1, 4))


def test_normal_paths_partition_invariance():
    stream = RngStream(7)
    full = stream.normal_paths(3000, 4, 1, 2)
    pieces = np.concatenate(
        [stream.normal_paths(1000, 4, 1, 2, offset=o) for o in (0, 1000, 2000)]
    )
    assert np.array_equal(full, pieces)
    # row p equals the per-trajectory draw
    assert np.array_equal(full[1537], stream.gauss(1537, 4, 1, 2))


def test_gauss_moments_and_ks():
    stream = RngStream(123)
    draws = stream.normal_paths(1_000_000, 0, 0, 1).ravel()
    assert abs(draws.mean()) < 5.0 / math.sqrt(1_000_000)
    ks = stats.kstest(draws[:100_000], "norm").statistic
    assert ks < 1.628 / math.sqrt(100_000)  # alpha = 0.01 critical value


def test_zero_stream():
    zs = ZeroStream()
    assert np.all(zs.gauss(0, 0, 0, 3) == 0.0)
    assert np.all(zs.normal_paths(5, 1, 1, 2) == 0.0)


# -- analytic increment laws --------------------------------------------------


def test_weighted_increment_std_anchors():
    h = math.log(math.sqrt(2.0))
    assert weighted_increment_std(1.0, h, "np") == pytest.approx(1.0, rel=1e-14)
    assert weighted_increment_std(1.0, h, "dp") == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-14)
    assert weighted_increment_std(1.0, 1e-300, "np") == pytest.approx(0.0, abs=1e-140)
    with pytest.raises(DomainError):
        weighted_increment_std(1.0, 0.0, "np")
    with pytest.raises(DomainError):
        weighted_increment_std(1.0, -0.1, "dp")
    with pytest.raises(ConfigError):
        weighted_increment_std(1.0, 0.1, "xx")


def test_ito_isometry_vs_quadrature():
    for lam_a, lam_b in ((-3.0, -1.0), (-0.5, 0.5), (0.2, 2.7), (1.0, 1.001)):
        quad = quad_exp_neg2(lam_a, lam_b)
        assert raw_increment_var(lam_a, lam_b) == pytest.approx(quad, rel=1e-12)


def test_np_increment_matches_isometry():
    # sigma_bar^2 (e^{2h} - 1) == 2 alpha^2 * integral e^{-2 lam}
    sched = VpLinear()
    s, t = 0.8, 0.35
    lam_s, lam_t = sched.lambda_of_t(s), sched.lambda_of_t(t)
    a_t, _, sbar_t = sched.alpha_sigma(t)
    var = weighted_increment_std(sbar_t, lam_t - lam_s, "np") ** 2
    assert var == pytest.approx(2.0 * a_t * a_t * quad_exp_neg2(lam_s, lam_t), rel=1e-12)


# -- staged noise -------------------------------------------------------------


def test_staged_seeds2_zero_draws():
    mid, full = staged_noise_seeds2(np.zeros(3), np.zeros(3), 1.0, 1.0, 0.4)
    assert np.all(mid == 0.0) and np.all(full == 0.0)


def test_staged_seeds2_telescoping_coefficients():
    h, sbar = 0.3, 1.37
    z1 = np.array([1.0])
    mid, c1 = staged_noise_seeds2(z1, np.zeros(1), 1.0, sbar, h)
    _, c2 = staged_noise_seeds2(np.zeros(1), z1, 1.0, sbar, h)
    assert c1[0] ** 2 + c2[0] ** 2 == pytest.approx(sbar**2 * math.expm1(2 * h), rel=1e-13)
    assert mid[0] == pytest.approx(math.sqrt(math.expm1(h)), rel=1e-13)


def test_staged_seeds2_empirical_variance():
    h, sbar = 0.3, 1.0
    n = 1_000_000
    gen = np.random.Generator(np.random.Philox(key=5))
    z1 = gen.standard_normal(n)
    z2 = gen.standard_normal(n)
    _, full = staged_noise_seeds2(z1, z2, 1.0, sbar, h)
    target = sbar**2 * math.expm1(2 * h)
    se = target * math.sqrt(2.0 / (n - 1))
    assert abs(full.var() - target) < 5.0 * se


def test_staged_seeds3_tiny_h_vanishes():
    ones = np.ones(2)
    n1, a, b = staged_noise_seeds3(ones, ones, ones, 1.0, 1.0, 1.0, 1e-12, 1 / 3, 2 / 3)
    for arr in (n1, a, b):
        assert np.all(np.abs(arr) < 1e-5)


def test_staged_seeds3_telescoping():
    h, r1, r2, sbar = 0.6, 1 / 3, 2 / 3, 0.9
    coefs = []
    for j in range(3):
        z = [np.zeros(1), np.zeros(1), np.zeros(1)]
        z[j] = np.ones(1)
        _, _, b = staged_noise_seeds3(*z, 1.0, 1.0, sbar, h, r1, r2)
        coefs.append(b[0])
    assert sum(c * c for c in coefs) == pytest.approx(sbar**2 * math.expm1(2 * h), rel=1e-13)


def test_staged_seeds3_cross_covariance_symbolic_oracle():
    # Cov(A * sbar_t / sbar_s2, B) derived by symbolic expansion over iid z's
    h, r1, r2 = 0.6, 1 / 3, 2 / 3
    sbar_s1, sbar_s2, sbar_t = 0.8, 0.9, 1.0
    z1, z2, z3 = sympy.symbols("z1 z2 z3")
    e2 = lambda a: sympy.exp(a)
    a_expr = sbar_s2 * (sympy.sqrt(e2(2 * r2 * h) - e2(2 * r1 * h)) * z1
                        + sympy.sqrt(e2(2 * r1 * h) - 1) * z2)
    b_expr = sbar_t * (sympy.sqrt(e2(2 * h) - e2(2 * r2 * h)) * z1
                       + sympy.sqrt(e2(2 * r2 * h) - e2(2 * r1 * h)) * z2
                       + sympy.sqrt(e2(2 * r1 * h) - 1) * z3)
    prod = sympy.expand(a_expr * sbar_t / sbar_s2 * b_expr)
    # E over iid standard normals: z_i z_j -> delta_ij
    cov = 0
    for term, coef in prod.as_coefficients_dict().items():
        if term in (z1**2, z2**2, z3**2):
            cov += coef
    cov = float(cov)

    n = 1_000_000
    gen = np.random.Generator(np.random.Philox(key=17))
    zs = [gen.standard_normal(n) for _ in range(3)]
    _, a_draw, b_draw = staged_noise_seeds3(*zs, sbar_s1, sbar_s2, sbar_t, h, r1, r2)
    prod_draw = (a_draw * sbar_t / sbar_s2) * b_draw
    se = prod_draw.std() / math.sqrt(n)
    assert abs(prod_draw.mean() - cov) < 5.0 * se


# -- Chasles refinement -------------------------------------------------------


def test_chasles_single_interval_matches_full_variance():
    lam = np.array([-1.0, 0.7])
    var = raw_increment_var(-1.0, 0.7)
    gen = np.random.Generator(np.random.Philox(key=3))
    draws = chasles_refine(gen, lam, size=200_000)
    se = var * math.sqrt(2.0 / 200_000)
    assert abs(draws[0].var() - var) < 5.0 * se


def test_chasles_halves_sum_exactly():
    lam_s, lam_t = -0.8, 1.1
    mid = 0.5 * (lam_s + lam_t)
    v = raw_increment_var(lam_s, mid) + raw_increment_var(mid, lam_t)
    assert v == pytest.approx(raw_increment_var(lam_s, lam_t), rel=1e-13)


def test_chasles_refined_sum_reproduces_variance():
    # coarse increment built from 8 fine pieces has the full-interval variance
    sched = VpLinear()
    s, t = 0.9, 0.4
    lam_s, lam_t = sched.lambda_of_t(s), sched.lambda_of_t(t)
    h = lam_t - lam_s
    sigma_t = sched.alpha_sigma(t)[1]
    partition = np.linspace(lam_s, lam_t, 9)
    gen = np.random.Generator(np.random.Philox(key=11))
    n = 1_000_000
    fine = chasles_refine(gen, partition, size=n)
    total = fine.sum(axis=0)
    target = 0.5 * sigma_t**2 * math.expm1(2.0 * h)
    se = target * math.sqrt(2.0 / n)
    assert abs(total.var() - target) < 5.0 * se


def test_chasles_rejects_bad_partition():
    gen = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        chasles_refine(gen, [0.0, -1.0])
    with pytest.raises(ConfigError):
        chasles_refine(gen, [0.0])


# -- correlated pair and weak increments -------------------------------------


def test_correlated_pair_unit_basis():
    h = 0.37
    w, z = correlated_pair(FixedGen(normals=[1.0, 0.0]), h)
    assert w == pytest.approx(math.sqrt(h), rel=1e-15)
    assert z == pytest.approx(h * math.sqrt(h) / 2.0, rel=1e-15)


def test_correlated_pair_covariance():
    h, n = 0.2, 1_000_000
    gen = np.random.Generator(np.random.Philox(key=23))
    w, z = correlated_pair(gen, h, size=n)
    target = np.array([[h, h * h / 2.0], [h * h / 2.0, h**3 / 3.0]])
    emp = np.cov(np.stack([w, z]), bias=True)
    # 5 SE entrywise, SE estimated from the product samples
    for (i, j), prods in (((0, 0), w * w), ((0, 1), w * z), ((1, 1), z * z)):
        se = prods.std() / math.sqrt(n)
        assert abs(emp[i, j] - target[i, j]) < 5.0 * se
    assert abs((z**2).mean() - h**3 / 3.0) < 5.0 * (z**2).std() / math.sqrt(n)


def test_weak_point_increment_order1():
    h = 0.5
    draws = weak_point_increment(np.random.default_rng(1), h, 1, size=10_000)
    assert np.all(np.isclose(np.abs(draws), math.sqrt(h)))
    mean_se = math.sqrt(h) / math.sqrt(10_000)
    assert abs(draws.mean()) < 5.0 * mean_se


def test_weak_point_increment_order2_moments():
    h, n = 0.4, 1_000_000
    gen = np.random.Generator(np.random.Philox(key=29))
    draws = weak_point_increment(gen, h, 2, size=n)
    vals = sorted(set(np.round(draws, 12)))
    assert vals == sorted({0.0, round(math.sqrt(3 * h), 12), round(-math.sqrt(3 * h), 12)})
    sq = draws**2
    assert abs(sq.mean() - h) < 5.0 * sq.std() / math.sqrt(n)
    quart = draws**4
    assert abs(quart.mean() - 3.0 * h * h) < 5.0 * quart.std() / math.sqrt(n)
    with pytest.raises(ConfigError):
        weak_point_increment(gen, h, 3)
