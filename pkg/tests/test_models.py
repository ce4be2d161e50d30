import numpy as np
import pytest

from seeds_sde import (
    DataDistribution,
    Edm,
    RngStream,
    ScoreModel,
    SolverSpec,
    Ve,
    linear_lambda_grid,
    sample,
    zero_model,
)
from seeds_sde.errors import ConfigError


def test_single_gaussian_vp_score_closed_form(vp):
    sd = 1.7
    model = ScoreModel(DataDistribution(np.array([1.0]), np.zeros((1, 2)),
                                        np.full((1, 2), sd * sd)), vp)
    x = np.array([0.4, -1.2])
    for t in (0.05, 0.4, 0.9):
        a, _, sbar = vp.alpha_sigma(t)
        expected = -x / (a * a * sd * sd + sbar * sbar)
        assert np.allclose(model.score(x, t), expected, rtol=1e-13)


def test_single_gaussian_edm_score_closed_form():
    sd = 0.8
    sched = Edm(sigma_data=sd)
    model = ScoreModel(DataDistribution(np.array([1.0]), np.zeros((1, 1)),
                                        np.array([[sd * sd]])), sched)
    x = np.array([2.0])
    for t in (0.1, 1.0, 10.0):
        assert np.allclose(model.score(x, t), -x / (t * t + sd * sd), rtol=1e-13)


def test_symmetric_mixture_score_zero_at_origin(mixture_model):
    assert np.allclose(mixture_model.score(np.zeros(1), 0.5), 0.0, atol=1e-14)


def test_mixture_score_matches_finite_differences(mixture_model):
    rng = np.random.default_rng(3)
    eps = 1e-5
    for _ in range(100):
        x = rng.normal(size=1) * 2.0
        t = float(rng.uniform(0.05, 1.0))
        fd = (mixture_model.log_density(x + eps, t) - mixture_model.log_density(x - eps, t)) / (2 * eps)
        sc = mixture_model.score(x, t)[0]
        assert abs(sc - fd) <= 1e-6 * max(1.0, abs(fd))


def test_score_log_space_far_tail(vp):
    # far-tail x at small sigma must not underflow to nan/inf
    model = ScoreModel(DataDistribution.standard_normal(1), vp)
    val = model.score(np.array([500.0]), vp.t_min)
    assert np.isfinite(val).all()


def test_noise_pred_closed_form_and_sign(vp, gauss_model):
    x = np.array([0.7])
    for t in (0.2, 0.8):
        a, _, sbar = vp.alpha_sigma(t)
        expected = sbar * x / (a * a + sbar * sbar)
        assert np.allclose(gauss_model.noise_pred(x, t), expected, rtol=1e-12)
    assert np.allclose(gauss_model.noise_pred(np.zeros(1), 0.5), 0.0, atol=1e-15)


def test_edm_inversion_round_trip():
    sched = Edm(sigma_data=0.6)
    data = DataDistribution(np.array([0.7, 0.3]), np.array([[0.5], [-1.0]]),
                            np.array([[0.4], [0.9]]))
    model = ScoreModel(data, sched)
    x = np.array([0.9])
    for t in (0.05, 1.3, 20.0):
        direct = model.score(x, t)
        via_net = model.score_from_model(x, t)
        assert np.allclose(direct, via_net, rtol=1e-12, atol=1e-15)


def test_data_pred_relations(vp):
    data = DataDistribution(np.array([0.6, 0.4]), np.array([[0.3], [-0.9]]),
                            np.array([[0.5], [1.2]]))
    model = ScoreModel(data, vp)
    x = np.array([0.25])
    for t in (0.1, 0.6):
        a, s, _ = vp.alpha_sigma(t)
        f_val = model.noise_pred(x, t)
        d_val = model.data_pred(x, t)
        # reconstruction identity x/alpha = D + sigma F
        assert np.allclose(x / a, d_val + s * f_val, rtol=1e-12)

    ve_model = ScoreModel(data, Ve())
    x = np.array([0.4])
    t = 1.7
    d_val = ve_model.data_pred(x, t)
    assert np.allclose(d_val, x + t * t * ve_model.score(x, t), rtol=1e-12)

    edm = Edm(sigma_data=0.5)
    edm_model = ScoreModel(data, edm)
    t = 2.1
    pc = edm.precond(t)
    f_val = edm_model.noise_pred(x, t)
    d_val = edm_model.data_pred(x, t)
    assert np.allclose(d_val, pc.c1 * x + pc.c2 * f_val, rtol=1e-12)


def test_data_pred_small_time_limit(vp, gauss_model):
    x = np.array([0.8])
    d_val = gauss_model.data_pred(x, vp.t_min)
    assert np.allclose(d_val, x, atol=1e-4)


def test_posterior_mean_is_ideal_denoiser(vp):
    # D equals the Bayes posterior mean m + alpha V (x - alpha m) / (alpha^2 V + sbar^2)
    sd2, m = 0.5, 0.3
    model = ScoreModel(DataDistribution(np.array([1.0]), np.array([[m]]),
                                        np.array([[sd2]])), vp)
    x = np.array([1.1])
    t = 0.4
    a, _, sbar = vp.alpha_sigma(t)
    posterior = m + a * sd2 * (x - a * m) / (a * a * sd2 + sbar * sbar)
    assert np.allclose(model.data_pred(x, t), posterior, rtol=1e-12)


def test_zero_model_contract(vp):
    zm = zero_model(2, vp)
    x = np.array([1.0, -2.0])
    assert np.all(zm.noise_pred(x, 0.5) == 0.0)
    a = vp.alpha_sigma(0.5)[0]
    assert np.allclose(zm.data_pred(x, 0.5), x / a, rtol=1e-15)
    assert zm.nfe == 2  # the accounting contract still holds


def test_nfe_accounting(vp, gauss_model):
    grid = linear_lambda_grid(7, vp.t_min, vp.t_max, vp)
    for fam, k in (("seeds1", 1), ("seeds2", 2), ("seeds3", 3), ("dpm4", 5)):
        gauss_model.reset_nfe()
        res = sample(gauss_model, vp, grid, SolverSpec(fam), RngStream(0), n_paths=3)
        assert gauss_model.nfe == k * (grid.n_steps - 1)
        assert res.nfe_per_path == k * (grid.n_steps - 1)
    gauss_model.reset_nfe()


def test_data_distribution_validation():
    with pytest.raises(ConfigError):
        DataDistribution(np.array([0.5, 0.4]), np.zeros((2, 1)), np.ones((2, 1)))
    with pytest.raises(ConfigError):
        DataDistribution(np.array([1.0]), np.zeros((1, 1)), -np.ones((1, 1)))
    with pytest.raises(ConfigError):
        DataDistribution(np.array([-1.0, 2.0]), np.zeros((2, 1)), np.ones((2, 1)))
    d = DataDistribution.from_components([
        {"weight": 0.25, "mean": [1.0, 0.0], "var": [1.0, 2.0]},
        {"weight": 0.75, "mean": [-1.0, 0.0], "var": 0.5},
    ])
    assert d.dim == 2 and d.variances[1, 1] == 0.5
