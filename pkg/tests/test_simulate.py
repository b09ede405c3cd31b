import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.stats import qmc

from fosdbounds.bounds import solve_gamma_bound
from fosdbounds.errors import ConfigError, RelevanceError
from fosdbounds.simulate import (
    DgpConfig, bvn_cdf, default_grid, draw_sample, norm_cdf, population_joint, population_marginal,
    population_model, true_counterfactual_cdf, true_counterfactual_mean, true_counterfactual_quantile,
)


def bvn_quad(x, y, r):
    """Plackett's identity: derivative in rho of the orthant probability is the density."""
    dens = lambda t: math.exp(-(x * x - 2 * t * x * y + y * y) / (2 * (1 - t * t))) / (2 * math.pi * math.sqrt(1 - t * t))  # noqa: E731
    return stats.norm.cdf(x) * stats.norm.cdf(y) + integrate.quad(dens, 0.0, r, epsabs=1e-14, epsrel=1e-13)[0]


def latent_draws(cfg, n, seed):
    """Independent sampler of the design returning both potential outcomes."""
    rng = np.random.default_rng(seed)
    U = rng.standard_normal(n)
    eta = cfg.rho * U + math.sqrt(1 - cfg.rho**2) * rng.standard_normal(n)
    xi1 = cfg.sigma_xi * rng.standard_normal(n)
    xi0 = xi1 + cfg.sigma_v * rng.standard_normal(n)
    z = rng.binomial(cfg.L - 1, cfg.binom_p, n) / (cfg.L - 1)
    D = cfg.pi0 + cfg.pi1 * z >= eta
    return 2 * (U + xi1), 1 + U + xi0, D, z


def binom_se(p, m):
    """Sampling sd of a frequency under the population value (plus one count of slack)."""
    return np.sqrt(p * (1 - p) / m) + 1.0 / m


def test_bvn_closed_forms():
    assert bvn_cdf(0.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-15)
    assert bvn_cdf(0.0, 0.0, 0.5) == pytest.approx(1 / 3, abs=1e-14)
    assert bvn_cdf(0.0, 0.0, -0.5) == pytest.approx(1 / 6, abs=1e-14)


def test_bvn_against_qmc():
    pts = qmc.Sobol(2, scramble=True, seed=1).random_base2(22)
    z = stats.norm.ppf(pts)
    a = z[:, 0]
    b = 0.7 * z[:, 0] + math.sqrt(1 - 0.49) * z[:, 1]
    est = np.mean((a <= 0.3) & (b <= -0.2))
    assert bvn_cdf(0.3, -0.2, 0.7) == pytest.approx(est, abs=3e-5)


@given(st.floats(-6, 6), st.floats(-6, 6), st.floats(-0.999, 0.999))
def test_bvn_against_plackett_quadrature(x, y, r):
    assert bvn_cdf(x, y, r) == pytest.approx(bvn_quad(x, y, r), abs=1e-10)


def test_bvn_vectorized_and_limits():
    x = np.array([-40.0, 0.0, 40.0])
    np.testing.assert_allclose(bvn_cdf(x, np.full(3, 40.0), 0.3), norm_cdf(x), atol=1e-15)


def test_config_validation_and_round_trip():
    with pytest.raises(ConfigError) as err:
        DgpConfig(rho=1.5)
    assert err.value.field == "rho"
    for bad in (dict(sigma_xi=-1), dict(binom_p=1.0), dict(L=1), dict(n=0)):
        with pytest.raises(ConfigError):
            DgpConfig(**bad)
    cfg = DgpConfig(rho=-0.2, L=4)
    assert DgpConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError):
        DgpConfig.from_dict({"nope": 1})


@pytest.mark.parametrize("L", [2, 3, 6, 9])
def test_instrument_endpoints(L):
    s = draw_sample(DgpConfig(L=L, n=5000))
    assert s.support.levels[0] == 0.0 and s.support.levels[-1] == 1.0
    assert s.support.L == L
    if L == 2:
        assert set(s.z) == {0.0, 1.0}


def test_same_seed_same_sample():
    a, b = draw_sample(DgpConfig(n=500, seed=9)), draw_sample(DgpConfig(n=500, seed=9))
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.d, b.d)
    c = draw_sample(DgpConfig(n=500, seed=10))
    assert not np.array_equal(a.y, c.y)


def test_correlation_without_endogeneity():
    cfg = DgpConfig(rho=0.0, pi1=0.0, n=400_000, seed=4)
    s = draw_sample(cfg)
    p = norm_cdf(cfg.pi0)
    v1 = 4 * (1 + cfg.sigma_xi**2)
    v0 = 1 + cfg.sigma_xi**2 + cfg.sigma_v**2
    var_y = p * v1 + (1 - p) * v0 + p * (1 - p) * 1.0
    r = -p * (1 - p) / math.sqrt(p * (1 - p) * var_y)
    r_hat = np.corrcoef(s.d, s.y)[0, 1]
    assert abs(r_hat - r) <= 3 * (1 - r * r) / math.sqrt(cfg.n)


def test_variance_of_treated_potential_outcome():
    cfg = DgpConfig()
    y1, _, _, _ = latent_draws(cfg, 1_000_000, 5)
    target = 4 * (1 + cfg.sigma_xi**2)
    # var of a sample variance of a normal: 2 sigma^4 / (n - 1)
    assert abs(y1.var() - target) <= 4 * math.sqrt(2 * target**2 / 999_999)


def test_population_against_monte_carlo():
    cfg = DgpConfig()
    n = 4_000_000
    y1, y0, D, z = latent_draws(cfg, n, 11)
    Y = np.where(D, y1, y0)
    grid = np.array([-3.0, -1.0, 0.0, 0.7, 2.0, 4.0])
    for lvl in (0.2, 0.6, 1.0):
        at = np.isclose(z, lvl)
        m = at.sum()
        for d in (0, 1):
            mc = np.array([np.mean((Y[at] <= y) & (D[at] == d)) for y in grid])
            pop = population_joint(cfg, grid, d)[:, int(round(lvl * (cfg.L - 1)))]
            assert np.all(np.abs(mc - pop) <= 4 * binom_se(pop, m))
    for d in (0, 1):
        mc = np.array([np.mean(Y[D == d] <= y) for y in grid])
        pop = population_marginal(cfg, grid, d)
        assert np.all(np.abs(mc - pop) <= 4 * binom_se(pop, np.sum(D == d)))
    # counterfactual of the treated
    mc = np.array([np.mean(y0[D] <= y) for y in grid])
    pop = true_counterfactual_cdf(cfg, grid)
    assert np.all(np.abs(mc - pop) <= 4 * binom_se(pop, D.sum()))
    mc = np.array([np.mean(y1[~D] <= y) for y in grid])
    pop = true_counterfactual_cdf(cfg, grid, "untreated")
    assert np.all(np.abs(mc - pop) <= 4 * binom_se(pop, (~D).sum()))
    assert true_counterfactual_mean(cfg) == pytest.approx(y0[D].mean(), abs=4 * y0[D].std() / math.sqrt(D.sum()))


def test_counterfactual_collapses_without_noise():
    cfg = DgpConfig(rho=0.0, sigma_xi=0.0, sigma_v=0.0)
    y = np.linspace(-3, 5, 41)
    np.testing.assert_allclose(true_counterfactual_cdf(cfg, y), norm_cdf(y - 1), atol=1e-12)


@pytest.mark.parametrize("arm", ["treated", "untreated"])
def test_counterfactual_is_a_cdf(arm):
    cfg = DgpConfig()
    y = np.linspace(-30, 30, 2001)
    F = true_counterfactual_cdf(cfg, y, arm)
    assert np.all(np.diff(F) >= -1e-15)
    assert F[0] < 1e-12 and F[-1] > 1 - 1e-12
    q = true_counterfactual_quantile(cfg, 0.3, arm)
    assert true_counterfactual_cdf(cfg, np.array([q]), arm)[0] == pytest.approx(0.3, abs=1e-10)


def test_population_model_invariants():
    cfg = DgpConfig()
    m = population_model(cfg)
    for d in (0, 1):
        J = m.joint_subcdf[d]
        assert np.all(np.diff(J, axis=0) >= -1e-15)
        assert J.min() >= 0 and J.max() <= 1
        assert np.all(np.diff(m.marginal_cdf[d]) >= -1e-15)
    top = default_grid(cfg, size=3, width=10.0)[-1:]
    total = population_joint(cfg, top, 1) + population_joint(cfg, top, 0)
    np.testing.assert_allclose(total, 1.0, atol=1e-8)
    np.testing.assert_allclose(m.propensity, norm_cdf(cfg.pi0 + cfg.pi1 * cfg.levels))


def test_irrelevant_instrument_raises():
    m = population_model(DgpConfig(pi1=0.0, L=3))
    with pytest.raises(RelevanceError):
        solve_gamma_bound(m, 0.5)
