import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import lambertw
from scipy.stats import norm

from biasbound.simulate import (ArgMax, ArgMin, ExponentialIID, FixedIndex,
                                GaussianIID, HeavyTailIID, SoftMax,
                                SWEEP_CSV_HEADER, TopKUniform,
                                extreme_norming_constant, frechet_mean,
                                heavy_tail_beta_norm, norming_constant,
                                run_experiment, sample, sweep_to_csv,
                                tightness_sweep)


def heavy_quantile_oracle(model, u):
    """Closed-form quantile via Lambert W (independent of the bisection)."""
    log_k = model.beta * math.log(model.x0) + model.c * math.log(math.log(model.x0))
    k = math.exp(log_k) / (1.0 - u)
    w = lambertw(model.beta / model.c * k ** (1.0 / model.c)).real
    return math.exp(model.c / model.beta * w)


def test_sample_gaussian_mean():
    model = GaussianIID(mu=0.0, sigma=1.0, n=1_000_000)
    x = sample(model, np.random.default_rng(0))
    assert abs(float(x.mean())) <= 0.004
    assert abs(float(x.std()) - 1.0) <= 0.01


def test_sample_exponential_mean():
    model = ExponentialIID(rate=2.0, n=500_000)
    x = sample(model, np.random.default_rng(1))
    assert float(x.mean()) == pytest.approx(0.5, abs=0.005)
    assert np.all(x >= 0)


def test_model_validation():
    with pytest.raises(ValueError):
        GaussianIID(sigma=0.0)
    with pytest.raises(ValueError):
        ExponentialIID(rate=-1.0)
    with pytest.raises(ValueError):
        HeavyTailIID(beta=0.5)
    with pytest.raises(ValueError):
        HeavyTailIID(c=1.0)
    with pytest.raises(ValueError):
        HeavyTailIID(beta=3.0, x0=1.0)  # x0 <= e^(1/3)
    with pytest.raises(ValueError):
        GaussianIID(n=0)


def test_heavy_tail_cdf_quantile_inverse_pair():
    model = HeavyTailIID(beta=3.0, c=2.0, x0=math.e, n=5)
    us = np.array([0.0, 0.1, 0.5, 0.9, 0.999, 1 - 1e-9])
    xs = model.inverse_cdf(us)
    assert xs[0] == pytest.approx(model.x0, rel=1e-12)
    back = model.cdf(xs)
    assert np.max(np.abs(back - us)) <= 1e-9
    # against the Lambert-W closed form
    for u in (0.2, 0.7, 0.99, 1 - 1e-6):
        assert float(model.inverse_cdf(u)) == pytest.approx(
            heavy_quantile_oracle(model, u), rel=1e-10)


def test_heavy_tail_quantile_other_params():
    for beta, c, x0 in [(2.0, 1.5, 2.5), (4.0, 3.0, 1.4), (1.5, 2.0, 2.0)]:
        model = HeavyTailIID(beta=beta, c=c, x0=x0, n=3)
        for u in (0.0, 0.3, 0.9, 0.9999):
            assert float(model.inverse_cdf(u)) == pytest.approx(
                heavy_quantile_oracle(model, u), rel=1e-10)
    with pytest.raises(ValueError):
        HeavyTailIID(n=2).inverse_cdf(1.0)
    with pytest.raises(ValueError):
        HeavyTailIID(n=2).inverse_cdf(-0.1)


def test_heavy_tail_mean_against_survival_quadrature():
    model = HeavyTailIID(beta=3.0, c=2.0, x0=math.e, n=2)
    # independent oracle: direct x-space integral of the survival function
    tail, _ = integrate.quad(lambda x: 1.0 - model.cdf(x), model.x0, math.inf,
                             limit=300)
    assert model.mean == pytest.approx(model.x0 + tail, rel=1e-8)
    assert model.mean == pytest.approx(3.472177630139099, rel=1e-12)


def test_heavy_tail_beta_norm_closed_form():
    # E X^beta = x0^beta (1 + beta L / (c - 1)) with L = ln x0
    for beta, c, x0 in [(3.0, 2.0, math.e), (2.0, 1.8, 2.2), (4.0, 2.5, 1.6)]:
        model = HeavyTailIID(beta=beta, c=c, x0=x0, n=2)
        L = math.log(x0)
        want = (x0 ** beta * (1.0 + beta * L / (c - 1.0))) ** (1.0 / beta)
        assert heavy_tail_beta_norm(model) == pytest.approx(want, rel=1e-9)
    model = HeavyTailIID(beta=3.0, c=2.0, x0=math.e, n=2)
    assert heavy_tail_beta_norm(model) == pytest.approx(4.3150034340419285, rel=1e-9)
    # lower moments also available
    assert heavy_tail_beta_norm(model, 1.0) == pytest.approx(model.mean, rel=1e-8)
    with pytest.raises(ValueError):
        heavy_tail_beta_norm(model, 3.5)


def test_extreme_norming_constant():
    model = HeavyTailIID(beta=3.0, c=2.0, x0=math.e, n=2)
    assert extreme_norming_constant(model, 1) == pytest.approx(math.e, rel=1e-12)
    assert extreme_norming_constant(model, 1000) == pytest.approx(
        14.18663381204898, rel=1e-10)
    vals = [extreme_norming_constant(model, n) for n in (2, 10, 100, 1000, 10_000)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        extreme_norming_constant(model, 0)


def test_frechet_mean():
    assert frechet_mean(3.0) == pytest.approx(1.3541179394264005, rel=1e-12)
    assert frechet_mean(2.0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    with pytest.raises(ValueError):
        frechet_mean(1.0)


def test_norming_constant_families():
    g = GaussianIID(mu=1.0, sigma=2.0, n=4)
    assert norming_constant(g, 100) == pytest.approx(
        1.0 + 2.0 * math.sqrt(2 * math.log(100)))
    e = ExponentialIID(rate=2.0, n=4)
    assert norming_constant(e, 100) == pytest.approx(math.log(100) / 2.0, rel=1e-12)
    h = HeavyTailIID(n=4)
    assert norming_constant(h, 50) == pytest.approx(
        extreme_norming_constant(h, 50), rel=1e-12)


def test_run_experiment_determinism_across_workers():
    model = HeavyTailIID(beta=3.0, c=2.0, x0=math.e, n=40)
    rule = ArgMax()
    a = run_experiment(model, rule, trials=3000, seed=99, workers=1)
    b = run_experiment(model, rule, trials=3000, seed=99, workers=4)
    assert a.bias == b.bias
    assert a.stderr == b.stderr
    assert a.selected_mean == b.selected_mean
    assert a.i_plugin == b.i_plugin
    assert a.i_alpha_plugin == b.i_alpha_plugin
    assert a.i_rule == b.i_rule
    assert np.array_equal(a.t_counts, b.t_counts)


def test_run_experiment_determinism_randomized_rule():
    model = GaussianIID(n=6)
    rule = SoftMax(0.7)
    a = run_experiment(model, rule, trials=2000, seed=5, workers=1,
                       alphas=(1.5, 2.0))
    b = run_experiment(model, rule, trials=2000, seed=5, workers=3,
                       alphas=(1.5, 2.0))
    assert a.bias == b.bias
    assert a.i_rule == b.i_rule
    assert a.i_alpha_rule == b.i_alpha_rule


def test_selection_invariant_under_monotone_transform():
    # rank-based rules must pick identical indices for any continuous model
    ga = run_experiment(GaussianIID(n=12), ArgMax(), trials=1500, seed=3)
    ex = run_experiment(ExponentialIID(n=12), ArgMax(), trials=1500, seed=3)
    hv = run_experiment(HeavyTailIID(n=12), ArgMax(), trials=1500, seed=3)
    assert np.array_equal(ga.t_counts, ex.t_counts)
    assert np.array_equal(ga.t_counts, hv.t_counts)


def test_gaussian_argmax_bias_matches_quadrature():
    n = 10
    res = run_experiment(GaussianIID(n=n), ArgMax(), trials=40_000, seed=12)
    oracle, _ = integrate.quad(
        lambda x: n * x * norm.pdf(x) * norm.cdf(x) ** (n - 1), -12, 12)
    assert abs(res.bias - oracle) <= 4 * res.stderr
    assert res.analytic_i == pytest.approx(math.log(n), rel=1e-12)
    assert res.analytic_i_alpha["2"] == pytest.approx(n - 1, rel=1e-9)


def test_argmin_mirrors_argmax():
    res_max = run_experiment(GaussianIID(n=8), ArgMax(), trials=8000, seed=21)
    res_min = run_experiment(GaussianIID(n=8), ArgMin(), trials=8000, seed=21)
    # symmetric model: argmin bias is the negative of argmax bias on average
    assert res_min.bias < 0 < res_max.bias
    assert abs(res_min.bias + res_max.bias) <= 4 * math.hypot(res_min.stderr,
                                                              res_max.stderr)


def test_fixed_index_is_unbiased():
    res = run_experiment(GaussianIID(n=7), FixedIndex(4), trials=20_000, seed=8)
    assert abs(res.bias) <= 4 * res.stderr
    assert res.analytic_i == 0.0
    assert res.i_rule == pytest.approx(0.0, abs=1e-12)
    assert res.t_counts[4] == res.trials


def test_topk_conditional_information():
    # I(T; data) = ln(n/k) exactly for top-k uniform on continuous draws
    n, k = 10, 3
    res = run_experiment(GaussianIID(n=n), TopKUniform(k), trials=6000, seed=14)
    assert res.i_rule == pytest.approx(math.log(n / k), abs=0.02)
    # bias sits between fixed-index (0) and argmax
    res_max = run_experiment(GaussianIID(n=n), ArgMax(), trials=6000, seed=14)
    assert 0 < res.bias < res_max.bias


def test_softmax_dependence_estimates():
    res = run_experiment(GaussianIID(n=5), SoftMax(1.0), trials=5000, seed=31,
                         alphas=(2.0,))
    # randomized rule: conditional estimate well above the probe lower bound
    assert res.i_rule > res.i_plugin
    assert res.analytic_i is None
    assert res.bias > 0
    # temperature -> 0 approaches argmax behavior
    cold = run_experiment(GaussianIID(n=5), SoftMax(0.01), trials=5000, seed=31)
    assert cold.bias > res.bias
    assert res.i_rule < cold.i_rule <= math.log(5) + 1e-9
    assert cold.i_rule == pytest.approx(math.log(5), abs=0.1)


def test_probe_plugin_refinement_is_monotone():
    # halving bins coarsens the rank partition exactly, so plug-in MI drops
    model = GaussianIID(n=6)
    prev = None
    for bins in (16, 8, 4, 2):
        res = run_experiment(model, SoftMax(0.5), trials=4000, seed=77, bins=bins)
        if prev is not None:
            assert res.i_plugin <= prev + 1e-12
        prev = res.i_plugin


def test_default_bins_rule():
    res = run_experiment(GaussianIID(n=3), ArgMax(), trials=1000, seed=1)
    assert res.bins == max(2, math.ceil(1000 ** (1 / 3)))


def test_run_experiment_errors():
    model = GaussianIID(n=4)
    with pytest.raises(ValueError):
        run_experiment(model, ArgMax(), trials=0, seed=1)
    with pytest.raises(ValueError):
        run_experiment(model, ArgMax(), trials=10, seed=1, bins=1)
    with pytest.raises(ValueError):
        run_experiment(model, ArgMax(), trials=10, seed=1, probe=4)
    with pytest.raises(ValueError):
        run_experiment(model, FixedIndex(9), trials=10, seed=1)
    with pytest.raises(ValueError):
        run_experiment(model, TopKUniform(5), trials=10, seed=1)
    with pytest.raises(ValueError):
        run_experiment(model, ArgMax(), trials=10, seed=-3)
    with pytest.raises(ValueError):
        SoftMax(0.0)
    with pytest.raises(ValueError):
        TopKUniform(0)


def test_tie_breaking_lowest_index():
    v = np.array([1.0, 3.0, 3.0, 0.5])
    assert ArgMax().select(v, None) == 1
    assert ArgMin().select(np.array([2.0, 0.1, 0.1]), None) == 1
    top = TopKUniform(2)._top(np.array([1.0, 2.0, 2.0, 2.0]))
    assert list(top) == [1, 2]


def test_sweep_rows_and_csv():
    model = HeavyTailIID(beta=3.0, c=2.0, x0=math.e, n=10)
    rows = tightness_sweep(model, [20, 60], trials=2500, seed=44)
    assert [r.n for r in rows] == [20, 60]
    for r in rows:
        assert r.a_n == pytest.approx(
            extreme_norming_constant(dataclasses.replace(model, n=r.n), r.n))
        assert math.isnan(r.bound_mgf)  # no exponential moments
        assert r.bound_pnorm > 0
        assert r.frechet_ratio == pytest.approx(
            (r.empirical_bias + model.mean) / r.a_n, rel=1e-12)
    text = sweep_to_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == SWEEP_CSV_HEADER
    assert len(lines) == 3
    first = lines[1].split(",")
    assert int(first[0]) == 20
    assert float(first[1]) == rows[0].empirical_bias  # repr round-trips


def test_sweep_gaussian_has_mgf_column():
    rows = tightness_sweep(GaussianIID(n=5), [30], trials=2000, seed=2)
    assert rows[0].bound_mgf == pytest.approx(math.sqrt(2 * math.log(30)), rel=1e-9)
    assert rows[0].bound_pnorm == pytest.approx(math.sqrt(29.0), rel=1e-12)
    assert rows[0].ratio == pytest.approx(rows[0].bound_mgf / rows[0].empirical_bias)


def test_sweep_csv_byte_identical_across_workers():
    model = HeavyTailIID(beta=3.0, c=2.0, x0=math.e, n=10)
    a = sweep_to_csv(tightness_sweep(model, [15, 40], trials=2000, seed=6, workers=1))
    b = sweep_to_csv(tightness_sweep(model, [15, 40], trials=2000, seed=6, workers=4))
    assert a == b
