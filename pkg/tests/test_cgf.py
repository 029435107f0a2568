import math

import numpy as np
import pytest

from biasbound.cgf import (MixedEnvelope, SubExponential, SubGamma,
                           SubGaussian, Tabulated, legendre_transform,
                           subexponential_piecewise_bound)


def grid_conjugate(env, x, points=200_001):
    """Brute-force sup_lam (lam*x - psi(lam)) on a dense grid (oracle)."""
    hi = env.domain_sup
    if math.isinf(hi):
        hi = 1.0
        while hi * x - env.evaluate(hi) > (hi / 2) * x - env.evaluate(hi / 2):
            hi *= 2.0
        hi *= 2.0
    else:
        hi = hi * (1.0 - 1e-9)
    lams = np.linspace(0.0, hi, points)
    vals = np.array([lam * x - env.evaluate(lam) for lam in lams])
    return float(vals.max())


def grid_inverse_conjugate(env, info, points=200_001):
    """Brute-force inf_lam (psi(lam) + info) / lam on a dense log grid (oracle)."""
    hi = env.domain_sup
    if math.isinf(hi):
        hi = 1.0
        while (env.evaluate(2 * hi) + info) / (2 * hi) < (env.evaluate(hi) + info) / hi:
            hi *= 2.0
        hi *= 2.0
    else:
        hi = hi * (1.0 - 1e-12)
    lams = np.geomspace(hi * 1e-12, hi, points)
    vals = np.array([(env.evaluate(lam) + info) / lam for lam in lams])
    return float(vals.min())


def test_subgaussian_closed_forms():
    env = SubGaussian(1.5)
    assert env.evaluate(0.0) == 0.0
    assert math.isclose(env.evaluate(2.0), 0.5 * 4.0 * 2.25)
    assert math.isclose(env.conjugate(2.0), 4.0 / (2 * 2.25))
    assert math.isclose(env.inverse_conjugate(math.log(2)),
                        1.5 * math.sqrt(2 * math.log(2)))


def test_subgaussian_numeric_matches_closed():
    for sigma in (0.3, 1.0, 2.5):
        env = SubGaussian(sigma)
        for info in (1e-4, 0.1, math.log(2), 3.0, 20.0):
            closed = env.inverse_conjugate(info)
            numeric = env.inverse_conjugate_numeric(info)
            assert math.isclose(closed, numeric, rel_tol=1e-9)
        for x in (0.05, 1.0, 4.0):
            assert math.isclose(env.conjugate(x), env.conjugate_numeric(x),
                                rel_tol=1e-9)


def test_subgamma_closed_forms_and_numeric():
    env = SubGamma(4.0, 2.0)
    # inverse conjugate sqrt(2 sigma2 I) + c I
    info = math.log(2)
    expect = math.sqrt(2 * 4.0 * info) + 2.0 * info
    assert math.isclose(env.inverse_conjugate(info), expect, rel_tol=1e-12)
    assert math.isclose(env.inverse_conjugate_numeric(info), expect, rel_tol=1e-9)
    # conjugate via h(u) = 1 + u - sqrt(1 + 2u)
    for x in (0.1, 1.0, 3.0, 10.0):
        u = 2.0 * x / 4.0
        expect = 4.0 / 4.0 * (1.0 + u - math.sqrt(1.0 + 2.0 * u))
        assert math.isclose(env.conjugate(x), expect, rel_tol=1e-12)
        assert math.isclose(env.conjugate_numeric(x), expect, rel_tol=1e-8)


def test_subexponential_conjugate_piecewise():
    env = SubExponential(1.0, 2.0)
    s2 = 1.0
    # quadratic branch below sigma^2/b, linear branch above
    assert math.isclose(env.conjugate(0.3), 0.3 ** 2 / 2)
    assert math.isclose(env.conjugate(2.0), 2.0 / 2.0 - s2 / 8.0)
    assert math.isclose(env.conjugate_numeric(0.3), 0.3 ** 2 / 2, rel_tol=1e-9)
    assert math.isclose(env.conjugate_numeric(2.0), 2.0 / 2.0 - s2 / 8.0,
                        rel_tol=1e-9)


def test_subexponential_inverse_closed_vs_numeric():
    for sigma, b in [(1.0, 1.0), (1.0, 0.5), (2.0, 2.0), (0.7, 3.0)]:
        env = SubExponential(sigma, b)
        for info in (1e-3, 0.05, 0.2, 1.0, 5.0):
            closed = env.inverse_conjugate(info)
            numeric = env.inverse_conjugate_numeric(info)
            assert math.isclose(closed, numeric, rel_tol=1e-9, abs_tol=1e-9)


def test_piecewise_print_matches_only_at_b_one():
    # at b=1 the printed piecewise form coincides with the true minimum
    for info in np.linspace(0.01, 4.0, 40):
        env = SubExponential(1.3, 1.0)
        assert math.isclose(env.inverse_conjugate_numeric(info),
                            subexponential_piecewise_bound(1.3, 1.0, info),
                            rel_tol=1e-9, abs_tol=1e-9)
    # beyond the threshold at b=2 they separate
    env = SubExponential(1.0, 2.0)
    assert env.inverse_conjugate(2.0) - subexponential_piecewise_bound(1.0, 2.0, 2.0) \
        == pytest.approx(1.0 / 4.0 - 1.0 / 8.0)


def test_conjugates_match_grid_oracle():
    envs = [SubGaussian(1.2), SubExponential(0.8, 1.5), SubGamma(2.0, 0.7)]
    for env in envs:
        for x in (0.2, 1.0, 2.7):
            assert math.isclose(env.conjugate(x), grid_conjugate(env, x),
                                rel_tol=2e-6, abs_tol=2e-6)
        for info in (0.1, 0.9, 2.5):
            assert math.isclose(env.inverse_conjugate(info),
                                grid_inverse_conjugate(env, info),
                                rel_tol=2e-6)


def test_fenchel_young_sampled():
    rng = np.random.default_rng(42)
    grid = np.linspace(0, 4, 401)
    envs = [SubGaussian(1.0), SubExponential(1.0, 2.0), SubGamma(1.5, 0.5),
            Tabulated(grid, grid ** 2 / 2),
            MixedEnvelope([(0.5, SubGaussian(1.0)), (0.5, SubGamma(1.0, 0.5))])]
    for env in envs:
        cap = env.domain_sup if math.isfinite(env.domain_sup) else 4.0
        for _ in range(40):
            lam = float(rng.uniform(0, cap * 0.999))
            x = float(rng.uniform(0, 5.0))
            assert env.evaluate(lam) + env.conjugate(x) >= lam * x - 1e-9


def test_inverse_conjugate_inverts_conjugate():
    envs = [SubGaussian(0.9), SubExponential(1.1, 0.8), SubGamma(2.0, 1.5)]
    for env in envs:
        for x in (0.1, 0.7, 2.0, 6.0):
            info = env.conjugate(x)
            if info <= 0:
                continue
            assert math.isclose(env.inverse_conjugate(info), x, rel_tol=1e-8)


def test_inverse_conjugate_monotone_concave_in_budget():
    envs = [SubGaussian(1.0), SubGamma(1.0, 2.0), SubExponential(1.0, 0.5),
            MixedEnvelope([(0.3, SubGaussian(2.0)), (0.7, SubGamma(1.0, 1.0))])]
    infos = np.linspace(0.05, 3.0, 25)
    for env in envs:
        vals = np.array([env.inverse_conjugate(i) for i in infos])
        assert np.all(np.diff(vals) > 0)
        second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
        assert np.all(second <= 1e-8)


def test_zero_budget_and_zero_argument():
    for env in (SubGaussian(1.0), SubExponential(1.0, 1.0), SubGamma(1.0, 1.0)):
        assert env.inverse_conjugate(0.0) == 0.0
        assert env.conjugate(0.0) == 0.0
        assert env.evaluate(0.0) == 0.0


def test_domain_and_argument_errors():
    env = SubGaussian(1.0)
    with pytest.raises(ValueError):
        env.evaluate(-0.5)
    with pytest.raises(ValueError):
        env.conjugate(-1.0)
    with pytest.raises(ValueError):
        env.inverse_conjugate(-0.1)
    with pytest.raises(ValueError):
        SubGaussian(0.0)
    with pytest.raises(ValueError):
        SubGamma(1.0, -1.0)
    with pytest.raises(ValueError):
        SubExponential(-1.0, 1.0)
    assert SubExponential(1.0, 2.0).evaluate(0.6) == math.inf
    assert SubGamma(1.0, 2.0).evaluate(0.5) == math.inf


def test_scaling_covariance():
    # scaling the variable by a scales the deviation bound by a
    for a in (0.5, 3.0):
        assert math.isclose(SubGaussian(a * 1.3).inverse_conjugate(0.8),
                            a * SubGaussian(1.3).inverse_conjugate(0.8),
                            rel_tol=1e-12)
        assert math.isclose(SubGamma(a * a * 2.0, a * 0.7).inverse_conjugate(0.8),
                            a * SubGamma(2.0, 0.7).inverse_conjugate(0.8),
                            rel_tol=1e-12)


def test_tabulated_quadratic_grid_behaves_subgaussian():
    grid = np.linspace(0, 4, 401)
    tab = Tabulated(grid, grid ** 2 / 2)
    assert tab.domain_sup == 4.0
    assert tab.evaluate(4.0) == 8.0  # closed right endpoint
    assert tab.evaluate(4.0000001) == math.inf
    assert math.isclose(tab.inverse_conjugate(0.5), 1.0, rel_tol=1e-6)
    assert math.isclose(tab.conjugate(1.0), 0.5, rel_tol=1e-6)
    # budget large enough that the minimizer hits the grid boundary
    big = tab.inverse_conjugate(50.0)
    assert math.isclose(big, (8.0 + 50.0) / 4.0, rel_tol=1e-6)


def test_tabulated_validation():
    with pytest.raises(ValueError):
        Tabulated([0.0, 1.0, 0.5], [0.0, 0.5, 1.0])  # not increasing
    with pytest.raises(ValueError):
        Tabulated([0.1, 1.0], [0.0, 0.5])  # does not start at 0
    with pytest.raises(ValueError):
        Tabulated([0.0, 1.0], [0.1, 0.5])  # psi(0) != 0
    with pytest.raises(ValueError):
        Tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 1.2])  # concave kink
    with pytest.raises(ValueError):
        Tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 0.5])  # decreasing
    with pytest.raises(ValueError):
        Tabulated([0.0, 1.0], [0.0, 1.0])  # slope 1 at the origin


def test_tabulated_csv_round_trip(tmp_path):
    grid = np.linspace(0, 2, 51)
    path = tmp_path / "env.csv"
    with open(path, "w") as fh:
        fh.write("lambda,psi\n")
        for lam, val in zip(grid, grid ** 2):
            fh.write(f"{float(lam)!r},{float(val)!r}\n")
    tab = Tabulated.from_csv(path)
    assert tab.domain_sup == 2.0
    assert math.isclose(tab.evaluate(1.37), 1.37 ** 2, rel_tol=1e-3)
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.csv"
        bad.write_text("lambda,psi\n0.0,0.0\nx,1.0\n")
        Tabulated.from_csv(bad)


def test_mixture_validation_and_domain():
    with pytest.raises(ValueError):
        MixedEnvelope([])
    with pytest.raises(ValueError):
        MixedEnvelope([(0.6, SubGaussian(1.0)), (0.6, SubGaussian(1.0))])
    with pytest.raises(ValueError):
        MixedEnvelope([(-0.1, SubGaussian(1.0)), (1.1, SubGaussian(1.0))])
    mix = MixedEnvelope([(0.5, SubGaussian(1.0)), (0.5, SubGamma(1.0, 0.5))])
    assert mix.domain_sup == 2.0
    assert mix.evaluate(2.1) == math.inf


def test_mixture_evaluation_is_convex_combination():
    rng = np.random.default_rng(11)
    parts = [SubGaussian(0.7), SubGamma(1.2, 0.4), SubExponential(1.0, 0.3)]
    w = rng.dirichlet(np.ones(3))
    mix = MixedEnvelope(list(zip(w, parts)))
    for lam in rng.uniform(0, mix.domain_sup * 0.99, size=20):
        direct = sum(wi * p.evaluate(float(lam)) for wi, p in zip(w, parts))
        assert math.isclose(mix.evaluate(float(lam)), direct, rel_tol=1e-12)


def test_mixture_collapse_matches_numeric():
    # homogeneous sub-Gaussian mixture collapses to sqrt of mixed variance
    mix = MixedEnvelope([(0.5, SubGaussian(1.0)), (0.5, SubGaussian(2.0))])
    expect = math.sqrt(0.5 * 1 + 0.5 * 4) * math.sqrt(2 * 0.7)
    assert math.isclose(mix.inverse_conjugate(0.7), expect, rel_tol=1e-12)
    assert math.isclose(mix.inverse_conjugate_numeric(0.7), expect, rel_tol=1e-8)
    # homogeneous sub-gamma with shared c
    mix = MixedEnvelope([(0.25, SubGamma(1.0, 0.5)), (0.75, SubGamma(3.0, 0.5))])
    s2 = 0.25 * 1 + 0.75 * 3
    expect = math.sqrt(2 * s2 * 0.9) + 0.5 * 0.9
    assert math.isclose(mix.inverse_conjugate(0.9), expect, rel_tol=1e-12)
    assert math.isclose(mix.inverse_conjugate_numeric(0.9), expect, rel_tol=1e-8)


def test_heterogeneous_mixture_between_components():
    # a mixture bound sits between the pure bounds of its components
    lo_env, hi_env = SubGaussian(1.0), SubGaussian(3.0)
    mix = MixedEnvelope([(0.5, lo_env), (0.5, hi_env)])
    info = 1.3
    assert lo_env.inverse_conjugate(info) < mix.inverse_conjugate(info) \
        < hi_env.inverse_conjugate(info)


def test_legendre_transform_direct():
    # quadratic f: conjugate of lam^2/2 is x^2/2
    for x in (0.3, 1.0, 2.2):
        val = legendre_transform(lambda lam: lam * lam / 2.0, x)
        assert math.isclose(val, x * x / 2.0, rel_tol=1e-8)
    assert legendre_transform(lambda lam: lam * lam, 0.0) == 0.0
    with pytest.raises(ValueError):
        legendre_transform(lambda lam: lam * lam, -1.0)
