import math

import numpy as np
import pytest
from scipy import stats as sps

from devgibbs import deviation as dev
from devgibbs import maps
from devgibbs.dynamics import Observable
from devgibbs.errors import ConfigError
from devgibbs.observables import make_observable
from devgibbs.sampling import UniformSampler
from devgibbs.stats import combined_se


def experiment(m, g, c, n_grid, samples=2000, seed=1, direction="ge"):
    return dev.DeviationExperiment(map=m, g=g, c=c,
                                   sampler=UniformSampler(m.domain),
                                   n_grid=tuple(n_grid), samples=samples,
                                   seed=seed, direction=direction)


def test_experiment_validation(doubling):
    g = make_observable("indicator_half", doubling)
    with pytest.raises(ConfigError):
        experiment(doubling, g, 0.7, [10, 10])
    with pytest.raises(ConfigError):
        experiment(doubling, g, 0.7, [10, 20], samples=10)
    with pytest.raises(ConfigError):
        experiment(doubling, g, 0.7, [10], direction="above")


def test_probability_sure_event(doubling):
    g = Observable(fn=lambda x: np.full(np.shape(x), 1.7), label="const")
    exp = experiment(doubling, g, 0.7, [5])
    p, ci, hits, total = dev.deviation_probability(exp, 5)
    assert p == 1.0 and hits == total


def test_probability_impossible_event(doubling):
    g = make_observable("indicator_half", doubling)
    exp = experiment(doubling, g, 1.5, [5])
    p, ci, hits, total = dev.deviation_probability(exp, 5)
    assert p == 0.0


def test_probability_matches_binomial(doubling):
    g = make_observable("indicator_half", doubling)
    exp = experiment(doubling, g, 0.7, [20], samples=200000, seed=11)
    p, ci, hits, total = dev.deviation_probability(exp, 20)
    exact = float(sps.binom.sf(13, 20, 0.5))
    assert exact == pytest.approx(0.05766, abs=5e-5)
    assert ci[0] <= exact <= ci[1]


def test_rate_curve_shape_and_flags(doubling):
    g = make_observable("indicator_half", doubling)
    exp = experiment(doubling, g, 0.95, [10, 20, 30], samples=2000, seed=2)
    curve = dev.rate_curve(exp)
    assert list(curve.n) == [10, 20, 30]
    assert curve.flagged[2] or curve.p_hat[2] < 1e-3  # deep tail row


def test_rate_estimate_exact_exponential():
    n = np.arange(5, 25)
    p = np.exp(-0.1 * n)
    curve = dev.RateCurve(n=n, hits=(p * 1e9).astype(int),
                          samples=np.full(len(n), 10 ** 9), p_hat=p,
                          ci_low=p, ci_high=p, log_rate=np.log(p) / n,
                          flagged=np.zeros(len(n), dtype=bool))
    fit = dev.rate_estimate(curve, (5, 24))
    assert fit.slope == pytest.approx(-0.1, abs=1e-9)


def test_rate_estimate_constant():
    n = np.arange(5, 15)
    p = np.full(len(n), 0.25)
    curve = dev.RateCurve(n=n, hits=(p * 1e6).astype(int),
                          samples=np.full(len(n), 10 ** 6), p_hat=p,
                          ci_low=p, ci_high=p, log_rate=np.log(p) / n,
                          flagged=np.zeros(len(n), dtype=bool))
    assert dev.rate_estimate(curve, (5, 14)).slope == pytest.approx(0.0,
                                                                    abs=1e-12)


def test_rate_estimate_excludes_flagged():
    n = np.arange(5, 15)
    p = np.exp(-0.2 * n)
    flagged = np.zeros(len(n), dtype=bool)
    flagged[-2:] = True
    p2 = p.copy()
    p2[-2:] = 0.0
    curve = dev.RateCurve(n=n, hits=(p2 * 1e9).astype(int),
                          samples=np.full(len(n), 10 ** 9), p_hat=p2,
                          ci_low=p2, ci_high=p2,
                          log_rate=np.where(p2 > 0, np.log(np.maximum(p2, 1e-300)) / n, -np.inf),
                          flagged=flagged)
    fit = dev.rate_estimate(curve, (5, 14))
    assert fit.slope == pytest.approx(-0.2, abs=1e-9)
    with pytest.raises(ConfigError):
        dev.rate_estimate(curve, (13, 14))


def test_free_energy_zero_t_exact(doubling):
    g = make_observable("indicator_half", doubling)
    val = dev.free_energy(doubling, UniformSampler(doubling.domain), g,
                          0.0, 10, 2000, seed=3)
    assert val == 0.0


def test_free_energy_constant_observable(doubling):
    g = Observable(fn=lambda x: np.full(np.shape(x), 0.4), label="c")
    val = dev.free_energy(doubling, UniformSampler(doubling.domain), g,
                          1.5, 8, 2000, seed=3)
    assert val == pytest.approx(1.5 * 0.4, rel=1e-12)


def test_free_energy_bernoulli_closed_form(doubling):
    g = make_observable("indicator_half", doubling)
    val = dev.free_energy(doubling, UniformSampler(doubling.domain), g,
                          1.0, 10, 400000, seed=4)
    assert val == pytest.approx(math.log((1 + math.e) / 2), abs=0.005)


def test_free_energy_convexity(doubling):
    g = make_observable("indicator_half", doubling)
    ts, psi = dev.free_energy_table(doubling, UniformSampler(doubling.domain),
                                    g, np.arange(-1.0, 1.01, 0.25), 10,
                                    100000, seed=5)
    second = np.diff(psi, 2)
    assert np.all(second >= -1e-6)


def test_legendre_cramer_closed_form():
    ts = np.arange(-1.0, 2.0001, 0.01)
    psi = np.log((1 + np.exp(ts)) / 2)
    res = dev.legendre_rate(ts, psi, 0.7)
    assert res.value == pytest.approx(math.log(2) - sps.entropy([0.7, 0.3]),
                                      abs=1e-4)
    assert not res.boundary
    # the full-deviation endpoint c=1: the maximizer runs off to large t,
    # where t c - psi(t) converges to log 2 from below
    wide = np.arange(-1.0, 25.0, 0.25)
    psi_w = np.logaddexp(0.0, wide) - math.log(2)
    full = dev.legendre_rate(wide, psi_w, 1.0)
    assert full.value == pytest.approx(math.log(2), abs=1e-3)
    assert full.boundary  # flags that the grid failed to bracket


def test_legendre_zero_at_mean():
    ts = np.arange(-1.0, 1.0001, 0.01)
    psi = np.log((1 + np.exp(ts)) / 2)
    res = dev.legendre_rate(ts, psi, 0.5)
    assert res.value == pytest.approx(0.0, abs=1e-9)
    assert res.t_star == pytest.approx(0.0, abs=1e-9)


def test_seed_exchangeability(doubling):
    g = make_observable("indicator_half", doubling)
    vals = []
    for seed in (21, 22):
        exp = experiment(doubling, g, 0.7, [15], samples=50000, seed=seed)
        p, ci, hits, total = dev.deviation_probability(exp, 15)
        vals.append((p, total))
    se = combined_se(vals[0][0], vals[0][1], vals[1][0], vals[1][1])
    assert abs(vals[0][0] - vals[1][0]) <= 3 * se


def test_relative_entropy_doubling(doubling):
    g = make_observable("indicator_half", doubling)
    pts = [0.2137, 0.5811, 0.8413]
    est = dev.relative_entropy_estimate(
        doubling, UniformSampler(doubling.domain), pts, [6, 8, 10, 12],
        eps=2 ** -5, samples=300000, seed=7)
    # slope removes the ball-width offset: the decay rate is log 2
    assert est.slope_mean == pytest.approx(math.log(2), abs=0.05)
    # the raw value at depth n carries the log(2 eps)/n bias exactly
    expected_raw = math.log(2) - math.log(2 * 2 ** -5) / 12
    assert est.raw_mean == pytest.approx(expected_raw, abs=0.05)
    assert est.flagged == 0


def test_relative_entropy_small_depth_is_small(doubling):
    est = dev.relative_entropy_estimate(
        doubling, UniformSampler(doubling.domain), [0.4], [1, 2],
        eps=0.45, samples=20000, seed=8)
    assert est.raw_mean <= 0.6


def test_bound_report_doubling_shape():
    rep = dev.bound_report(-0.0986, float("-inf"), 0.08228, slack=0.02)
    assert rep.upper_ok and rep.lower_ok
    assert not rep.uninformative_upper
    assert rep.legendre_rate == pytest.approx(-0.08228)


def test_bound_report_trivial_level():
    # constant observable above the level: zero rate on both sides
    rep = dev.bound_report(0.0, float("-inf"), 0.0, slack=0.02)
    assert rep.upper_ok and rep.lower_ok


def test_bound_report_uninformative_upper():
    rep = dev.bound_report(-0.003, 0.0, 0.08, slack=0.02)
    assert rep.uninformative_upper
    assert rep.upper_ok  # measured rate <= 0 + slack trivially
