import math

import numpy as np
import pytest

from devgibbs import hyperbolic as hyp
from devgibbs import maps, specprobe as sp
from devgibbs.errors import CapabilityError, ConfigError, HorizonError
from devgibbs.sampling import UniformSampler


PROBES = np.linspace(0.03, 0.97, 11)


def test_interval_union_merge():
    u = sp.IntervalUnion([(0.1, 0.2), (0.2, 0.3), (0.5, 0.6)], 0.0, 1.0)
    assert u.segments == [(0.1, 0.3), (0.5, 0.6)]
    assert u.total_length == pytest.approx(0.3)


def test_interval_union_intersect_and_cover():
    u = sp.IntervalUnion([(0.0, 1.0)], 0.0, 1.0)
    assert u.covers_chart()
    v = u.intersect(0.2, 0.4)
    assert v.segments == [(0.2, 0.4)]
    assert not v.covers_chart()


def test_exactness_doubling(doubling):
    res = sp.exactness_time(doubling, 1 / 64, PROBES)
    assert res.found and res.n == 5  # 2 eps 2^N >= 1 at N = 5


def test_exactness_large_ball(doubling):
    res = sp.exactness_time(doubling, 0.5, PROBES)
    assert res.found and res.n == 0


def test_exactness_perturbed(pe4):
    res = sp.exactness_time(pe4, 1 / 64, PROBES)
    assert res.found
    # the slow channel delays covering past the affine count of 5
    assert res.n == 10  # frozen from interval propagation


def test_exactness_monotone_in_eps(doubling):
    ns = [sp.exactness_time(doubling, e, PROBES).n
          for e in (1 / 8, 1 / 16, 1 / 32, 1 / 64)]
    assert ns == sorted(ns)


def test_exactness_cap(doubling):
    res = sp.exactness_time(doubling, 1e-9, PROBES, cap=3)
    assert not res.found
    assert res.residual > 0


def test_shadow_single_piece(doubling):
    res = sp.shadow_search(doubling, [sp.OrbitPiece(0.3, 4)], 1 / 64, [])
    assert res.found and res.verified
    assert abs(res.z - 0.3) <= 1 / 64


def test_shadow_two_pieces_doubling(doubling):
    res = sp.shadow_search(doubling,
                           [sp.OrbitPiece(0.123, 5), sp.OrbitPiece(0.777, 5)],
                           1 / 64, [6])
    assert res.found and res.verified


def test_shadow_incompatible_cylinders(doubling):
    res = sp.shadow_search(doubling,
                           [sp.OrbitPiece(0.1, 5), sp.OrbitPiece(0.9, 5)],
                           1 / 64, [0])
    assert not res.found
    assert res.failed_stage == 0


def test_shadow_needs_branches(viana):
    with pytest.raises(CapabilityError):
        sp.shadow_search(viana, [sp.OrbitPiece(np.array([0.1, 0.2]), 3)],
                         0.05, [])


def test_shadow_budget_limits(doubling):
    with pytest.raises(ConfigError):
        sp.shadow_search(doubling, [sp.OrbitPiece(0.1, 600),
                                    sp.OrbitPiece(0.2, 600)], 0.05, [5])


def test_shadow_quadratic_pieces():
    q = maps.make_quadratic(2.0)
    res = sp.shadow_search(q, [sp.OrbitPiece(0.3, 3), sp.OrbitPiece(-0.4, 3)],
                           0.05, [8])
    assert res.found and res.verified


def test_gap_estimate_doubling(doubling):
    params = hyp.default_params(doubling, n_max=1100)
    ge = sp.gap_estimate(doubling, 0.37, 1000, 1 / 64, params, exactness=5)
    assert ge.p_hat == 6
    assert ge.lag == 1  # next-strict convention
    # composition identity: p_hat - exactness equals the measured lag
    assert ge.p_hat - ge.exactness == ge.lag


def test_gap_estimate_horizon_error(mp):
    params = hyp.HyperbolicParams(1.2, 0.1, 0.25, 40)
    with pytest.raises(HorizonError):
        sp.gap_estimate(mp, 1e-8, 30, 0.05, params, exactness=3)


def test_nonuniform_statistic_doubling(doubling):
    params = hyp.default_params(doubling, n_max=1100)
    rep = sp.nonuniform_spec_statistic(doubling,
                                       UniformSampler(doubling.domain),
                                       [1 / 64], [100, 1000], params,
                                       samples=40, seed=3)
    assert rep.headline == pytest.approx(6 / 1000)
    assert rep.censored_fraction == 0.0


def test_lacunar_stub_headline_near_one():
    times = [2 ** k for k in range(1, 11)]
    stats = sp.gap_statistic_from_times(times, [520], exactness=5)
    assert stats[520] > 0.9  # geometric gaps defeat the property


def test_gap_stub_plain_record():
    stats = sp.gap_statistic_from_times([10, 20, 30, 40], [25], exactness=4)
    assert stats[25] == pytest.approx((4 + 5) / 25)


def test_gap_estimate_shadow_verified(doubling):
    params = hyp.default_params(doubling, n_max=1100)
    ge = sp.gap_estimate(doubling, 0.37, 40, 1 / 64, params, exactness=5,
                         verify=5, seed=2)
    assert ge.verified_fraction == 1.0
