import math

import numpy as np
import pytest

from fbmruin import rng
from fbmruin.errors import DomainError, HorizonUnstable, WeightOverflow
from fbmruin.fbm import sample_fbm_block
from fbmruin.mc import (
    CRUDE,
    FIXED,
    TILT,
    HorizonPolicy,
    MCConfig,
    coupled_grid_comparison,
    dominance_check,
    simulate_one_dim,
    simulate_two_dim,
    simultaneous_hits,
)
from fbmruin.model import ModelParams

P0 = ModelParams(2, 1, 1, 2, 0.5, 1.0)
P1 = ModelParams(2, 1, 1, 1.4, 0.25, 1.0)


def test_level_must_be_positive():
    with pytest.raises(DomainError):
        simulate_two_dim(P0, 0.0, MCConfig(n_paths=100))


def test_vanishing_level_probability_grows_as_grid_refines():
    # on G(1) the first epoch is t = 1, so p = P(B(1) > 2.01); only fine grids approach 1
    cfg = MCConfig(n_paths=20_000, method=CRUDE)
    coarse = simulate_two_dim(P0, 0.01, cfg)
    assert abs(coarse.p_hat - 0.0222) < 4 * coarse.std_error
    p = [simulate_two_dim(ModelParams(2, 1, 1, 2, 0.5, d), 0.01, cfg).p_hat for d in (1e-2, 1e-4)]
    assert coarse.p_hat < p[0] < p[1]
    assert p[1] > 0.9


def test_identical_lines_reproduce_one_dim():
    cfg = MCConfig(n_paths=20_000, seed=2)
    two = simulate_two_dim(ModelParams(1, 1, 1, 1, 0.5, 1.0), 2.0, cfg)
    one = simulate_one_dim(1, 1, 0.5, 1.0, 2.0, cfg)
    assert abs(two.p_hat - one.p_hat) <= 3 * math.hypot(two.std_error, one.std_error)


def test_grid_probability_below_continuous_value():
    est = simulate_one_dim(1, 1, 0.5, 1.0, 1.0, MCConfig(n_paths=50_000))
    assert est.interval[1] < math.exp(-2)


def test_crude_and_tilted_agree_at_small_level():
    crude = simulate_one_dim(1, 1, 0.5, 1.0, 1.0, MCConfig(n_paths=100_000, method=CRUDE, seed=4))
    tilt = simulate_one_dim(1, 1, 0.5, 1.0, 1.0, MCConfig(n_paths=100_000, method=TILT, seed=5))
    assert abs(crude.p_hat - tilt.p_hat) < 3 * math.hypot(crude.std_error, tilt.std_error)


def test_crude_and_tilted_agree_two_dim_rough():
    p = ModelParams(1, 0.5, 0.5, 1.0, 0.3, 1.0)
    crude = simulate_two_dim(p, 1.0, MCConfig(n_paths=100_000, method=CRUDE, seed=6))
    tilt = simulate_two_dim(p, 1.0, MCConfig(n_paths=100_000, method=TILT, seed=7))
    assert abs(crude.p_hat - tilt.p_hat) < 3 * math.hypot(crude.std_error, tilt.std_error)


def test_estimate_fields():
    est = simulate_two_dim(P0, 2.0, MCConfig(n_paths=10_000))
    assert 0 <= est.p_hat <= 1
    assert est.ci_half_width == pytest.approx(1.959963984540054 * est.std_error)
    assert est.horizon_T == est.horizon_points * est.delta
    assert est.method == TILT and est.u == 2.0
    assert math.isfinite(est.max_abs_log_weight)


def test_determinism():
    cfg = MCConfig(n_paths=10_000, seed=11)
    assert simulate_two_dim(P1, 5.0, cfg) .p_hat == simulate_two_dim(P1, 5.0, cfg).p_hat


def test_fixed_horizon():
    est = simulate_one_dim(1, 1, 0.5, 0.1, 1.0, MCConfig(n_paths=5_000, horizon=HorizonPolicy(FIXED, T=1.0)))
    assert est.horizon_points == 10
    with pytest.raises(DomainError):
        HorizonPolicy(FIXED)
    with pytest.raises(DomainError):
        HorizonPolicy(window=0.5)


def test_weight_overflow():
    with pytest.raises(WeightOverflow):
        simulate_two_dim(P0, 200.0, MCConfig(n_paths=100))


def test_horizon_unstable():
    policy = HorizonPolicy(stability_tol=0.0, max_doublings=1, window=1.0)
    with pytest.raises(HorizonUnstable):
        simulate_one_dim(1, 1, 0.5, 0.1, 0.5, MCConfig(n_paths=20_000, method=CRUDE, horizon=policy))


@pytest.mark.parametrize("params", [P0, P1])
@pytest.mark.parametrize("k", [2, 4])
def test_coupled_grids_have_no_violations(params, k):
    res = coupled_grid_comparison(params, 2.0, MCConfig(n_paths=20_000), k)
    assert res.violations == 0
    assert res.coarse.p_hat <= res.fine.p_hat


def test_coupled_factor_one_is_identical():
    res = coupled_grid_comparison(P0, 2.0, MCConfig(n_paths=5_000), 1)
    assert res.fine.p_hat == res.coarse.p_hat
    with pytest.raises(DomainError):
        coupled_grid_comparison(P0, 2.0, MCConfig(n_paths=100), 1.5)


@pytest.mark.parametrize("params", [P0, P1])
def test_dominance(params):
    rep = dominance_check(params, 2.0, MCConfig(n_paths=20_000))
    assert rep.violations == 0
    assert 0.0 <= rep.ratio <= 1.0


def test_dominance_degenerate_matches_dominating_line():
    rep = dominance_check(ModelParams(2, 2, 1, 1, 0.5, 1.0), 1.0, MCConfig(n_paths=20_000, method=CRUDE))
    assert rep.dominant_mismatches == 0
    assert rep.two_dim.p_hat == rep.line1.p_hat


def test_simultaneous_hits_is_max_crossing():
    paths = sample_fbm_block(0.5, 30, 1.0, 2_000, rng.stream(1)) * 3
    times = np.arange(1, 31.0)
    direct = simultaneous_hits(paths, times, P0, 0.5)
    via_max = np.any(paths > np.maximum(1 * 0.5 + 2 * times, 2 * 0.5 + 1 * times), axis=1)
    assert np.array_equal(direct, via_max)
    assert direct.any()
