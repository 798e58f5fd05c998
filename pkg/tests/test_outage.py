import math

import numpy as np
import pytest
from scipy import integrate, stats

from isac_outage import (
    Method,
    OutageQuery,
    SystemConfig,
    ergodic_rate_montecarlo,
    target_op_analytic,
    target_op_montecarlo,
    user_op_analytic,
    user_op_montecarlo,
)
from isac_outage.outage import outage_curves_montecarlo, theta_average, transition_band

CFG = SystemConfig()


def test_query_validation():
    for bad in (dict(gamma=0.0), dict(epsilon=-1.0), dict(trials=0), dict(theta_nodes=4)):
        with pytest.raises(ValueError):
            OutageQuery(**bad)


def test_theta_average_of_constant_and_cosine_square():
    assert theta_average(lambda t: 1.0, 16) == pytest.approx(1.0, abs=1e-14)
    assert theta_average(lambda t: math.cos(t) ** 2, 16) == pytest.approx(0.5, abs=1e-14)


# ----------------------------------------------------------------- user

def test_user_analytic_limits():
    assert user_op_analytic(OutageQuery(gamma=1e-6)).value == pytest.approx(0.0, abs=1e-6)
    assert user_op_analytic(OutageQuery(gamma=1e6)).value == pytest.approx(1.0, abs=1e-6)


def test_user_analytic_estimate_fields():
    est = user_op_analytic(OutageQuery())
    assert est.method is Method.ANALYTIC and est.std_error == 0.0 and 0 <= est.value <= 1


def test_user_analytic_theta_average_consistent():
    q = OutageQuery()
    assert user_op_analytic(q, average_theta=True).value == pytest.approx(user_op_analytic(q).value, abs=1e-9)


def test_user_analytic_vs_montecarlo_gamma8():
    q = OutageQuery(trials=10**6, seed=1)
    mc = user_op_montecarlo(q)
    assert abs(user_op_analytic(q).value - mc.value) <= max(0.01, 4 * mc.std_error)


def test_user_mc_single_trial():
    assert user_op_montecarlo(OutageQuery(trials=1, seed=99)).value in (0.0, 1.0)


def test_user_mc_threshold_near_zero():
    est = user_op_montecarlo(OutageQuery(gamma=1e-300, trials=10**4))
    assert est.value == 0.0 and est.std_error == 0.0


def test_user_mc_binomial_error():
    est = user_op_montecarlo(OutageQuery(trials=20000, seed=3))
    assert est.std_error == pytest.approx(math.sqrt(est.value * (1 - est.value) / 20000))


def test_user_mc_curve_nondecreasing():
    u, _ = outage_curves_montecarlo(OutageQuery(trials=10**5), gammas=np.arange(1, 17))
    assert np.all(np.diff([e.value for e in u]) >= 0)


def test_curves_equal_single_queries():
    q = OutageQuery(trials=40000, seed=5)
    u, c = outage_curves_montecarlo(q, gammas=[4.0, 8.0], epsilons=[8e-7])
    assert u[1] == user_op_montecarlo(q)
    assert c[0] == target_op_montecarlo(q)


def test_mc_independent_of_workers():
    q = OutageQuery(trials=70000, seed=11)
    assert user_op_montecarlo(q) == user_op_montecarlo(OutageQuery(trials=70000, seed=11, workers=4))


# --------------------------------------------------------------- target

def test_target_analytic_limits():
    assert target_op_analytic(OutageQuery(epsilon=1e-15)).value == pytest.approx(1.0, abs=1e-6)
    assert target_op_analytic(OutageQuery(epsilon=1e3)).value == pytest.approx(0.0, abs=1e-3)


def test_target_analytic_vs_montecarlo():
    q = OutageQuery(trials=10**6, seed=2)
    mc = target_op_montecarlo(q)
    assert abs(target_op_analytic(q).value - mc.value) <= max(0.02, 4 * mc.std_error)


def test_target_mc_tiny_threshold():
    assert target_op_montecarlo(OutageQuery(epsilon=1e-300, trials=5000)).value == 1.0


def test_target_mc_endfire_always_outage():
    assert target_op_montecarlo(OutageQuery(epsilon=1e30, trials=5000), theta=math.pi / 2).value == 1.0


def test_target_mc_curve_nonincreasing():
    eps = 8e-7 * np.logspace(-3, 3, 13)
    _, c = outage_curves_montecarlo(OutageQuery(trials=10**5), epsilons=eps)
    assert np.all(np.diff([e.value for e in c]) <= 0)


def test_target_analytic_free_of_phi1():
    base = target_op_analytic(OutageQuery()).value
    assert target_op_analytic(OutageQuery(config=CFG.with_(b1_phase=2.0))).value == pytest.approx(base, abs=1e-9)


# ---------------------------------------------------------------- rate

def test_rate_vanishes_with_power():
    r = ergodic_rate_montecarlo(OutageQuery(config=CFG.with_(p_t=1e-9), trials=5000))
    assert r.value < 1e-7


def test_rate_mrt_matches_chi2_integral():
    cfg = CFG.with_(b2_mag=0.0)
    q = OutageQuery(config=cfg, trials=2 * 10**5, seed=4)
    rate = ergodic_rate_montecarlo(q)
    # ||h||^2 ~ Gamma(N, 1), i.e. chi2(2N) / 2
    exact, _ = integrate.quad(lambda v: np.log2(1 + cfg.p_t * v) * stats.gamma.pdf(v, cfg.N), 0, np.inf)
    assert abs(rate.value - exact) <= 5 * rate.std_error


def test_rate_reproducible_and_positive():
    q = OutageQuery(trials=30000, seed=6)
    a, b = ergodic_rate_montecarlo(q), ergodic_rate_montecarlo(q)
    assert a == b and a.value > 0 and math.isfinite(a.value)


def test_target_narrow_transition_matches_montecarlo():
    # tiny |b1| makes the conditional outage a near-step in theta
    q = OutageQuery(config=SystemConfig(N=9, b1_mag=0.05), trials=2 * 10**5, seed=8)
    mc = target_op_montecarlo(q)
    assert abs(target_op_analytic(q).value - mc.value) <= max(0.02, 4 * mc.std_error)


def test_transition_band_brackets_step():
    a, b = transition_band(lambda t: float(np.clip((t - 0.7) / 0.01, 0.0, 1.0)))
    assert 0.69 < a <= 0.7 + 1e-9 and 0.71 - 1e-9 <= b < 0.72
