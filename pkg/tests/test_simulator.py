import dataclasses

import numpy as np
import pytest

from ehmac.chain import functionals, network_utility
from ehmac.policy import InadmissiblePolicyError, Policy, constant_policy
from ehmac.scenario import ScenarioChain
from ehmac.simulator import SimConfig, empirical_chain_check, simulate
from ehmac.solver import sne
from ehmac.utility_model import ExponentialPerfect


def test_single_node_always_transmits_scores_mean_utility(expo):
    res = simulate(Policy(1, np.array([[0.0, 1.0]])), expo, ScenarioChain.static(1.0),
                   SimConfig(U=1, e_max=1, K=200_000, seed=1))
    assert res.collision_rate == 0.0
    assert abs(res.R_hat - 1.0) < 3 * res.ci_half_width
    assert res.P_hat[0] == 1.0


def test_two_greedy_nodes_always_collide(expo):
    res = simulate(Policy(1, np.array([[0.0, 1.0]])), expo, ScenarioChain.static(1.0),
                   SimConfig(U=2, e_max=1, K=10_000, seed=1))
    assert res.R_hat == 0.0
    assert res.collision_rate == 1.0


def test_matches_analysis_with_outage():
    model = ExponentialPerfect(rho=0.3)
    chain = ScenarioChain.static(0.2)
    p = constant_policy(4, [0.15])
    R, _ = network_utility(p, model, chain, 3)
    res = simulate(p, model, chain, SimConfig(U=3, e_max=4, K=400_000, seed=3))
    assert abs(res.R_hat - R) < 3 * res.ci_half_width


def test_sne_policy_u10(expo):
    chain = ScenarioChain.static(0.1)
    rep = sne(expo, chain, 10, 10)
    res = simulate(rep.policy, expo, chain, SimConfig(U=10, e_max=10, K=1_000_000,
                                                      burn_in=100_000, seed=7))
    assert abs(res.R_hat - rep.R) <= 3 * res.ci_half_width


def test_determinism_and_seed_sensitivity(expo):
    chain = ScenarioChain.static(0.3)
    p = constant_policy(3, [0.2])
    cfg = SimConfig(U=4, e_max=3, K=100_000, seed=42)
    a, b = simulate(p, expo, chain, cfg), simulate(p, expo, chain, cfg)
    assert a.R_hat == b.R_hat
    np.testing.assert_array_equal(a.per_node, b.per_node)
    np.testing.assert_array_equal(a.pi_hat, b.pi_hat)
    c = simulate(p, expo, chain, dataclasses.replace(cfg, seed=43))
    assert c.R_hat != a.R_hat


def test_ci_shrinks_like_inverse_sqrt(expo):
    chain = ScenarioChain.static(0.1)
    p = sne(expo, chain, 10, 10).policy
    ci = [simulate(p, expo, chain, SimConfig(U=10, e_max=10, K=K, seed=5)).ci_half_width
          for K in (10_000, 100_000, 1_000_000)]
    for a, b in zip(ci, ci[1:]):
        assert 0.25 <= b / a <= 0.40


def test_accounting_and_rates(expo):
    chain = ScenarioChain(np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([0.05, 0.5]))
    p = constant_policy(5, [0.05, 0.3])
    res = simulate(p, expo, chain, SimConfig(U=6, e_max=5, K=100_000, seed=9, debug=True))
    assert res.R_hat == pytest.approx(res.per_node.sum(), rel=1e-12)
    for r in (res.collision_rate, res.overflow_rate, *res.P_hat, *res.scenario_freq):
        assert 0.0 <= r <= 1.0
    np.testing.assert_allclose(res.pi_hat.sum(axis=1), 1.0)
    assert res.scenario_freq.sum() == pytest.approx(1.0)


def test_scenario_frequencies(expo):
    chain = ScenarioChain(np.array([[0.98, 0.02], [0.05, 0.95]]), np.array([0.1, 0.4]))
    res = simulate(constant_policy(2, [0.1, 0.2]), expo, chain,
                   SimConfig(U=1, e_max=2, K=1_000_000, burn_in=0, seed=2))
    pi1 = 0.02 / 0.07
    lam2 = 1 - 0.07
    sd = np.sqrt(pi1 * (1 - pi1) * (1 + lam2) / (1 - lam2) / 1_000_000)
    assert abs(res.scenario_freq[1] - pi1) < 3 * sd


def test_chain_check_and_negative_control(expo):
    chain = ScenarioChain.static(0.2)
    rep = sne(expo, chain, 5, 6)
    res = simulate(rep.policy, expo, chain, SimConfig(U=5, e_max=6, K=500_000, seed=0))
    good = empirical_chain_check(res, functionals(rep.policy.row(0), expo, 0.2))
    assert good.passed
    perturbed = rep.policy.row(0).copy()
    perturbed[1:] *= 1.3
    bad = empirical_chain_check(res, functionals(perturbed, expo, 0.2))
    assert not bad.passed


def test_chain_check_rejects_empty_window(expo):
    chain = ScenarioChain.static(0.2)
    p = constant_policy(2, [0.2])
    res = simulate(p, expo, chain, SimConfig(U=2, e_max=2, K=1_000, seed=4))
    empty = dataclasses.replace(res, window=0, node_slots=np.zeros(1))
    with pytest.raises(ValueError):
        empirical_chain_check(empty, functionals(p.row(0), expo, 0.2))


def test_rejects_inadmissible_policy(expo):
    bad = Policy(2, np.array([[0.0, 1.0, 1.0]]))
    with pytest.raises(InadmissiblePolicyError):
        simulate(bad, expo, ScenarioChain.static(0.5), SimConfig(U=2, e_max=2, K=1_000))


@pytest.mark.parametrize("kw", [dict(K=100, burn_in=100), dict(K=100, batch_count=1),
                                dict(K=100, U=0), dict(K=30, burn_in=20)])
def test_config_validation(kw):
    args = dict(U=2, e_max=2, seed=0)
    args.update(kw)
    with pytest.raises(ValueError):
        SimConfig(**args)


def test_per_node_policies(expo):
    chain = ScenarioChain.static(1.0)
    quiet = Policy(1, np.array([[0.0, 1e-12]]))
    loud = Policy(1, np.array([[0.0, 1.0]]))
    res = simulate([loud, quiet], expo, chain, SimConfig(U=2, e_max=1, K=50_000, seed=0))
    assert res.per_node[1] < 1e-6 < res.per_node[0]


def test_initial_state_and_trace(tmp_path, expo):
    chain = ScenarioChain.static(0.5)
    path = tmp_path / "trace.csv"
    cfg = SimConfig(U=2, e_max=3, K=200, burn_in=0, seed=0, e0=[0, 3], trace_path=str(path))
    simulate(constant_policy(3, [0.3]), expo, chain, cfg)
    lines = path.read_text().splitlines()
    assert lines[0] == "slot,scenario,E0,E1,Q0,Q1,outcome"
    assert len(lines) == 201
    first = lines[1].split(",")
    assert first[2:4] == ["0", "3"] and first[4] == "0"
    with pytest.raises(ValueError):
        SimConfig(U=2, e_max=3, K=10_000_000, trace_path=str(path))
