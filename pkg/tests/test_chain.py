import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehmac.chain import (DegenerateChainError, dump_csv, functionals, network_utility,
                         relative_values, steady_state)
from ehmac.policy import InadmissiblePolicyError, Policy, constant_policy
from ehmac.scenario import ScenarioChain

from oracles import battery_matrix, poisson_values, stationary_dense


@st.composite
def rows(draw, max_e=20):
    e_max = draw(st.integers(1, max_e))
    vals = draw(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=e_max, max_size=e_max))
    return np.r_[0.0, vals]


def test_constant_policy_example():
    pi = steady_state(np.r_[0.0, np.full(10, 0.1)], 0.1)
    assert pi[0] == pytest.approx(0.9 / 10.9, rel=1e-13)
    np.testing.assert_allclose(pi[1:], 1 / 10.9, rtol=1e-13)


def test_emax1_closed_form():
    beta, x = 0.3, 0.4
    pi = steady_state([0.0, x], beta)
    assert pi[1] == pytest.approx(beta / (beta + (1 - beta) * x))


@settings(max_examples=150, deadline=None)
@given(rows(), st.floats(0.01, 0.99))
def test_product_form_matches_dense_solve(eta, beta):
    pi = steady_state(eta, beta)
    np.testing.assert_allclose(pi, stationary_dense(eta, beta), atol=1e-10)
    bal = pi[:-1] * beta * (1 - eta[:-1]) - pi[1:] * (1 - beta) * eta[1:]
    assert np.max(np.abs(bal)) < 1e-12


@settings(max_examples=150, deadline=None)
@given(rows(12), st.floats(0.02, 0.98), st.floats(0.0, 3.0))
def test_relative_values_solve_poisson_equation(expo, eta, beta, lam):
    z = np.asarray(expo.g(eta)) - lam * eta
    v_ref, Z_ref = poisson_values(eta, beta, z)
    cs = functionals(eta, expo, beta, lam)
    assert cs.Z_lambda == pytest.approx(Z_ref, abs=1e-10)
    v = np.cumsum(cs.D)
    scale = max(1.0, np.max(np.abs(v_ref)))
    np.testing.assert_allclose(v, v_ref, atol=1e-7 * scale)


def test_long_battery_does_not_overflow():
    eta = np.r_[0.0, np.full(400, 1e-3)]
    pi = steady_state(eta, 0.5)
    assert np.isfinite(pi).all() and pi.sum() == pytest.approx(1.0)
    assert pi[-1] > 0.99


def test_functionals_lambda_and_u1(expo):
    eta = np.r_[0.0, 0.1, 0.2, 0.3]
    cs = functionals(eta, expo, 0.2, lam=0.5, U=4)
    assert cs.Lambda == pytest.approx(3 * cs.G / (1 - cs.P))
    assert cs.Z_lambda == pytest.approx(cs.G - 0.5 * cs.P)
    assert functionals(eta, expo, 0.2).Lambda == 0.0


def test_degenerate_rates():
    with pytest.raises(DegenerateChainError):
        steady_state([0.0, 0.5], 1.0)
    with pytest.raises(DegenerateChainError):
        steady_state([0.0, 0.5], 0.0)
    np.testing.assert_array_equal(steady_state([0.0, 0.5, 0.5], 1.0, allow_degenerate=True),
                                  [0, 0, 1])


def test_inadmissible_rows_rejected():
    with pytest.raises(InadmissiblePolicyError):
        steady_state([0.1, 0.5], 0.5)
    with pytest.raises(InadmissiblePolicyError):
        steady_state([0.0, 1.0, 0.5], 0.5)


def test_network_utility_multi_scenario(expo):
    c = ScenarioChain(np.array([[0.9, 0.1], [0.3, 0.7]]), np.array([0.05, 0.5]))
    p = constant_policy(3, [0.05, 0.2])
    R, Rs = network_utility(p, expo, c, 5)
    for s in range(2):
        cs = functionals(p.row(s), expo, c.beta[s])
        assert Rs[s] == pytest.approx(5 * cs.G * (1 - cs.P) ** 4)
    assert R == pytest.approx(0.75 * Rs[0] + 0.25 * Rs[1])
    with pytest.raises(ValueError):
        network_utility(constant_policy(3, [0.1]), expo, c, 5)


def test_dump_csv(tmp_path, expo):
    p = Policy(2, np.array([[0.0, 0.2, 0.4]]))
    path = tmp_path / "d.csv"
    dump_csv(path, p, expo, ScenarioChain.static(0.3), lam=0.5)
    lines = path.read_text().splitlines()
    assert lines[0] == "scenario,e,pi,eta,D" and len(lines) == 4


def test_relative_values_guard(expo):
    with pytest.raises(DegenerateChainError):
        relative_values([0.0, 0.5], expo, 0.0, 0.0, Z=0.0)
