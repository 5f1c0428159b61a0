import numpy as np
import pytest

from ehmac.scenario import ReducibleChainError, ScenarioChain


def two_state(p=0.02, q=0.05):
    return ScenarioChain(np.array([[1 - p, p], [q, 1 - q]]), np.array([0.05, 0.4]))


def test_stationary_two_state():
    c = two_state()
    np.testing.assert_allclose(c.stationary_distribution(), [0.05 / 0.07, 0.02 / 0.07], rtol=1e-13)
    assert c.average_eh_rate() == pytest.approx((0.05 * 0.05 + 0.02 * 0.4) / 0.07)


def test_static_chain():
    c = ScenarioChain.static(0.3)
    assert c.n_states == 1
    np.testing.assert_array_equal(c.stationary_distribution(), [1.0])


def test_large_chain_power_iteration_agrees_with_eigenvector():
    rng = np.random.default_rng(3)
    P = rng.random((80, 80))
    P /= P.sum(axis=1, keepdims=True)
    c = ScenarioChain(P, rng.random(80))
    w, v = np.linalg.eig(P.T)
    ref = np.real(v[:, np.argmin(np.abs(w - 1))])
    ref /= ref.sum()
    np.testing.assert_allclose(c.stationary_distribution(), ref, atol=1e-13)


def test_reducible_chain_names_states():
    P = np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]])
    with pytest.raises(ReducibleChainError, match=r"\[1, 2\]"):
        ScenarioChain(P, np.array([0.1, 0.2, 0.3]))


@pytest.mark.parametrize("P,beta", [
    (np.array([[0.5, 0.6], [0.5, 0.5]]), [0.1, 0.1]),
    (np.array([[1.0]]), [1.2]),
    (np.array([[0.5, 0.5]]), [0.1]),
])
def test_invalid_chain(P, beta):
    with pytest.raises(ValueError):
        ScenarioChain(P, np.array(beta))


def test_sample_path_frequencies():
    p, q = 0.02, 0.05
    c = two_state(p, q)
    n = 1_000_000
    path = c.sample_path(np.random.default_rng(11), n)
    freq = np.mean(path == 1)
    pi1 = p / (p + q)
    lam2 = 1 - p - q
    # asymptotic variance of a two-state chain occupation fraction
    sd = np.sqrt(pi1 * (1 - pi1) * (1 + lam2) / (1 - lam2) / n)
    assert abs(freq - pi1) < 3 * sd
    # empirical transition frequencies
    leave0 = np.mean(path[1:][path[:-1] == 0] == 1)
    n0 = np.sum(path[:-1] == 0)
    assert abs(leave0 - p) < 3 * np.sqrt(p * (1 - p) / n0)


def test_from_dict_shorthand_and_round_trip():
    assert ScenarioChain.from_dict({"beta": 0.1}).beta[0] == 0.1
    c = two_state()
    c2 = ScenarioChain.from_dict(c.to_dict())
    np.testing.assert_array_equal(c2.transition, c.transition)
    with pytest.raises(ValueError):
        ScenarioChain.from_dict({"beta": [0.1, 0.2]})
