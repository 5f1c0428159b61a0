import numpy as np
import pytest

from ehmac.policy import (INTERIOR_CLIP, InadmissiblePolicyError, Policy, ThresholdTable,
                          clip_interior, ebp, nbp)
from ehmac.scenario import ScenarioChain


def test_violations_name_level_and_scenario():
    p = Policy(3, np.array([[0.1, 0.0, 1.0, 1.0], [0.0, 0.2, 0.3, 1.5]]))
    bad = {(v.e, v.s) for v in p.validate()}
    assert bad == {(0, 0), (1, 0), (2, 0), (3, 1)}
    with pytest.raises(InadmissiblePolicyError, match="e=1, s=0"):
        p.require_admissible()


def test_top_level_may_be_one():
    assert Policy(2, np.array([[0.0, 0.5, 1.0]])).is_admissible()


def test_shape_checks():
    with pytest.raises(ValueError):
        Policy(2, np.zeros((1, 4)))
    with pytest.raises(ValueError):
        Policy(0, np.zeros((1, 1)))


def test_thresholds_round_trip(expo):
    p = Policy(3, np.array([[0.0, 0.05, 0.2, 0.7]]))
    table = p.to_thresholds(expo)
    assert np.isinf(table.y_th[0, 0])
    np.testing.assert_allclose(table.y_th[0, 1:], -np.log([0.05, 0.2, 0.7]))
    np.testing.assert_allclose(table.to_policy(expo).eta, p.eta, rtol=1e-14)


def test_threshold_csv(tmp_path, expo):
    p = Policy(1, np.array([[0.0, 0.5]]))
    path = tmp_path / "t.csv"
    p.to_thresholds(expo).write_csv(path, p)
    lines = path.read_text().splitlines()
    assert lines[0] == "scenario,e,eta,y_th"
    assert len(lines) == 3


def test_baselines():
    c = ScenarioChain(np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([0.05, 1.0]))
    p = ebp(4, c)
    assert p.is_admissible()
    np.testing.assert_allclose(p.eta[0, 1:], 0.05)
    assert p.eta[1, 4] == 1.0 and p.eta[1, 2] == 1.0 - INTERIOR_CLIP
    q = nbp(3, 4, n_scenarios=2)
    np.testing.assert_allclose(q.eta[:, 1:], 0.25)


def test_ebp_zero_harvest_flagged():
    p = ebp(2, ScenarioChain.static(0.0))
    assert p.is_admissible()
    assert p.notes and "zero harvest" in p.notes[0]


def test_clip_interior():
    row = clip_interior(np.array([0.3, 0.0, 1.0, 1.0]))
    assert row[0] == 0.0 and 0 < row[1] < 1 and row[2] < 1 and row[3] == 1.0


def test_policy_dict_round_trip():
    p = Policy(2, np.array([[0.0, 0.1, 0.4]]))
    np.testing.assert_array_equal(Policy.from_dict(p.to_dict()).eta, p.eta)
