from pathlib import Path

import numpy as np
import pytest

from invasion_lab.errors import ConfigError, FeatureUnresolved
from invasion_lab.io import load_config
from invasion_lab.reaction import cubic
from invasion_lab.scenarios import (SCENARIOS, scenario_blocking, scenario_cylinder, scenario_from_config,
                                    scenario_persistence)


def _field(cfg):
    with pytest.raises(ConfigError) as exc:
        scenario_from_config(cfg)
    return exc.value.field


def test_config_errors_name_the_field():
    assert _field({"scenario": "nowhere"}) == "scenario"
    assert _field({"params": {}}) == "scenario"
    assert _field({"scenario": "blocking", "params": {"nope": 1}}) == "params.nope"
    assert _field({"scenario": "omega3", "params": {"spec": {"kappa": 2}}}) == "params.spec"
    assert _field({"scenario": "blocking", "reaction": {"tag": "quartic"}}) == "reaction.tag"
    assert _field({"scenario": "blocking", "params": {"neck_eps": "wide"}}) == "params"
    # an unresolvable geometry is reported as such, not as a config error
    with pytest.raises(FeatureUnresolved):
        scenario_from_config({"scenario": "blocking", "params": {"neck_eps": 0.1}})
    with pytest.raises(ConfigError):
        scenario_from_config(["blocking"])


def test_config_builds_with_overrides():
    sc = scenario_from_config({"scenario": "blocking", "params": {"neck_eps": 0.5}, "horizon": 3.0,
                               "expected": "Invasion", "reaction": {"tag": "cubic", "theta": 0.3, "rate": 16.0}})
    assert sc.horizon == 3.0 and sc.expected == "Invasion"
    assert sc.params["aperture"] == 0.5 and sc.params["resolution"] == 12
    assert sc.reaction.params["theta"] == 0.3


def test_resolution_multiplier():
    sc = scenario_from_config({"scenario": "blocking", "params": {"neck_eps": 0.5}}, resolution_mult=2.0)
    assert sc.params["resolution"] == 24
    assert sc.mask.spacing[0] == pytest.approx(1 / 24)


def test_every_builder_is_registered():
    assert set(SCENARIOS) == {"omega1", "blocking", "cylinder", "omega3", "speed_bound", "persistence"}


def test_persistence_needs_positive_mean():
    with pytest.raises(ConfigError, match="mean"):
        scenario_persistence(f=cubic(0.7, rate=16.0))


def test_expected_labels_combine():
    res = scenario_blocking(0.5, resolution=8, horizon=0.5).run()
    res.scenario.expected = "Blocking+Persistence"
    assert res.verdict.label == "Blocking+Persistence" and res.matches
    res.scenario.expected = "Blocking"
    assert res.matches
    res.scenario.expected = "Invasion"
    assert not res.matches
    s = res.summary()
    assert s["scenario"] == "blocking" and s["label"] == "Blocking+Persistence"


def test_cylinder_datum_avoids_necks():
    sc = scenario_cylinder()
    p = sc.mask.descriptor.profile
    R, L = sc.params["R"], sc.params["L"]
    # the bump sits where the profile is nondecreasing, clear of the necks
    s = np.linspace(L / 2 - R, L / 2 + R, 401)
    assert np.all(p.slope(s) >= 0) and np.all(p(s) > 2 * R / L)
    assert sc.params["neck"] == pytest.approx(0.25)


@pytest.mark.slow
def test_cylinder_translation_invariance(cylinder_run):
    shifted = scenario_cylinder(shift_periods=1).run()
    a, b = cylinder_run.verdict, shifted.verdict
    assert a.kind == b.kind == "OrientedInvasion"
    assert abs(b.speed_right / a.speed_right - 1) < 0.01


CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_shipped_configs_build(path):
    cfg = load_config(path)
    sc = scenario_from_config(cfg)
    assert sc.name == cfg["scenario"]
    assert sc.expected == cfg["expected"]
    assert sc.mask.n_inside > 0 and sc.horizon > 0
