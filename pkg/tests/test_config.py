import json

import pytest

from padic_kinetics.config import (
    DEFAULTS,
    RateConfig,
    ScenarioConfig,
    default_config,
    glass_default,
    load_config,
    protein_default,
)
from padic_kinetics.exceptions import ConfigError, UsageError


@pytest.mark.parametrize("name", sorted(DEFAULTS))
def test_defaults_roundtrip(name, tmp_path):
    cfg = default_config(name)
    text = cfg.to_json()
    assert ScenarioConfig.from_json(text) == cfg
    path = tmp_path / "cfg.json"
    path.write_text(text)
    assert load_config(path) == cfg
    assert load_config(path).to_json() == text


def test_default_choices():
    g = glass_default()
    assert g.model.p == 3 and g.initial_ball.r0 == -1
    assert g.eigenlevel_convention == "paper"
    assert g.oracle.convention == "geometric"
    assert g.glass.quench_targets_K == [290.0, 260.0, 230.0, 200.0]
    assert g.solver.flow_direction == "physical"
    pr = protein_default()
    assert pr.grid.points == 501
    assert pr.protein.anchor_time_s == 50.0
    with pytest.raises(UsageError):
        default_config("nope")


def _mutate(cfg, fn):
    data = json.loads(cfg.to_json())
    fn(data)
    return json.dumps(data)


def _error(text):
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_json(text)
    return str(info.value)


def test_non_prime_p_is_reported_at_field():
    msg = _error(_mutate(glass_default(), lambda d: d["model"].update(p=4)))
    assert "model" in msg and "prime" in msg


def test_mixed_barrier_units_rejected():
    with pytest.raises(ValueError, match="exactly one"):
        RateConfig(kind="arrhenius", prefactor_hz=1e12, barrier_eV=0.5, barrier_J_per_mol=4e4)
    with pytest.raises(ValueError, match="does not take"):
        RateConfig(kind="constant", rate_hz=1.0, exponent=0.5)
    with pytest.raises(ValueError, match="requires"):
        RateConfig(kind="linear", rate_hz=1.0)


def test_ball_center_digits_checked():
    def bad(d):
        d["initial_ball"]["center"] = [5]

    assert "initial_ball" in _error(_mutate(glass_default(), bad))


def test_missing_inter_rate():
    msg = _error(_mutate(glass_default(), lambda d: d["model"]["inter"].pop()))
    assert "missing inter-basin rates" in msg


def test_unknown_fields_rejected():
    msg = _error(_mutate(protein_default(), lambda d: d["solver"].update(speed=11)))
    assert "solver.speed" in msg
    assert "invalid scenario config" in _error("{not json")


def test_with_updates():
    cfg = glass_default()
    new = cfg.with_updates(**{"oracle.seed": 5, "jobs": 2})
    assert new.oracle.seed == 5 and new.jobs == 2
    assert cfg.oracle.seed != 5
    with pytest.raises(ConfigError):
        cfg.with_updates(**{"oracle.paths": 0})


def test_grid_times():
    g = glass_default().grid
    t = g.times()
    assert t.size == 401 and t[0] == 0.0
    assert t[1] == pytest.approx(1e-8) and t[-1] == pytest.approx(100.0)
    p = protein_default().grid.times()
    assert p.size == 501 and p[-1] == 50.0
