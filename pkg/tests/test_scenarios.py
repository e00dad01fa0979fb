import numpy as np
import pytest

from padic_kinetics.config import glass_default, protein_default
from padic_kinetics.exceptions import UsageError
from padic_kinetics.scenarios import (
    Table,
    build_model,
    emit_csv,
    first_crossing,
    glass_schedule,
    monotone_approach,
    run_custom_scenario,
    run_oracle_compare,
    scenario_schedule,
    two_basin_rates,
)


def test_glass_tables(glass_bundle):
    assert set(glass_bundle.tables) == {f"glass_T{t}K" for t in (290, 260, 230, 200)} | {"control_T300K"}
    tab = glass_bundle.tables["glass_T200K"]
    assert tab.columns == ["t", "T", "p1_closed", "p1_trotter", "S"]
    assert tab.column("t").size == 401
    assert tab.column("T")[-1] == pytest.approx(200.0)
    assert tab.column("S")[0] == 1.0
    assert np.max(np.abs(tab.column("p1_closed") - tab.column("p1_trotter"))) < 1e-4


def test_glass_final_state_is_stationary(glass_bundle):
    for target in ("290", "260", "230"):
        info = glass_bundle.summary["targets"][target]
        assert info["p1_final"] == pytest.approx(info["p1_stationary"], rel=1e-6)


def test_glass_control_rates(glass_bundle):
    rates = glass_bundle.summary["control"]["decay_rates_hz"]
    assert rates[0] == 0.0
    assert rates[1] == pytest.approx(1e12 * (np.exp(-0.5 / (8.617333262e-5 * 300)) + np.exp(-0.8 / (8.617333262e-5 * 300))), rel=1e-9)


def test_protein_tables(protein_bundle):
    rel = protein_bundle.tables["relaxation"]
    assert rel.columns == ["t", "T", "p1_closed", "p1_trotter", "p2", "S"]
    assert np.allclose(rel.column("p1_closed") + rel.column("p2"), 1.0, atol=1e-12)
    ctrl = protein_bundle.tables["control"]
    assert ctrl.columns[0] == "t" and len(ctrl.columns) == 7


def test_flow_direction_swaps_rates():
    cfg = glass_default()
    model = build_model(cfg, glass_schedule(cfg.glass, 200.0, 1.0), 1.0)
    drain, feed = two_basin_rates(model, 0, "physical")
    vdrain, vfeed = two_basin_rates(model, 0, "verbatim")
    assert drain(0.0) == vfeed(0.0) and feed(0.0) == vdrain(0.0)
    assert drain(0.0) > feed(0.0)
    with pytest.raises(UsageError):
        two_basin_rates(model, 0, "sideways")


def test_first_crossing_interpolates_in_log_time():
    t = np.array([0.0, 1e-6, 1e-5, 1e-4])
    v = np.array([1.0, 0.8, 0.4, 0.1])
    tc = first_crossing(t, v)
    assert 1e-6 < tc < 1e-5
    assert first_crossing(t, v + 1.0) is None
    assert monotone_approach(np.array([1.0, 0.5, 0.2, 0.1]), 0.1)
    assert not monotone_approach(np.array([1.0, 0.05, 0.1]), 0.1)


def test_custom_scenario_from_protein_model():
    cfg = protein_default().with_updates(scenario="custom", **{"grid.points": 26})
    bundle = run_custom_scenario(cfg)
    assert bundle.ok
    tab = bundle.tables["relaxation"]
    assert tab.columns == ["t", "T", "p_U", "p_F", "p_U_trotter", "p_F_trotter", "S"]


def test_custom_scenario_three_basins():
    cfg = protein_default()
    data = cfg.model_dump(mode="json")
    rate = {"kind": "constant", "rate_hz": 0.3}
    data["model"]["basins"].append({"label": "M", "levels": [{"kind": "constant", "rate_hz": 2.0}], "tail": "constant"})
    for other in ("U", "F"):
        data["model"]["inter"] += [{"source": "M", "target": other, "rate": rate}, {"source": other, "target": "M", "rate": rate}]
    data["scenario"] = "custom"
    data["grid"]["points"] = 11
    cfg = type(cfg).model_validate(data)
    bundle = run_custom_scenario(cfg)
    assert bundle.ok
    assert "p_M" in bundle.tables["relaxation"].columns


def test_emit_csv_format(tmp_path):
    path = emit_csv(Table(["t", "p"], ["s", "1"], [np.array([0.0, 0.1]), np.array([1.0, 1 / 3])]), tmp_path / "a.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode().splitlines() == ["t [s],p [1]", "0,1", "0.1,0.333333333333"]
    empty = emit_csv(Table(["t"], ["s"], [np.array([])]), tmp_path / "b.csv")
    assert empty.read_text() == "t [s]\n"
    with pytest.raises(UsageError):
        emit_csv(Table(["a", "b"], ["1", "1"], [[1.0], [1.0, 2.0]]), tmp_path / "c.csv")


def test_oracle_compare_protein_without_mc():
    bundle = run_oracle_compare(protein_default(), skip_mc=True)
    assert bundle.ok
    assert bundle.summary["eigen"]["inferred_convention"] == "geometric"
    assert bundle.summary["trajectory"]["max_abs_density_error"] <= 1e-5


def test_oracle_compare_shifted_convention_fails():
    cfg = protein_default().with_updates(**{"oracle.convention": "paper"})
    bundle = run_oracle_compare(cfg, skip_mc=True)
    assert not bundle.checks["eigenvalues_matched"]
    assert not bundle.ok


def test_oracle_depth_cap():
    cfg = glass_default().with_updates(**{"oracle.depth": 7})
    with pytest.raises(UsageError):
        run_oracle_compare(cfg, skip_mc=True)


def test_schedule_follows_config():
    cfg = protein_default()
    sched = scenario_schedule(cfg)
    assert sched(0.0) == pytest.approx(309.0) and sched(50.0) == pytest.approx(316.15)
