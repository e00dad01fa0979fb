"""Scenario runners: glass cooling, protein folding, oracle comparison, Monte Carlo.

Each runner returns a ``Bundle`` (tables, summary, resolved config); writing
it to disk is a separate step so tests can inspect results in memory.
"""

from __future__ import annotations

import json
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from . import __version__
from .basin import Basin, LandscapeModel, evolve_mean_rk4, evolve_mean_trotter, p1_closed_form
from .config import GlassConfig, RateConfig, ScenarioConfig
from .exceptions import UsageError
from ._functions import ConstantRate, LinearRate
from .oracle import (
    MAX_DENSE_STATES,
    ball_tree_state,
    mc_simulate,
    solve_dense_ode,
    spectral_match,
)
from .padic import BallSpec, RadialProfile
from .rates import (
    ArrheniusRate,
    ArrheniusSpec,
    PowerRate,
    ProteinRate,
    ProteinThermo,
    Segment,
    TemperatureSchedule,
    protein_rates,
)
from .spectral import (
    expand_ball_indicator,
    gamma_eigenvalue,
    gamma_index,
    reconstruct_density,
    spectral_trajectory,
    survival_probability,
)

OUTPUT_ENV = "PADIC_KINETICS_OUT"


# -- output ----------------------------------------------------------------------


@dataclass
class Table:
    """Columns of equal length; ``units[i]`` annotates ``columns[i]`` in the header."""

    columns: list
    units: list
    data: list = field(default_factory=list)  # one 1-d array (or list of str) per column

    def column(self, name):
        return np.asarray(self.data[self.columns.index(name)])


@dataclass
class Bundle:
    name: str
    config: ScenarioConfig
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def checks(self) -> dict:
        return self.summary.get("checks", {})

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    if v == 0.0:
        return "0"
    return f"{v:.12g}"


def emit_csv(series: Table, path) -> Path:
    """Write ``series`` as CSV: ``name [unit]`` header, 12 significant digits, LF endings."""
    path = Path(path)
    header = ",".join(f"{c} [{u}]" for c, u in zip(series.columns, series.units))
    lengths = {len(col) for col in series.data}
    if len(lengths) > 1:
        raise UsageError("all columns of a table must have the same length")
    rows = zip(*series.data) if series.data else ()
    lines = [header] + [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def version_string() -> str:
    """Package version, extended with ``git describe`` when run from a checkout."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here,
            capture_output=True,
            text=True,
            timeout=5,
        )
        desc = out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+{desc}" if desc else __version__


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def write_bundle(bundle: Bundle, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"version": version_string(), "config": bundle.config.model_dump(mode="json")}
    (out / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for name, table in bundle.tables.items():
        emit_csv(table, out / f"{name}.csv")
    summary = dict(_clean(bundle.summary), scenario=bundle.name, version=version_string())
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def default_output_dir(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "padic-kinetics-out")) / name


# -- model construction ----------------------------------------------------------


def build_schedule(segments) -> TemperatureSchedule:
    return TemperatureSchedule(
        [Segment(s.t_start_s, s.t_end_s, s.shape, s.T_start_K, s.T_end_K, s.tau_s) for s in segments]
    )


def glass_schedule(glass: GlassConfig, target: float, t_end: float) -> TemperatureSchedule:
    """Exponential approach from the initial temperature to ``target``, then hold."""
    segs = [Segment(0.0, glass.cooling_time_s, "exponential", glass.T_initial_K, target, glass.cooling_tau_s)]
    if glass.T_initial_K == target:
        segs = [Segment(0.0, glass.cooling_time_s, "constant", target)]
    if t_end > glass.cooling_time_s:
        segs.append(Segment(glass.cooling_time_s, t_end, "constant", target))
    return TemperatureSchedule(segs)


def thermo_from_config(cfg: ScenarioConfig) -> ProteinThermo:
    th = cfg.protein.thermo
    return ProteinThermo(
        R=th.R_J_per_mol_K,
        T_m=th.T_m_K,
        dH_f=th.dH_f_J_per_mol,
        dS_f=th.dS_f_J_per_mol_K,
        dCp_f=th.dCp_f_J_per_mol_K,
        dH_u=th.dH_u_J_per_mol,
        dS_u=th.dS_u_J_per_mol_K,
        dCp_u=th.dCp_u_J_per_mol_K,
    )


def build_rate(rc: RateConfig, schedule: TemperatureSchedule, thermo: ProteinThermo | None = None):
    if rc.kind == "constant":
        return ConstantRate(rc.rate_hz)
    if rc.kind == "linear":
        return LinearRate(rc.rate_hz, rc.slope_hz_per_s)
    if rc.kind == "arrhenius":
        if rc.barrier_eV is not None:
            spec = ArrheniusSpec(rc.prefactor_hz, rc.barrier_eV, "eV")
        else:
            spec = ArrheniusSpec(rc.prefactor_hz, rc.barrier_J_per_mol, "J/mol")
        return ArrheniusRate(spec, schedule)
    if thermo is None:
        raise UsageError(f"rate kind {rc.kind!r} needs folding thermodynamics")
    if rc.kind == "protein_fold":
        return ProteinRate(thermo, schedule, "fold")
    if rc.kind == "protein_unfold":
        return ProteinRate(thermo, schedule, "unfold")
    return PowerRate(ProteinRate(thermo, schedule, "unfold"), rc.exponent)


def build_model(cfg: ScenarioConfig, schedule: TemperatureSchedule, t_end: float) -> LandscapeModel:
    m = cfg.model
    thermo = thermo_from_config(cfg) if cfg.protein is not None else None
    labels = [b.label for b in m.basins]
    basins = [
        Basin(b.label, RadialProfile(m.p, [build_rate(lv, schedule, thermo) for lv in b.levels], b.tail))
        for b in m.basins
    ]
    n = len(labels)
    inter = [[None] * n for _ in range(n)]
    for e in m.inter:
        inter[labels.index(e.target)][labels.index(e.source)] = build_rate(e.rate, schedule, thermo)
    cuts = [c for c in schedule.breakpoints if 0.0 < c < t_end]
    return LandscapeModel(m.p, basins, inter, horizon=(0.0, t_end), breakpoints=cuts)


def initial_ball(cfg: ScenarioConfig) -> BallSpec:
    b = cfg.initial_ball
    labels = [x.label for x in cfg.model.basins]
    return BallSpec(labels.index(b.basin), tuple(b.center), b.r0)


def scenario_schedule(cfg: ScenarioConfig, target: float | None = None) -> TemperatureSchedule:
    if cfg.scenario == "glass":
        t = target if target is not None else cfg.glass.quench_targets_K[-1]
        return glass_schedule(cfg.glass, t, cfg.grid.t_end_s)
    return build_schedule(cfg.temperature)


# -- shared evolution pieces -------------------------------------------------------


def two_basin_rates(model: LandscapeModel, home: int, direction: str = "physical"):
    """``(drain, feed)`` rates of the home basin in a two-basin model.

    ``physical`` drains the home basin at its exit rate and feeds it at the
    other basin's exit rate. ``verbatim`` swaps the two rates.
    """
    if model.n_basins != 2:
        raise UsageError("two-basin formulas need exactly two basins")
    other = 1 - home
    drain, feed = model.inter[other][home], model.inter[home][other]
    if direction == "physical":
        return drain, feed
    if direction == "verbatim":
        return feed, drain
    raise UsageError(f"unknown flow direction {direction!r}")


def mean_sector(cfg: ScenarioConfig, model: LandscapeModel, home: int, times) -> np.ndarray:
    """Basin occupations on ``times`` with all mass in ``home`` at the start."""
    solver = cfg.solver
    N = model.n_basins
    if solver.mean_method == "closed-form" and N == 2:
        drain, feed = two_basin_rates(model, home, solver.flow_direction)
        p = p1_closed_form(drain, feed, times, tol=solver.quad_tol, breakpoints=model.breakpoints)
        out = np.empty((len(times), 2))
        out[:, home] = p
        out[:, 1 - home] = 1.0 - p
        return out
    if solver.flow_direction != "physical":
        raise UsageError("the verbatim flow direction exists for the two-basin closed form only")
    u0 = np.zeros(N)
    u0[home] = 1.0
    if solver.rk4_dt_s is not None:
        return evolve_mean_rk4(u0, model, times, dt=solver.rk4_dt_s).probabilities
    return evolve_mean_rk4(u0, model, times, steps_per_cell=solver.rk4_steps_per_cell).probabilities


def trotter_sector(cfg: ScenarioConfig, model: LandscapeModel, home: int, times) -> np.ndarray:
    u0 = np.zeros(model.n_basins)
    u0[home] = 1.0
    return evolve_mean_trotter(u0, model, times, cfg.solver.trotter_steps).probabilities


def first_crossing(times, values, level: float = 0.5):
    """First time ``values`` drops below ``level``, interpolated linearly in log t."""
    times, values = np.asarray(times), np.asarray(values)
    below = np.flatnonzero(values < level)
    if not below.size:
        return None
    k = int(below[0])
    if k == 0:
        return float(times[0])
    t0, t1, v0, v1 = times[k - 1], times[k], values[k - 1], values[k]
    frac = (v0 - level) / (v0 - v1)
    if t0 > 0:
        return float(np.exp(np.log(t0) + frac * (np.log(t1) - np.log(t0))))
    return float(t0 + frac * (t1 - t0))


def monotone_approach(values, target, atol: float = 1e-13) -> bool:
    """``|values - target|`` never increases and ``values`` never changes direction."""
    gap = np.abs(np.asarray(values) - target)
    steps = np.diff(np.asarray(values))
    one_way = np.all(steps <= atol) or np.all(steps >= -atol)
    return bool(np.all(np.diff(gap) <= atol) and one_way)


# -- glass ---------------------------------------------------------------------------


def _glass_target(cfg_json: str, target: float) -> dict:
    cfg = ScenarioConfig.from_json(cfg_json)
    times = cfg.grid.times()
    sched = glass_schedule(cfg.glass, target, cfg.grid.t_end_s)
    model = build_model(cfg, sched, cfg.grid.t_end_s)
    ball = initial_ball(cfg)
    home = ball.basin
    mean = mean_sector(cfg, model, home, times)
    trot = trotter_sector(cfg, model, home, times)
    surv = survival_probability(ball, model, times, cfg.eigenlevel_convention, mean=mean, tol=cfg.solver.quad_tol)
    # frozen stationary value once the temperature stops changing
    t_hold = cfg.glass.cooling_time_s
    drain, feed = two_basin_rates(model, home, cfg.solver.flow_direction)
    a, b = float(feed(t_hold)), float(drain(t_hold))
    p_star = a / (a + b)
    post = times >= t_hold
    return {
        "target": target,
        "t": times,
        "T": sched(times),
        "p1_closed": mean[:, home],
        "p1_trotter": trot[:, home],
        "S": surv.S,
        "delay": first_crossing(times, surv.S, 0.5),
        "p1_stationary": p_star,
        "monotone": monotone_approach(mean[post, home], p_star),
        "trotter_max_diff": float(np.max(np.abs(trot[:, home] - mean[:, home]))),
    }


def _constant_control(cfg: ScenarioConfig, T: float) -> dict:
    """Glass model at fixed temperature; S is then a finite exponential mixture."""
    times = cfg.grid.times()
    sched = TemperatureSchedule.constant(T, cfg.grid.t_end_s)
    model = build_model(cfg, sched, cfg.grid.t_end_s)
    ball = initial_ball(cfg)
    home = ball.basin
    mean = mean_sector(cfg, model, home, times)
    surv = survival_probability(ball, model, times, cfg.eigenlevel_convention, mean=mean, tol=cfg.solver.quad_tol)
    drain, feed = two_basin_rates(model, home, cfg.solver.flow_direction)
    rates = [0.0, float(drain(0.0) + feed(0.0))]
    state = expand_ball_indicator(ball, model.p, model.n_basins)
    for r in sorted({w.index.r for w in state.wavelets}):
        g = gamma_eigenvalue(model.profile(home), model.outflow(home, 0.0), gamma_index(r, cfg.eigenlevel_convention), 0.0)
        rates.append(float(g))
    basis = np.exp(-np.outer(times, rates))
    coef, *_ = np.linalg.lstsq(basis, surv.S, rcond=None)
    fit = basis @ coef
    return {
        "T": T,
        "t": times,
        "p1": mean[:, home],
        "S": surv.S,
        "S_fit": fit,
        "rates": rates,
        "residual": float(np.max(np.abs(fit - surv.S))),
    }


def _map(fn, args, jobs):
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, *zip(*args)))
    return [fn(*a) for a in args]


def run_glass_scenario(cfg: ScenarioConfig, jobs: int | None = None) -> Bundle:
    if cfg.scenario != "glass" or cfg.glass is None:
        raise UsageError("run_glass_scenario needs a glass config")
    jobs = cfg.jobs if jobs is None else jobs
    text = cfg.to_json()
    runs = _map(_glass_target, [(text, T) for T in cfg.glass.quench_targets_K], jobs)
    bundle = Bundle("glass", cfg)
    per_target = {}
    for run in runs:
        key = f"glass_T{run['target']:g}K"
        bundle.tables[key] = Table(
            ["t", "T", "p1_closed", "p1_trotter", "S"],
            ["s", "K", "1", "1", "1"],
            [run["t"], run["T"], run["p1_closed"], run["p1_trotter"], run["S"]],
        )
        per_target[f"{run['target']:g}"] = {
            "delay_s": run["delay"],
            "p1_stationary": run["p1_stationary"],
            "p1_final": float(run["p1_closed"][-1]),
            "monotone_post_quench": run["monotone"],
            "trotter_max_abs_diff": run["trotter_max_diff"],
            "S_initial": float(run["S"][0]),
        }
    # ordering: deeper quench (lower target) must be slower to leave the ball
    ordered = sorted(runs, key=lambda r: -r["target"])
    delays = [r["delay"] for r in ordered]
    delay_ok = all(d is not None for d in delays) and all(x < y for x, y in zip(delays[:-1], delays[1:]))
    checks = {
        "delay_increases_with_quench_depth": bool(delay_ok),
        "p1_monotone_post_quench": all(r["monotone"] for r in runs),
        "S_initial_is_one": all(abs(r["S"][0] - 1.0) <= 1e-12 for r in runs),
    }
    summary = {"targets": per_target, "delay_order_K": [r["target"] for r in ordered]}
    if cfg.glass.control:
        ctl = _constant_control(cfg, cfg.glass.T_initial_K)
        bundle.tables[f"control_T{ctl['T']:g}K"] = Table(
            ["t", "T", "p1", "S", "S_fit"],
            ["s", "K", "1", "1", "1"],
            [ctl["t"], np.full(ctl["t"].size, ctl["T"]), ctl["p1"], ctl["S"], ctl["S_fit"]],
        )
        summary["control"] = {"T_K": ctl["T"], "decay_rates_hz": ctl["rates"], "fit_residual": ctl["residual"]}
        checks["control_is_exponential_mixture"] = ctl["residual"] < cfg.glass.control_fit_tol
    summary["checks"] = checks
    bundle.summary = summary
    return bundle


# -- protein ---------------------------------------------------------------------


def rate_crossing(thermo: ProteinThermo, schedule: TemperatureSchedule, t_lo: float, t_hi: float):
    """Time at which k_f = k_u along the schedule, or None if no sign change."""
    f = lambda t: float(np.log(protein_rates(thermo, schedule(t))[0] / protein_rates(thermo, schedule(t))[1]))
    if f(t_lo) * f(t_hi) > 0:
        return None
    return float(optimize.brentq(f, t_lo, t_hi, xtol=1e-12, rtol=1e-14))


def interior_minimum(times, values):
    """``(t, value)`` of the smallest value if it lies strictly inside the grid."""
    k = int(np.argmin(values))
    if 0 < k < len(values) - 1:
        return float(times[k]), float(values[k])
    return None


def run_protein_scenario(cfg: ScenarioConfig) -> Bundle:
    if cfg.scenario != "protein" or cfg.protein is None:
        raise UsageError("run_protein_scenario needs a protein config")
    times = cfg.grid.times()
    t_end = cfg.grid.t_end_s
    sched = build_schedule(cfg.temperature)
    thermo = thermo_from_config(cfg)
    model = build_model(cfg, sched, t_end)
    ball = initial_ball(cfg)
    home = ball.basin
    T = sched(times)
    k_f, k_u = protein_rates(thermo, T)
    prof = model.profile(home)
    w = [np.asarray(prof.value(m, times), dtype=float) for m in range(prof.depth)]
    bundle = Bundle("protein", cfg)
    bundle.tables["rates"] = Table(
        ["t", "T", "k_f", "k_u"] + [f"w_level{m}" for m in range(prof.depth)],
        ["s", "K", "Hz", "Hz"] + ["Hz"] * prof.depth,
        [times, T, k_f, k_u] + w,
    )
    # relaxations with every rate frozen at a control time
    drain, feed = two_basin_rates(model, home, cfg.solver.flow_direction)
    cols, data, frozen_rates = ["t"], [times], {}
    for tc in cfg.protein.control_times_s:
        a, b = float(feed(tc)), float(drain(tc))
        cols.append(f"p1_frozen_{tc:g}s")
        data.append(a / (a + b) + (1.0 - a / (a + b)) * np.exp(-(a + b) * (times - times[0])))
        frozen_rates[f"{tc:g}"] = {"feed_hz": a, "drain_hz": b}
    bundle.tables["control"] = Table(cols, ["s"] + ["1"] * (len(cols) - 1), data)
    mean = mean_sector(cfg, model, home, times)
    trot = trotter_sector(cfg, model, home, times)
    surv = survival_probability(ball, model, times, cfg.eigenlevel_convention, mean=mean, tol=cfg.solver.quad_tol)
    bundle.tables["relaxation"] = Table(
        ["t", "T", "p1_closed", "p1_trotter", "p2", "S"],
        ["s", "K", "1", "1", "1", "1"],
        [times, T, mean[:, home], trot[:, home], mean[:, 1 - home], surv.S],
    )
    cross = rate_crossing(thermo, sched, times[0], t_end)
    T_cross = None if cross is None else float(sched(cross))
    anchor = cfg.protein.anchor_time_s
    S_anchor = float(np.interp(anchor, times, surv.S))
    dip = interior_minimum(times, mean[:, home])
    t_m_time = None
    if min(T) <= thermo.T_m <= max(T):
        t_m_time = float(optimize.brentq(lambda t: sched(t) - thermo.T_m, times[0], t_end))
    checks = {
        "rates_cross_near_T_m": T_cross is not None and abs(T_cross - thermo.T_m) <= 0.3,
        "S_initial_is_one": float(surv.S[0]) == 1.0,
        "S_anchor_near_one_third": abs(S_anchor - 1.0 / 3.0) <= 0.05,
        "p1_has_interior_minimum": dip is not None,
        "conservation": float(np.max(np.abs(mean.sum(axis=1) - 1.0))) <= 1e-10,
    }
    bundle.summary = {
        "crossing_time_s": cross,
        "crossing_temperature_K": T_cross,
        "T_m_K": thermo.T_m,
        "T_m_reached_at_s": t_m_time,
        "S_initial": float(surv.S[0]),
        "S_anchor": S_anchor,
        "anchor_time_s": anchor,
        "p1_minimum": None if dip is None else {"t_s": dip[0], "p1": dip[1]},
        "trotter_max_abs_diff": float(np.max(np.abs(trot[:, home] - mean[:, home]))),
        "frozen_rates": frozen_rates,
        "checks": checks,
    }
    return bundle


# -- custom ------------------------------------------------------------------------


def run_custom_scenario(cfg: ScenarioConfig) -> Bundle:
    """Any landscape from the config: basin occupations, Trotter check and S(t)."""
    times = cfg.grid.times()
    sched = scenario_schedule(cfg)
    model = build_model(cfg, sched, cfg.grid.t_end_s)
    model.validate()
    ball = initial_ball(cfg)
    mean = mean_sector(cfg, model, ball.basin, times)
    trot = trotter_sector(cfg, model, ball.basin, times)
    surv = survival_probability(ball, model, times, cfg.eigenlevel_convention, mean=mean, tol=cfg.solver.quad_tol)
    labels = [b.label for b in cfg.model.basins]
    cols = ["t", "T"] + [f"p_{x}" for x in labels] + [f"p_{x}_trotter" for x in labels] + ["S"]
    data = [times, sched(times)] + [mean[:, i] for i in range(len(labels))]
    data += [trot[:, i] for i in range(len(labels))] + [surv.S]
    bundle = Bundle("custom", cfg)
    bundle.tables["relaxation"] = Table(cols, ["s", "K"] + ["1"] * (len(cols) - 2), data)
    drift = float(np.max(np.abs(mean.sum(axis=1) - 1.0)))
    bundle.summary = {
        "S_initial": float(surv.S[0]),
        "S_final": float(surv.S[-1]),
        "trotter_max_abs_diff": float(np.max(np.abs(trot - mean))),
        "checks": {"conservation": drift <= 1e-10, "S_initial_is_one": abs(surv.S[0] - 1.0) <= 1e-12},
    }
    return bundle


# -- oracle comparison -------------------------------------------------------------


def _oracle_model(cfg: ScenarioConfig, t_end: float) -> LandscapeModel:
    return build_model(cfg, scenario_schedule(cfg), t_end)


def _horizon(cfg: ScenarioConfig, value):
    return value if value is not None else cfg.grid.t_end_s


def eigen_table(report) -> Table:
    rows = report.rows
    return Table(
        ["dense_re", "dense_im", "predicted_re", "predicted_im", "source", "relative_mismatch"],
        ["Hz", "Hz", "Hz", "Hz", "-", "1"],
        [
            [r[0].real for r in rows],
            [r[0].imag for r in rows],
            [r[1].real for r in rows],
            [r[1].imag for r in rows],
            [r[2] for r in rows],
            [r[3] for r in rows],
        ],
    )


def trajectory_errors(cfg: ScenarioConfig, model: LandscapeModel, times, dt: float) -> np.ndarray:
    """Max leaf-density error of the spectral solution against dense RK4, per time."""
    o = cfg.oracle
    ball = initial_ball(cfg)
    p, n, N = model.p, o.depth, model.n_basins
    dense = solve_dense_ode(ball_tree_state(ball, p, n, N), model, times, dt)
    state = expand_ball_indicator(ball, p, N)
    mean = mean_sector(cfg, model, ball.basin, times)
    spec = spectral_trajectory(state, model, times, mean, convention=o.convention, tol=cfg.solver.quad_tol)
    return np.array(
        [np.max(np.abs(reconstruct_density(s, p, n) - d.density)) for s, d in zip(spec, dense)]
    )


def chi_square_leaves(counts, expected_prob, paths: int, min_expected: float = 5.0):
    """Pearson chi-square of leaf counts; sparse leaves are pooled into one bin."""
    counts = np.asarray(counts, dtype=float)
    expected = np.clip(np.asarray(expected_prob, dtype=float), 0.0, None) * paths
    expected *= paths / expected.sum()
    big = expected >= min_expected
    obs = list(counts[big])
    exp = list(expected[big])
    if (~big).any():
        obs.append(counts[~big].sum())
        exp.append(expected[~big].sum())
    obs, exp = np.array(obs), np.array(exp)
    keep = exp > 0
    obs, exp = obs[keep], exp[keep]
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = max(int(obs.size) - 1, 1)
    return stat, dof, float(stats.chi2.sf(stat, dof))


def monte_carlo_check(cfg: ScenarioConfig, model: LandscapeModel, horizon: float, paths: int, seed: int) -> dict:
    """MC occupancy of the initial ball against the spectral S(t), and leaf chi-square."""
    o = cfg.oracle
    ball = initial_ball(cfg)
    p, n, N = model.p, o.depth, model.n_basins
    checkpoints = np.linspace(0.0, horizon, o.mc_checkpoints + 1)[1:]
    half = 0.5 * horizon
    times = np.union1d(checkpoints, [half])
    mc = mc_simulate(model, ball, n, np.concatenate([[0.0], times]), paths, seed)
    grid = np.concatenate([[0.0], times])
    mean = mean_sector(cfg, model, ball.basin, grid)
    surv = survival_probability(ball, model, grid, convention=o.convention, mean=mean, tol=cfg.solver.quad_tol)
    idx = np.searchsorted(grid, checkpoints)
    predicted = surv.S[idx]
    observed = mc.occupancy(ball)[idx]
    se = np.sqrt(np.maximum(predicted * (1.0 - predicted), 1.0 / paths) / paths)
    z = (observed - predicted) / se
    basin_pred = mean[idx, ball.basin]
    basin_obs = mc.basin_occupancy(ball.basin)[idx]
    basin_se = np.sqrt(np.maximum(basin_pred * (1.0 - basin_pred), 1.0 / paths) / paths)
    basin_z = (basin_obs - basin_pred) / basin_se
    # leaf histogram at the half horizon against the dense master equation
    dt = o.trajectory_dt_s if o.trajectory_dt_s is not None else half / 2000.0
    dense = solve_dense_ode(ball_tree_state(ball, p, n, N), model, [0.0, half], min(dt, half / 10.0))[-1]
    k_half = int(np.searchsorted(grid, half))
    stat, dof, pval = chi_square_leaves(mc.counts[k_half], dense.occupation, paths)
    return {
        "checkpoints": checkpoints,
        "observed": observed,
        "predicted": predicted,
        "standard_error": se,
        "z": z,
        "basin_observed": basin_obs,
        "basin_predicted": basin_pred,
        "basin_z": basin_z,
        "chi2": stat,
        "chi2_dof": dof,
        "chi2_pvalue": pval,
        "rate_bound_hz": mc.rate_bound,
        "counts": mc.counts,
    }


def mc_table(mcres: dict) -> Table:
    return Table(
        ["t", "S_mc", "S_spectral", "se", "z", "basin_mc", "basin_predicted", "basin_z"],
        ["s", "1", "1", "1", "1", "1", "1", "1"],
        [
            mcres["checkpoints"],
            mcres["observed"],
            mcres["predicted"],
            mcres["standard_error"],
            mcres["z"],
            mcres["basin_observed"],
            mcres["basin_predicted"],
            mcres["basin_z"],
        ],
    )


def _mc_summary(mcres) -> dict:
    return {
        "max_abs_z": float(np.max(np.abs(mcres["z"]))),
        "max_abs_basin_z": float(np.max(np.abs(mcres["basin_z"]))),
        "chi2": mcres["chi2"],
        "chi2_dof": mcres["chi2_dof"],
        "chi2_pvalue": mcres["chi2_pvalue"],
        "rate_bound_hz": mcres["rate_bound_hz"],
    }


def run_oracle_compare(cfg: ScenarioConfig, paths: int | None = None, seed: int | None = None, skip_mc: bool = False) -> Bundle:
    """Eigenvalue match, dense-vs-spectral trajectories and a Monte Carlo check."""
    o = cfg.oracle
    size = cfg.model.p**o.depth * len(cfg.model.basins)
    if size > MAX_DENSE_STATES:
        raise UsageError(f"oracle depth {o.depth} gives {size} states, above the cap of {MAX_DENSE_STATES}")
    paths = o.paths if paths is None else paths
    seed = o.seed if seed is None else seed
    traj_h = _horizon(cfg, o.trajectory_horizon_s)
    mc_h = _horizon(cfg, o.mc_horizon_s)
    model = _oracle_model(cfg, max(traj_h, mc_h, o.t0_s))
    bundle = Bundle("oracle-compare", cfg)
    report = spectral_match(model, o.depth, t0=o.t0_s, convention=o.convention, tol=o.eigen_tol)
    bundle.tables["eigenvalues"] = eigen_table(report)
    times = np.linspace(0.0, traj_h, o.trajectory_points)
    dt = o.trajectory_dt_s if o.trajectory_dt_s is not None else traj_h / 4000.0
    errs = trajectory_errors(cfg, model, times, dt)
    bundle.tables["trajectory"] = Table(["t", "max_abs_density_error"], ["s", "1"], [times, errs])
    checks = {
        "eigenvalues_matched": bool(report.matched),
        "trajectory_within_tol": float(errs.max()) <= o.trajectory_tol,
    }
    summary = {
        "eigen": {
            "convention": report.convention,
            "inferred_convention": report.inferred_convention,
            "max_relative_mismatch": report.max_relative_mismatch,
            "scale_to_gamma": {f"{k[0]}:{k[1]}": v for k, v in report.scale_to_gamma.items()},
            "failures": report.failures,
        },
        "trajectory": {"max_abs_density_error": float(errs.max()), "dt_s": dt, "horizon_s": traj_h},
    }
    if not skip_mc:
        mcres = monte_carlo_check(cfg, model, mc_h, paths, seed)
        bundle.tables["monte_carlo"] = mc_table(mcres)
        summary["monte_carlo"] = dict(_mc_summary(mcres), paths=paths, seed=seed, horizon_s=mc_h)
        checks["mc_within_sigma"] = float(np.max(np.abs(mcres["z"]))) <= o.mc_sigma
        checks["mc_basin_within_sigma"] = float(np.max(np.abs(mcres["basin_z"]))) <= o.mc_sigma
        checks["chi_square_leaves"] = mcres["chi2_pvalue"] >= o.chi2_alpha
    summary["checks"] = checks
    bundle.summary = summary
    return bundle


def run_mc(cfg: ScenarioConfig, paths: int | None = None, seed: int | None = None) -> Bundle:
    """Monte Carlo occupancy of the initial ball with its spectral prediction."""
    o = cfg.oracle
    paths = o.paths if paths is None else paths
    seed = o.seed if seed is None else seed
    horizon = _horizon(cfg, o.mc_horizon_s)
    model = _oracle_model(cfg, horizon)
    mcres = monte_carlo_check(cfg, model, horizon, paths, seed)
    bundle = Bundle("mc", cfg)
    bundle.tables["monte_carlo"] = mc_table(mcres)
    leaves = mcres["counts"]
    bundle.tables["leaf_counts"] = Table(
        ["leaf"] + [f"t{k}" for k in range(leaves.shape[0])],
        ["-"] + ["paths"] * leaves.shape[0],
        [np.arange(leaves.shape[1])] + [leaves[k] for k in range(leaves.shape[0])],
    )
    bundle.summary = {
        "monte_carlo": dict(_mc_summary(mcres), paths=paths, seed=seed, horizon_s=horizon),
        "checks": {
            "mc_within_sigma": float(np.max(np.abs(mcres["z"]))) <= o.mc_sigma,
            "chi_square_leaves": mcres["chi2_pvalue"] >= o.chi2_alpha,
        },
    }
    return bundle


RUNNERS = {
    "glass": run_glass_scenario,
    "protein": run_protein_scenario,
    "custom": run_custom_scenario,
}
