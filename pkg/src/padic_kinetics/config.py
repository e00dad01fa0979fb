"""Scenario configuration.

A scenario is a single JSON document. Every physical quantity carries its
unit in the field name (``rate_hz``, ``barrier_eV``, ``t_end_s``) and nothing
is inferred. ``ScenarioConfig`` round-trips through ``to_json``/``from_json``
without loss, and the resolved document is written next to every output.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigError

SCENARIOS = ("glass", "protein", "custom")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RateConfig(_Strict):
    """One time-dependent rate.

    kinds: ``constant`` (rate_hz), ``linear`` (rate_hz + slope_hz_per_s t),
    ``arrhenius`` (prefactor_hz with barrier_eV or barrier_J_per_mol),
    ``protein_fold`` / ``protein_unfold`` (k_f, k_u from the thermodynamics
    block) and ``protein_unfold_power`` (k_u ** exponent).
    """

    kind: Literal["constant", "linear", "arrhenius", "protein_fold", "protein_unfold", "protein_unfold_power"]
    rate_hz: Optional[float] = None
    slope_hz_per_s: Optional[float] = None
    prefactor_hz: Optional[float] = None
    barrier_eV: Optional[float] = None
    barrier_J_per_mol: Optional[float] = None
    exponent: Optional[float] = None

    @model_validator(mode="after")
    def _fields_for_kind(self):
        need = {
            "constant": {"rate_hz"},
            "linear": {"rate_hz", "slope_hz_per_s"},
            "arrhenius": {"prefactor_hz"},
            "protein_fold": set(),
            "protein_unfold": set(),
            "protein_unfold_power": {"exponent"},
        }[self.kind]
        given = {k for k in type(self).model_fields if k != "kind" and getattr(self, k) is not None}
        missing = need - given
        if missing:
            raise ValueError(f"rate kind {self.kind!r} requires {sorted(missing)}")
        if self.kind == "arrhenius":
            barriers = given & {"barrier_eV", "barrier_J_per_mol"}
            if len(barriers) != 1:
                raise ValueError("arrhenius rate needs exactly one of barrier_eV, barrier_J_per_mol")
            given -= barriers
        extra = given - need
        if extra:
            raise ValueError(f"rate kind {self.kind!r} does not take {sorted(extra)}")
        if self.kind == "constant" and self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        if self.prefactor_hz is not None and self.prefactor_hz <= 0:
            raise ValueError("prefactor_hz must be positive")
        for b in (self.barrier_eV, self.barrier_J_per_mol):
            if b is not None and b < 0:
                raise ValueError("barriers must be non-negative")
        return self


class BasinConfig(_Strict):
    label: str
    levels: list[RateConfig] = Field(min_length=1)
    tail: Literal["constant", "zero", "strict"] = "constant"


class InterConfig(_Strict):
    source: str
    target: str
    rate: RateConfig


class ModelConfig(_Strict):
    p: int = Field(ge=2)
    basins: list[BasinConfig] = Field(min_length=1)
    inter: list[InterConfig] = []

    @model_validator(mode="after")
    def _check_graph(self):
        if any(self.p % q == 0 for q in range(2, int(self.p**0.5) + 1)):
            raise ValueError(f"p must be prime, got {self.p}")
        labels = [b.label for b in self.basins]
        if len(set(labels)) != len(labels):
            raise ValueError("basin labels must be unique")
        pairs = set()
        for e in self.inter:
            for end in (e.source, e.target):
                if end not in labels:
                    raise ValueError(f"inter-basin rate refers to unknown basin {end!r}")
            if e.source == e.target:
                raise ValueError("inter-basin rates must join two different basins")
            if (e.source, e.target) in pairs:
                raise ValueError(f"duplicate inter-basin rate {e.source} -> {e.target}")
            pairs.add((e.source, e.target))
        need = {(a, b) for a in labels for b in labels if a != b}
        if pairs != need:
            raise ValueError(f"missing inter-basin rates for {sorted(need - pairs)}")
        return self


class SegmentConfig(_Strict):
    t_start_s: float
    t_end_s: float
    shape: Literal["constant", "linear", "exponential"]
    T_start_K: float = Field(gt=0)
    T_end_K: Optional[float] = Field(default=None, gt=0)
    tau_s: Optional[float] = Field(default=None, gt=0)


class ThermoConfig(_Strict):
    """Two-state folding thermodynamics; defaults are the reference parameter set."""

    R_J_per_mol_K: float = 8.314
    T_m_K: float = 312.9
    dH_f_J_per_mol: float = -333e3
    dS_f_J_per_mol_K: float = -1.18e3
    dCp_f_J_per_mol_K: float = -48e3
    dH_u_J_per_mol: float = 337e3
    dS_u_J_per_mol_K: float = 0.96e3
    dCp_u_J_per_mol_K: float = -38e3


class BallConfig(_Strict):
    basin: str
    center: list[int] = []
    r0: int = Field(le=0)

    @model_validator(mode="after")
    def _center_length(self):
        if len(self.center) != -self.r0:
            raise ValueError(f"ball of scale r0={self.r0} needs {-self.r0} center digits")
        return self


class GridConfig(_Strict):
    """Output times: ``points`` values on [t_start_s, t_end_s]; a log grid
    starts at ``t_min_s`` and is prefixed with ``t_start_s``."""

    spacing: Literal["linear", "log"] = "linear"
    t_start_s: float = 0.0
    t_end_s: float = Field(gt=0)
    points: int = Field(default=101, ge=2)
    t_min_s: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _range(self):
        if self.t_end_s <= self.t_start_s:
            raise ValueError("t_end_s must exceed t_start_s")
        if self.spacing == "log":
            if self.t_min_s is None:
                raise ValueError("a log grid needs t_min_s")
            if not self.t_start_s < self.t_min_s < self.t_end_s:
                raise ValueError("t_min_s must lie strictly inside (t_start_s, t_end_s)")
        return self

    def times(self) -> np.ndarray:
        if self.spacing == "linear":
            return np.linspace(self.t_start_s, self.t_end_s, self.points)
        tail = np.logspace(np.log10(self.t_min_s), np.log10(self.t_end_s), self.points - 1)
        return np.concatenate([[self.t_start_s], tail])


class SolverConfig(_Strict):
    quad_tol: float = Field(default=1e-10, gt=0)
    trotter_steps: int = Field(default=64, ge=1)
    rk4_dt_s: Optional[float] = Field(default=None, gt=0)
    rk4_steps_per_cell: int = Field(default=64, ge=1)
    mean_method: Literal["closed-form", "rk4"] = "closed-form"
    flow_direction: Literal["physical", "verbatim"] = "physical"


class OracleConfig(_Strict):
    depth: int = Field(default=3, ge=1)
    paths: int = Field(default=100_000, ge=1)
    seed: int = Field(default=20240611, ge=0)
    convention: Literal["geometric", "paper"] = "geometric"
    t0_s: float = 0.0
    eigen_tol: float = Field(default=1e-8, gt=0)
    trajectory_horizon_s: Optional[float] = Field(default=None, gt=0)
    trajectory_points: int = Field(default=21, ge=2)
    trajectory_dt_s: Optional[float] = Field(default=None, gt=0)
    trajectory_tol: float = Field(default=1e-5, gt=0)
    mc_horizon_s: Optional[float] = Field(default=None, gt=0)
    mc_checkpoints: int = Field(default=20, ge=1)
    mc_sigma: float = Field(default=3.0, gt=0)
    chi2_alpha: float = Field(default=0.01, gt=0, lt=1)


class GlassConfig(_Strict):
    T_initial_K: float = Field(default=300.0, gt=0)
    quench_targets_K: list[float] = Field(default=[290.0, 260.0, 230.0, 200.0], min_length=1)
    cooling_time_s: float = Field(default=1e-3, gt=0)
    cooling_tau_s: float = Field(default=2e-5, gt=0)
    control: bool = True
    control_fit_tol: float = Field(default=1e-6, gt=0)


class ProteinConfig(_Strict):
    thermo: ThermoConfig = ThermoConfig()
    control_times_s: list[float] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
    anchor_time_s: float = 50.0


class ScenarioConfig(_Strict):
    scenario: Literal["glass", "protein", "custom"]
    model: ModelConfig
    temperature: list[SegmentConfig] = []
    initial_ball: BallConfig
    grid: GridConfig
    solver: SolverConfig = SolverConfig()
    oracle: OracleConfig = OracleConfig()
    eigenlevel_convention: Literal["geometric", "paper"] = "paper"
    glass: Optional[GlassConfig] = None
    protein: Optional[ProteinConfig] = None
    jobs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _consistency(self):
        labels = [b.label for b in self.model.basins]
        if self.initial_ball.basin not in labels:
            raise ValueError(f"initial_ball.basin {self.initial_ball.basin!r} is not a basin")
        if any(not 0 <= c < self.model.p for c in self.initial_ball.center):
            raise ValueError(f"initial_ball.center digits must lie in 0..{self.model.p - 1}")
        if self.scenario == "glass" and self.glass is None:
            raise ValueError("glass scenario needs a 'glass' section")
        if self.scenario != "glass" and not self.temperature:
            raise ValueError("a temperature schedule is required")
        uses_thermo = any(
            r.kind.startswith("protein")
            for r in [e.rate for e in self.model.inter] + [lv for b in self.model.basins for lv in b.levels]
        )
        if uses_thermo and self.protein is None:
            raise ValueError("protein_* rates need a 'protein' section")
        if self.scenario == "protein" and (len(labels) != 2 or self.protein is None):
            raise ValueError("protein scenario needs two basins and a 'protein' section")
        if self.scenario == "glass" and len(labels) != 2:
            raise ValueError("glass scenario needs exactly two basins")
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            return cls.model_validate_json(text)
        except ValidationError as exc:
            raise ConfigError(format_validation_error(exc)) from None

    def with_updates(self, **changes) -> "ScenarioConfig":
        """Copy with top-level or dotted (``oracle.seed``) fields replaced, revalidated."""
        data = self.model_dump(mode="json")
        for key, value in changes.items():
            node = data
            *head, last = key.split(".")
            for part in head:
                node = node[part]
            node[last] = value
        try:
            return type(self).model_validate(data)
        except ValidationError as exc:
            raise ConfigError(format_validation_error(exc)) from None


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"{where}: {err['msg']}")
    return "invalid scenario config:\n  " + "\n  ".join(lines)


def load_config(path) -> ScenarioConfig:
    return ScenarioConfig.from_json(Path(path).read_text(encoding="utf-8"))


# -- built-in scenarios --------------------------------------------------------


def _arr(prefactor, barrier):
    return RateConfig(kind="arrhenius", prefactor_hz=prefactor, barrier_eV=barrier)


def glass_default() -> ScenarioConfig:
    intra = [_arr(1e12, 0.4), _arr(1e12, 0.38)]
    return ScenarioConfig(
        scenario="glass",
        model=ModelConfig(
            p=3,
            basins=[BasinConfig(label="U", levels=intra), BasinConfig(label="F", levels=intra)],
            inter=[
                InterConfig(source="U", target="F", rate=_arr(1e12, 0.5)),
                InterConfig(source="F", target="U", rate=_arr(1e12, 0.8)),
            ],
        ),
        initial_ball=BallConfig(basin="U", center=[0], r0=-1),
        grid=GridConfig(spacing="log", t_start_s=0.0, t_min_s=1e-8, t_end_s=100.0, points=401),
        oracle=OracleConfig(trajectory_horizon_s=1e-2, trajectory_dt_s=2.5e-7, mc_horizon_s=1e-5),
        glass=GlassConfig(),
    )


def protein_default() -> ScenarioConfig:
    fold, unfold = RateConfig(kind="protein_fold"), RateConfig(kind="protein_unfold")
    levels = [
        RateConfig(kind="protein_unfold_power", exponent=0.25),
        RateConfig(kind="protein_unfold_power", exponent=0.5),
    ]
    return ScenarioConfig(
        scenario="protein",
        model=ModelConfig(
            p=3,
            basins=[BasinConfig(label="U", levels=levels), BasinConfig(label="F", levels=levels)],
            inter=[
                InterConfig(source="U", target="F", rate=fold),
                InterConfig(source="F", target="U", rate=unfold),
            ],
        ),
        temperature=[
            SegmentConfig(t_start_s=0.0, t_end_s=50.0, shape="linear", T_start_K=309.0, T_end_K=316.15)
        ],
        initial_ball=BallConfig(basin="U", center=[0], r0=-1),
        grid=GridConfig(spacing="linear", t_start_s=0.0, t_end_s=50.0, points=501),
        solver=SolverConfig(trotter_steps=64),
        oracle=OracleConfig(trajectory_horizon_s=50.0, trajectory_dt_s=1e-2, mc_horizon_s=50.0),
        protein=ProteinConfig(),
    )


DEFAULTS = {"glass": glass_default, "protein": protein_default}


def default_config(name: str) -> ScenarioConfig:
    try:
        return DEFAULTS[name]()
    except KeyError:
        raise ConfigError(f"no built-in config {name!r}; available: {sorted(DEFAULTS)}") from None
