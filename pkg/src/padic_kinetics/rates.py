"""Temperature paths and the rate laws driven by them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import UsageError
from .padic import RadialProfile

BOLTZMANN_EV = 8.617333262e-5  # eV / K
GAS_CONSTANT = 8.314  # J / (mol K)
ZERO_CELSIUS = 273.15

SHAPES = ("constant", "linear", "exponential")
UNIT_CONSTANTS = {"eV": "k_B", "J/mol": "R"}
CONSTANT_VALUES = {"k_B": BOLTZMANN_EV, "R": GAS_CONSTANT}


@dataclass(frozen=True)
class Segment:
    """One piece of a temperature path on ``[t_start, t_end)``.

    ``exponential`` relaxes from ``T_start`` towards ``T_end`` with time
    constant ``tau``, rescaled so the end value is reached exactly at ``t_end``.
    """

    t_start: float
    t_end: float
    shape: str
    T_start: float
    T_end: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise UsageError(f"unknown segment shape {self.shape!r}; expected one of {SHAPES}")
        if not self.t_end > self.t_start:
            raise UsageError(f"segment end {self.t_end} must exceed start {self.t_start}")
        if self.shape == "constant":
            object.__setattr__(self, "T_end", self.T_start)
        elif self.T_end is None:
            raise UsageError(f"{self.shape} segment needs T_end")
        if self.shape == "exponential" and not (self.tau and self.tau > 0):
            raise UsageError("exponential segment needs a positive tau")
        if min(self.T_start, self.T_end) <= 0:
            raise UsageError("temperatures must be positive (Kelvin)")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "constant":
            return np.full(t.shape, self.T_start)
        length = self.t_end - self.t_start
        if self.shape == "linear":
            frac = (t - self.t_start) / length
            return (1.0 - frac) * self.T_start + frac * self.T_end
        floor = np.exp(-length / self.tau)
        g = (np.exp(-(t - self.t_start) / self.tau) - floor) / (1.0 - floor)
        # written as an offset from T_end so the path is monotone to the last bit
        return self.T_end + g * (self.T_start - self.T_end)


class TemperatureSchedule:
    """Piecewise temperature path ``T(t)`` in Kelvin; held constant past the end."""

    def __init__(self, segments: Sequence[Segment]):
        if not segments:
            raise UsageError("a temperature schedule needs at least one segment")
        fixed = [segments[0]]
        for seg in segments[1:]:
            prev = fixed[-1]
            if seg.t_start != prev.t_end:
                raise UsageError(
                    f"segments must be contiguous: {prev.t_end} followed by {seg.t_start}"
                )
            if abs(seg.T_start - prev.T_end) > 1e-9:
                raise UsageError(
                    f"temperature jumps at t={seg.t_start}: {prev.T_end} K -> {seg.T_start} K"
                )
            # snap so both sides of the boundary agree bit for bit
            fixed.append(
                Segment(seg.t_start, seg.t_end, seg.shape, prev.T_end, seg.T_end, seg.tau)
                if seg.shape != "constant"
                else Segment(seg.t_start, seg.t_end, "constant", prev.T_end)
            )
        self.segments = tuple(fixed)
        self._starts = np.array([s.t_start for s in self.segments])

    @classmethod
    def constant(cls, T, t_end=1.0):
        return cls([Segment(0.0, t_end, "constant", T)])

    @classmethod
    def linear(cls, T_start, T_end, duration):
        return cls([Segment(0.0, duration, "linear", T_start, T_end)])

    @classmethod
    def quench(cls, T_start, T_end, duration, tau):
        """Exponential cooling from ``T_start`` to ``T_end`` completed at ``duration``."""
        return cls([Segment(0.0, duration, "exponential", T_start, T_end, tau)])

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(s.t_start for s in self.segments[1:]) + (self.segments[-1].t_end,)

    @property
    def final_temperature(self) -> float:
        return self.segments[-1].T_end

    def __call__(self, t):
        return temperature_at(self, t)

    def __repr__(self):
        return f"TemperatureSchedule({list(self.segments)!r})"


def temperature_at(sched: TemperatureSchedule, t):
    """T(t) in Kelvin; scalar in, float out."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.shape)
    which = np.clip(np.searchsorted(sched._starts, t, side="right") - 1, 0, None)
    for i, seg in enumerate(sched.segments):
        sel = which == i
        if i == len(sched.segments) - 1:
            tail = sel & (t >= seg.t_end)
            out[tail] = seg.T_end
            sel = sel & ~tail
        if i == 0:
            before = t < seg.t_start
            out[before] = seg.T_start
            sel = sel & ~before
        if sel.any():
            out[sel] = seg(t[sel])
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class ArrheniusSpec:
    """``prefactor * exp(-barrier / (c T))`` with ``c`` tied to the barrier unit."""

    prefactor: float
    barrier: float
    unit: str = "eV"
    constant: str | None = None

    def __post_init__(self):
        if self.unit not in UNIT_CONSTANTS:
            raise UsageError(f"unknown barrier unit {self.unit!r}; expected 'eV' or 'J/mol'")
        expected = UNIT_CONSTANTS[self.unit]
        if self.constant is None:
            object.__setattr__(self, "constant", expected)
        elif self.constant != expected:
            raise UsageError(
                f"barrier in {self.unit} must be paired with {expected}, not {self.constant}"
            )
        if self.prefactor <= 0:
            raise UsageError("Arrhenius prefactor must be positive")
        if self.barrier < 0:
            raise UsageError("Arrhenius barrier must be non-negative")


def arrhenius_rate(spec: ArrheniusSpec, T):
    T = np.asarray(T, dtype=float) if np.ndim(T) else float(T)
    if np.any(np.asarray(T) <= 0):
        raise UsageError("temperature must be positive")
    return spec.prefactor * np.exp(-spec.barrier / (CONSTANT_VALUES[spec.constant] * T))


class ArrheniusRate:
    """Arrhenius law evaluated along a temperature schedule."""

    def __init__(self, spec: ArrheniusSpec, schedule: TemperatureSchedule):
        self.spec = spec
        self.schedule = schedule

    def __call__(self, t):
        return arrhenius_rate(self.spec, self.schedule(t))

    def __repr__(self):
        return f"ArrheniusRate({self.spec!r})"


# -- protein folding ---------------------------------------------------------


@dataclass(frozen=True)
class ProteinThermo:
    """Two-state folding thermodynamics (J/mol, J/(mol K), K)."""

    R: float = GAS_CONSTANT
    T_m: float = 312.9
    dH_f: float = -333e3
    dS_f: float = -1.18e3
    dCp_f: float = -48e3
    dH_u: float = 337e3
    dS_u: float = 0.96e3
    dCp_u: float = -38e3


def water_viscosity(T_celsius):
    """Empirical solvent viscosity (arbitrary units) as a function of Celsius."""
    return 0.226 + 1.0723 * np.exp(-(np.asarray(T_celsius, dtype=float) - 10.0) / 33.0)


VISCOSITY_22C = float(water_viscosity(22.0))
REFERENCE_RATE_HZ = 1.0 / 10e-6


def viscosity_prefactor(T):
    """Attempt frequency k0(T) in Hz: (10 us)^-1 scaled by eta(22 C) / eta(T)."""
    k0 = REFERENCE_RATE_HZ * VISCOSITY_22C / water_viscosity(np.asarray(T, dtype=float) - ZERO_CELSIUS)
    return float(k0) if np.ndim(T) == 0 else k0


def _log_k0_over_k(T, R, T_m, dH, dS, dCp):
    heat = T - T_m + T * np.log(T_m / T)
    return (dH - T * dS + dCp * heat) / (R * T)


def protein_rates(thermo: ProteinThermo, T):
    """Folding and unfolding rates ``(k_f, k_u)`` in Hz at temperature ``T``."""
    scalar = np.ndim(T) == 0
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise UsageError("temperature must be positive")
    k0 = viscosity_prefactor(T)
    k_f = k0 * np.exp(-_log_k0_over_k(T, thermo.R, thermo.T_m, thermo.dH_f, thermo.dS_f, thermo.dCp_f))
    k_u = k0 * np.exp(-_log_k0_over_k(T, thermo.R, thermo.T_m, thermo.dH_u, thermo.dS_u, thermo.dCp_u))
    if scalar:
        return float(k_f), float(k_u)
    return k_f, k_u


class ProteinRate:
    """k_f or k_u along a schedule."""

    def __init__(self, thermo: ProteinThermo, schedule: TemperatureSchedule, which: str):
        if which not in ("fold", "unfold"):
            raise UsageError("which must be 'fold' or 'unfold'")
        self.thermo = thermo
        self.schedule = schedule
        self.which = which

    def __call__(self, t):
        k_f, k_u = protein_rates(self.thermo, self.schedule(t))
        return k_f if self.which == "fold" else k_u

    def __repr__(self):
        return f"ProteinRate({self.which!r})"


class PowerRate:
    """Numeric value of ``base(t) ** exponent`` (base evaluated in Hz)."""

    def __init__(self, base, exponent: float):
        self.base = base
        self.exponent = float(exponent)

    def __call__(self, t):
        return np.power(self.base(t), self.exponent)

    def __repr__(self):
        return f"PowerRate({self.base!r}, {self.exponent!r})"


def protein_radial_profile(
    thermo: ProteinThermo,
    sched: TemperatureSchedule,
    exponents: Sequence[float] = (0.25, 0.5),
    p: int = 3,
) -> RadialProfile:
    """Intra-basin profile of the unfolded basin: level m is ``k_u(T(t)) ** exponents[m]``."""
    k_u = ProteinRate(thermo, sched, "unfold")
    return RadialProfile(p, [PowerRate(k_u, e) for e in exponents], tail="constant")
