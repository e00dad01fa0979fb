"""Wavelet-sector analytics.

Inside a basin the radial kernel acts diagonally on Kozyrev wavelets, and the
time-dependent evolution just multiplies each coefficient by
``exp(-int gamma)``; only the basin means need a genuine ODE solve.

Two conventions link a wavelet to its decay rate. ``"geometric"`` gives a
wavelet whose support has volume ``p**r`` the rate ``gamma_r``, which is what
the discretized generator produces. ``"paper"`` gives it ``gamma_{r-1}``, the
labelling behind the reference relaxation curves.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basin import LandscapeModel, evolve_mean_rk4, p1_closed_form
from .exceptions import UsageError
from .padic import BallSpec, RadialProfile, WaveletIndex, root_of_unity, wavelet_values
from .quadrature import DEFAULT_TOL, adaptive_simpson, cumulative_simpson

CONVENTIONS = {"geometric": 0, "paper": -1}


def gamma_index(r: int, convention: str = "geometric") -> int:
    """Decay-rate index used for a wavelet whose support has volume ``p**r``."""
    try:
        return r + CONVENTIONS[convention]
    except KeyError:
        raise UsageError(f"unknown eigenlevel convention {convention!r}") from None


def gamma_eigenvalue(profile: RadialProfile, outflow, r: int, t):
    """gamma_r(t) = (1 - 1/p) sum_{j<=-r} p^-j w(p^-j) + p^(r-1) w(p^r) + outflow."""
    if r > 0:
        raise UsageError(f"gamma index must be <= 0, got {r}")
    p = profile.p
    acc = 0.0
    for j in range(-r + 1):
        acc = acc + p ** (-j) * profile.value(j, t)
    return (1.0 - 1.0 / p) * acc + p ** (r - 1.0) * profile.value(-r, t) + outflow


def gamma_function(model: LandscapeModel, basin: int, r: int) -> Callable:
    """gamma_{basin, r} as a vectorized function of time."""
    profile = model.profile(basin)
    return lambda t: gamma_eigenvalue(profile, model.outflow(basin, t), r, t)


def integrated_gamma(profile, outflow_fn, r, s, t, tol=DEFAULT_TOL, breakpoints=()):
    """int_s^t gamma_r(tau) d tau by adaptive Simpson."""
    if t < s:
        raise UsageError("integration requires s <= t")
    f = lambda tau: gamma_eigenvalue(profile, outflow_fn(tau), r, tau)
    return adaptive_simpson(f, s, t, tol=tol, breakpoints=breakpoints)


@dataclass(frozen=True)
class WaveletTerm:
    index: WaveletIndex
    coefficient: complex


@dataclass
class SpectralState:
    """Basin means plus a finite list of wavelet coefficients at ``time``."""

    mean: np.ndarray
    wavelets: tuple = ()
    time: float = 0.0

    def groups(self):
        """Terms keyed by ``(basin, r)``; every member shares one decay rate."""
        out = defaultdict(list)
        for term in self.wavelets:
            out[(term.index.basin, term.index.r)].append(term)
        return dict(out)

    def wavelet_energy(self) -> float:
        return float(sum(abs(w.coefficient) ** 2 for w in self.wavelets))


def expand_ball_indicator(target: BallSpec, p: int, n_basins: int, depth: int | None = None) -> SpectralState:
    """Normalized density ``p^-r0 1_B`` split into basin mean and wavelets.

    Only wavelets whose support strictly contains the ball overlap it: one
    ancestor ball per level and ``p - 1`` characters each.
    """
    r0 = target.scale
    if depth is not None and depth < -r0 + 1:
        raise UsageError(f"depth {depth} is too shallow for a ball of scale {r0}")
    if not 0 <= target.basin < n_basins:
        raise UsageError(f"ball lies in basin {target.basin}, which does not exist")
    if any(not 0 <= c < p for c in target.center):
        raise UsageError("ball center digits must lie in 0..p-1")
    mean = np.zeros(n_basins)
    mean[target.basin] = 1.0
    terms = []
    for d in range(-r0):
        c = target.center[d]
        for j in range(1, p):
            # <u0, psi> = p^-r0 * vol(B) * conj(psi on B)
            coef = p ** (d / 2.0) * root_of_unity(p, -j * c)
            terms.append(WaveletTerm(WaveletIndex(target.basin, -d, j, target.center[:d]), coef))
    return SpectralState(mean, tuple(terms), 0.0)


def _group_decay(model, groups, s, t, convention, tol):
    decay = {}
    for basin, r in groups:
        f = gamma_function(model, basin, gamma_index(r, convention))
        decay[(basin, r)] = adaptive_simpson(f, s, t, tol=tol, breakpoints=model.breakpoints)
    return decay


def evolve_spectral(
    state: SpectralState,
    model: LandscapeModel,
    t: float,
    mean_evolver: Callable,
    convention: str = "geometric",
    tol: float = DEFAULT_TOL,
) -> SpectralState:
    """Advance a spectral state from ``state.time`` to ``t``.

    ``mean_evolver(u0, model, s, t)`` returns the basin-mean vector at ``t``.
    """
    s = state.time
    if t < s:
        raise UsageError("cannot evolve backwards in time")
    if t == s:
        return SpectralState(state.mean.copy(), tuple(state.wavelets), s)
    mean = np.asarray(mean_evolver(state.mean, model, s, t), dtype=float)
    decay = _group_decay(model, state.groups(), s, t, convention, tol)
    terms = tuple(
        WaveletTerm(w.index, w.coefficient * np.exp(-decay[(w.index.basin, w.index.r)]))
        for w in state.wavelets
    )
    return SpectralState(mean, terms, t)


def rk4_mean_evolver(steps: int = 2000) -> Callable:
    """Mean-sector evolver for ``evolve_spectral`` backed by fixed-step RK4."""

    def evolve(u0, model, s, t):
        return evolve_mean_rk4(u0, model, [s, t], steps_per_cell=steps).probabilities[-1]

    return evolve


def closed_form_mean_evolver(tol: float = DEFAULT_TOL, home: int = 0) -> Callable:
    """Two-basin mean-sector evolver for ``evolve_spectral`` using the closed form."""

    def evolve(u0, model, s, t):
        if model.n_basins != 2:
            raise UsageError("the closed form covers two basins only")
        other = 1 - home
        p = p1_closed_form(
            model.inter[other][home], model.inter[home][other], [s, t], tol=tol,
            breakpoints=model.breakpoints, p0=float(u0[home]),
        )[-1]
        out = np.empty(2)
        out[home], out[other] = p, 1.0 - p
        return out

    return evolve


def spectral_trajectory(
    state: SpectralState,
    model: LandscapeModel,
    times,
    mean_probabilities,
    convention: str = "geometric",
    tol: float = DEFAULT_TOL,
) -> list[SpectralState]:
    """States on a whole grid, reusing cumulative decay integrals.

    ``mean_probabilities[k]`` is the basin-mean vector at ``times[k]``.
    """
    times = np.asarray(times, dtype=float)
    means = np.asarray(mean_probabilities, dtype=float)
    if means.shape != (times.size, state.mean.size):
        raise UsageError("mean probabilities must have shape (len(times), N)")
    if times[0] != state.time:
        raise UsageError("time grid must start at the state's time")
    cum = {
        key: cumulative_simpson(
            gamma_function(model, key[0], gamma_index(key[1], convention)),
            times,
            tol=tol,
            breakpoints=model.breakpoints,
        )
        for key in state.groups()
    }
    out = []
    for k, t in enumerate(times):
        terms = tuple(
            WaveletTerm(w.index, w.coefficient * np.exp(-cum[(w.index.basin, w.index.r)][k]))
            for w in state.wavelets
        )
        out.append(SpectralState(means[k].copy(), terms, float(t)))
    return out


def reconstruct_density(state: SpectralState, p: int, n: int) -> np.ndarray:
    """Density on every leaf of G_n (basins concatenated)."""
    N = state.mean.size
    dens = np.repeat(state.mean.astype(complex), p**n)
    for w in state.wavelets:
        dens += w.coefficient * wavelet_values(w.index, p, n, N)
    return dens.real


def basin_means(model: LandscapeModel, basin: int, times, method: str = "closed-form", tol=DEFAULT_TOL, steps: int = 64):
    """Basin occupations on ``times`` starting with all mass in ``basin``.

    ``closed-form`` (two basins only) uses the integrating-factor formula;
    ``rk4`` integrates with ``steps`` RK4 steps per grid cell.
    """
    times = np.asarray(times, dtype=float)
    N = model.n_basins
    u0 = np.zeros(N)
    u0[basin] = 1.0
    if method == "closed-form":
        if N != 2:
            raise UsageError("the closed form covers two basins only")
        other = 1 - basin
        p = p1_closed_form(
            model.inter[other][basin], model.inter[basin][other], times, tol=tol, breakpoints=model.breakpoints
        )
        out = np.empty((times.size, 2))
        out[:, basin] = p
        out[:, other] = 1.0 - p
        return out
    if method == "rk4":
        return evolve_mean_rk4(u0, model, times, steps_per_cell=steps).probabilities
    raise UsageError(f"unknown mean-sector method {method!r}")


@dataclass
class SurvivalResult:
    times: np.ndarray
    S: np.ndarray
    mean: np.ndarray
    decay: dict = field(default_factory=dict)


def survival_probability(
    initial: BallSpec,
    model: LandscapeModel,
    times: Sequence[float],
    convention: str = "geometric",
    mean: np.ndarray | str = "closed-form",
    tol: float = DEFAULT_TOL,
) -> SurvivalResult:
    """Occupation probability of the initial ball.

    ``S(t) = p^r0 [ p_I(t) + sum |C|^2 exp(-int_0^t gamma) ]`` with ``I`` the
    basin of the ball; ``mean`` is either a precomputed array of basin means
    or a method name for ``basin_means``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise UsageError("time grid must be strictly increasing")
    p = model.p
    state = expand_ball_indicator(initial, p, model.n_basins)
    if isinstance(mean, str):
        mean = basin_means(model, initial.basin, times, method=mean, tol=tol)
    mean = np.asarray(mean, dtype=float)
    energy = defaultdict(float)
    for w in state.wavelets:
        # |C|^2 = p^-r exactly for an indicator expansion
        energy[w.index.r] += float(p) ** (-w.index.r)
    decay = {}
    wave = np.zeros(times.size)
    for r in sorted(energy):
        g = gamma_function(model, initial.basin, gamma_index(r, convention))
        decay[r] = cumulative_simpson(g, times, tol=tol, breakpoints=model.breakpoints)
        wave += energy[r] * np.exp(-decay[r])
    S = (mean[:, initial.basin] + wave) / float(p) ** (-initial.scale)
    return SurvivalResult(times, S, mean, decay)
