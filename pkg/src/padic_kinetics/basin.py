"""Inter-basin (mean-sector) dynamics.

Basins are indexed ``0..N-1``. ``inter[i][j]`` is the jump rate from basin
``j`` into basin ``i`` (a callable of time, ``None`` on the diagonal), so the
mean-sector generator has ``Q[i, j] = inter[i][j](t)`` and zero column sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from ._functions import as_rate
from .exceptions import StepRejected, UsageError
from .padic import RadialProfile
from .quadrature import DEFAULT_TOL, simpson_batch

HORIZON_SLACK = 1e-12
# relative accuracy assumed for nested quadrature values
INNER_NOISE = 1e-11


@dataclass
class Basin:
    label: str
    profile: RadialProfile


class LandscapeModel:
    """N metabasins with radial intra-basin profiles and inter-basin rates."""

    def __init__(
        self,
        p: int,
        basins: Sequence[Basin],
        inter: Sequence[Sequence[Callable | float | None]] | None = None,
        horizon: tuple[float, float] = (0.0, np.inf),
        breakpoints: Sequence[float] = (),
    ):
        self.p = int(p)
        self.basins = list(basins)
        n = len(self.basins)
        if n == 0:
            raise UsageError("a landscape needs at least one basin")
        for b in self.basins:
            if b.profile.p != self.p:
                raise UsageError(f"basin {b.label!r} profile uses p={b.profile.p}, model p={self.p}")
        if inter is None:
            inter = [[None] * n for _ in range(n)]
        if len(inter) != n or any(len(row) != n for row in inter):
            raise UsageError(f"inter-basin matrix must be {n}x{n}")
        for i in range(n):
            for j in range(n):
                if i != j and inter[i][j] is None:
                    raise UsageError(f"missing rate from basin {j} to basin {i}")
        self.inter = [
            [None if i == j else as_rate(inter[i][j]) for j in range(n)] for i in range(n)
        ]
        self.horizon = (float(horizon[0]), float(horizon[1]))
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))

    @property
    def n_basins(self) -> int:
        return len(self.basins)

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        for i, b in enumerate(self.basins):
            if b.label == label:
                return i
        raise UsageError(f"unknown basin {label!r}")

    def profile(self, basin: int) -> RadialProfile:
        return self.basins[basin].profile

    def check_time(self, t) -> None:
        lo, hi = self.horizon
        t = np.asarray(t)
        if np.any(t < lo - HORIZON_SLACK * max(1.0, abs(lo))) or np.any(
            t > hi + HORIZON_SLACK * max(1.0, abs(hi))
        ):
            raise UsageError(f"time outside the model horizon [{lo}, {hi}]")

    def outflow(self, basin: int, t):
        """Total jump rate out of ``basin`` into the other basins."""
        total = 0.0 * np.asarray(t, dtype=float)
        for i in range(self.n_basins):
            if i != basin:
                total = total + self.inter[i][basin](t)
        return float(total) if np.ndim(t) == 0 else total

    def outflow_function(self, basin: int) -> Callable:
        return lambda t: self.outflow(basin, t)

    def frozen(self, t0: float) -> "LandscapeModel":
        """Autonomous copy with every rate held at its value at ``t0``."""
        from ._functions import frozen

        basins = [
            Basin(b.label, RadialProfile(self.p, [frozen(f, t0) for f in b.profile.levels], b.profile.tail))
            for b in self.basins
        ]
        inter = [[None if f is None else frozen(f, t0) for f in row] for row in self.inter]
        return LandscapeModel(self.p, basins, inter, horizon=(0.0, np.inf))

    def validate(self, samples: int = 257, rtol: float = 1e-6) -> None:
        """Positivity on a sample grid and continuity across the breakpoints."""
        lo, hi = self.horizon
        if not np.isfinite(hi):
            hi = lo + 1.0
        grid = np.union1d(np.linspace(lo, hi, samples), [b for b in self.breakpoints if lo <= b <= hi])
        funcs = [(f"inter[{i}][{j}]", f) for i, row in enumerate(self.inter) for j, f in enumerate(row) if f]
        for b in self.basins:
            funcs += [(f"{b.label} level {m}", f) for m, f in enumerate(b.profile.levels)]
        for name, f in funcs:
            vals = np.asarray(f(grid), dtype=float)
            if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
                raise UsageError(f"rate {name} must be finite and positive on the horizon")
            for c in self.breakpoints:
                if lo < c < hi:
                    h = 1e-9 * max(1.0, abs(c))
                    left, right = float(f(c - h)), float(f(c + h))
                    if abs(left - right) > rtol * max(abs(left), abs(right)) + 1e-300:
                        raise UsageError(f"rate {name} is discontinuous at t={c}")


def generator_matrix(model: LandscapeModel, t: float) -> np.ndarray:
    """Mean-sector generator Q(t); intra-basin rates do not enter."""
    model.check_time(t)
    n = model.n_basins
    Q = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                Q[i, j] = float(model.inter[i][j](t))
    Q[np.diag_indices(n)] = -Q.sum(axis=0)
    return Q


def generator_matrices(model: LandscapeModel, times) -> np.ndarray:
    """Q(t) for every entry of ``times``, stacked as ``(len(times), N, N)``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    model.check_time(times)
    n = model.n_basins
    Q = np.zeros((times.size, n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                Q[:, i, j] = np.asarray(model.inter[i][j](times), dtype=float) * np.ones(times.size)
    Q[:, range(n), range(n)] = -Q.sum(axis=1)
    return Q


def stationary_vector(Q: np.ndarray) -> np.ndarray:
    """Probability vector spanning the kernel of a (column) generator."""
    n = Q.shape[0]
    A = np.vstack([Q, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    u, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return u


@dataclass
class MeanEvolution:
    times: np.ndarray
    probabilities: np.ndarray  # shape (len(times), N)
    method: str
    drift: list = field(default_factory=list)

    def basin(self, i: int) -> np.ndarray:
        return self.probabilities[:, i]


def _check_distribution(u0, n):
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (n,):
        raise UsageError(f"initial vector must have length {n}")
    if np.any(u0 < 0) or abs(u0.sum() - 1.0) > 1e-10:
        raise UsageError("initial vector must be a probability vector")
    return u0


def _check_grid(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) < 0):
        raise UsageError("time grid must be a non-empty non-decreasing 1-d array")
    return times


def evolve_mean_trotter(u0, model: LandscapeModel, times, steps: int, ordering: str = "time") -> MeanEvolution:
    """Ordered product of frozen-generator exponentials on every grid cell.

    Over a cell ``[a, b]`` split into ``steps`` pieces of width ``h`` the
    factors ``exp(h Q(a + k h))``, ``k = 1..steps``, are applied to the state
    earliest first (``ordering="time"``) or latest first (``"reversed"``).
    """
    if steps < 1:
        raise UsageError("steps must be >= 1")
    if ordering not in ("time", "reversed"):
        raise UsageError("ordering must be 'time' or 'reversed'")
    times = _check_grid(times)
    u = _check_distribution(u0, model.n_basins)
    out = [u.copy()]
    for a, b in zip(times[:-1], times[1:]):
        h = (b - a) / steps
        if h > 0:
            factors = expm(h * generator_matrices(model, a + h * np.arange(1, steps + 1)))
            if ordering == "reversed":
                factors = factors[::-1]
            for F in factors:
                u = F @ u
        out.append(u.copy())
    return MeanEvolution(times, np.array(out), "trotter")


def evolve_mean_rk4(u0, model: LandscapeModel, times, dt: float | None = None, steps_per_cell: int | None = None) -> MeanEvolution:
    """Classical RK4 for ``du/dt = Q(t) u`` on a grid.

    Each cell is traversed with ``ceil(width / dt)`` equal steps, or with
    ``steps_per_cell`` steps when given (handy on log-spaced grids).
    """
    if (dt is None) == (steps_per_cell is None):
        raise UsageError("give exactly one of dt and steps_per_cell")
    if dt is not None and dt <= 0:
        raise UsageError("dt must be positive")
    times = _check_grid(times)
    u = _check_distribution(u0, model.n_basins)
    out = [u.copy()]
    drift = []
    for a, b in zip(times[:-1], times[1:]):
        m = steps_per_cell if steps_per_cell else max(1, int(np.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / m
        if h > 0:
            nodes = a + h * np.arange(m + 1)
            Qn = generator_matrices(model, nodes)
            Qm = generator_matrices(model, nodes[:-1] + h / 2)
        for i in range(m if h > 0 else 0):
            k1 = Qn[i] @ u
            k2 = Qm[i] @ (u + h / 2 * k1)
            k3 = Qm[i] @ (u + h / 2 * k2)
            k4 = Qn[i + 1] @ (u + h * k3)
            u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = nodes[i]
            if np.any(u < -1e-9):
                raise StepRejected(
                    f"RK4 step at t={t:.6g} with h={h:.3g} produced a negative probability "
                    f"({u.min():.3g}); reduce dt"
                )
            s = u.sum()
            if abs(s - 1.0) > 1e-12:
                drift.append((t + h, s - 1.0))
                u = u / s
        out.append(u.copy())
    return MeanEvolution(times, np.array(out), "rk4", drift)


# -- two basins --------------------------------------------------------------


def p1_closed_form(rate_uf, rate_fu, times, tol: float = DEFAULT_TOL, breakpoints=(), p0: float = 1.0) -> np.ndarray:
    """Population of the first basin by the integrating-factor solution.

    Solves ``dp1/dt = rate_fu p2 - rate_uf p1`` with ``p1(times[0]) = p0``:
    ``p1 = (p0 + int mu rate_fu) / mu`` with ``mu = exp(int (rate_uf + rate_fu))``.
    The integral is accumulated cell by cell along the grid,
    ``p1(b) = p1(a) e^{-L(a,b)} + int_a^b e^{-L(s,b)} rate_fu(s) ds``,
    which is the same formula without overflowing ``mu``.
    """
    times = _check_grid(times)
    lam = lambda s: rate_uf(s) + rate_fu(s)
    cuts = np.union1d(times, [c for c in breakpoints if times[0] < c < times[-1]])
    a, b = cuts[:-1], cuts[1:]
    decay = simpson_batch(lam, a, b, tol=tol)

    # the inner integral is taken tighter so the outer integrand is smooth
    inner_tol = 1e-3 * tol

    def integrand(s, cell):
        return np.exp(-simpson_batch(lam, s, b[cell], tol=inner_tol)) * rate_fu(s)

    sources = simpson_batch(integrand, a, b, tol=tol, indexed=True, noise=INNER_NOISE)
    p = np.empty(cuts.size)
    p[0] = p0
    for k in range(a.size):
        p[k + 1] = p[k] * np.exp(-decay[k]) + sources[k]
    return p[np.searchsorted(cuts, times)]


def two_state_constant(a: float, b: float, t):
    """Closed-form relaxation ``a/(a+b) + (1 - a/(a+b)) e^{-(a+b)t}`` from p1(0) = 1.

    ``a`` is the rate feeding basin one, ``b`` the rate draining it.
    """
    t = np.asarray(t, dtype=float)
    eq = a / (a + b)
    return eq + (1.0 - eq) * np.exp(-(a + b) * t)


def p1_taylor_piecewise(rate_uf, rate_fu, partition, times=None) -> np.ndarray:
    """Frozen-rate recursion over a partition of the time axis.

    On each cell ``[a_i, a_{i+1}]`` the rates are frozen at ``a_i`` and the
    constant-rate solution is chained, starting from ``p1(a_0) = 1``. Returns
    values on ``partition`` or, when given, on ``times`` (inside the span).
    """
    partition = np.asarray(partition, dtype=float)
    if partition.size == 0:
        raise UsageError("partition must not be empty")
    if np.any(np.diff(partition) <= 0):
        raise UsageError("partition must be strictly increasing")
    src = np.asarray(rate_fu(partition), dtype=float)
    lam = np.asarray(rate_uf(partition), dtype=float) + src
    nodes = np.empty(partition.size)
    nodes[0] = 1.0
    for i in range(partition.size - 1):
        e = np.exp(-lam[i] * (partition[i + 1] - partition[i]))
        nodes[i + 1] = nodes[i] * e + src[i] / lam[i] * (1.0 - e)
    if times is None:
        return nodes
    times = np.asarray(times, dtype=float)
    if np.any(times < partition[0]) or np.any(times > partition[-1]):
        raise UsageError("query times must lie inside the partition")
    cell = np.clip(np.searchsorted(partition, times, side="right") - 1, 0, max(partition.size - 2, 0))
    e = np.exp(-lam[cell] * (times - partition[cell]))
    return nodes[cell] * e + src[cell] / lam[cell] * (1.0 - e)
