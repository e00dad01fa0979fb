"""Brute-force references on the finite tree G_n.

The intra-basin kernel becomes jump rates ``w(dist, t) * p**-n`` between
leaves, inter-basin rates are spread uniformly over the target basin's
leaves, and the resulting master equation acts on leaf masses. Nothing here
uses wavelets, so it can be used to check the spectral solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .basin import LandscapeModel, generator_matrix
from .exceptions import StepRejected, ThinningBoundError, UsageError
from .padic import BallSpec, ball_mask, leaf_address, leaf_digits, prefix_levels, shell_measure
from .spectral import CONVENTIONS, gamma_eigenvalue, gamma_index

MAX_DENSE_STATES = 2000


def _check_size(model: LandscapeModel, n: int) -> int:
    if n < 1:
        raise UsageError("tree depth must be >= 1")
    size = model.n_basins * model.p**n
    if size > MAX_DENSE_STATES:
        raise UsageError(
            f"dense oracle limited to {MAX_DENSE_STATES} states, requested {size}; "
            "use the spectral solver for deeper trees"
        )
    return size


class DenseGenerator:
    """Generator on G_n written as ``sum_c rate_c(t) * B_c`` with fixed ``B_c``."""

    def __init__(self, model: LandscapeModel, n: int):
        size = _check_size(model, n)
        self.model, self.n, self.size = model, n, size
        p, N = model.p, model.n_basins
        leaves = p**n
        levels = prefix_levels(p, n)
        bases, funcs = [], []
        for I in range(N):
            block = slice(I * leaves, (I + 1) * leaves)
            for k in range(n):
                B = np.zeros((size, size))
                B[block, block] = np.where(levels == k, p ** (-float(n)), 0.0)
                bases.append(B)
                funcs.append(model.profile(I).rate_function(k))
        for I in range(N):
            for J in range(N):
                if I != J:
                    B = np.zeros((size, size))
                    B[I * leaves : (I + 1) * leaves, J * leaves : (J + 1) * leaves] = p ** (-float(n))
                    bases.append(B)
                    funcs.append(model.inter[I][J])
        for B in bases:
            B[np.diag_indices(size)] -= B.sum(axis=0)
        self.bases = np.array(bases)
        self.funcs = funcs

    def coefficients(self, t) -> np.ndarray:
        """Rate values, shape ``(n_bases,)`` or ``(n_bases, len(t))``."""
        return np.array([np.asarray(f(t), dtype=float) for f in self.funcs])

    def at(self, t: float) -> np.ndarray:
        return np.tensordot(self.coefficients(float(t)), self.bases, axes=1)


def build_dense_generator(model: LandscapeModel, n: int, t: float) -> np.ndarray:
    """Column generator on leaf masses of G_n at time ``t``."""
    model.check_time(t)
    return DenseGenerator(model, n).at(t)


@dataclass
class TreeState:
    """Leaf masses on G_n (each leaf has Haar weight ``p**-n``)."""

    p: int
    n: int
    occupation: np.ndarray

    @property
    def density(self) -> np.ndarray:
        return self.occupation * self.p**self.n

    def mass_in(self, ball: BallSpec) -> float:
        N = self.occupation.size // self.p**self.n
        return float(self.occupation[ball_mask(ball, self.p, self.n, N)].sum())

    def basin_masses(self) -> np.ndarray:
        return self.occupation.reshape(-1, self.p**self.n).sum(axis=1)


def ball_tree_state(ball: BallSpec, p: int, n: int, n_basins: int) -> TreeState:
    """Uniform probability on the leaves of ``ball``."""
    mask = ball_mask(ball, p, n, n_basins).astype(float)
    return TreeState(p, n, mask / mask.sum())


def solve_dense_ode(u0: TreeState, model: LandscapeModel, times, dt: float) -> list[TreeState]:
    """RK4 trajectory of ``df/dt = Q(t) f`` reported on ``times``."""
    gen = DenseGenerator(model, u0.n)
    times = np.asarray(times, dtype=float)
    if dt <= 0:
        raise UsageError("dt must be positive")
    f = np.asarray(u0.occupation, dtype=float).copy()
    if f.size != gen.size:
        raise UsageError("initial state does not match the model's tree")
    out = [TreeState(u0.p, u0.n, f.copy())]
    for a, b in zip(times[:-1], times[1:]):
        m = max(1, int(np.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / m
        nodes = a + h * np.arange(m + 1)
        coef_nodes = gen.coefficients(nodes)
        coef_mid = gen.coefficients(nodes[:-1] + h / 2)
        for i in range(m):
            Q0 = np.tensordot(coef_nodes[:, i], gen.bases, axes=1)
            Qm = np.tensordot(coef_mid[:, i], gen.bases, axes=1)
            Q1 = np.tensordot(coef_nodes[:, i + 1], gen.bases, axes=1)
            k1 = Q0 @ f
            k2 = Qm @ (f + h / 2 * k1)
            k3 = Qm @ (f + h / 2 * k2)
            k4 = Q1 @ (f + h * k3)
            f = f + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if f.min() < -1e-9:
                raise StepRejected(f"dense RK4 step at t={nodes[i]:.6g} went negative; reduce dt")
        out.append(TreeState(u0.p, u0.n, f.copy()))
    return out


def max_exit_rate(model: LandscapeModel, n: int, t) -> np.ndarray:
    """Largest total jump rate out of any leaf, for each time in ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    best = np.zeros(t.shape)
    for I in range(model.n_basins):
        best = np.maximum(best, _exit_rates(model, n, I, t).sum(axis=0))
    return best


def _exit_rates(model, n, basin, t):
    """Rows: intra levels 0..n-1 then the other basins in index order."""
    p = model.p
    prof = model.profile(basin)
    rows = [shell_measure(p, k) * np.asarray(prof.value(k, t), dtype=float) * np.ones(t.shape) for k in range(n)]
    rows += [
        np.asarray(model.inter[J][basin](t), dtype=float) * np.ones(t.shape)
        for J in range(model.n_basins)
        if J != basin
    ]
    return np.array(rows)


# -- spectra -----------------------------------------------------------------


@dataclass
class SpectralMatchReport:
    convention: str
    matched: bool
    max_relative_mismatch: float
    rows: list  # (dense eigenvalue, predicted eigenvalue, source label, relative mismatch)
    scale_to_gamma: dict  # (basin, support scale) -> gamma index the generator realizes
    inferred_convention: str | None
    failures: list = field(default_factory=list)


def _realized_gamma_index(model, n, Q, basin, s, t0):
    """Which gamma index the dense generator assigns to a support-scale ``s`` wavelet."""
    p = model.p
    leaves = p**n
    levels = prefix_levels(p, n)
    d = -s
    # wavelet with center 0...0, j = 1 as a mass vector
    local = np.zeros(leaves, dtype=complex)
    inside = levels[0] >= d
    digits = leaf_digits(p, n)
    local[inside] = np.exp(2j * np.pi * digits[inside, d] / p)
    vec = np.zeros(Q.shape[0], dtype=complex)
    vec[basin * leaves : (basin + 1) * leaves] = local
    lam = np.vdot(vec, Q @ vec) / np.vdot(vec, vec)
    prof = model.profile(basin)
    out = model.outflow(basin, t0)
    # the unshifted index wins ties (a constant tail makes deep gammas equal)
    for r in (s, s - 1, s + 1, s - 2):
        if r > 0:
            continue
        try:
            g = gamma_eigenvalue(prof, out, r, t0)
        except UsageError:
            continue
        if abs(lam + g) <= 1e-9 * max(abs(lam), 1e-300):
            return r
    return None


def spectral_match(model: LandscapeModel, n: int, t0: float = 0.0, convention: str = "geometric", tol: float = 1e-8) -> SpectralMatchReport:
    """Diagonalize the frozen dense generator and pair every eigenvalue with a prediction.

    Predictions are the mean-sector spectrum and ``-gamma`` for every
    resolvable wavelet scale (``(p-1) p**-s`` copies of scale ``s`` per basin).
    The mismatch of a pair is ``|dense - predicted| / max(|predicted|, 1e-6 * rho)``
    with ``rho`` the spectral radius; pairing uses an optimal assignment.
    """
    if convention not in CONVENTIONS:
        raise UsageError(f"unknown eigenlevel convention {convention!r}")
    p, N = model.p, model.n_basins
    Q = build_dense_generator(model, n, t0)
    dense = np.linalg.eigvals(Q)
    predicted, labels = [], []
    for mu in np.linalg.eigvals(generator_matrix(model, t0)):
        predicted.append(mu)
        labels.append("mean")
    failures = []
    for I in range(N):
        prof, out = model.profile(I), model.outflow(I, t0)
        for s in range(0, -n, -1):
            r = gamma_index(s, convention)
            try:
                g = -gamma_eigenvalue(prof, out, r, t0) if r <= 0 else np.nan
            except UsageError as exc:
                failures.append(f"basin {I} scale {s}: {exc}")
                g = np.nan
            count = (p - 1) * p ** (-s)
            predicted += [g] * count
            labels += [f"basin {I} scale {s} gamma[{r}]"] * count
    predicted = np.array(predicted, dtype=complex)
    rho = float(np.max(np.abs(dense))) or 1.0
    safe_pred = np.where(np.isfinite(predicted), predicted, 1e300)
    cost = np.abs(dense[:, None] - safe_pred[None, :])
    rows_i, cols_j = linear_sum_assignment(cost)
    rows, worst = [], 0.0
    for i, j in zip(rows_i, cols_j):
        mu = predicted[j]
        rel = abs(dense[i] - mu) / max(abs(mu), 1e-6 * rho) if np.isfinite(mu) else np.inf
        worst = max(worst, rel)
        rows.append((complex(dense[i]), complex(mu), labels[j], float(rel)))
    rows.sort(key=lambda row: (row[1].real, row[1].imag))
    mapping = {}
    for I in range(N):
        for s in range(0, -n, -1):
            mapping[(I, s)] = _realized_gamma_index(model, n, Q, I, s, t0)
    offsets = {None if r is None else r - s for (I, s), r in mapping.items()}
    inferred = None
    if len(offsets) == 1:
        off = offsets.pop()
        inferred = next((name for name, o in CONVENTIONS.items() if o == off), None)
    matched = worst <= tol and not failures
    return SpectralMatchReport(convention, matched, float(worst), rows, mapping, inferred, failures)


# -- Monte Carlo -------------------------------------------------------------


@dataclass
class SamplePath:
    seed: int
    jump_times: list
    states: list  # TreeAddress visited, starting with the initial leaf


@dataclass
class MonteCarloResult:
    times: np.ndarray
    counts: np.ndarray  # (len(times), N * p**n) leaf visit counts
    paths: int
    seed: int
    p: int
    n: int
    rate_bound: float
    sample_paths: list = field(default_factory=list)

    def occupancy(self, ball: BallSpec) -> np.ndarray:
        N = self.counts.shape[1] // self.p**self.n
        mask = ball_mask(ball, self.p, self.n, N)
        return self.counts[:, mask].sum(axis=1) / self.paths

    def standard_error(self, ball: BallSpec) -> np.ndarray:
        f = self.occupancy(ball)
        return np.sqrt(f * (1.0 - f) / self.paths)

    def basin_occupancy(self, basin: int) -> np.ndarray:
        leaves = self.p**self.n
        return self.counts[:, basin * leaves : (basin + 1) * leaves].sum(axis=1) / self.paths


def thinning_bound(model: LandscapeModel, n: int, horizon, samples: int = 4097, safety: float = 1.05) -> float:
    lo, hi = horizon
    grid = np.union1d(np.linspace(lo, hi, samples), [b for b in model.breakpoints if lo <= b <= hi])
    return safety * float(max_exit_rate(model, n, grid).max())


def mc_simulate(
    model: LandscapeModel,
    ball: BallSpec,
    n: int,
    times,
    paths: int,
    seed: int,
    rate_bound: float | None = None,
    record: int = 0,
) -> MonteCarloResult:
    """Non-homogeneous jump process on G_n by Lewis-Shedler thinning.

    Every path starts on a uniformly chosen leaf of ``ball``; ``counts[k]``
    histograms the paths' leaves at ``times[k]``. The first ``record`` paths
    keep their full jump history. If the rate bound turns out to be too low
    the run is restarted once with a refined bound.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) < 0):
        raise UsageError("checkpoint times must be a non-decreasing 1-d array")
    _check_size(model, n)
    horizon = (float(times[0]), float(times[-1]))
    bound = rate_bound if rate_bound is not None else thinning_bound(model, n, horizon)
    try:
        return _thinning(model, ball, n, times, paths, seed, bound, record)
    except ThinningBoundError as exc:
        refined = max(thinning_bound(model, n, horizon, samples=65537), 1.05 * exc.args[1])
        return _thinning(model, ball, n, times, paths, seed, refined, record)


def _thinning(model, ball, n, times, paths, seed, bound, record):
    p, N = model.p, model.n_basins
    leaves = p**n
    rng = np.random.Generator(np.random.Philox(seed))
    start = np.flatnonzero(ball_mask(ball, p, n, N))
    state = start[rng.integers(0, start.size, size=paths)]
    t = np.full(paths, times[0])
    ck = np.zeros(paths, dtype=np.int64)
    counts = np.zeros((times.size, N * leaves), dtype=np.int64)
    alive = np.arange(paths)
    history = [([], [int(state[i])]) for i in range(min(record, paths))]
    place = p ** np.arange(n - 1, -1, -1)
    while alive.size:
        t_new = t[alive] + rng.exponential(1.0 / bound, size=alive.size)
        # log checkpoints passed before this proposal
        while True:
            due = ck[alive] < times.size
            due[due] = times[ck[alive][due]] <= t_new[due]
            if not due.any():
                break
            who = alive[due]
            np.add.at(counts, (ck[who], state[who]), 1)
            ck[who] += 1
        keep = ck[alive] < times.size
        alive, t_new = alive[keep], t_new[keep]
        if not alive.size:
            break
        t[alive] = t_new
        u = rng.random(alive.size)
        pick = rng.random(alive.size)
        basin = state[alive] // leaves
        for I in range(N):
            sel = np.flatnonzero(basin == I)
            if not sel.size:
                continue
            rates = _exit_rates(model, n, I, t_new[sel])
            total = rates.sum(axis=0)
            if np.any(total > bound):
                raise ThinningBoundError("thinning bound exceeded", float(total.max()))
            accept = u[sel] * bound < total
            sel, rates, total = sel[accept], rates[:, accept], total[accept]
            if not sel.size:
                continue
            cum = np.cumsum(rates, axis=0)
            kind = (cum < (pick[sel] * total)[None, :]).sum(axis=0)
            kind = np.minimum(kind, rates.shape[0] - 1)
            who = alive[sel]
            old = state[who]
            local = old - I * leaves
            new = np.empty_like(old)
            intra = kind < n
            if intra.any():
                k = kind[intra]
                lp = local[intra]
                scale = place[k]
                head = lp // (scale * p) * (scale * p)
                digit = (lp // scale) % p
                digit = (digit + rng.integers(1, p, size=k.size)) % p
                tail = rng.integers(0, scale, size=k.size)
                new[intra] = I * leaves + head + digit * scale + tail
            if (~intra).any():
                others = [J for J in range(N) if J != I]
                target = np.array(others, dtype=np.int64)[kind[~intra] - n]
                new[~intra] = target * leaves + rng.integers(0, leaves, size=target.size)
            state[who] = new
            if history:
                for w, tj, s in zip(who, t_new[sel], new):
                    if w < len(history):
                        history[w][0].append(float(tj))
                        history[w][1].append(int(s))
    samples = [
        SamplePath(seed, jt, [leaf_address(s, p, n) for s in st]) for jt, st in history
    ]
    return MonteCarloResult(times, counts, paths, seed, p, n, bound, samples)
