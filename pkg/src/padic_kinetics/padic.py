"""Finite tree quotients of p-adic unit balls.

A point of a basin ``B(I) = I + Z_p`` is only ever seen through its coset
modulo ``p**n``, i.e. a leaf of the depth-``n`` p-ary tree ``G_n``. Digits are
stored most significant first, so the first digit selects the child of the
root and two leaves sharing ``k`` leading digits are at distance ``p**-k``.

Haar measure is normalized so that every basin has volume 1; a ball of radius
``p**r`` (``r <= 0``) has volume ``p**r``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from ._functions import as_rate
from .exceptions import UsageError

TAIL_RULES = ("constant", "zero", "strict")


def _check_prime(p: int) -> None:
    if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        raise UsageError(f"p must be prime, got {p}")


@dataclass(frozen=True)
class TreeAddress:
    """Leaf (or interior node) of the tree attached to one basin."""

    basin: int
    digits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))

    @property
    def depth(self) -> int:
        return len(self.digits)


@dataclass(frozen=True)
class BallSpec:
    """Ball of radius ``p**scale`` inside a basin; ``center`` has ``-scale`` digits."""

    basin: int
    center: tuple[int, ...]
    scale: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(d) for d in self.center))
        if self.scale > 0:
            raise UsageError(f"ball scale must be <= 0, got {self.scale}")
        if len(self.center) != -self.scale:
            raise UsageError(
                f"ball of scale {self.scale} needs {-self.scale} center digits, "
                f"got {len(self.center)}"
            )

    def contains(self, x: TreeAddress) -> bool:
        return x.basin == self.basin and x.digits[: len(self.center)] == self.center


@dataclass(frozen=True)
class WaveletIndex:
    """Kozyrev wavelet supported on the ball ``(basin, n, r)`` with character ``j``.

    ``n`` is the prefix of digits that fixes the supporting ball, so
    ``len(n) == -r`` and the support has volume ``p**r``.
    """

    basin: int
    r: int
    j: int
    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(d) for d in self.n))
        if self.r > 0:
            raise UsageError(f"wavelet scale must be <= 0, got {self.r}")
        if len(self.n) != -self.r:
            raise UsageError(f"offset of a scale-{self.r} wavelet needs {-self.r} digits")
        if self.j < 1:
            raise UsageError(f"wavelet character index must be >= 1, got {self.j}")

    @property
    def support(self) -> BallSpec:
        return BallSpec(self.basin, self.n, self.r)


class RadialProfile:
    """Radial intra-basin rate ``w(p**-m, t)`` for levels ``m = 0..M``.

    ``levels[m]`` is a callable of time (numbers are promoted to constants).
    Levels deeper than ``M`` follow ``tail``: ``"constant"`` repeats the deepest
    level, ``"zero"`` returns 0 and ``"strict"`` raises.
    """

    def __init__(self, p: int, levels: Sequence[Callable | float], tail: str = "constant"):
        _check_prime(p)
        if not levels:
            raise UsageError("a radial profile needs at least one level")
        if tail not in TAIL_RULES:
            raise UsageError(f"unknown tail rule {tail!r}; expected one of {TAIL_RULES}")
        self.p = int(p)
        self.levels = [as_rate(v) for v in levels]
        self.tail = tail

    @property
    def depth(self) -> int:
        """Number of explicitly given levels."""
        return len(self.levels)

    def rate_function(self, m: int) -> Callable:
        if m < 0:
            raise UsageError(f"level must be >= 0, got {m}")
        if m < len(self.levels):
            return self.levels[m]
        if self.tail == "constant":
            return self.levels[-1]
        if self.tail == "zero":
            return lambda t: 0.0 * np.asarray(t, dtype=float)
        raise UsageError(f"profile defines levels 0..{len(self.levels) - 1}; level {m} requested")

    def value(self, m: int, t):
        """w(p**-m, t)."""
        return self.rate_function(m)(t)

    def __repr__(self):
        return f"RadialProfile(p={self.p}, levels={self.levels!r}, tail={self.tail!r})"


def padic_distance(a: TreeAddress, b: TreeAddress, p: int) -> Fraction:
    """p-adic distance of two leaves of the same basin, as an exact rational."""
    if a.basin != b.basin:
        raise UsageError(f"addresses lie in different basins ({a.basin} vs {b.basin})")
    if a.depth != b.depth:
        raise UsageError(f"addresses have different depths ({a.depth} vs {b.depth})")
    k = common_prefix_length(a.digits, b.digits)
    if k == a.depth:
        return Fraction(0)
    return Fraction(1, p**k)


def common_prefix_length(a: Sequence[int], b: Sequence[int]) -> int:
    k = 0
    for x, y in zip(a, b):
        if x != y:
            break
        k += 1
    return k


def ball_volume(ball: BallSpec, p: int) -> Fraction:
    return Fraction(p) ** ball.scale


def shell_measure(p: int, m: int) -> float:
    """Haar measure of the sphere ``|x|_p = p**-m`` inside Z_p."""
    return p ** (-m) - p ** (-m - 1)


def root_of_unity(p: int, k: int) -> complex:
    """exp(2 pi i k / p), computed from the reduced angle."""
    angle = 2.0 * np.pi * ((k % p) / p)
    return complex(np.cos(angle), np.sin(angle))


def eval_wavelet(w: WaveletIndex, x: TreeAddress, p: int) -> complex:
    """Value of the (L2-normalized) Kozyrev wavelet at a leaf."""
    d = -w.r
    if x.depth < d + 1:
        raise UsageError(
            f"a scale-{w.r} wavelet is constant only on balls of depth {d + 1}; "
            f"address has depth {x.depth}"
        )
    if w.j >= p:
        raise UsageError(f"character index j={w.j} must be < p={p}")
    if x.basin != w.basin or x.digits[:d] != w.n:
        return 0j
    c = x.digits[d]
    return p ** (d / 2.0) * root_of_unity(p, w.j * c)


def radial_tail_integral(profile: RadialProfile, k: int, t):
    """Haar-weighted sum of shell contributions ``sum_{m<=k} (p^-m - p^-m-1) w(p^-m, t)``."""
    p = profile.p
    total = 0.0
    for m in range(k + 1):
        total = total + shell_measure(p, m) * profile.value(m, t)
    return total


# -- grid helpers ------------------------------------------------------------


@lru_cache(maxsize=None)
def leaf_digits(p: int, n: int) -> np.ndarray:
    """All ``p**n`` digit strings of G_n in lexicographic order, shape (p**n, n)."""
    if n < 0:
        raise UsageError("depth must be >= 0")
    idx = np.arange(p**n)
    powers = p ** np.arange(n - 1, -1, -1)
    out = (idx[:, None] // powers[None, :]) % p
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def prefix_levels(p: int, n: int) -> np.ndarray:
    """Common-prefix length between every pair of leaves of one basin."""
    digits = leaf_digits(p, n)
    same = digits[:, None, :] == digits[None, :, :]
    out = np.cumprod(same, axis=2).sum(axis=2)
    out.setflags(write=False)
    return out


def leaf_index(x: TreeAddress, p: int) -> int:
    """Position of a leaf in the global vector (basins concatenated)."""
    n = x.depth
    local = 0
    for d in x.digits:
        local = local * p + d
    return x.basin * p**n + local


def leaf_address(index: int, p: int, n: int) -> TreeAddress:
    basin, local = divmod(int(index), p**n)
    return TreeAddress(basin, tuple(int(v) for v in leaf_digits(p, n)[local]))


def ball_mask(ball: BallSpec, p: int, n: int, n_basins: int) -> np.ndarray:
    """Boolean mask of the leaves of G_n (all basins) lying in ``ball``."""
    if n < -ball.scale:
        raise UsageError(f"depth {n} cannot resolve a ball of scale {ball.scale}")
    digits = leaf_digits(p, n)
    k = len(ball.center)
    local = np.all(digits[:, :k] == np.array(ball.center, dtype=int), axis=1)
    mask = np.zeros(n_basins * p**n, dtype=bool)
    mask[ball.basin * p**n : (ball.basin + 1) * p**n] = local
    return mask


def wavelet_values(w: WaveletIndex, p: int, n: int, n_basins: int) -> np.ndarray:
    """Wavelet sampled on every leaf of G_n (all basins)."""
    d = -w.r
    if n < d + 1:
        raise UsageError(f"depth {n} cannot resolve a scale-{w.r} wavelet")
    digits = leaf_digits(p, n)
    inside = np.all(digits[:, :d] == np.array(w.n, dtype=int), axis=1)
    angles = 2.0 * np.pi * ((w.j * digits[:, d]) % p) / p
    local = np.where(inside, p ** (d / 2.0) * np.exp(1j * angles), 0j)
    out = np.zeros(n_basins * p**n, dtype=complex)
    out[w.basin * p**n : (w.basin + 1) * p**n] = local
    return out


def basin_wavelets(p: int, n: int, basin: int):
    """Every wavelet of a basin resolvable on G_n (support volume >= p**(1-n))."""
    for d in range(n):
        for prefix in (leaf_digits(p, d) if d else np.zeros((1, 0), dtype=int)):
            for j in range(1, p):
                yield WaveletIndex(basin, -d, j, tuple(int(v) for v in prefix))
