"""Adaptive composite Simpson quadrature.

The refinement runs breadth first over a batch of panels so that the integrand
is evaluated on whole numpy arrays at a time. Integrands must therefore accept
an array of abscissae.
"""

from __future__ import annotations

import numpy as np

from .exceptions import QuadratureError, UsageError

MAX_DEPTH = 40
DEFAULT_TOL = 1e-10
# panels whose error estimate is below this fraction of their value are
# accepted; integrands built from large exponents carry roundoff near this level
ROUNDOFF_FLOOR = 1e-12
# number of Simpson panels used to estimate the magnitude of each integral
_PROBE_PANELS = 8


def _probe_magnitude(f, a, b, idx):
    x = np.linspace(0.0, 1.0, 2 * _PROBE_PANELS + 1)
    pts = a[:, None] + (b - a)[:, None] * x[None, :]
    ids = np.repeat(idx, x.size)
    vals = np.abs(np.asarray(f(pts.ravel(), ids), dtype=float)).reshape(pts.shape)
    w = np.ones(2 * _PROBE_PANELS + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.abs(b - a) / (6.0 * _PROBE_PANELS) * (vals @ w)


def simpson_batch(f, a, b, tol=DEFAULT_TOL, atol=0.0, max_depth=MAX_DEPTH, indexed=False, noise=0.0):
    """Integrate ``f`` over each interval ``[a[i], b[i]]``.

    Each integral is refined until the local Richardson error estimate is below
    ``max(tol * magnitude, atol)``, the tolerance being halved at each split.
    ``magnitude`` is a coarse estimate of the integral of ``|f|``.

    With ``indexed=True`` the integrand is called as ``f(x, i)`` where ``i``
    holds, for every abscissa, the index of the interval it belongs to; this
    lets one batch integrate a family of integrands.

    ``noise`` is the relative accuracy of the integrand values themselves
    (e.g. when they come from another quadrature); panels whose error estimate
    is below that level are accepted rather than refined forever.
    """
    g = f if indexed else (lambda x, i: f(x))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise UsageError("interval arrays must have the same shape")
    result = np.zeros(a.shape, dtype=float)
    live = a != b
    if not live.any():
        return result
    owner = np.flatnonzero(live)
    lo, hi = a[live], b[live]
    eps = np.maximum(tol * _probe_magnitude(g, lo, hi, owner), atol)
    eps = np.maximum(eps, 1e-300)
    mid = 0.5 * (lo + hi)
    vals = np.asarray(g(np.concatenate([lo, mid, hi]), np.tile(owner, 3)), dtype=float)
    fa, fm, fb = np.split(vals, 3)
    whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)
    depth = 0
    while owner.size:
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        vals = np.asarray(g(np.concatenate([lm, rm]), np.tile(owner, 2)), dtype=float)
        flm, frm = np.split(vals, 2)
        h = (hi - lo) / 12.0
        left = h * (fa + 4.0 * flm + fm)
        right = h * (fm + 4.0 * frm + fb)
        diff = left + right - whole
        if not np.all(np.isfinite(diff)):
            raise QuadratureError("non-finite integrand value encountered")
        # roundoff floor so that converged panels are not refined forever; the
        # second term covers abscissae that are no longer exactly bisected
        rel = max(ROUNDOFF_FLOOR, noise)
        rel = rel + 4.0 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi)) / (hi - lo)
        floor = rel * (np.abs(left) + np.abs(right))
        done = np.abs(diff) <= np.maximum(15.0 * eps, floor)
        if depth >= max_depth and not done.all():
            k = int(np.flatnonzero(~done)[0])
            raise QuadratureError(
                f"adaptive Simpson did not converge within depth {max_depth} "
                f"on [{lo[k]!r}, {hi[k]!r}] (error estimate {abs(diff[k]):.3e}, "
                f"tolerance {eps[k]:.3e})",
                interval=(float(lo[k]), float(hi[k])),
                error_estimate=float(abs(diff[k])),
                tolerance=float(eps[k]),
            )
        np.add.at(result, owner[done], (left + right + diff / 15.0)[done])
        keep = ~done
        if not keep.any():
            break
        owner = np.concatenate([owner[keep], owner[keep]])
        lo, mid_k, hi = lo[keep], mid[keep], hi[keep]
        fa, fm_k, fb = fa[keep], fm[keep], fb[keep]
        flm, frm = flm[keep], frm[keep]
        lo, hi = np.concatenate([lo, mid_k]), np.concatenate([mid_k, hi])
        fa, fb, fm = (
            np.concatenate([fa, fm_k]),
            np.concatenate([fm_k, fb]),
            np.concatenate([flm, frm]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        eps = np.concatenate([eps[keep], eps[keep]]) / 2.0
        depth += 1
    return result


def adaptive_simpson(f, a, b, tol=DEFAULT_TOL, atol=0.0, max_depth=MAX_DEPTH, breakpoints=()):
    """Integral of ``f`` over ``[a, b]``; the interval is split at ``breakpoints``.

    Splitting at points where the integrand is only piecewise smooth keeps the
    fourth-order convergence of each panel.
    """
    a, b = float(a), float(b)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    cuts = sorted({a, b, *(float(c) for c in breakpoints if a < c < b)})
    parts = simpson_batch(f, cuts[:-1], cuts[1:], tol=tol, atol=atol, max_depth=max_depth)
    return sign * float(np.sum(parts))


def cumulative_simpson(f, times, tol=DEFAULT_TOL, atol=0.0, breakpoints=()):
    """Running integral ``int_{times[0]}^{times[k]} f`` for every grid point."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise UsageError("time grid must be a non-empty 1-d array")
    if np.any(np.diff(times) < 0):
        raise UsageError("time grid must be non-decreasing")
    cuts = np.union1d(times, [c for c in breakpoints if times[0] < c < times[-1]])
    parts = simpson_batch(f, cuts[:-1], cuts[1:], tol=tol, atol=atol)
    running = np.concatenate([[0.0], np.cumsum(parts)])
    return running[np.searchsorted(cuts, times)]
