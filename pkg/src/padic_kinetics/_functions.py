"""Small time-function helpers. Every rate in the package is a callable of time
that accepts a float or a numpy array and returns the same shape."""

import numpy as np


class ConstantRate:
    """Time-independent rate, picklable and vectorized."""

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self.value
        return np.full(np.shape(t), self.value)

    def __repr__(self):
        return f"ConstantRate({self.value!r})"


class LinearRate:
    """a + b*t; used mostly by tests and custom configs."""

    def __init__(self, intercept, slope):
        self.intercept = float(intercept)
        self.slope = float(slope)

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self.intercept + self.slope * float(t)
        return self.intercept + self.slope * np.asarray(t, dtype=float)

    def __repr__(self):
        return f"LinearRate({self.intercept!r}, {self.slope!r})"


def as_rate(value):
    """Wrap numbers as ConstantRate; pass callables through."""
    if callable(value):
        return value
    return ConstantRate(value)


def frozen(fn, t0):
    """The callable fn evaluated once at t0 and held constant."""
    return ConstantRate(float(fn(t0)))
