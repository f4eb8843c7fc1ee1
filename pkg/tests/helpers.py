"""Shared constructors for test fields and profiles."""
from __future__ import annotations

import numpy as np

from stripes.field import PeriodicField


def smooth_field(d: int, n: int, L: float, rng: np.random.Generator,
                 modes: int = 3, amp: float = 0.12) -> PeriodicField:
    """A band-limited random field with values in [0, 1]: a constant 1/2
    plus a few low-frequency separable sine modes, clipped."""
    x = np.arange(n) * L / n
    vals = 0.5 * np.ones((n,) * d)
    for _ in range(modes):
        kvec = rng.integers(1, 4, d)
        ph = rng.uniform(0, 2 * np.pi, d)
        a = rng.normal(0, amp)
        w = a * np.ones((n,) * d)
        for ax in range(d):
            shape = [1] * d
            shape[ax] = n
            w = w * np.sin(2 * np.pi * kvec[ax] * x / L + ph[ax]
                           ).reshape(shape)
        vals = vals + w
    return PeriodicField(d, n, L, np.clip(vals, 0.0, 1.0))


def rough_field(d: int, n: int, L: float, rng: np.random.Generator
                ) -> PeriodicField:
    """Uniform iid samples in [0, 1] (no spatial regularity)."""
    return PeriodicField(d, n, L, rng.uniform(0.0, 1.0, (n,) * d))


def smooth_profile(n: int, L: float, rng: np.random.Generator,
                   modes: int = 3, amp: float = 0.15) -> np.ndarray:
    """Band-limited random profile values in [0, 1]."""
    x = np.arange(n) * L / n
    g = 0.5 * np.ones(n)
    for k in range(1, modes + 1):
        g += rng.normal(0, amp) * np.sin(2 * np.pi * k * x / L
                                         + rng.uniform(0, 2 * np.pi))
    return np.clip(g, 0.0, 1.0)
