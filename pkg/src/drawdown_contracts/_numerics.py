"""Grid-then-golden-section maximization used by the threshold searches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize


@dataclass(frozen=True)
class GridMax:
    """Maximizer of a scalar function on an interval."""

    x: float
    value: float
    at_lower: bool
    at_upper: bool


def maximize_on_grid(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                     points: int, xtol: float = 1e-8, plateau_tol: float = 1e-9) -> GridMax:
    """Maximize ``func`` on [lo, hi]: dense grid scan, then golden-section refinement.

    ``func`` must accept an array.  When several grid points attain the
    maximum within ``plateau_tol`` (relative to 1 + |max|), the smallest of
    them is returned.
    """
    grid = np.linspace(lo, hi, points)
    vals = np.asarray(func(grid), dtype=float)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    i = int(np.argmax(vals))
    best_x, best_v = float(grid[i]), float(vals[i])

    def neg(x):
        v = float(np.asarray(func(np.array([x])), dtype=float)[0])
        return -v if np.isfinite(v) else np.inf

    if 0 < i < points - 1:
        res = optimize.minimize_scalar(
            neg, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
            tol=max(xtol / max(abs(grid[i]), 1e-300), 1e-15),
        )
        if -res.fun >= best_v and grid[i - 1] <= res.x <= grid[i + 1]:
            best_x, best_v = float(res.x), float(-res.fun)
    else:
        j = 1 if i == 0 else points - 2
        a, b = sorted((grid[i], grid[j]))
        res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded",
                                       options={"xatol": xtol})
        if -res.fun > best_v:
            best_x, best_v = float(res.x), float(-res.fun)

    near = np.flatnonzero(vals >= best_v - plateau_tol * (1.0 + abs(best_v)))
    if near.size and near[0] < i - 1:
        # plateau: report its left end
        best_x, best_v = float(grid[near[0]]), float(vals[near[0]])
    at_lower = best_x <= grid[0] + (grid[1] - grid[0]) * 1e-3
    at_upper = best_x >= grid[-1] - (grid[1] - grid[0]) * 1e-3
    return GridMax(best_x, best_v, bool(at_lower), bool(at_upper))
