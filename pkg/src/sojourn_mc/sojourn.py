"""Sojourn times of grid paths above a level.

The sojourn of a path over [a, b) is measured by the left-endpoint rule:
each grid point t_i in [a, b) with X(t_i) > u contributes one full step.
That makes sojourns additive over abutting windows and exactly monotone
in both u and the window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import LevelScaling
from .errors import RangeError
from .gauss_sim import GridPath


@dataclass(frozen=True)
class SojournResult:
    u: float
    window: tuple
    time_above: float
    points_above: int
    step: float


def sojourn_time(path: GridPath, u: float, a: float = 0.0,
                 b: float | None = None) -> SojournResult:
    """Left-endpoint sojourn of the path above u over [a, b)."""
    t_max = path.t_max + path.step  # grid covers [0, n*step) by left endpoints
    if b is None:
        b = t_max
    if not 0.0 <= a < b:
        raise RangeError(f"need 0 <= a < b, got a={a}, b={b}")
    if b > t_max + 1e-9 * max(1.0, t_max):
        raise RangeError(f"window end {b:g} exceeds path horizon {t_max:g}")
    # left endpoints t_i = i*step with a <= t_i < b
    i_lo = int(np.ceil(a / path.step - 1e-12))
    i_hi = min(int(np.ceil(b / path.step - 1e-12)), len(path.values))
    count = int(np.count_nonzero(path.values[i_lo:i_hi] > u))
    return SojournResult(u=float(u), window=(float(a), float(b)),
                         time_above=count * path.step, points_above=count,
                         step=path.step)


def scaled_sojourn(path: GridPath, scaling: LevelScaling, u: float,
                   T_value: float | None = None) -> float:
    """Scaled sojourn v(u) * L_u over [0, T_value), 0 when the window is empty."""
    if scaling.u != u:
        raise RangeError(f"scaling was built for u={scaling.u:g}, got u={u:g}")
    if T_value is not None and T_value <= 0.0:
        return 0.0
    res = sojourn_time(path, u, 0.0, T_value)
    return scaling.v * res.time_above
