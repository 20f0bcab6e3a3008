"""Per-entry proportional-integral-derivative adjustment of training residuals.

Each training entry keeps its own running error sum and previous error; the
adjusted residual fed to the SGD update is

    kp * e + ki * (sum of all errors so far, including e) + kd * (e - prev_e)

with a zero previous error on the first call.  Gains (1, 0, 0) make the
adjustment the identity, recovering plain SGD exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class PidGains:
    kp: float = 1.0
    ki: float = 0.1
    kd: float = 0.1

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")


class PidState:
    """Error history, one slot per training entry, keyed by stable position."""

    __slots__ = ("sum_error", "prev_error")

    def __init__(self, n_entries: int):
        self.sum_error = np.zeros(n_entries)
        self.prev_error = np.zeros(n_entries)

    def __len__(self) -> int:
        return self.sum_error.shape[0]


def adjust(state: PidState, gains: PidGains, pos: int, e: float,
           clamp: float | None = None) -> float:
    """Fold residual e into the entry's history and return the adjusted residual.

    The running sum is updated first, so the integral term includes the
    current residual.  An optional symmetric clamp bounds the output to guard
    against integral windup on long runs.
    """
    if not 0 <= pos < len(state):
        raise DataError(f"training-entry position {pos} out of range [0, {len(state)})")
    state.sum_error[pos] += e
    out = gains.kp * e + gains.ki * state.sum_error[pos] + gains.kd * (e - state.prev_error[pos])
    state.prev_error[pos] = e
    if clamp is not None:
        if out > clamp:
            out = clamp
        elif out < -clamp:
            out = -clamp
    return float(out)


def reset(state: PidState) -> None:
    """Zero all history in place (idempotent)."""
    state.sum_error[:] = 0.0
    state.prev_error[:] = 0.0
