"""Noise schedule and sampling timestep grid.

One schedule variant is implemented: the signal/noise pair
alpha(t) = 1/sqrt(t^2+1), sigma(t) = t/sqrt(t^2+1) over t in [0, 1], which
keeps alpha^2 + sigma^2 = 1 identically and gives SNR(t) = 1/t^2. The
sampling grid T(k) = k/N is linear; the loss weight is uniform. Everything
here is a pure function of immutable configuration and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseSchedule", "TimestepGrid", "timestep_grid"]

_KINDS = ("default",)


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str = "default"
    eps_sigma: float = 1e-6

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {_KINDS}")
        if not 0.0 < self.eps_sigma < 1.0:
            raise ValueError(f"eps_sigma must be in (0, 1), got {self.eps_sigma}")

    def alpha_sigma(self, t):
        """Signal and noise scales at time t (scalar or array), t in [0, 1]."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError(f"t must lie in [0, 1], got {t}")
        denom = np.sqrt(t * t + 1.0)
        alpha = 1.0 / denom
        sigma = t / denom
        if t.ndim == 0:
            return float(alpha), float(sigma)
        return alpha, sigma

    def snr(self, t) -> float:
        """Signal-to-noise ratio alpha^2/sigma^2 = 1/t^2; diverges as t -> 0."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t > 1.0):
            raise ValueError(f"t must lie in [0, 1], got {t}")
        if np.any(t <= self.eps_sigma):
            raise ValueError(f"snr undefined at t <= eps_sigma ({self.eps_sigma})")
        out = 1.0 / (t * t)
        return float(out) if t.ndim == 0 else out

    def loss_weight(self, t) -> float:
        """Per-timestep loss weight; uniform (config hook for variants)."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError(f"t must lie in [0, 1], got {t}")
        return 1.0 if t.ndim == 0 else np.ones_like(t)


@dataclass(frozen=True)
class TimestepGrid:
    """Strictly decreasing sampling times t_N=1 > ... > t_0=0."""

    num_steps: int
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v[0] != 1.0 or v[-1] != 0.0:
            raise ValueError("timestep grid must start at exactly 1 and end at exactly 0")
        if np.any(np.diff(v) >= 0.0):
            raise ValueError("timestep grid must be strictly decreasing")

    def __len__(self) -> int:
        return len(self.values)


def timestep_grid(num_steps: int) -> TimestepGrid:
    """Linear grid T(k) = k/N, returned in descending traversal order."""
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    k = np.arange(num_steps, -1, -1, dtype=np.float64)
    values = k / num_steps
    values[0] = 1.0
    values[-1] = 0.0
    return TimestepGrid(num_steps, values)
