"""Noise functions: Gaussian draws on a regular grid, made continuous by
multilinear interpolation over the domain's bounding box.

A field is fully determined by (domain, resolution, channels, seed) via a
counter-based generator, so identical inputs rebuild identical fields in any
process. Fields are immutable after construction and safe to evaluate from
any thread. Manifold domains need no special path: points on an embedded
circle/sphere are evaluated at their ambient coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._backend import kernels as _K

__all__ = ["DomainSpec", "GridNoiseField", "sample_noise_field"]


@dataclass(frozen=True)
class DomainSpec:
    """A bounded continuous domain, optionally an embedded manifold.

    `manifold` is None for full-box Euclidean domains, or the name of an
    embedded manifold ("circle", "sphere") whose points all lie inside the box.
    """

    dim: int
    lo: np.ndarray
    hi: np.ndarray
    manifold: str | None = None

    def __post_init__(self):
        lo = np.ascontiguousarray(self.lo, dtype=np.float64)
        hi = np.ascontiguousarray(self.hi, dtype=np.float64)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3, got {self.dim}")
        if lo.shape != (self.dim,) or hi.shape != (self.dim,):
            raise ValueError("lo/hi must have one entry per axis")
        if np.any(lo >= hi):
            raise ValueError(f"box must satisfy lo < hi per axis, got {lo} .. {hi}")
        if self.manifold not in (None, "circle", "sphere"):
            raise ValueError(f"unknown manifold {self.manifold!r}")

    @classmethod
    def box(cls, lo, hi, manifold: str | None = None) -> "DomainSpec":
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        return cls(len(lo), lo, hi, manifold)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lo) & (points <= self.hi), axis=1)

    def require_inside(self, points: np.ndarray) -> None:
        ok = self.contains(points)
        if not ok.all():
            bad = int(np.argmin(ok))
            raise ValueError(
                f"point {np.atleast_2d(points)[bad]} is outside the domain box "
                f"{self.lo.tolist()} .. {self.hi.tolist()}"
            )

    def lattice(self, resolution) -> np.ndarray:
        """Inclusive per-axis lattice, C-order flattened to (prod(res), dim)."""
        resolution = np.atleast_1d(np.asarray(resolution, dtype=np.int64))
        axes = [np.linspace(self.lo[d], self.hi[d], int(resolution[d])) for d in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class GridNoiseField:
    """i.i.d. N(0,1) node values on a regular grid, multilinearly interpolated."""

    domain: DomainSpec
    resolution: np.ndarray
    channels: int
    seed: int
    node_values: np.ndarray = field(repr=False)

    def evaluate(self, x: np.ndarray):
        """Value at one point; float for scalar fields, (channels,) otherwise."""
        out = self.evaluate_batch(np.asarray(x, dtype=np.float64)[None, :])[0]
        return float(out[0]) if self.channels == 1 else out

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """(n, dim) points -> (n, channels) values; every point must be in the box."""
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if points.shape[0] == 0:
            return np.zeros((0, self.channels))
        self.domain.require_inside(points)
        return _K.interp_multilinear(
            self.node_values, self.resolution, self.domain.lo, self.domain.hi, points
        )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate_batch(points)

    def lipschitz_bound(self) -> float:
        """Max adjacent-node difference divided by grid spacing, over all axes."""
        grid = self.node_values.reshape(tuple(self.resolution) + (self.channels,))
        bound = 0.0
        for d in range(self.domain.dim):
            spacing = (self.domain.hi[d] - self.domain.lo[d]) / (self.resolution[d] - 1)
            diffs = np.abs(np.diff(grid, axis=d))
            bound = max(bound, float(diffs.max()) / spacing)
        return bound


def sample_noise_field(
    domain: DomainSpec, resolution, seed: int, channels: int = 1
) -> GridNoiseField:
    """Draw a fresh noise function keyed by (domain geometry, resolution, seed)."""
    resolution = np.atleast_1d(np.asarray(resolution, dtype=np.int64))
    if resolution.shape != (domain.dim,):
        raise ValueError(f"resolution needs {domain.dim} entries, got {resolution}")
    if np.any(resolution < 2):
        raise ValueError(f"resolution must be >= 2 per axis, got {resolution.tolist()}")
    n_nodes = int(np.prod(resolution))
    node_values = rng.stream("noise-field", int(seed)).standard_normal((n_nodes, channels))
    return GridNoiseField(domain, resolution, channels, int(seed), node_values)
