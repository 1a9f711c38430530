"""Training-function families and the context/query discretization front-end.

A sample bundles an exactly evaluable target function (analytic SDF oracle or
parametric deformation field), the sparse condition that will steer
generation (boundary points with value 0, or correspondence pairs), and the
parameters that produced it. Everything is resolution-free: targets can be
evaluated at any in-domain point. Generation is pure given (seed, config);
per-sample streams are derived by hashing, so families can be built in any
order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry, rng
from .noise_field import DomainSpec

__all__ = [
    "FunctionSample", "ContextSet", "QuerySet",
    "SdfFamilyConfig", "DeformFamilyConfig", "TrigDeformation",
    "generate_sdf_family", "generate_deformation_family",
    "sample_context", "sample_queries", "sample_manifold_points",
]


@dataclass(frozen=True)
class ContextSet:
    """Discretization carrier: coordinates, plus noised values when attached."""

    coords: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.values is not None and len(self.values) != len(self.coords):
            raise ValueError(
                f"context has {len(self.coords)} coords but {len(self.values)} values"
            )

    def with_values(self, values: np.ndarray) -> "ContextSet":
        return ContextSet(self.coords, np.asarray(values, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class QuerySet:
    coords: np.ndarray

    def __len__(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class FunctionSample:
    """One training/eval function with its condition observations."""

    target: object  # evaluable: (n, dim) -> (n, range_dim)
    condition_points: np.ndarray
    condition_values: np.ndarray
    shape_descriptor: dict
    domain: DomainSpec
    range_dim: int


# --- SDF family ----------------------------------------------------------------

@dataclass(frozen=True)
class SdfFamilyConfig:
    dim: int = 2
    box_lo: float = -1.0
    box_hi: float = 1.0
    inner_box: float = 0.8          # shapes stay inside [-inner_box, inner_box]^dim
    radius_range: tuple = (0.15, 0.4)
    shapes_range: tuple = (1, 3)    # inclusive count of union members
    n_cond: int = 8


def _sdf_defaults(dim: int) -> SdfFamilyConfig:
    if dim == 3:
        return SdfFamilyConfig(dim=3, shapes_range=(1, 2), n_cond=64)
    return SdfFamilyConfig()


def generate_sdf_family(count: int, seed: int, config: SdfFamilyConfig | None = None):
    """Unions of random balls with boundary-point conditions (value 0)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    cfg = config or _sdf_defaults(2)
    domain = DomainSpec.box([cfg.box_lo] * cfg.dim, [cfg.box_hi] * cfg.dim)
    samples = []
    for i in range(count):
        gen = rng.stream("sdf-family", int(seed), i)
        n_shapes = int(gen.integers(cfg.shapes_range[0], cfg.shapes_range[1] + 1))
        members = []
        for _ in range(n_shapes):
            radius = float(gen.uniform(*cfg.radius_range))
            reach = cfg.inner_box - radius
            center = gen.uniform(-reach, reach, cfg.dim)
            members.append(geometry.Sphere(center, radius))
        shape = members[0] if n_shapes == 1 else geometry.ShapeUnion(tuple(members))
        cond = geometry.sample_boundary(shape, cfg.n_cond, rng.derive_key("cond", int(seed), i))
        samples.append(
            FunctionSample(
                target=shape,
                condition_points=cond,
                condition_values=np.zeros((cfg.n_cond, 1)),
                shape_descriptor={
                    "kind": "sphere_union",
                    "centers": [m.center.tolist() for m in members],
                    "radii": [m.radius for m in members],
                },
                domain=domain,
                range_dim=1,
            )
        )
    return samples


# --- deformation family ----------------------------------------------------------

@dataclass(frozen=True)
class TrigDeformation:
    """Smooth displacement field on the unit circle: low-order trigonometric
    radial and tangential components, evaluated at ambient coordinates."""

    radial: np.ndarray      # [a0, a1, b1, a2, b2, ...]
    tangential: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "radial", np.asarray(self.radial, dtype=np.float64))
        object.__setattr__(self, "tangential", np.asarray(self.tangential, dtype=np.float64))

    @staticmethod
    def _series(coeffs: np.ndarray, theta: np.ndarray) -> np.ndarray:
        out = np.full_like(theta, coeffs[0])
        order = (len(coeffs) - 1) // 2
        for k in range(1, order + 1):
            out = out + coeffs[2 * k - 1] * np.cos(k * theta) + coeffs[2 * k] * np.sin(k * theta)
        return out

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        theta = np.arctan2(points[:, 1], points[:, 0])
        radial = self._series(self.radial, theta)
        tangential = self._series(self.tangential, theta)
        outward = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        along = np.stack([-np.sin(theta), np.cos(theta)], axis=1)
        return radial[:, None] * outward + tangential[:, None] * along

    def sup_norm(self, resolution: int = 4096) -> float:
        theta = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        disp = self(np.stack([np.cos(theta), np.sin(theta)], axis=1))
        return float(np.linalg.norm(disp, axis=1).max())


@dataclass(frozen=True)
class DeformFamilyConfig:
    order: int = 2              # highest trigonometric order
    max_norm: float = 0.3       # sup-norm bound on displacements
    min_norm: float = 0.05
    n_corr: int = 8             # correspondence pairs per sample
    box_pad: float = 0.25       # ambient box half-width is 1 + box_pad


def generate_deformation_family(count: int, seed: int, config: DeformFamilyConfig | None = None):
    """Deformation fields on the unit circle with sparse correspondence pairs."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    cfg = config or DeformFamilyConfig()
    half = 1.0 + cfg.box_pad
    domain = DomainSpec.box([-half, -half], [half, half], manifold="circle")
    n_coeff = 2 * cfg.order + 1
    samples = []
    for i in range(count):
        gen = rng.stream("deform-family", int(seed), i)
        decay = 1.0 / (1.0 + np.arange(cfg.order + 1, dtype=np.float64))
        scales = np.empty(n_coeff)
        scales[0] = decay[0]
        for k in range(1, cfg.order + 1):
            scales[2 * k - 1] = scales[2 * k] = decay[k]
        draft = TrigDeformation(
            gen.standard_normal(n_coeff) * scales,
            gen.standard_normal(n_coeff) * scales,
        )
        # rescale to a target amplitude so the sup-norm bound holds exactly
        target_sup = float(gen.uniform(cfg.min_norm, cfg.max_norm))
        sup = draft.sup_norm()
        factor = target_sup / sup if sup > 0 else 0.0
        deform = TrigDeformation(draft.radial * factor, draft.tangential * factor)

        corr_points = sample_manifold_points(
            domain, cfg.n_corr, rng.derive_key("corr", int(seed), i)
        )
        samples.append(
            FunctionSample(
                target=deform,
                condition_points=corr_points,
                condition_values=deform(corr_points),
                shape_descriptor={
                    "kind": "trig_deformation",
                    "radial": deform.radial.tolist(),
                    "tangential": deform.tangential.tolist(),
                },
                domain=domain,
                range_dim=2,
            )
        )
    return samples


# --- coordinate sampling ----------------------------------------------------------

def sample_manifold_points(domain: DomainSpec, size: int, seed_key: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed_key))
    if domain.manifold == "circle":
        theta = gen.uniform(0.0, 2.0 * np.pi, size)
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if domain.manifold == "sphere":
        v = gen.standard_normal((size, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)
    raise ValueError(f"domain has no manifold to sample ({domain.manifold!r})")


def _coords(domain: DomainSpec, size: int, seed: int, strategy: str, label: str) -> np.ndarray:
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if strategy == "uniform":
        if domain.manifold is not None:
            return sample_manifold_points(domain, size, rng.derive_key(label, int(seed)))
        gen = rng.stream(label, int(seed))
        return gen.uniform(0.0, 1.0, (size, domain.dim)) * (domain.hi - domain.lo) + domain.lo
    if strategy == "grid":
        if domain.manifold == "circle":
            theta = np.arange(size) * (2.0 * np.pi / size)
            return np.stack([np.cos(theta), np.sin(theta)], axis=1)
        if domain.manifold is not None:
            raise ValueError(f"no grid strategy on manifold {domain.manifold!r}")
        res = round(size ** (1.0 / domain.dim))
        if res**domain.dim != size:
            raise ValueError(
                f"grid strategy needs size to be a perfect {domain.dim}-th power, got {size}"
            )
        return domain.lattice([res] * domain.dim)
    raise ValueError(f"unknown sampling strategy {strategy!r}")


def sample_context(domain: DomainSpec, size: int, seed: int, strategy: str = "uniform") -> ContextSet:
    """Context coordinates: uniform i.i.d. (box or manifold) or an inclusive grid."""
    return ContextSet(_coords(domain, size, seed, strategy, "context"))


def sample_queries(
    domain: DomainSpec,
    size: int,
    seed: int,
    strategy: str = "uniform",
    boundary_source=None,
    near_fraction: float = 0.5,
    near_sigma: float = 0.05,
) -> QuerySet:
    """Query coordinates, decoupled from the context.

    `strategy="mixed"` draws `near_fraction` of the points as Gaussian offsets
    from fresh boundary points of `boundary_source` (an AnalyticShape), the
    rest uniform; offsets are clipped into the box. Loss signal for SDF tasks
    concentrates near the zero set, so the mixture spends queries there.
    """
    if strategy != "mixed":
        return QuerySet(_coords(domain, size, seed, strategy, "query"))
    if boundary_source is None:
        raise ValueError("mixed query sampling needs a boundary_source shape")
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    n_near = int(round(size * near_fraction))
    parts = []
    if size - n_near > 0:
        gen = rng.stream("query", int(seed))
        parts.append(
            gen.uniform(0.0, 1.0, (size - n_near, domain.dim)) * (domain.hi - domain.lo)
            + domain.lo
        )
    if n_near > 0:
        base = geometry.sample_boundary(boundary_source, n_near, rng.derive_key("query-near", int(seed)))
        offsets = rng.stream("query-near-offset", int(seed)).standard_normal((n_near, domain.dim))
        near = np.clip(base + near_sigma * offsets, domain.lo, domain.hi)
        parts.append(near)
    return QuerySet(np.concatenate(parts, axis=0))
