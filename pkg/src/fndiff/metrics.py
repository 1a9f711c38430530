"""Function-space and PDE-based evaluation.

Every metric consumes "evaluables": callables mapping (n, dim) point arrays
to (n, range_dim) values. Analytic oracles, baseline fields, and generated
functions (one denoiser call over a penultimate context state) all satisfy
the protocol, which is what makes PDE residuals on generated functions
possible. All randomness is seeded; per-sample evaluation order is fixed, so
reports are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffusion, geometry, rng
from .dataset import FunctionSample
from .noise_field import DomainSpec

__all__ = [
    "EvalSets", "EvalConfig", "build_eval_sets",
    "mc_l2", "mc_l2_normalized", "eikonal_metric", "boundary_metric", "deformation_mse",
    "MeanField", "ZeroField", "evaluate_model", "report_to_csv",
]


class MeanField:
    """Constant predictor: the pointwise mean of a dataset's target fields."""

    def __init__(self, samples: list):
        self.samples = list(samples)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        acc = self.samples[0].target(points).astype(np.float64, copy=True)
        for s in self.samples[1:]:
            acc += s.target(points)
        return acc / len(self.samples)


class ZeroField:
    def __init__(self, range_dim: int = 1):
        self.range_dim = range_dim

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.zeros((len(np.atleast_2d(points)), self.range_dim))


@dataclass(frozen=True)
class EvalSets:
    """Interior points for PDE residuals and boundary points for the
    boundary-condition residual."""

    interior: np.ndarray
    boundary: np.ndarray


def build_eval_sets(
    shape,
    domain: DomainSpec,
    n_interior: int,
    n_boundary: int,
    seed: int,
    fd_h: float,
    clearance_margin: float | None = None,
) -> EvalSets:
    """Uniform interior points (inset 2h so difference stencils stay inside),
    optionally excluding points within `clearance_margin` of the shape's
    medial structure (for oracle-floor measurements); uniform boundary points."""
    lo = domain.lo + 2.0 * fd_h
    hi = domain.hi - 2.0 * fd_h
    gen = rng.stream("eval-interior", int(seed))
    pts: list[np.ndarray] = []
    needed = n_interior
    for _ in range(1000):
        batch = gen.uniform(0.0, 1.0, (max(needed * 2, 64), domain.dim)) * (hi - lo) + lo
        if clearance_margin is not None:
            batch = batch[shape.clearance(batch) > clearance_margin]
        pts.append(batch[:needed])
        needed -= len(pts[-1])
        if needed == 0:
            break
    else:
        raise RuntimeError("interior sampling starved (clearance margin too large?)")
    boundary = geometry.sample_boundary(shape, n_boundary, rng.derive_key("eval-bnd", int(seed)))
    return EvalSets(np.concatenate(pts, axis=0), boundary)


# --- metrics ------------------------------------------------------------------

def mc_l2(f, g, query_points: np.ndarray) -> float:
    """Monte-Carlo function distance: sqrt of the summed squared differences
    over the query set (unnormalized)."""
    query_points = np.atleast_2d(query_points)
    if len(query_points) == 0:
        raise ValueError("mc_l2 needs a non-empty query set")
    diff = np.asarray(f(query_points), dtype=np.float64) - np.asarray(g(query_points))
    return float(np.sqrt((diff**2).sum()))


def mc_l2_normalized(f, g, query_points: np.ndarray) -> float:
    """Per-point variant (sqrt of the mean), comparable across set sizes."""
    query_points = np.atleast_2d(query_points)
    if len(query_points) == 0:
        raise ValueError("mc_l2 needs a non-empty query set")
    diff = np.asarray(f(query_points), dtype=np.float64) - np.asarray(g(query_points))
    return float(np.sqrt((diff**2).sum() / len(query_points)))


def _batched_gradients(f, points: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradients at many points with few field calls."""
    n, dim = points.shape
    stencil = np.repeat(points[:, None, :], 2 * dim, axis=1)
    for d in range(dim):
        stencil[:, 2 * d, d] += h
        stencil[:, 2 * d + 1, d] -= h
    values = np.asarray(f(stencil.reshape(n * 2 * dim, dim)), dtype=np.float64)
    values = values.reshape(n, 2 * dim)
    return (values[:, 0::2] - values[:, 1::2]) / (2.0 * h)


def eikonal_metric(f, interior_points: np.ndarray, h: float = 1e-3) -> float:
    """Mean squared residual of the unit-gradient property over the points."""
    interior_points = np.atleast_2d(interior_points)
    grads = _batched_gradients(f, interior_points, h)
    norms = np.linalg.norm(grads, axis=1)
    return float(((norms - 1.0) ** 2).mean())


def boundary_metric(f, boundary_points: np.ndarray, q=None) -> float:
    """Mean squared boundary-condition residual; q defaults to 0."""
    boundary_points = np.atleast_2d(boundary_points)
    if len(boundary_points) == 0:
        raise ValueError("boundary metric needs a non-empty point set")
    values = np.asarray(f(boundary_points), dtype=np.float64)
    target = 0.0 if q is None else np.asarray(q(boundary_points), dtype=np.float64)
    return float(((values - target) ** 2).mean())


def deformation_mse(pred, gt, manifold_points: np.ndarray) -> float:
    """Mean squared displacement error over manifold samples."""
    manifold_points = np.atleast_2d(manifold_points)
    if len(manifold_points) == 0:
        raise ValueError("deformation mse needs a non-empty point set")
    diff = np.asarray(pred(manifold_points), dtype=np.float64) - np.asarray(gt(manifold_points))
    return float(((diff**2).sum(axis=1)).mean())


# --- model evaluation -------------------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    seed: int = 0
    sample_steps: int = 50
    context_size: int = 256
    noise_resolution: tuple | None = None
    n_interior: int = 10000
    n_boundary: int = 10000
    n_mc: int = 1024
    n_deform: int = 2048
    fd_h: float = 1e-3
    contour_grid: int = 128
    contour_points: int = 2048
    fscore_tau: float = 0.02


def _contour_metrics(field, sample: FunctionSample, cfg: EvalConfig, seed: int):
    """Chamfer/f-score between points on the field's zero contour and the
    ground-truth boundary. An empty contour scores (inf, 0)."""
    domain = sample.domain
    lattice = domain.lattice([cfg.contour_grid] * domain.dim)
    values = np.asarray(field(lattice))[:, 0].reshape([cfg.contour_grid] * domain.dim)
    if domain.dim == 2:
        contour = geometry.marching_squares(values, domain)
    else:
        contour = geometry.marching_cubes(values, domain)
    if contour.is_empty:
        return float("inf"), 0.0
    pred_pts = geometry.sample_contour_points(
        contour, cfg.contour_points, rng.derive_key("contour", seed)
    )
    gt_pts = geometry.sample_boundary(
        sample.target, cfg.contour_points, rng.derive_key("gt-bnd", seed)
    )
    return geometry.chamfer(pred_pts, gt_pts), geometry.fscore(pred_pts, gt_pts, cfg.fscore_tau)


def _field_for(model, sample: FunctionSample, cfg: EvalConfig, seed: int, schedule):
    condition = (sample.condition_points, sample.condition_values)
    result = diffusion.sample(
        model,
        condition,
        sample.domain,
        cfg.sample_steps,
        seed,
        context_size=cfg.context_size,
        noise_resolution=cfg.noise_resolution,
        range_dim=sample.range_dim,
        schedule=schedule,
    )
    return result.generated


def _sdf_row(field, sample: FunctionSample, cfg: EvalConfig, seed: int) -> dict:
    domain = sample.domain
    gen = rng.stream("mc-queries", seed)
    mc_points = gen.uniform(0.0, 1.0, (cfg.n_mc, domain.dim)) * (domain.hi - domain.lo) + domain.lo
    sets = build_eval_sets(
        sample.target, domain, cfg.n_interior, cfg.n_boundary,
        rng.derive_key("eval-sets", seed), cfg.fd_h,
    )
    cham, fsc = _contour_metrics(field, sample, cfg, seed)
    return {
        "chamfer": cham,
        "fscore": fsc,
        "boundary": boundary_metric(field, sets.boundary),
        "eikonal": eikonal_metric(field, sets.interior, cfg.fd_h),
        "mc_l2": mc_l2(field, sample.target, mc_points),
    }


def _deform_row(field, sample: FunctionSample, cfg: EvalConfig, seed: int) -> dict:
    from .dataset import sample_manifold_points

    pts = sample_manifold_points(sample.domain, cfg.n_deform, rng.derive_key("deform-pts", seed))
    gen = rng.stream("mc-queries", seed)
    theta = gen.uniform(0.0, 2.0 * np.pi, cfg.n_mc)
    mc_points = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return {
        "mse": deformation_mse(field, sample.target, pts),
        "mc_l2": mc_l2(field, sample.target, mc_points),
    }


def _aggregate(rows: list) -> dict:
    keys = rows[0].keys()
    return {k: float(np.mean([r[k] for r in rows])) for k in keys}


def evaluate_model(
    model,
    samples: list,
    config: EvalConfig,
    schedule=None,
    baseline=None,
    config_hash: str = "",
) -> dict:
    """Per-sample and aggregate metrics for the model, the ground-truth oracle
    (the achievable floor), and a baseline field (dataset mean for SDFs,
    zero deformation otherwise)."""
    if not samples:
        raise ValueError("no evaluation samples")
    task = "sdf" if samples[0].range_dim == 1 else "deformation"
    row_fn = _sdf_row if task == "sdf" else _deform_row
    if baseline is None:
        baseline = MeanField(samples) if task == "sdf" else ZeroField(samples[0].range_dim)

    model_rows, oracle_rows, baseline_rows = [], [], []
    for i, sample in enumerate(samples):
        seed = rng.derive_key("eval-sample", config.seed, i)
        generated = _field_for(model, sample, config, seed, schedule)
        model_rows.append({"sample_id": i, **row_fn(generated, sample, config, seed)})
        oracle_rows.append(row_fn(sample.target, sample, config, seed))
        baseline_rows.append(row_fn(baseline, sample, config, seed))

    return {
        "task": task,
        "config_hash": config_hash,
        "samples": model_rows,
        "aggregate": {
            "model": _aggregate([{k: v for k, v in r.items() if k != "sample_id"} for r in model_rows]),
            "oracle": _aggregate(oracle_rows),
            "baseline": _aggregate(baseline_rows),
        },
    }


def report_to_csv(report: dict) -> str:
    """One row per sample plus aggregate rows for the model/oracle/baseline."""
    metric_keys = [k for k in report["samples"][0] if k != "sample_id"]
    lines = ["sample_id," + ",".join(metric_keys)]
    for row in report["samples"]:
        lines.append(str(row["sample_id"]) + "," + ",".join(f"{row[k]:.10g}" for k in metric_keys))
    for name in ("model", "oracle", "baseline"):
        agg = report["aggregate"][name]
        lines.append(name + "," + ",".join(f"{agg[k]:.10g}" for k in metric_keys))
    return "\n".join(lines) + "\n"
