"""Analytic signed-distance oracles, boundary sampling, finite-difference
gradients, isosurface extraction, and point-set metrics.

SIGN CONVENTION: signed distances are POSITIVE inside a shape and negative
outside. This is the reverse of the more common graphics convention; it is
applied consistently across dataset generation, metrics, and isosurface
orientation, so zero level sets are unaffected but callers comparing against
external SDF tooling must negate.

All operations are pure and deterministic; shapes are immutable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import rng
from ._backend import kernels as _K
from .noise_field import DomainSpec

__all__ = [
    "AnalyticShape", "Sphere", "AxisBox", "ShapeUnion",
    "IsoContour2D", "IsoContour3D",
    "sdf", "sample_boundary", "fd_gradient",
    "marching_squares", "marching_cubes",
    "chamfer", "fscore", "sample_contour_points",
    "save_obj", "save_pgm", "save_raw_volume",
]


# --- shapes ------------------------------------------------------------------

class AnalyticShape:
    """Base for exact positive-inside signed-distance oracles.

    Shapes are evaluable fields: ``shape(points)`` returns (n, 1) values, the
    same protocol generated functions use, so metrics treat both uniformly.
    """

    dim: int

    def sdf(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.sdf(np.atleast_2d(points))[:, None]

    def boundary_measure(self) -> float:
        raise NotImplementedError

    def boundary_points(self, n: int, gen: np.random.Generator) -> np.ndarray:
        """n points uniform over this primitive's own boundary."""
        raise NotImplementedError

    def clearance(self, points: np.ndarray) -> np.ndarray:
        """Heuristic distance from the medial structure (centers, equidistant
        sets); used to exclude non-smooth spots when building evaluation sets."""
        raise NotImplementedError


@dataclass(frozen=True)
class Sphere(AnalyticShape):
    """Ball boundary: a circle in 2-D, a sphere in 3-D. Exact SDF everywhere."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return self.radius - np.linalg.norm(points - self.center, axis=1)

    def boundary_measure(self) -> float:
        if self.dim == 2:
            return 2.0 * np.pi * self.radius
        if self.dim == 3:
            return 4.0 * np.pi * self.radius**2
        return 2.0  # two endpoints in 1-D

    def boundary_points(self, n: int, gen: np.random.Generator) -> np.ndarray:
        if self.dim == 2:
            theta = gen.uniform(0.0, 2.0 * np.pi, n)
            dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        else:
            dirs = gen.standard_normal((n, self.dim))
            norms = np.linalg.norm(dirs, axis=1, keepdims=True)
            while np.any(norms < 1e-12):
                bad = norms[:, 0] < 1e-12
                dirs[bad] = gen.standard_normal((int(bad.sum()), self.dim))
                norms = np.linalg.norm(dirs, axis=1, keepdims=True)
            dirs = dirs / norms
        return self.center + self.radius * dirs

    def clearance(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)


@dataclass(frozen=True)
class AxisBox(AnalyticShape):
    """Axis-aligned box given by center and positive half-extents."""

    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=np.float64))
        if np.any(self.half_extents <= 0):
            raise ValueError(f"half-extents must be positive, got {self.half_extents}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        q = np.abs(np.atleast_2d(points) - self.center) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return -(outside + inside)

    def boundary_measure(self) -> float:
        he = self.half_extents
        if self.dim == 2:
            return float(4.0 * (he[0] + he[1]))
        if self.dim == 3:
            return float(8.0 * (he[0] * he[1] + he[1] * he[2] + he[0] * he[2]))
        return 2.0

    def boundary_points(self, n: int, gen: np.random.Generator) -> np.ndarray:
        he = self.half_extents
        dim = self.dim
        # one "facet" per (axis, side); weight by facet measure
        weights = []
        for axis in range(dim):
            others = [he[d] for d in range(dim) if d != axis]
            area = float(np.prod(others)) * 2 ** (dim - 1)
            weights += [area, area]
        weights = np.asarray(weights)
        cdf = np.cumsum(weights) / weights.sum()
        picks = np.searchsorted(cdf, gen.uniform(0.0, 1.0, n), side="right")
        pts = gen.uniform(-1.0, 1.0, (n, dim)) * he
        for k in range(n):
            axis, side = divmod(int(picks[k]), 2)
            pts[k, axis] = he[axis] if side == 0 else -he[axis]
        return self.center + pts

    def clearance(self, points: np.ndarray) -> np.ndarray:
        # distance between the two smallest per-axis face margins: zero on the
        # diagonal medial planes where the nearest face is ambiguous
        margins = self.half_extents - np.abs(np.atleast_2d(points) - self.center)
        srt = np.sort(margins, axis=1)
        return np.abs(srt[:, 1] - srt[:, 0]) if margins.shape[1] > 1 else np.abs(srt[:, 0])


@dataclass(frozen=True)
class ShapeUnion(AnalyticShape):
    """Union via pointwise max. Exact outside and up to the overlap interiors,
    where max is only a lower bound on the true distance (the zero set and the
    sign are still exact, which is what dataset generation and metrics need)."""

    shapes: tuple

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        if len(self.shapes) == 0:
            raise ValueError("union of zero shapes")

    @property
    def dim(self) -> int:
        return self.shapes[0].dim

    def sdf(self, points: np.ndarray) -> np.ndarray:
        values = np.stack([s.sdf(points) for s in self.shapes], axis=0)
        return values.max(axis=0)

    def boundary_measure(self) -> float:
        return float(sum(s.boundary_measure() for s in self.shapes))

    def boundary_points(self, n: int, gen: np.random.Generator) -> np.ndarray:
        # propose on member boundaries (measure-weighted), reject points that
        # fell strictly inside another member: what survives is uniform on the
        # union's boundary
        measures = np.asarray([s.boundary_measure() for s in self.shapes])
        cdf = np.cumsum(measures) / measures.sum()
        out = []
        remaining = n
        for _ in range(1000):
            batch = max(remaining * 2, 16)
            picks = np.searchsorted(cdf, gen.uniform(0.0, 1.0, batch), side="right")
            pts = np.empty((batch, self.dim))
            for which, member in enumerate(self.shapes):
                mask = picks == which
                count = int(mask.sum())
                if count:
                    pts[mask] = member.boundary_points(count, gen)
            keep = pts[np.abs(self.sdf(pts)) < 1e-12]
            out.append(keep[:remaining])
            remaining -= len(out[-1])
            if remaining == 0:
                return np.concatenate(out, axis=0)
        raise RuntimeError("boundary sampling failed to converge (degenerate union?)")

    def clearance(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        values = np.stack([s.sdf(points) for s in self.shapes], axis=0)
        member_clear = np.stack([s.clearance(points) for s in self.shapes], axis=0)
        order = np.argsort(values, axis=0)
        active = order[-1]
        cols = np.arange(points.shape[0])
        clear = member_clear[active, cols]
        if len(self.shapes) > 1:
            gap = values[order[-1], cols] - values[order[-2], cols]
            clear = np.minimum(clear, gap)
        return clear


def sdf(shape: AnalyticShape, x: np.ndarray) -> float:
    """Signed distance of a single point; positive inside."""
    return float(shape.sdf(np.asarray(x, dtype=np.float64)[None, :])[0])


def sample_boundary(shape: AnalyticShape, n: int, seed: int) -> np.ndarray:
    """n points uniform over the shape's boundary measure, |sdf| < 1e-12."""
    if n < 1:
        raise ValueError(f"need n >= 1 boundary points, got {n}")
    return shape.boundary_points(n, rng.stream("boundary", int(seed)))


# --- finite differences --------------------------------------------------------

def fd_gradient(field, x: np.ndarray, h: float, domain: DomainSpec | None = None) -> np.ndarray:
    """Central-difference gradient of a scalar evaluable field at one point."""
    x = np.asarray(x, dtype=np.float64)
    dim = len(x)
    stencil = np.repeat(x[None, :], 2 * dim, axis=0)
    for d in range(dim):
        stencil[2 * d, d] += h
        stencil[2 * d + 1, d] -= h
    if domain is not None and not domain.contains(stencil).all():
        raise ValueError(f"finite-difference stencil at {x} (h={h}) leaves the domain")
    values = np.asarray(field(stencil), dtype=np.float64).reshape(2 * dim)
    return (values[0::2] - values[1::2]) / (2.0 * h)


# --- isosurface extraction -----------------------------------------------------

@dataclass(frozen=True)
class IsoContour2D:
    """Zero level set as polylines; closed loops repeat their first vertex."""

    polylines: tuple

    @property
    def is_empty(self) -> bool:
        return len(self.polylines) == 0

    def all_vertices(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 2))
        return np.concatenate(self.polylines, axis=0)


@dataclass(frozen=True)
class IsoContour3D:
    """Zero level set as a triangle mesh."""

    vertices: np.ndarray
    faces: np.ndarray

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0


def _edge_vertex(pa, pb, va, vb):
    t = va / (va - vb)
    return pa + t * (pb - pa)


def _pair_face_crossings(order, inside, avg_inside):
    """Segments on one quad face, corners in cyclic order.

    `order`: the 4 edge slots (cyclic), each either None or a crossing key.
    Ambiguous double-saddles pair around the corners selected by the average
    sign of the face (the cell/face-average rule).
    """
    crossing = [k for k in range(4) if order[k] is not None]
    if len(crossing) == 0:
        return []
    if len(crossing) == 2:
        return [(order[crossing[0]], order[crossing[1]])]
    # all four edges cross: corners alternate inside/outside
    if inside[0]:  # corners 0,2 inside
        if avg_inside:  # hug the outside corners 1 and 3
            return [(order[0], order[1]), (order[2], order[3])]
        return [(order[3], order[0]), (order[1], order[2])]
    if avg_inside:  # corners 1,3 inside; hug outside corners 0 and 2
        return [(order[3], order[0]), (order[1], order[2])]
    return [(order[0], order[1]), (order[2], order[3])]


def marching_squares(values: np.ndarray, domain: DomainSpec) -> IsoContour2D:
    """Zero contour of bilinearly interpolated grid values.

    Grid axis k spans domain axis k inclusively. An all-positive or
    all-negative grid yields an empty contour.
    """
    values = np.asarray(values, dtype=np.float64)
    r0, r1 = values.shape
    if r0 < 2 or r1 < 2:
        raise ValueError(f"marching squares needs a >=2x2 grid, got {values.shape}")
    xs = np.linspace(domain.lo[0], domain.hi[0], r0)
    ys = np.linspace(domain.lo[1], domain.hi[1], r1)
    inside = values > 0.0

    verts: dict[tuple, np.ndarray] = {}
    adjacency: dict[tuple, list] = {}

    def vertex_key(i0, j0, i1, j1):
        key = ((i0, j0), (i1, j1))
        if key not in verts:
            pa = np.array([xs[i0], ys[j0]])
            pb = np.array([xs[i1], ys[j1]])
            verts[key] = _edge_vertex(pa, pb, values[i0, j0], values[i1, j1])
        return key

    crossing_cells = np.argwhere(
        (inside[:-1, :-1] != inside[1:, :-1])
        | (inside[:-1, :-1] != inside[1:, 1:])
        | (inside[:-1, :-1] != inside[:-1, 1:])
    )
    for i, j in crossing_cells:
        corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]  # cyclic
        ins = [inside[c] for c in corners]
        order = []
        for k in range(4):
            a, b = corners[k], corners[(k + 1) % 4]
            if ins[k] != ins[(k + 1) % 4]:
                order.append(vertex_key(a[0], a[1], b[0], b[1]))
            else:
                order.append(None)
        avg = sum(values[c] for c in corners) / 4.0
        for ka, kb in _pair_face_crossings(order, ins, avg > 0.0):
            adjacency.setdefault(ka, []).append(kb)
            adjacency.setdefault(kb, []).append(ka)

    polylines = _chain_segments(adjacency, verts)
    return IsoContour2D(tuple(polylines))


def _chain_segments(adjacency, verts):
    """Link degree<=2 segment soup into polylines; closed loops are repeated."""
    visited = set()
    polylines = []

    def walk(start, first):
        chain = [start, first]
        visited.add((start, first))
        visited.add((first, start))
        prev, cur = start, first
        while True:
            nxt = [k for k in adjacency[cur] if k != prev and (cur, k) not in visited]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            visited.add((prev, cur))
            visited.add((cur, prev))
            chain.append(cur)
        return chain

    endpoints = [k for k, nbrs in adjacency.items() if len(nbrs) == 1]
    for k in endpoints:
        nbr = adjacency[k][0]
        if (k, nbr) not in visited:
            chain = walk(k, nbr)
            polylines.append(np.asarray([verts[c] for c in chain]))
    for k, nbrs in adjacency.items():
        for nbr in nbrs:
            if (k, nbr) not in visited:
                chain = walk(k, nbr)
                polylines.append(np.asarray([verts[c] for c in chain]))
    return polylines


_CUBE_CORNERS = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]


def _cell_faces():
    """6 faces of the unit cube, each as 4 corner offsets in cyclic order."""
    faces = []
    for axis in range(3):
        for side in (0, 1):
            u, w = [d for d in range(3) if d != axis]
            quad = []
            for du, dw in ((0, 0), (1, 0), (1, 1), (0, 1)):
                corner = [0, 0, 0]
                corner[axis] = side
                corner[u] = du
                corner[w] = dw
                quad.append(tuple(corner))
            faces.append(quad)
    return faces


_CELL_FACES = _cell_faces()


def marching_cubes(values: np.ndarray, domain: DomainSpec) -> IsoContour3D:
    """Zero isosurface of trilinearly interpolated grid values.

    Vertices lie on sign-changing grid edges (linear interpolation); per-cell
    polygons are traced through face crossings, so faces shared between cells
    agree and the mesh is watertight away from the grid border. Face saddles
    follow the average-sign rule; triangles are oriented with outward normals
    (toward decreasing values).
    """
    values = np.asarray(values, dtype=np.float64)
    r0, r1, r2 = values.shape
    if min(r0, r1, r2) < 2:
        raise ValueError(f"marching cubes needs a >=2^3 grid, got {values.shape}")
    axes = [np.linspace(domain.lo[d], domain.hi[d], values.shape[d]) for d in range(3)]
    inside = values > 0.0

    base = inside[:-1, :-1, :-1]
    crossing = np.zeros_like(base)
    for da, db, dc in _CUBE_CORNERS[1:]:
        crossing |= base != inside[da : da + r0 - 1, db : db + r1 - 1, dc : dc + r2 - 1]

    verts: dict[tuple, int] = {}
    positions: list[np.ndarray] = []
    faces: list[tuple] = []

    def vertex_id(na, nb):
        key = (na, nb) if na < nb else (nb, na)
        vid = verts.get(key)
        if vid is None:
            pa = np.array([axes[0][key[0][0]], axes[1][key[0][1]], axes[2][key[0][2]]])
            pb = np.array([axes[0][key[1][0]], axes[1][key[1][1]], axes[2][key[1][2]]])
            positions.append(_edge_vertex(pa, pb, values[key[0]], values[key[1]]))
            vid = len(positions) - 1
            verts[key] = vid
        return vid

    for i, j, k in np.argwhere(crossing):
        node = lambda off: (i + off[0], j + off[1], k + off[2])
        segs = []
        for quad in _CELL_FACES:
            ins = [inside[node(c)] for c in quad]
            order = []
            for e in range(4):
                a, b = quad[e], quad[(e + 1) % 4]
                if ins[e] != ins[(e + 1) % 4]:
                    order.append(vertex_id(node(a), node(b)))
                else:
                    order.append(None)
            if all(o is None for o in order):
                continue
            avg = sum(values[node(c)] for c in quad) / 4.0
            segs.extend(_pair_face_crossings(order, ins, avg > 0.0))

        # chain cell-local segments (every crossing edge has degree 2) into loops
        nbrs: dict[int, list] = {}
        for a, b in segs:
            nbrs.setdefault(a, []).append(b)
            nbrs.setdefault(b, []).append(a)
        used = set()
        for start in nbrs:
            if start in used:
                continue
            loop = [start]
            used.add(start)
            cur = start
            while True:
                step = [v for v in nbrs[cur] if v not in used]
                if not step:
                    break
                cur = step[0]
                used.add(cur)
                loop.append(cur)
            if len(loop) < 3:
                continue
            pts = np.asarray([positions[v] for v in loop])
            normal = _newell_normal(pts)
            grad = _trilinear_gradient(values, axes, node, pts.mean(axis=0))
            if np.dot(normal, grad) > 0.0:
                loop.reverse()
            for m in range(1, len(loop) - 1):
                faces.append((loop[0], loop[m], loop[m + 1]))

    if not faces:
        return IsoContour3D(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return IsoContour3D(np.asarray(positions), np.asarray(faces, dtype=np.int64))


def _newell_normal(pts: np.ndarray) -> np.ndarray:
    nxt = np.roll(pts, -1, axis=0)
    return np.array([
        np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2])),
        np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0])),
        np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1])),
    ])


def _trilinear_gradient(values, axes, node, point) -> np.ndarray:
    """Gradient of the cell's trilinear interpolant at a point inside it."""
    lo = np.array([axes[d][node((0, 0, 0))[d]] for d in range(3)])
    hi = np.array([axes[d][node((1, 1, 1))[d]] for d in range(3)])
    f = (point - lo) / (hi - lo)
    grad = np.zeros(3)
    for corner in _CUBE_CORNERS:
        v = values[node(corner)]
        for d in range(3):
            term = v / (hi[d] - lo[d]) * (1.0 if corner[d] else -1.0)
            for o in range(3):
                if o != d:
                    term *= f[o] if corner[o] else 1.0 - f[o]
            grad[d] += term
    return grad


# --- point-set metrics ---------------------------------------------------------

def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean nearest-neighbor distance (unsquared)."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer distance of an empty point set")
    return float(_K.nn_min_dists(a, b).mean() + _K.nn_min_dists(b, a).mean())


def fscore(a: np.ndarray, b: np.ndarray, threshold: float) -> float:
    """Harmonic mean of precision/recall under distance-threshold matching."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("f-score of an empty point set")
    precision = float((_K.nn_min_dists(a, b) <= threshold).mean())
    recall = float((_K.nn_min_dists(b, a) <= threshold).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def sample_contour_points(contour, n: int, seed: int) -> np.ndarray:
    """Sample n points uniformly by length (2-D) or area (3-D) on a contour."""
    gen = rng.stream("contour-points", int(seed))
    if isinstance(contour, IsoContour2D):
        if contour.is_empty:
            raise ValueError("cannot sample points from an empty contour")
        starts, ends = [], []
        for poly in contour.polylines:
            starts.append(poly[:-1])
            ends.append(poly[1:])
        starts = np.concatenate(starts, axis=0)
        ends = np.concatenate(ends, axis=0)
        lengths = np.linalg.norm(ends - starts, axis=1)
        cdf = np.cumsum(lengths)
        if cdf[-1] == 0.0:
            raise ValueError("contour has zero total length")
        picks = np.searchsorted(cdf, gen.uniform(0.0, cdf[-1], n), side="right")
        picks = np.minimum(picks, len(lengths) - 1)
        t = gen.uniform(0.0, 1.0, (n, 1))
        return starts[picks] + t * (ends[picks] - starts[picks])
    if contour.is_empty:
        raise ValueError("cannot sample points from an empty contour")
    tri = contour.vertices[contour.faces]
    areas = 0.5 * np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
    )
    cdf = np.cumsum(areas)
    if cdf[-1] == 0.0:
        raise ValueError("mesh has zero total area")
    picks = np.searchsorted(cdf, gen.uniform(0.0, cdf[-1], n), side="right")
    picks = np.minimum(picks, len(areas) - 1)
    r1 = np.sqrt(gen.uniform(0.0, 1.0, (n, 1)))
    r2 = gen.uniform(0.0, 1.0, (n, 1))
    chosen = tri[picks]
    return (1 - r1) * chosen[:, 0] + r1 * (1 - r2) * chosen[:, 1] + r1 * r2 * chosen[:, 2]


# --- artifact export -----------------------------------------------------------

def save_obj(contour, path: str) -> None:
    """ASCII OBJ: v/f triangles for meshes, v/l records for 2-D polylines."""
    lines = []
    if isinstance(contour, IsoContour3D):
        for v in contour.vertices:
            lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        for f in contour.faces:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    else:
        offset = 1
        chunks = []
        for poly in contour.polylines:
            for v in poly:
                lines.append(f"v {v[0]:.9g} {v[1]:.9g} 0")
            chunks.append(" ".join(str(offset + k) for k in range(len(poly))))
            offset += len(poly)
        for chunk in chunks:
            lines.append(f"l {chunk}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_pgm(values: np.ndarray, path: str) -> None:
    """Binary PGM of a 2-D field, affinely mapped to [0,255]; the mapping and
    axis layout go to a `<path>.json` sidecar so values can be recovered."""
    values = np.asarray(values, dtype=np.float64)
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin
    if span == 0.0:
        pixels = np.full(values.shape, 128, dtype=np.uint8)
    else:
        pixels = np.clip(np.round((values - vmin) / span * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{values.shape[1]} {values.shape[0]}\n255\n".encode())
        fh.write(pixels.tobytes())
    with open(path + ".json", "w") as fh:
        json.dump(
            {
                "vmin": vmin,
                "vmax": vmax,
                "mapping": "pixel = round((value - vmin) / (vmax - vmin) * 255)",
                "rows": "grid axis 0",
                "cols": "grid axis 1",
                "shape": list(values.shape),
            },
            fh,
            indent=2,
        )


def save_raw_volume(values: np.ndarray, path: str) -> None:
    """Little-endian float32 dump of a 3-D field with a JSON header sidecar."""
    values = np.asarray(values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(values.tobytes(order="C"))
    with open(path + ".json", "w") as fh:
        json.dump(
            {"dtype": "float32-le", "order": "C", "shape": list(values.shape)}, fh, indent=2
        )
