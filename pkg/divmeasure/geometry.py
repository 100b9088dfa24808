"""
Level sets of mollified indicators: extraction, level selection,
density classification and perimeter / coarea estimates.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .errors import DegenerateLevel, NoRegularLevel
from .grid import MollifierKernel, ScalarGridField, as_mask, gradient, gradient_mass, mollify, rasterize
from .measures import ConvergenceTable

logger = logging.getLogger("divmeasure.geometry")

# class = interior iff alpha > 1 - DELTA_CLS, exterior iff alpha < DELTA_CLS
DELTA_CLS = 0.05
SATURATION = 1e-9


@dataclass
class SurfaceMesh:
    """Facets with `dim` vertices each: points (1D), segments (2D), triangles (3D).

    vertices: (n, dim, dim); normals: (n, dim) unit vectors; areas: (n,)
    """
    dim: int
    vertices: np.ndarray
    normals: np.ndarray
    areas: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, self.dim, self.dim)
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, self.dim)
        self.areas = np.asarray(self.areas, dtype=float).reshape(-1)
        if not (len(self.vertices) == len(self.normals) == len(self.areas)):
            raise ValueError("vertices, normals and areas disagree in length")
        if len(self.areas) and np.any(self.areas <= 0):
            raise ValueError("facet areas must be positive")
        if len(self.normals):
            lengths = np.linalg.norm(self.normals, axis=1)
            if np.max(np.abs(lengths - 1.0)) > 1e-12:
                raise ValueError("facet normals must be unit vectors")

    @classmethod
    def empty(cls, dim):
        return cls(dim, np.zeros((0, dim, dim)), np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def concatenate(cls, meshes, dim=None):
        meshes = list(meshes)
        if not meshes:
            return cls.empty(dim)
        return cls(meshes[0].dim,
                   np.concatenate([m.vertices for m in meshes]),
                   np.concatenate([m.normals for m in meshes]),
                   np.concatenate([m.areas for m in meshes]))

    def __len__(self):
        return len(self.areas)

    @property
    def midpoints(self):
        return self.vertices.mean(axis=1)

    def total_area(self):
        return float(self.areas.sum())

    def subset(self, mask):
        mask = np.asarray(mask)
        return SurfaceMesh(self.dim, self.vertices[mask], self.normals[mask], self.areas[mask])

    def reversed(self):
        return SurfaceMesh(self.dim, self.vertices.copy(), -self.normals, self.areas.copy())


@dataclass
class Approximant:
    """A = {u > t} at one epsilon, with its boundary mesh."""
    epsilon: float
    t: float
    mesh: SurfaceMesh
    region_mask: ScalarGridField


@dataclass
class DensityClass:
    point: np.ndarray
    alpha: float
    error: float
    kind: str  # interior | exterior | boundary


@dataclass
class CoareaResult:
    residual: float
    gradient_mass: float
    level_integral: float
    levels: int
    dropped: list = field(default_factory=list)


def _facet_geometry(vertices, dim):
    if dim == 2:
        d = vertices[:, 1] - vertices[:, 0]
        areas = np.linalg.norm(d, axis=1)
        normals = np.stack([-d[:, 1], d[:, 0]], axis=1)
    else:
        c = np.cross(vertices[:, 1] - vertices[:, 0], vertices[:, 2] - vertices[:, 0])
        areas = 0.5 * np.linalg.norm(c, axis=1)
        normals = c
    lengths = np.linalg.norm(normals, axis=1)
    keep = lengths > 0
    normals = normals.copy()
    normals[keep] /= lengths[keep, None]
    return normals, areas, keep


def _canonical_order(grid, vertices):
    mids = vertices.mean(axis=1)
    idx = grid.index_of(mids)
    keys = [mids[:, k] for k in reversed(range(grid.dim))]
    keys += [idx[:, k] for k in reversed(range(grid.dim))]
    return np.lexsort(keys)


def _level_points_1d(u, t):
    grid = u.grid
    v = u.values
    centers = grid.axes()[0]
    a, b = v[:-1], v[1:]
    cross = (a - t) * (b - t) < 0
    i = np.nonzero(cross)[0]
    x = centers[i] + grid.spacing * (t - a[i]) / (b[i] - a[i])
    normals = np.sign(b[i] - a[i])[:, None]
    return SurfaceMesh(1, x.reshape(-1, 1, 1), normals, np.ones(len(i)))


def extract_level_set(u, t):
    """Oriented mesh of {u = t}; normals point toward {u > t}."""
    if not 0 < t < 1:
        raise ValueError(f"level must lie in (0, 1), got {t}")
    grid = u.grid
    h = grid.spacing
    if np.any(u.values == t):
        t = t + 1e-12 * h

    if grid.dim == 1:
        mesh = _level_points_1d(u, t)
        if not len(mesh):
            raise DegenerateLevel(f"level {t:g} is empty")
        return mesh

    if grid.dim == 2:
        contours = measure.find_contours(u.values, t)
        pieces = []
        for c in contours:
            pts = grid.lo + (c + 0.5) * h
            if len(pts) >= 2:
                pieces.append(np.stack([pts[:-1], pts[1:]], axis=1))
        vertices = np.concatenate(pieces) if pieces else np.zeros((0, 2, 2))
    else:
        try:
            verts, faces, _, _ = measure.marching_cubes(u.values, level=t, spacing=(h, h, h))
        except (ValueError, RuntimeError):
            raise DegenerateLevel(f"level {t:g} is empty")
        vertices = (verts + grid.lo + 0.5 * h)[faces]

    if not len(vertices):
        raise DegenerateLevel(f"level {t:g} is empty")

    normals, areas, keep = _facet_geometry(vertices, grid.dim)
    keep &= areas > 1e-12 * h ** (grid.dim - 1)
    vertices, normals, areas = vertices[keep], normals[keep], areas[keep]
    if not len(areas):
        raise DegenerateLevel(f"level {t:g} has only degenerate facets")

    # orientation from grad u; facet geometry fixes the direction
    grad = gradient(u).sample(vertices.mean(axis=1))
    dots = np.sum(normals * grad, axis=1)
    flip = dots < 0
    normals[flip] *= -1
    flat = np.linalg.norm(grad, axis=1) < 1e-10
    if np.any(flat):
        logger.debug(f"{int(flat.sum())} facets at t={t:g} sit where |grad u| < 1e-10")

    order = _canonical_order(grid, vertices)
    return SurfaceMesh(grid.dim, vertices[order], normals[order], areas[order])


def surface_measure(mesh):
    return mesh.total_area()


def approximant(u, t, epsilon):
    mesh = extract_level_set(u, t)
    region = ScalarGridField(u.grid, (u.values > t).astype(float))
    return Approximant(epsilon=epsilon, t=t, mesh=mesh, region_mask=region)


def reduced_boundary_mesh(shape, grid, epsilon, kind="smooth_bump"):
    """Discrete reduced boundary: the 1/2-level of the mollified indicator."""
    chi = rasterize(shape, grid, margin=2 * epsilon)
    u = mollify(chi, MollifierKernel(kind, epsilon))
    return extract_level_set(u, 0.5)


def regular_levels(u, candidates, step):
    """Mask of candidate levels whose slab {|u - t| < width} is not a plateau.

    Empty slabs and slabs above 10x the median occupied slab are blacklisted.
    """
    width = min(u.grid.spacing, step / 2)
    vals = u.values[(u.values > SATURATION) & (u.values < 1 - SATURATION)]
    slab = np.array([np.count_nonzero(np.abs(vals - c) < width) for c in candidates],
                    dtype=float) * u.grid.cell_volume
    occupied = slab[slab > 0]
    median = np.median(occupied) if len(occupied) else 0.0
    return (slab > 0) & (slab <= 10 * median)


def select_levels(u, band, count):
    """`count` regular levels in the band, avoiding plateau values of u."""
    lo, hi = band
    if not 0 < lo < hi < 1:
        raise ValueError(f"band must satisfy 0 < lo < hi < 1, got {band}")
    n = 4 * count
    step = (hi - lo) / n
    candidates = lo + step * np.arange(1, n)
    good = regular_levels(u, candidates, step)

    dropped = candidates[~good]
    if len(dropped):
        logger.warning(f"⚠️ blacklisted {len(dropped)} of {len(candidates)} levels in {band}")
    survivors = candidates[good]
    if len(survivors) < count:
        raise NoRegularLevel(
            f"only {len(survivors)} regular levels in band {band}, need {count}")
    pick = np.unique(np.round(np.linspace(0, len(survivors) - 1, count)).astype(int))
    return [float(x) for x in survivors[pick]]


def ball_lattice(dim, n=None):
    """Offset lattice of unit-ball points, equal weights."""
    n = n or LATTICE_SIZE[dim]
    ticks = -1 + (np.arange(n) + 0.5) * 2.0 / n + 0.37 / n
    mesh = np.meshgrid(*([ticks] * dim), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[np.sum(pts ** 2, axis=1) <= 1.0]


LATTICE_SIZE = {1: 4001, 2: 161, 3: 41}


def classify_density(shape, point, radii, spacing=None):
    """Density of `shape` at `point` from ball averages over decreasing radii."""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if spacing is not None and radii[-1] < 2 * spacing:
        raise ValueError(f"smallest radius {radii[-1]:g} is below 2h")
    y = np.asarray(point, dtype=float)
    lattice = ball_lattice(shape.dim)
    alphas = [float(np.mean(shape.contains(y + r * lattice))) for r in radii]
    alpha = alphas[-1]
    error = abs(alphas[-1] - alphas[-2]) if len(alphas) > 1 else float("nan")
    if alpha > 1 - DELTA_CLS:
        kind = "interior"
    elif alpha < DELTA_CLS:
        kind = "exterior"
    else:
        kind = "boundary"
    return DensityClass(point=y, alpha=alpha, error=error, kind=kind)


def perimeter(shape, grid, eps_schedule, kind="smooth_bump"):
    """Gradient mass of the mollified indicator along the schedule.

    Returns (value at the finest epsilon, ConvergenceTable). The table expects
    growth within 5% as epsilon shrinks; `table.monotone` reports whether it held.
    """
    eps_schedule = list(eps_schedule)
    if len(eps_schedule) < 3:
        raise ValueError("perimeter needs at least 3 epsilons")
    chi = rasterize(shape, grid, margin=2 * max(eps_schedule))
    table = ConvergenceTable(direction="increasing", slack=0.05)
    for eps in eps_schedule:
        u = mollify(chi, MollifierKernel(kind, eps))
        value = gradient_mass(u)
        table.add(eps, np.nan, value)
        logger.debug(f"perimeter eps={eps:g}: {value:.6f}")
    if not table.monotone:
        logger.warning("⚠️ perimeter table is not monotone within 5%")
    return table.finest(), table


def symdiff_measure(mu, A, B):
    """||mu|| of the symmetric difference of two region masks."""
    return mu.tv(as_mask(A) ^ as_mask(B))


def coarea_check(u, quadrature_levels=32):
    """Gradient mass against the midpoint rule over regular levels of u.

    Plateau levels are blacklisted; the rule averages over the survivors.
    """
    lhs = gradient_mass(u)
    levels = (np.arange(quadrature_levels) + 0.5) / quadrature_levels
    good = regular_levels(u, levels, 1.0 / quadrature_levels)
    if not good.any():
        raise NoRegularLevel(f"no regular level among {quadrature_levels} midpoints")
    dropped = [float(t) for t in levels[~good]]
    if dropped:
        logger.warning(f"⚠️ coarea skips plateau levels {dropped}")
    lengths = []
    for t in levels[good]:
        try:
            lengths.append(surface_measure(extract_level_set(u, t)))
        except DegenerateLevel:
            lengths.append(0.0)
    rhs = float(np.mean(lengths))
    residual = abs(lhs - rhs) / lhs if lhs > 0 else abs(rhs)
    logger.info(f"coarea: grad mass {lhs:.6f}, level integral {rhs:.6f}, residual {residual:.3e}")
    return CoareaResult(residual=residual, gradient_mass=lhs, level_integral=rhs,
                        levels=quadrature_levels, dropped=dropped)


def boundary_points(shape, grid, count, iterations=48):
    """Topological boundary points found between unlike neighbouring cells."""
    centers = grid.centers()
    inside = shape.contains(centers)
    pairs_a, pairs_b = [], []
    for axis in range(grid.dim):
        a = np.take(inside, range(grid.cells[axis] - 1), axis=axis)
        b = np.take(inside, range(1, grid.cells[axis]), axis=axis)
        edge = a != b
        ca = np.take(centers, range(grid.cells[axis] - 1), axis=axis)[edge]
        cb = np.take(centers, range(1, grid.cells[axis]), axis=axis)[edge]
        ina = a[edge]
        # orient every pair as (inside, outside)
        pairs_a.append(np.where(ina[:, None], ca, cb))
        pairs_b.append(np.where(ina[:, None], cb, ca))
    p_in = np.concatenate(pairs_a)
    p_out = np.concatenate(pairs_b)
    if not len(p_in):
        return np.zeros((0, grid.dim))
    order = np.lexsort(p_in.T[::-1])
    pick = order[np.unique(np.round(np.linspace(0, len(order) - 1, min(count, len(order)))).astype(int))]
    lo, hi = p_in[pick], p_out[pick]
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        m_in = shape.contains(mid)
        lo = np.where(m_in[:, None], mid, lo)
        hi = np.where(m_in[:, None], hi, mid)
    return 0.5 * (lo + hi)
