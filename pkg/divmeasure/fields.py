"""
Bounded divergence-measure fields.
A DMField pairs a vectorized evaluator with a sup bound and its divergence
as a SignedMeasure. Evaluators take arrays of shape (..., dim).
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateLevel, DivergenceMismatch, PartitionError, ResolutionError, SupBoundExceeded
from .geometry import SurfaceMesh, extract_level_set
from .grid import (MollifierKernel, ScalarGridField, VectorGridField, convolve, gradient, gradient_mass,
                   mollify, rasterize)
from .measures import ConvergenceTable, SignedMeasure
from .shapes import Ball, Complement

logger = logging.getLogger("divmeasure.fields")

FD_STEP = 1e-5
FD_TOL = 1e-4
SPOT_CHECKS = 100
SUP_LATTICE = 10_000


@dataclass
class DMField:
    evaluator: object
    sup_bound: float
    divergence: SignedMeasure
    structure: str  # analytic | piecewise | sampled
    grid: object
    name: str = "field"
    regions: list = None
    interface: object = None
    table: ConvergenceTable = None
    meta: dict = field(default_factory=dict)

    def __call__(self, points):
        return self.evaluator(np.asarray(points, dtype=float))

    @property
    def dim(self):
        return self.grid.dim

    @property
    def is_piecewise(self):
        return self.structure == "piecewise"

    def region_index(self, points):
        """Index of the first region containing each point (-1 if none)."""
        pts = np.asarray(points, dtype=float)
        out = np.full(pts.shape[:-1], -1, dtype=int)
        for i, (shape, _, _) in enumerate(self.regions):
            hit = (out < 0) & shape.contains(pts)
            out[hit] = i
        return out

    def near_interface(self, points, reach):
        if self.interface is None or not len(self.interface):
            return np.zeros(len(points), dtype=bool)
        if "interface_tree" not in self.meta:
            self.meta["interface_tree"] = cKDTree(self.interface.midpoints)
        dist, _ = self.meta["interface_tree"].query(points, k=1)
        return dist <= reach

    def one_sided(self, points, normals, side):
        """F near the interface evaluated one cell toward the given side.

        side = +1 steps along the normals, -1 against them.
        """
        pts = np.asarray(points, dtype=float)
        values = self(pts)
        if not self.is_piecewise:
            return values
        h = self.grid.spacing
        close = self.near_interface(pts, 1.5 * h)
        if np.any(close):
            values[close] = self(pts[close] + side * h * normals[close])
        return values


def _spot_check(f, div_density, grid, seed):
    rng = np.random.default_rng(seed)
    lo = grid.lo + 0.1 * grid.extent
    hi = grid.hi - 0.1 * grid.extent
    pts = rng.uniform(lo, hi, size=(SPOT_CHECKS, grid.dim))
    fd = np.zeros(SPOT_CHECKS)
    for k in range(grid.dim):
        e = np.zeros(grid.dim)
        e[k] = FD_STEP
        fd += (f(pts + e)[:, k] - f(pts - e)[:, k]) / (2 * FD_STEP)
    declared = np.broadcast_to(np.asarray(div_density(pts), dtype=float), fd.shape)
    bad = np.abs(fd - declared) > FD_TOL * np.maximum(1.0, np.abs(declared))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DivergenceMismatch(
            f"declared divergence {declared[i]:.6g} but finite differences give {fd[i]:.6g} "
            f"at {pts[i].tolist()}")


def check_sup_bound(f, sup_bound, grid, seed=0):
    rng = np.random.default_rng(seed + 1)
    pts = rng.uniform(grid.lo, grid.hi, size=(SUP_LATTICE, grid.dim))
    norms = np.linalg.norm(f(pts), axis=-1)
    worst = int(np.argmax(norms))
    if norms[worst] > sup_bound + 1e-9:
        raise SupBoundExceeded(
            f"|F| = {norms[worst]:.6g} exceeds declared bound {sup_bound:.6g} at {pts[worst].tolist()}")


def make_analytic(f, div_density, sup_bound, grid, name="analytic", seed=0):
    """Smooth field with pure-AC divergence; the declared divergence is spot-checked."""
    _spot_check(f, div_density, grid, seed)
    check_sup_bound(f, sup_bound, grid, seed)
    centers = grid.centers()
    ac = np.broadcast_to(np.asarray(div_density(centers), dtype=float), grid.shape).copy()
    div = SignedMeasure(grid, ScalarGridField(grid, ac))
    logger.debug(f"analytic field {name!r} accepted")
    return DMField(evaluator=f, sup_bound=float(sup_bound), divergence=div,
                   structure="analytic", grid=grid, name=name)


def chen_frid_components(points):
    """(sin(1/c), sin(1/c)) with c = y1 - y2, and 0 on the line c = 0.

    Equal components: d/dy1 g(c) + d/dy2 g(c) = g'(c) - g'(c) = 0.
    """
    pts = np.asarray(points, dtype=float)
    c = pts[..., 0] - pts[..., 1]
    safe = np.where(c != 0, c, 1.0)
    g = np.where(c != 0, np.sin(1.0 / safe), 0.0)
    return np.stack([g, g], axis=-1)


def make_chen_frid(grid, seed=0):
    """Divergence-free field oscillating wildly near the line y1 = y2.

    The components are equal so F stays tangent to the line; F has no
    pointwise normal component on it, yet a weak normal trace exists.
    """
    if grid.dim != 2:
        raise ValueError("the oscillating example lives in 2D")
    return make_analytic(chen_frid_components, lambda y: 0.0, np.sqrt(2.0), grid,
                         name="chen_frid", seed=seed)


def make_piecewise(regions, grid, sup_bound, name="piecewise", interface_eps=None, seed=0):
    """Field given region by region; regions = [(shape, f, div_density), ...].

    A point belongs to the first region containing it. The jump part of the
    divergence sits on the boundary of every region but the last.
    """
    if len(regions) < 2:
        raise PartitionError("a piecewise field needs at least two regions")
    h = grid.spacing
    eps = interface_eps or 4 * h
    shell = DMField(evaluator=None, sup_bound=sup_bound, divergence=None, structure="piecewise",
                    grid=grid, name=name, regions=list(regions))

    centers = grid.centers()
    owner = shell.region_index(centers)
    if np.any(owner < 0):
        raise PartitionError(f"{int(np.sum(owner < 0))} cells belong to no region")

    def evaluator(points):
        pts = np.asarray(points, dtype=float)
        idx = shell.region_index(pts)
        out = np.zeros(pts.shape)
        for i, (_, f, _) in enumerate(regions):
            sel = idx == i
            if np.any(sel):
                out[sel] = f(pts[sel])
        return out

    check_sup_bound(evaluator, sup_bound, grid, seed)

    ac = np.zeros(grid.shape)
    for i, (_, _, div) in enumerate(regions):
        sel = owner == i
        if np.any(sel):
            ac[sel] = np.broadcast_to(np.asarray(div(centers[sel]), dtype=float), (int(sel.sum()),))

    meshes, densities = [], []
    kernel = MollifierKernel("smooth_bump", eps)
    for i, (_, f_in, _) in enumerate(regions[:-1]):
        chi = ScalarGridField(grid, (owner == i).astype(float))
        try:
            mesh = extract_level_set(mollify(chi, kernel), 0.5)
        except DegenerateLevel:
            continue
        mids, nu = mesh.midpoints, mesh.normals
        outside = shell.region_index(mids - h * nu)
        keep = outside > i
        mesh = mesh.subset(keep)
        mids, nu, outside = mids[keep], nu[keep], outside[keep]
        f_side_in = f_in(mids + h * nu)
        f_side_out = np.zeros_like(mids)
        for j in np.unique(outside):
            sel = outside == j
            f_side_out[sel] = regions[j][1](mids[sel] - h * nu[sel])
        meshes.append(mesh)
        densities.append(np.sum((f_side_in - f_side_out) * nu, axis=1))

    interface = SurfaceMesh.concatenate(meshes, dim=grid.dim)
    jump = np.concatenate(densities) if densities else np.zeros(0)
    div = SignedMeasure(grid, ScalarGridField(grid, ac), [(interface, jump)])
    shell.evaluator = evaluator
    shell.divergence = div
    shell.interface = interface
    logger.info(f"piecewise field {name!r}: interface {interface.total_area():.4f}, "
                f"jump mass {div.surface_total():+.6f}")
    return shell


def make_sampled(values, divergence=None, sup_bound=None, name="sampled"):
    """Field interpolated multilinearly from a VectorGridField."""
    grid = values.grid

    def evaluator(points):
        pts = np.asarray(points, dtype=float)
        flat = values.sample(pts.reshape(-1, grid.dim))
        return flat.reshape(pts.shape)

    if divergence is None:
        parts = [np.gradient(values.values[..., k], grid.spacing, axis=k) for k in range(grid.dim)]
        divergence = SignedMeasure(grid, ScalarGridField(grid, sum(parts)))
    bound = float(values.norm().max()) if sup_bound is None else float(sup_bound)
    return DMField(evaluator=evaluator, sup_bound=bound, divergence=divergence,
                   structure="sampled", grid=grid, name=name)


def sample_field(F, grid=None):
    grid = grid or F.grid
    return VectorGridField(grid, F(grid.centers()))


# --- Radial corpus fields ---

def radial_unit(grid, radius=1.0):
    """0 inside the ball of `radius`, y/|y| outside."""
    dim = grid.dim
    inner = Ball(np.zeros(dim), radius)

    def zero(p):
        return np.zeros(np.shape(p))

    def outward(p):
        r = np.linalg.norm(p, axis=-1, keepdims=True)
        return p / r

    def div_out(p):
        return (dim - 1) / np.linalg.norm(p, axis=-1)

    return make_piecewise([(inner, zero, lambda p: 0.0), (Complement(inner), outward, div_out)],
                          grid, sup_bound=1.0, name="radial_unit")


def radial_inv(grid, radius=0.25):
    """y/|y|^N outside a small ball, 0 inside; flux 2*pi (2D) through any circle."""
    dim = grid.dim
    inner = Ball(np.zeros(dim), radius)

    def zero(p):
        return np.zeros(np.shape(p))

    def source(p):
        r = np.linalg.norm(p, axis=-1, keepdims=True)
        return p / r ** dim

    return make_piecewise([(inner, zero, lambda p: 0.0), (Complement(inner), source, lambda p: 0.0)],
                          grid, sup_bound=radius ** (1 - dim), name="radial_inv")


# --- Product rule and extension ---

@dataclass
class BVWeight:
    field: ScalarGridField

    @classmethod
    def from_shape(cls, shape, grid, margin=0.0):
        """Indicator weight; the boundary must stay margin away from the grid edge."""
        return cls(rasterize(shape, grid, margin=margin))

    @classmethod
    def from_function(cls, g, grid):
        return cls(ScalarGridField(grid, g(grid.centers())))

    def mollified(self, epsilon, kind="smooth_bump"):
        grid = self.field.grid
        return ScalarGridField(grid, convolve(self.field.values, grid, MollifierKernel(kind, epsilon)))

    def mass_table(self, eps_schedule, kind="smooth_bump"):
        table = ConvergenceTable()
        for eps in eps_schedule:
            table.add(eps, np.nan, gradient_mass(self.mollified(eps, kind)))
        return table


def _weighted_divergence(g_k, F):
    """g_k * div F + F . grad g_k as a measure on the grid."""
    grid = F.grid
    mu = F.divergence
    grad = gradient(g_k).values
    ac = g_k.values * mu.ac.values + np.sum(F(grid.centers()) * grad, axis=-1)
    parts = [(m, g_k.sample(m.midpoints) * d) for m, d in mu.surface_parts if len(m)]
    atoms = [(p, float(g_k.sample(p[None])[0]) * w) for p, w in mu.atoms]
    return SignedMeasure(grid, ScalarGridField(grid, ac), parts, atoms)


def product_rule(g, F, eps_schedule, kind="smooth_bump"):
    """gF with divergence g_k div F + F . grad g_k at the finest epsilon."""
    grid = F.grid
    eps_schedule = list(eps_schedule)
    if min(eps_schedule) < 2 * grid.spacing:
        raise ResolutionError(f"epsilon {min(eps_schedule):g} < 2h")
    table = ConvergenceTable()
    finest = None
    for eps in eps_schedule:
        g_k = g.mollified(eps, kind)
        mu = _weighted_divergence(g_k, F)
        table.add(eps, np.nan, mu.tv())
        finest = mu

    g_bound = float(np.max(np.abs(g.field.values)))

    def evaluator(points):
        pts = np.asarray(points, dtype=float)
        gv = g.field.sample(pts.reshape(-1, grid.dim)).reshape(pts.shape[:-1])
        return gv[..., None] * F(pts)

    return DMField(evaluator=evaluator, sup_bound=g_bound * F.sup_bound, divergence=finest,
                   structure="sampled", grid=grid, name=f"g*{F.name}", table=table)


def extend_by_zero(F, U, schedule):
    """F on U, 0 outside; the new jump on the boundary of U is the interior trace of F."""
    from .traces import interior_trace

    grid = F.grid
    chi = rasterize(U, grid, margin=2 * max(schedule.eps_list))
    trace = interior_trace(F, U, schedule)
    inner = F.divergence.restrict(chi)
    div = SignedMeasure(grid, inner.ac, inner.surface_parts + [(trace.boundary_mesh, trace.density)],
                        inner.atoms)

    def evaluator(points):
        pts = np.asarray(points, dtype=float)
        return np.where(U.contains(pts)[..., None], F(pts), 0.0)

    return DMField(evaluator=evaluator, sup_bound=F.sup_bound, divergence=div, structure="piecewise",
                   grid=grid, name=f"{F.name}|U", regions=[(U, F, None), (Complement(U), lambda p: np.zeros(np.shape(p)), None)],
                   interface=trace.boundary_mesh)
