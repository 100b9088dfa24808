"""
Normal traces of divergence-measure fields on the reduced boundary of a set.

The set E is approximated from inside and outside by super-level sets
A = {u > t} of its mollified indicator u = chi_E * rho_eps. The flux of F
through each level mesh is pushed onto a frozen mesh of the reduced
boundary (the 1/2-level at the finest epsilon) and averaged over a band of
levels; the finest-epsilon average is the reported trace density.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import AtomRejected, FatnessViolated, InclusionFailed, ResolutionError
from .geometry import ball_lattice, boundary_points, extract_level_set, select_levels, symdiff_measure
from .grid import MollifierKernel, mollify, rasterize
from .measures import ConvergenceTable, SignedMeasure

logger = logging.getLogger("divmeasure.traces")

DELTA_T = 0.05
NEIGHBOURS = 4
CAP = 3.0  # projection distance cap, in units of epsilon
E1_LEVEL = 0.55
E_LEVEL = 0.45
ALIGN_DEG = 2.5
ALIGNED_FRACTION = 0.85


@dataclass
class TraceSchedule:
    eps_list: list
    levels_per_band: int = 8
    delta_t: float = DELTA_T
    kernel: str = "smooth_bump"

    def __post_init__(self):
        self.eps_list = [float(e) for e in self.eps_list]
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        if self.levels_per_band < 4:
            raise ValueError("levels_per_band must be >= 4")

    @classmethod
    def from_section(cls, section):
        return cls(eps_list=list(section.eps), levels_per_band=section.levels_per_band,
                   delta_t=section.delta_t, kernel=section.kernel)

    @property
    def finest(self):
        return self.eps_list[-1]

    @property
    def interior_band(self):
        return (0.5 + self.delta_t, 1 - self.delta_t)

    @property
    def exterior_band(self):
        return (self.delta_t, 0.5 - self.delta_t)

    def band(self, side):
        return self.interior_band if side == "interior" else self.exterior_band

    def validate(self, grid):
        if self.finest < 2 * grid.spacing:
            raise ResolutionError(f"epsilon {self.finest:g} < 2h = {2 * grid.spacing:g}")

    def to_dict(self):
        return {"eps": self.eps_list, "levels_per_band": self.levels_per_band,
                "interior_band": list(self.interior_band), "exterior_band": list(self.exterior_band),
                "kernel": self.kernel}


@dataclass
class FatnessConfig:
    c0: float = 0.4
    r0: float = 0.25

    def __post_init__(self):
        if not 0 < self.c0 < 1:
            raise ValueError("c0 must lie in (0, 1)")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")


@dataclass
class TraceResult:
    side: str
    boundary_mesh: object
    density: np.ndarray
    total: float
    table: ConvergenceTable
    sup_density: float
    unassigned: dict  # epsilon -> flux of level facets beyond the projection cap
    mu_value: float
    residual: float
    relative_residual: float
    densities: dict = field(default_factory=dict)
    alignment: np.ndarray = None

    def measure(self, grid):
        return SignedMeasure(grid, surface_parts=[(self.boundary_mesh, self.density)])

    def to_dict(self):
        return {
            "side": self.side,
            "total": self.total,
            "sup_density": self.sup_density,
            "unassigned": {f"{eps:g}": v for eps, v in self.unassigned.items()},
            "mu": self.mu_value,
            "residual": self.residual,
            "relative_residual": self.relative_residual,
            "perimeter": self.boundary_mesh.total_area(),
        }


class ApproximationFamily:
    """Mollified indicators of one set along a schedule, computed once."""

    def __init__(self, shape, grid, eps_list, kind="smooth_bump"):
        self.shape = shape
        self.grid = grid
        self.eps_list = sorted((float(e) for e in eps_list), reverse=True)
        self.kind = kind
        self.chi = rasterize(shape, grid, margin=2 * max(self.eps_list))
        self._u = {}
        self._meshes = {}
        self._boundary = None

    @property
    def finest(self):
        return self.eps_list[-1]

    def u(self, eps):
        if eps not in self._u:
            self._u[eps] = mollify(self.chi, MollifierKernel(self.kind, eps))
        return self._u[eps]

    def level_mesh(self, eps, t):
        key = (eps, t)
        if key not in self._meshes:
            self._meshes[key] = extract_level_set(self.u(eps), t)
        return self._meshes[key]

    def region(self, eps, t):
        return self.u(eps).values > t

    @property
    def boundary_mesh(self):
        """Frozen discrete reduced boundary."""
        if self._boundary is None:
            self._boundary = extract_level_set(self.u(self.finest), 0.5)
        return self._boundary

    @property
    def e1_proxy(self):
        return self.region(self.finest, E1_LEVEL)

    @property
    def e_proxy(self):
        return self.region(self.finest, E_LEVEL)


def _family(F_or_grid, E, schedule, family, kind=None):
    if family is not None:
        return family
    grid = getattr(F_or_grid, "grid", F_or_grid)
    schedule.validate(grid)
    return ApproximationFamily(E, grid, schedule.eps_list, kind or schedule.kernel)


def _level_density(F, mesh, side):
    step = 1 if side == "interior" else -1
    values = F.one_sided(mesh.midpoints, mesh.normals, step)
    return np.sum(values * mesh.normals, axis=1)


def sigma_kt(F, E, eps, t, kind="smooth_bump", family=None):
    """Surface measure on the boundary of A = {u > t} with density F . nu."""
    fam = family or ApproximationFamily(E, F.grid, [eps], kind)
    mesh = fam.level_mesh(eps, t)
    side = "interior" if t > 0.5 else "exterior"
    return SignedMeasure(F.grid, surface_parts=[(mesh, _level_density(F, mesh, side))])


def _project(boundary, tree_b, mesh, density, eps):
    """Area-weighted mean density of the nearest level facets per boundary facet.

    Returns (densities, cosine of the mean level normal against the boundary
    normal, flux of level facets beyond the cap).
    """
    n_b = len(boundary)
    k = min(NEIGHBOURS, len(mesh))
    tree = cKDTree(mesh.midpoints)
    dist, idx = tree.query(boundary.midpoints, k=k, distance_upper_bound=CAP * eps)
    dist = dist.reshape(n_b, k)
    idx = idx.reshape(n_b, k)
    found = np.isfinite(dist)
    safe = np.where(found, idx, 0)
    w = np.where(found, mesh.areas[safe], 0.0)
    wsum = w.sum(axis=1)
    has = wsum > 0
    out = np.zeros(n_b)
    out[has] = np.sum(w * density[safe], axis=1)[has] / wsum[has]
    nbar = np.sum(w[..., None] * mesh.normals[safe], axis=1)
    norm = np.linalg.norm(nbar, axis=1)
    cos = np.zeros(n_b)
    cos[has] = np.sum(nbar[has] * boundary.normals[has], axis=1) / np.maximum(norm[has], 1e-300)

    back, _ = tree_b.query(mesh.midpoints, k=1)
    far = back > CAP * eps
    lost = float(np.sum(density[far] * mesh.areas[far]))
    return out, cos, lost


def _trace(F, E, schedule, side, family=None):
    fam = _family(F, E, schedule, family)
    boundary = fam.boundary_mesh
    tree_b = cKDTree(boundary.midpoints)
    band = schedule.band(side)
    table = ConvergenceTable()
    densities, alignment, unassigned = {}, None, {}

    for eps in fam.eps_list:
        levels = select_levels(fam.u(eps), band, schedule.levels_per_band)
        acc = np.zeros(len(boundary))
        worst = np.ones(len(boundary))
        lost = []
        for t in levels:
            mesh = fam.level_mesh(eps, t)
            d = _level_density(F, mesh, side)
            table.add(eps, t, float(np.sum(d * mesh.areas)))
            proj, cos, gone = _project(boundary, tree_b, mesh, d, eps)
            acc += proj
            worst = np.minimum(worst, cos)
            lost.append(gone)
        densities[eps] = acc / len(levels)
        alignment = worst
        unassigned[eps] = float(np.mean(lost))
        if abs(unassigned[eps]) > 1e-9:
            logger.warning(f"⚠️ {side} trace at eps={eps:g}: unassigned flux {unassigned[eps]:+.3e}")

    density = densities[fam.finest]
    total = float(np.sum(density * boundary.areas))
    sup_density = float(np.max(np.abs(density))) if len(density) else 0.0
    if sup_density > 1.05 * F.sup_bound:
        logger.warning(f"⚠️ {side} trace density {sup_density:.4f} exceeds 1.05 x sup bound {F.sup_bound:.4f}")

    region = fam.e1_proxy if side == "interior" else fam.e_proxy
    mu_value = F.divergence.eval(region)
    residual = abs(mu_value + total)
    scale = F.sup_bound * boundary.total_area()
    rel = residual / scale if scale > 0 else residual
    logger.info(f"{side} trace of {F.name}: total {total:+.6f}, mu {mu_value:+.6f}, "
                f"residual {residual:.3e}")
    return TraceResult(side=side, boundary_mesh=boundary, density=density, total=total, table=table,
                       sup_density=sup_density, unassigned=unassigned, mu_value=mu_value,
                       residual=residual, relative_residual=rel, densities=densities,
                       alignment=alignment)


def interior_trace(F, E, schedule, family=None):
    """Interior normal trace; mu(E^1) = -total."""
    return _trace(F, E, schedule, "interior", family)


def exterior_trace(F, E, schedule, family=None):
    """Exterior normal trace; mu(E) = -total."""
    return _trace(F, E, schedule, "exterior", family)


def one_dimensional_traces(F, E, schedule):
    """One-sided limits of a BV function at the ends of an interval E = [a, b]."""
    if F.grid.dim != 1:
        raise ValueError("one_dimensional_traces expects a 1D field")
    fam = _family(F, E, schedule, None)
    inner = interior_trace(F, E, schedule, fam)
    outer = exterior_trace(F, E, schedule, fam)
    mesh = inner.boundary_mesh
    # density = f * nu, nu = +1 at a and -1 at b
    nu = mesh.normals[:, 0]
    ends = mesh.midpoints[:, 0]
    left = int(np.argmin(ends))
    right = int(np.argmax(ends))
    return {
        "a": float(ends[left]),
        "b": float(ends[right]),
        "f_a_plus": float(inner.density[left] * nu[left]),
        "f_b_minus": float(inner.density[right] * nu[right]),
        "f_a_minus": float(outer.density[left] * nu[left]),
        "f_b_plus": float(outer.density[right] * nu[right]),
        "mu_E1": -inner.total,
        "mu_E": -outer.total,
        "interior": inner,
        "exterior": outer,
    }


def _fd_gradient(phi, points, step=1e-6):
    grads = []
    for k in range(points.shape[-1]):
        e = np.zeros(points.shape[-1])
        e[k] = step
        grads.append((phi(points + e) - phi(points - e)) / (2 * step))
    return np.stack(grads, axis=-1)


def gauss_green_check(F, E, schedule, phi=None, grad_phi=None, tol=0.02, family=None):
    """Residual of int_{E1} phi dmu + int_{E1} F . grad phi + int phi (F_i . nu)."""
    fam = _family(F, E, schedule, family)
    trace = interior_trace(F, E, schedule, fam)
    grid = F.grid
    boundary = trace.boundary_mesh
    e1 = fam.e1_proxy

    if phi is None:
        bulk = F.divergence.eval(e1)
        flux_term = 0.0
        phi_b = np.ones(len(boundary))
    else:
        centers = grid.centers()
        bulk = F.divergence.restrict(e1).integrate(phi)
        g = grad_phi(centers) if grad_phi is not None else _fd_gradient(phi, centers)
        flux_term = float(np.sum(np.sum(F(centers) * g, axis=-1)[e1]) * grid.cell_volume)
        phi_b = phi(boundary.midpoints)

    scale = F.sup_bound * boundary.total_area()
    table = ConvergenceTable()
    for eps in fam.eps_list:
        surface = float(np.sum(phi_b * trace.densities[eps] * boundary.areas))
        table.add(eps, np.nan, abs(bulk + flux_term + surface) / scale)
    residual = table.finest()
    surface = float(np.sum(phi_b * trace.density * boundary.areas))
    return {
        "bulk": bulk,
        "flux_term": flux_term,
        "surface": surface,
        "residual": residual,
        "table": table,
        "trace": trace,
        "pass": bool(residual < tol),
    }


def boundary_collar(grid, mesh):
    mask = np.zeros(grid.shape, dtype=bool)
    if len(mesh):
        mask[tuple(grid.index_of(mesh.midpoints).T)] = True
    return ndimage.binary_dilation(mask, structure=np.ones((3,) * grid.dim, dtype=bool))


def jump_check(F, E, schedule, tol=0.02, family=None):
    """mu on the interface collar against the integrated trace jump."""
    fam = _family(F, E, schedule, family)
    inner = interior_trace(F, E, schedule, fam)
    outer = exterior_trace(F, E, schedule, fam)
    boundary = inner.boundary_mesh
    jump = float(np.sum((inner.density - outer.density) * boundary.areas))

    carrier = F.interface if F.interface is not None and len(F.interface) else boundary
    collar = boundary_collar(F.grid, carrier)
    mu_collar = F.divergence.eval(collar)
    tv_collar = F.divergence.tv(collar)
    scale = F.sup_bound * boundary.total_area()
    has_jump = F.is_piecewise and abs(F.divergence.surface_total()) > tol * scale
    if has_jump:
        residual = abs(mu_collar - jump) / tv_collar if tv_collar > 0 else float("inf")
        ok = residual < tol
    else:
        residual = abs(jump) / scale if scale > 0 else abs(jump)
        ok = residual < tol
    return {
        "jump_integral": jump,
        "mu_collar": mu_collar,
        "tv_collar": tv_collar,
        "residual": residual,
        "interior": inner,
        "exterior": outer,
        "pass": bool(ok),
    }


def classical_consistency(F, E, schedule, family=None):
    """Traces of a continuous field against the classical product F . nu."""
    fam = _family(F, E, schedule, family)
    inner = interior_trace(F, E, schedule, fam)
    outer = exterior_trace(F, E, schedule, fam)
    boundary = inner.boundary_mesh
    classical = np.sum(F(boundary.midpoints) * boundary.normals, axis=1)

    cos_lim = np.cos(np.deg2rad(ALIGN_DEG))
    aligned = (inner.alignment >= cos_lim) & (outer.alignment >= cos_lim)
    fraction = float(np.mean(aligned)) if len(aligned) else 0.0
    tol = 0.05 * F.sup_bound
    dev_i = np.abs(inner.density - classical)[aligned]
    dev_ie = np.abs(inner.density - outer.density)[aligned]
    max_dev = float(dev_i.max()) if len(dev_i) else 0.0
    max_side = float(dev_ie.max()) if len(dev_ie) else 0.0
    totals_gap = abs(inner.total - outer.total)
    totals_ok = totals_gap <= 0.02 * F.sup_bound * boundary.total_area()
    ok = fraction >= ALIGNED_FRACTION and max_dev <= tol and max_side <= tol and totals_ok
    if fraction < ALIGNED_FRACTION:
        logger.warning(f"⚠️ only {fraction:.0%} of boundary facets are aligned with the level sets")
    return {
        "max_deviation": max_dev,
        "max_side_gap": max_side,
        "aligned_fraction": fraction,
        "total_interior": inner.total,
        "total_exterior": outer.total,
        "tolerance": tol,
        "interior": inner,
        "exterior": outer,
        "pass": bool(ok),
    }


def _exterior_density(shape, point, r, lattice):
    return 1.0 - float(np.mean(shape.contains(point + r * lattice)))


def one_sided_inclusion(E, fatness, schedule, grid, n_points=32):
    """Uniform fatness of the complement and cellwise inclusion A = {u > t} in E.

    Uses the plateau kernel. Returns the smallest level at which the
    inclusion holds at the two finest epsilons.
    """
    dim = grid.dim
    lattice = ball_lattice(dim)
    radii = []
    r = fatness.r0
    while r >= 2 * grid.spacing:
        radii.append(r)
        r /= 2
    points = boundary_points(E, grid, n_points)
    worst = (np.inf, None, None)
    for p in points:
        for r in radii:
            dens = _exterior_density(E, p, r, lattice)
            if dens < worst[0]:
                worst = (dens, p, r)
    if worst[0] < fatness.c0:
        witness = {"point": worst[1].tolist(), "radius": worst[2], "density": worst[0]}
        raise FatnessViolated(
            f"exterior density {worst[0]:.4f} < c0 = {fatness.c0} at {witness['point']} (r={worst[2]:g})",
            witness=witness)

    c_tilde = fatness.c0 * MollifierKernel.plateau_radius(dim) ** dim
    fam = ApproximationFamily(E, grid, schedule.eps_list, "plateau")
    inside = fam.chi.values > 0.5
    finest_two = fam.eps_list[-2:]
    levels = 1 - c_tilde + c_tilde * np.arange(1, 20) / 20
    by_level = {}
    passing = None
    for t in levels:
        ok = all(not np.any(fam.region(eps, t) & ~inside) for eps in finest_two)
        by_level[float(t)] = ok
        if ok and passing is None:
            passing = float(t)
    if passing is None:
        raise InclusionFailed(f"A_t escapes E at every level above {1 - c_tilde:.4f}")
    logger.info(f"✅ inclusion holds from t={passing:.4f} (c~0 = {c_tilde:.4f})")
    return {
        "min_exterior_density": worst[0],
        "c_tilde": c_tilde,
        "threshold": 1 - c_tilde,
        "t_pass": passing,
        "by_level": by_level,
        "radii": radii,
        "pass": True,
    }


def convergence_diagnostics(E, mu, schedule, grid, F=None, levels=None, family=None):
    """Tables (i) ||mu||(A_t sym-diff E1), (ii) area of level meshes outside E,
    (iii) ||sigma_t|| outside E (needs F). Each should halve along the schedule."""
    if _has_atoms(mu, grid):
        raise AtomRejected("approximation diagnostics reject measures with atoms in dim >= 2")
    fam = _family(grid, E, schedule, family)
    e1 = fam.e1_proxy
    per = fam.boundary_mesh.total_area()
    sym, area, flux = ConvergenceTable(), ConvergenceTable(), ConvergenceTable()
    for eps in fam.eps_list:
        ts = levels if levels is not None else select_levels(fam.u(eps), schedule.interior_band,
                                                             schedule.levels_per_band)
        for t in ts:
            sym.add(eps, t, symdiff_measure(mu, fam.region(eps, t), e1))
            mesh = fam.level_mesh(eps, t)
            outside = ~E.contains(mesh.midpoints)
            area.add(eps, t, float(np.sum(mesh.areas[outside])))
            if F is not None:
                d = _level_density(F, mesh, "interior")
                flux.add(eps, t, float(np.sum(np.abs(d[outside]) * mesh.areas[outside])))

    def halves(table, floor):
        if not len(table):
            return True
        return table.finest() <= table.coarsest() / 2 or table.finest() <= floor

    scale = max(mu.tv(), 1e-12)
    report = {
        "symdiff": sym,
        "outside_area": area,
        "outside_flux": flux if F is not None else None,
        "symdiff_pass": halves(sym, 1e-6 * scale),
        "outside_area_pass": halves(area, 1e-3 * per),
        "outside_flux_pass": halves(flux, 1e-3 * per * (F.sup_bound if F is not None else 1.0)),
    }
    report["pass"] = bool(report["symdiff_pass"] and report["outside_area_pass"]
                          and report["outside_flux_pass"])
    return report


def _has_atoms(mu, grid):
    return grid.dim >= 2 and any(w != 0 for _, w in mu.atoms)
