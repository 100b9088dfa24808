"""
Signed Radon measures on a grid: an absolutely continuous density, surface
parts carried by meshes, and exact atoms. Plus ConvergenceTable, the
(epsilon, t, value) ledger every limit process reports into.
"""
import logging

import numpy as np
import pandas as pd

from .errors import AtomOnBoundary
from .grid import ScalarGridField, as_mask, convolve

logger = logging.getLogger("divmeasure.measures")


def _in_mask(grid, mask, points):
    """Membership of points in a cell mask; points on a cell face count if
    either neighbour is in the mask."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not len(pts):
        return np.zeros(0, dtype=bool)
    inside = grid.inside(pts)
    frac = (pts - grid.lo) / grid.spacing
    idx = grid.index_of(pts)
    hit = mask[tuple(idx.T)]
    on_face = np.abs(frac - np.round(frac)) < 1e-12
    for axis in range(grid.dim):
        tie = on_face[:, axis] & ~hit
        if np.any(tie):
            alt = idx[tie].copy()
            alt[:, axis] = np.clip(np.round(frac[tie, axis]).astype(int) - 1, 0, grid.cells[axis] - 1)
            hit[tie] |= mask[tuple(alt.T)]
    return hit & inside


class SignedMeasure:
    """mu = ac * dx + sum(density * H^{N-1} on mesh) + sum(weight * delta_point)."""

    def __init__(self, grid, ac=None, surface_parts=(), atoms=()):
        self.grid = grid
        if ac is None:
            ac = ScalarGridField(grid, np.zeros(grid.shape))
        elif not isinstance(ac, ScalarGridField):
            ac = ScalarGridField(grid, ac)
        self.ac = ac
        parts = []
        for mesh, density in surface_parts:
            density = np.broadcast_to(np.asarray(density, dtype=float), mesh.areas.shape).copy()
            if not np.all(np.isfinite(density)):
                raise ValueError("surface densities must be finite")
            parts.append((mesh, density))
        self.surface_parts = parts
        self.atoms = [(np.asarray(p, dtype=float).reshape(grid.dim), float(w)) for p, w in atoms]

    @classmethod
    def zero(cls, grid):
        return cls(grid)

    @classmethod
    def lebesgue(cls, grid, density=1.0):
        return cls(grid, ScalarGridField(grid, np.full(grid.shape, float(density))))

    # --- structural pieces ---

    def ac_part(self):
        return SignedMeasure(self.grid, self.ac)

    def surface_part(self):
        return SignedMeasure(self.grid, surface_parts=self.surface_parts)

    def atom_part(self):
        return SignedMeasure(self.grid, atoms=self.atoms)

    def __add__(self, other):
        return SignedMeasure(self.grid, ScalarGridField(self.grid, self.ac.values + other.ac.values),
                             self.surface_parts + other.surface_parts, self.atoms + other.atoms)

    def scale(self, c):
        return SignedMeasure(self.grid, ScalarGridField(self.grid, c * self.ac.values),
                             [(m, c * d) for m, d in self.surface_parts],
                             [(p, c * w) for p, w in self.atoms])

    def __neg__(self):
        return self.scale(-1.0)

    def variation(self):
        """|mu| built part by part (exact when the parts have disjoint supports)."""
        return SignedMeasure(self.grid, ScalarGridField(self.grid, np.abs(self.ac.values)),
                             [(m, np.abs(d)) for m, d in self.surface_parts],
                             [(p, abs(w)) for p, w in self.atoms])

    def singular_part(self):
        return SignedMeasure(self.grid, surface_parts=self.surface_parts, atoms=self.atoms)

    def is_nonnegative(self):
        return (np.all(self.ac.values >= 0)
                and all(np.all(d >= 0) for _, d in self.surface_parts)
                and all(w >= 0 for _, w in self.atoms))

    def _mask(self, region):
        if region is None:
            return np.ones(self.grid.shape, dtype=bool)
        return as_mask(region)

    def restrict(self, region):
        mask = self._mask(region)
        ac = ScalarGridField(self.grid, np.where(mask, self.ac.values, 0.0))
        parts = []
        for mesh, d in self.surface_parts:
            keep = _in_mask(self.grid, mask, mesh.midpoints)
            parts.append((mesh.subset(keep), d[keep]))
        atoms = [(p, w) for p, w in self.atoms if _in_mask(self.grid, mask, p[None])[0]]
        return SignedMeasure(self.grid, ac, parts, atoms)

    # --- evaluation ---

    def _sums(self, region, absolute):
        mask = self._mask(region)
        f = np.abs if absolute else (lambda x: x)
        ac = float(np.sum(f(self.ac.values[mask])) * self.grid.cell_volume)
        surf = 0.0
        for mesh, d in self.surface_parts:
            keep = _in_mask(self.grid, mask, mesh.midpoints)
            surf += float(np.sum(f(d[keep]) * mesh.areas[keep]))
        atoms = 0.0
        for p, w in self.atoms:
            if _in_mask(self.grid, mask, p[None])[0]:
                atoms += abs(w) if absolute else w
        return ac, surf, atoms

    def tv(self, region=None):
        """||mu||(region); region defaults to the whole grid."""
        return float(sum(self._sums(region, absolute=True)))

    def eval(self, region=None):
        mask = self._mask(region)
        for p, w in self.atoms:
            if self._atom_on_boundary(mask, p):
                raise AtomOnBoundary(f"atom of weight {w:g} at {p.tolist()} sits on the region boundary")
        return float(sum(self._sums(mask, absolute=False)))

    def _atom_on_boundary(self, mask, point):
        idx = self.grid.index_of(point[None])[0]
        lo = np.maximum(idx - 1, 0)
        hi = np.minimum(idx + 2, self.grid.cells)
        block = mask[tuple(slice(a, b) for a, b in zip(lo, hi))]
        return bool(block.any() and not block.all())

    def integrate(self, phi):
        """Integral of a test function phi(points) against mu."""
        total = float(np.sum(phi(self.grid.centers()) * self.ac.values) * self.grid.cell_volume)
        for mesh, d in self.surface_parts:
            if len(mesh):
                total += float(np.sum(phi(mesh.midpoints) * d * mesh.areas))
        for p, w in self.atoms:
            total += float(np.asarray(phi(p[None])).reshape(-1)[0]) * w
        return total

    def surface_total(self):
        return float(sum(np.sum(d * m.areas) for m, d in self.surface_parts))

    def deposit(self):
        """Cellwise masses of every part (sum equals eval over the grid)."""
        grid = self.grid
        mass = self.ac.values * grid.cell_volume
        for mesh, d in self.surface_parts:
            if len(mesh):
                idx = grid.index_of(mesh.midpoints)
                np.add.at(mass, tuple(idx.T), d * mesh.areas)
        for p, w in self.atoms:
            mass[tuple(grid.index_of(p[None])[0])] += w
        return mass


def mollify_measure(mu, kernel):
    """Smooth density rho_eps * mu on the grid; mass is preserved exactly."""
    grid = mu.grid
    density = mu.deposit() / grid.cell_volume
    return ScalarGridField(grid, convolve(density, grid, kernel, pad="symmetric"))


def weak_star_cauchy(sequence, region):
    """eval of a measure sequence on one region and the consecutive gaps."""
    values = [m.eval(region) for m in sequence]
    gaps = [abs(b - a) for a, b in zip(values, values[1:])]
    return {
        "values": values,
        "gaps": gaps,
        "cauchy": bool(len(gaps) < 2 or gaps[-1] <= gaps[0]),
    }


def liminf_check(sequence, limit, region, slack=0.02):
    """Lower semicontinuity on open regions: mu(A) <= liminf mu_k(A)."""
    values = [m.eval(region) for m in sequence]
    tail = values[len(values) // 2:]
    liminf = min(tail)
    target = limit.eval(region)
    ok = target <= liminf + slack * max(abs(target), abs(liminf), 1e-12)
    return {"limit": target, "liminf": liminf, "values": values, "ok": bool(ok)}


class ConvergenceTable:
    """Rows of (epsilon, t, value), kept sorted by epsilon descending."""

    COLUMNS = ["epsilon", "t", "value"]

    def __init__(self, rows=(), direction=None, slack=0.0):
        self._rows = [tuple(float(x) for x in r) for r in rows]
        # expected trend as epsilon shrinks; None accepts either
        self.direction = direction
        self.slack = slack

    def add(self, epsilon, t, value):
        self._rows.append((float(epsilon), float(t), float(value)))

    @property
    def frame(self):
        df = pd.DataFrame(self._rows, columns=self.COLUMNS)
        return df.sort_values(["epsilon", "t"], ascending=[False, True], kind="mergesort").reset_index(drop=True)

    def __len__(self):
        return len(self._rows)

    def by_epsilon(self):
        """Mean value per epsilon, coarsest first."""
        df = self.frame
        return df.groupby("epsilon", sort=False)["value"].mean()

    def finest(self):
        return float(self.by_epsilon().iloc[-1])

    def coarsest(self):
        return float(self.by_epsilon().iloc[0])

    def epsilons(self):
        return [float(e) for e in self.by_epsilon().index]

    def is_monotone(self, direction="decreasing", slack=0.0):
        """Monotone in |value| order as epsilon shrinks, up to slack * max|value|."""
        v = self.by_epsilon().to_numpy()
        if len(v) < 2:
            return True
        tol = slack * np.max(np.abs(v))
        steps = np.diff(v)
        if direction == "increasing":
            return bool(np.all(steps >= -tol))
        return bool(np.all(steps <= tol))

    @property
    def monotone(self):
        if self.direction is not None:
            return self.is_monotone(self.direction, self.slack)
        return self.is_monotone("decreasing", self.slack) or self.is_monotone("increasing", self.slack)

    def cauchy_gaps(self):
        v = self.by_epsilon().to_numpy()
        return np.abs(np.diff(v))

    def decrease_ratio(self):
        """|coarsest| / |finest|; >= 2 means a halving along the schedule."""
        finest = abs(self.finest())
        if finest == 0:
            return float("inf")
        return abs(self.coarsest()) / finest

    def to_records(self):
        return self.frame.to_dict(orient="records")

    def to_csv(self, path):
        self.frame.to_csv(path, index=False, float_format="%.12g")
