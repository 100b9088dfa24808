"""
Uniform grids, sampled fields, rasterization and mollification.
Arrays are indexed 'ij' (axis k of the array is coordinate k); cell i has
its center at origin + (i + 0.5) * spacing.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .errors import BoundsError, ResolutionError

logger = logging.getLogger("divmeasure.grid")


@dataclass(frozen=True)
class GridSpec:
    dim: int
    origin: tuple
    spacing: float
    cells: tuple

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if len(self.origin) != self.dim or len(self.cells) != self.dim:
            raise ValueError("origin and cells must have one entry per axis")
        if min(self.cells) < 4:
            raise ValueError("need at least 4 cells per axis")

    @classmethod
    def from_bounds(cls, lo, hi, spacing):
        lo = [float(v) for v in lo]
        cells = tuple(int(round((b - a) / spacing)) for a, b in zip(lo, hi))
        return cls(dim=len(lo), origin=tuple(lo), spacing=float(spacing), cells=cells)

    @property
    def lo(self):
        return np.asarray(self.origin, dtype=float)

    @property
    def hi(self):
        return self.lo + self.spacing * np.asarray(self.cells)

    @property
    def extent(self):
        return self.spacing * np.asarray(self.cells, dtype=float)

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    @property
    def shape(self):
        return tuple(self.cells)

    def axes(self):
        return [self.origin[k] + (np.arange(n) + 0.5) * self.spacing for k, n in enumerate(self.cells)]

    def centers(self):
        """Cell centers, array of shape cells + (dim,)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def index_of(self, points):
        """Integer cell index of each point, clipped to the grid."""
        pts = np.asarray(points, dtype=float)
        idx = np.floor((pts - self.lo) / self.spacing).astype(int)
        return np.clip(idx, 0, np.asarray(self.cells) - 1)

    def inside(self, points):
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)

    def to_dict(self):
        return {"dim": self.dim, "origin": list(self.origin), "spacing": self.spacing,
                "cells": list(self.cells)}


class ScalarGridField:
    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid field values must be finite")
        self.grid = grid
        self.values = values

    def total(self):
        return float(self.values.sum() * self.grid.cell_volume)

    def mask(self, threshold=0.5):
        return self.values > threshold

    def sample(self, points, order=1):
        """Interpolated values at arbitrary points (linear by default)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        coords = ((pts - self.grid.lo) / self.grid.spacing - 0.5).T
        return ndimage.map_coordinates(self.values, coords, order=order, mode="nearest")


class VectorGridField:
    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape + (grid.dim,):
            raise ValueError(f"vector values shape {values.shape} does not match grid")
        self.grid = grid
        self.values = values

    def norm(self):
        return np.linalg.norm(self.values, axis=-1)

    def sample(self, points, order=1):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        coords = ((pts - self.grid.lo) / self.grid.spacing - 0.5).T
        comps = [ndimage.map_coordinates(self.values[..., k], coords, order=order, mode="nearest")
                 for k in range(self.grid.dim)]
        return np.stack(comps, axis=-1)


def as_mask(region):
    """Boolean cell mask from a ScalarGridField or an array."""
    if isinstance(region, ScalarGridField):
        return region.values > 0.5
    return np.asarray(region, dtype=bool)


# --- Kernels ---

def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


class MollifierKernel:
    KINDS = ("smooth_bump", "plateau")

    def __init__(self, kind, epsilon):
        if kind not in self.KINDS:
            raise ValueError(f"unknown kernel kind {kind!r}")
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        self.kind = kind
        self.epsilon = float(epsilon)

    @staticmethod
    def plateau_radius(dim):
        """Plateau radius as a fraction of epsilon; 1D cannot carry 1/2."""
        return 0.5 if dim >= 2 else 0.4

    def profile(self, s, dim=2):
        """Unnormalized radial profile at s = |y| / epsilon."""
        s = np.asarray(s, dtype=float)
        if self.kind == "smooth_bump":
            inside = s < 1
            out = np.zeros_like(s)
            out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
            return out
        p = self.plateau_radius(dim)
        return _smooth_step((1.0 - s) / (1.0 - p))

    def stencil(self, spacing, dim):
        """Sampled kernel normalized to unit discrete sum."""
        n = math.ceil(self.epsilon / spacing)
        offsets = np.arange(-n, n + 1) * spacing
        mesh = np.meshgrid(*([offsets] * dim), indexing="ij")
        r = np.sqrt(sum(m ** 2 for m in mesh)) / self.epsilon
        weights = self.profile(r, dim)
        total = weights.sum()
        if total <= 0:
            raise ResolutionError(f"kernel with epsilon={self.epsilon} is not resolved by h={spacing}")
        return weights / total

    def __repr__(self):
        return f"MollifierKernel({self.kind!r}, {self.epsilon:g})"


# --- Operations ---

def rasterize(shape, grid, margin=0.0):
    """Exact 0/1 indicator sampled at cell centers."""
    if shape.dim != grid.dim:
        raise ValueError(f"shape dim {shape.dim} does not match grid dim {grid.dim}")
    lo, hi = shape.boundary_box()
    if np.all(lo <= hi):
        if np.any(lo - margin <= grid.lo) or np.any(hi + margin >= grid.hi):
            raise BoundsError(
                f"shape boundary box {lo.tolist()}..{hi.tolist()} is not inside the grid "
                f"{grid.lo.tolist()}..{grid.hi.tolist()} with margin {margin:g}"
            )
    values = shape.contains(grid.centers()).astype(float)
    return ScalarGridField(grid, values)


def convolve(values, grid, kernel, pad="edge"):
    """Discrete convolution with the normalized stencil, same output shape.

    pad: "edge" (indicators, complements), "symmetric" (mass-exact for
    deposited measures) or "constant" (zero outside the grid).
    """
    if pad not in ("edge", "symmetric", "constant"):
        raise ValueError(f"unknown padding {pad!r}")
    stencil = kernel.stencil(grid.spacing, grid.dim)
    n = stencil.shape[0] // 2
    padded = np.pad(values, n, mode=pad)
    return signal.fftconvolve(padded, stencil, mode="valid")


def mollify(chi, kernel):
    """u = chi * rho_eps, clipped to [0, 1]."""
    grid = chi.grid
    if kernel.epsilon < 2 * grid.spacing:
        raise ResolutionError(f"epsilon {kernel.epsilon:g} < 2h = {2 * grid.spacing:g}")
    out = convolve(chi.values, grid, kernel)
    logger.debug(f"mollified {grid.shape} grid with {kernel!r}")
    return ScalarGridField(grid, np.clip(out, 0.0, 1.0))


def gradient(u):
    """Centered differences, one-sided at the grid edges."""
    grid = u.grid
    if min(grid.cells) < 3:
        raise ValueError("gradient needs at least 3 cells per axis")
    parts = np.gradient(u.values, grid.spacing)
    if grid.dim == 1:
        parts = [parts]
    return VectorGridField(grid, np.stack(parts, axis=-1))


def gradient_mass(u):
    """Sum of |grad u| * h^N."""
    return float(gradient(u).norm().sum() * u.grid.cell_volume)
