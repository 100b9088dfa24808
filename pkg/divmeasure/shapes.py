"""
Constructive solid geometry for sets of finite perimeter.
A shape answers point-membership queries; rasterization lives in grid.py.
"""
from abc import ABC, abstractmethod

import numpy as np


class Shape(ABC):
    """Base class for CSG nodes. Points are arrays of shape (..., dim)."""

    dim = None

    @abstractmethod
    def contains(self, points):
        """Boolean array of shape points.shape[:-1]."""
        pass

    @abstractmethod
    def bounding_box(self):
        """(lo, hi) arrays; entries may be infinite."""
        pass

    def boundary_box(self):
        """Box containing the topological boundary (used for margin checks)."""
        return self.bounding_box()

    @abstractmethod
    def to_json(self):
        pass

    def __or__(self, other):
        return Union(self, other)

    def __and__(self, other):
        return Intersection(self, other)

    def __invert__(self):
        return Complement(self)

    def __sub__(self, other):
        return Intersection(self, Complement(other))


def _points(points, dim):
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != dim:
        raise ValueError(f"expected points with last axis {dim}, got {pts.shape}")
    return pts


class Ball(Shape):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = self.center.size
        if not self.radius > 0 or not np.isfinite(self.radius):
            raise ValueError("ball radius must be finite and positive")

    def contains(self, points):
        pts = _points(points, self.dim)
        return np.sum((pts - self.center) ** 2, axis=-1) <= self.radius ** 2

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def to_json(self):
        return ["ball", self.center.tolist(), self.radius]


class AxisBox(Shape):
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = self.lo.size
        if not np.all(self.hi > self.lo):
            raise ValueError("box needs hi > lo on every axis")

    def contains(self, points):
        pts = _points(points, self.dim)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def to_json(self):
        return ["box", self.lo.tolist(), self.hi.tolist()]


class HalfSpace(Shape):
    """{y : normal . y <= offset}; normal is the outward direction."""

    def __init__(self, normal, offset):
        n = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("halfspace normal must be nonzero")
        self.normal = n / norm
        self.offset = float(offset) / norm
        self.dim = n.size

    def contains(self, points):
        pts = _points(points, self.dim)
        return pts @ self.normal <= self.offset

    def bounding_box(self):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def to_json(self):
        return ["halfspace", self.normal.tolist(), self.offset]


class RotatedBox(Shape):
    """Box with half side lengths `half`, rotated about its center.
    In 2D `rotation` is an angle in radians; in 3D a 3x3 rotation matrix."""

    def __init__(self, center, half, rotation):
        self.center = np.asarray(center, dtype=float)
        self.half = np.asarray(half, dtype=float)
        self.dim = self.center.size
        if np.isscalar(rotation):
            if self.dim != 2:
                raise ValueError("scalar rotation angles are only defined in 2D")
            c, s = np.cos(rotation), np.sin(rotation)
            self.rotation = np.array([[c, -s], [s, c]])
            self.angle = float(rotation)
        else:
            self.rotation = np.asarray(rotation, dtype=float)
            self.angle = None
        if not np.all(self.half > 0):
            raise ValueError("rotated box needs positive half sizes")

    def contains(self, points):
        pts = _points(points, self.dim)
        local = (pts - self.center) @ self.rotation
        return np.all(np.abs(local) <= self.half, axis=-1)

    def bounding_box(self):
        reach = np.abs(self.rotation) @ self.half
        return self.center - reach, self.center + reach

    def to_json(self):
        rot = self.angle if self.angle is not None else self.rotation.tolist()
        return ["rotated_box", self.center.tolist(), self.half.tolist(), rot]


class Union(Shape):
    def __init__(self, *children):
        if not children:
            raise ValueError("union needs at least one child; use Empty for the empty set")
        self.children = children
        self.dim = children[0].dim

    def contains(self, points):
        out = self.children[0].contains(points)
        for child in self.children[1:]:
            out = out | child.contains(points)
        return out

    def bounding_box(self):
        boxes = [c.bounding_box() for c in self.children]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def boundary_box(self):
        boxes = [c.boundary_box() for c in self.children]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def to_json(self):
        return ["union"] + [c.to_json() for c in self.children]


class Intersection(Shape):
    def __init__(self, *children):
        if not children:
            raise ValueError("intersection needs at least one child")
        self.children = children
        self.dim = children[0].dim

    def contains(self, points):
        out = self.children[0].contains(points)
        for child in self.children[1:]:
            out = out & child.contains(points)
        return out

    def bounding_box(self):
        boxes = [c.bounding_box() for c in self.children]
        return np.max([b[0] for b in boxes], axis=0), np.min([b[1] for b in boxes], axis=0)

    def boundary_box(self):
        lo, hi = self.bounding_box()
        if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
            return lo, hi
        boxes = [c.boundary_box() for c in self.children]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def to_json(self):
        return ["intersection"] + [c.to_json() for c in self.children]


class Complement(Shape):
    def __init__(self, child):
        self.child = child
        self.dim = child.dim

    def contains(self, points):
        return ~self.child.contains(points)

    def bounding_box(self):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def boundary_box(self):
        return self.child.boundary_box()

    def to_json(self):
        return ["complement", self.child.to_json()]


class Empty(Shape):
    def __init__(self, dim):
        self.dim = dim

    def contains(self, points):
        pts = _points(points, self.dim)
        return np.zeros(pts.shape[:-1], dtype=bool)

    def bounding_box(self):
        return np.full(self.dim, np.inf), np.full(self.dim, -np.inf)

    def to_json(self):
        return ["empty", self.dim]


def Difference(a, b):
    return Intersection(a, Complement(b))


def shape_from_json(expr):
    """Builds a shape from a nested list such as ["ball", [0, 0], 1]."""
    if not isinstance(expr, (list, tuple)) or not expr:
        raise ValueError(f"bad shape expression: {expr!r}")
    op, args = expr[0], list(expr[1:])
    if op == "ball":
        return Ball(*args)
    if op == "box":
        return AxisBox(*args)
    if op == "halfspace":
        return HalfSpace(*args)
    if op == "rotated_box":
        return RotatedBox(*args)
    if op == "empty":
        return Empty(int(args[0]))
    if op == "complement":
        return Complement(shape_from_json(args[0]))
    if op == "difference":
        return Difference(shape_from_json(args[0]), shape_from_json(args[1]))
    if op == "union":
        return Union(*[shape_from_json(a) for a in args])
    if op == "intersection":
        return Intersection(*[shape_from_json(a) for a in args])
    raise ValueError(f"unknown shape operator {op!r}")
