"""
Named shapes and fields used by experiment configs and the test suite.
"""
import json
import logging

import numpy as np

from .errors import ConfigError
from .fields import make_analytic, make_chen_frid, make_piecewise, make_sampled, radial_inv, radial_unit
from .shapes import AxisBox, Ball, Difference, HalfSpace, Intersection, RotatedBox, Union, shape_from_json

logger = logging.getLogger("divmeasure.corpus")

SLIT_SPACING = 1 / 256
WEDGE_HALF_ANGLE = np.radians(3.0)


def _notched_disk():
    a = np.tan(WEDGE_HALF_ANGLE)
    # {|y2| <= a (y1 - 0.3)}
    wedge = Intersection(HalfSpace([-a, 1.0], -0.3 * a), HalfSpace([-a, -1.0], -0.3 * a))
    return Difference(Ball([0.0, 0.0], 1.0), wedge)


def _slit_disk(spacing=SLIT_SPACING):
    slit = AxisBox([0.0, -spacing], [1.5, spacing])
    return Difference(Ball([0.0, 0.0], 1.0), slit)


SHAPES = {
    "disk": lambda: Ball([0.0, 0.0], 1.0),
    "square": lambda: AxisBox([0.0, 0.0], [1.0, 1.0]),
    "annulus": lambda: Difference(Ball([0.0, 0.0], 1.0), Ball([0.0, 0.0], 0.5)),
    # one edge lies on the line y1 = y2
    "rotated_square": lambda: RotatedBox([-0.5 / np.sqrt(2), 0.5 / np.sqrt(2)], [0.5, 0.5], np.pi / 4),
    "two_disks": lambda: Union(Ball([-0.75, 0.0], 0.5), Ball([0.75, 0.0], 0.5)),
    # externally tangent disks: the complement has two cusps at the origin
    "cusp": lambda: Union(Ball([-0.5, 0.0], 0.5), Ball([0.5, 0.0], 0.5)),
    "notched_disk": _notched_disk,
    "slit_disk": _slit_disk,
    "sphere": lambda: Ball([0.0, 0.0, 0.0], 1.0),
    "interval": lambda: AxisBox([0.0], [1.0]),
}

FIELDS = ("linear", "rotation", "constant", "chen_frid", "radial_unit", "radial_inv", "bv_steps")


def build_shape(name):
    """Corpus name or JSON CSG expression -> Shape."""
    text = str(name).strip()
    if text.startswith("["):
        try:
            return shape_from_json(json.loads(text))
        except (ValueError, TypeError, KeyError) as e:
            raise ConfigError(f"bad shape expression: {e}", field="name") from e
    if text not in SHAPES:
        raise ConfigError(f"unknown shape {text!r}; choose one of {sorted(SHAPES)}", field="name")
    return SHAPES[text]()


def check_field_name(name):
    if name.startswith("sampled:") and len(name) > len("sampled:"):
        return
    if name not in FIELDS:
        raise ConfigError(f"unknown field {name!r}; choose one of {list(FIELDS)} or sampled:<path>",
                          field="name")


def _corner_bound(grid):
    corners = np.maximum(np.abs(grid.lo), np.abs(grid.hi))
    return float(np.linalg.norm(corners))


def linear_field(grid, seed=0):
    """F(y) = y with div F = N."""
    return make_analytic(lambda p: np.array(p, dtype=float, copy=True), lambda p: float(grid.dim),
                         _corner_bound(grid), grid, name="linear", seed=seed)


def rotation_field(grid, seed=0):
    """F = (-y2, y1), divergence free and tangent to circles."""
    if grid.dim != 2:
        raise ValueError("rotation field is 2D")

    def f(p):
        p = np.asarray(p, dtype=float)
        return np.stack([-p[..., 1], p[..., 0]], axis=-1)

    return make_analytic(f, lambda p: 0.0, _corner_bound(grid), grid, name="rotation", seed=seed)


def constant_field(grid, value=None, seed=0):
    c = np.asarray(value if value is not None else [1.0, 0.5, -0.25][:grid.dim], dtype=float)

    def f(p):
        return np.broadcast_to(c, np.shape(p)).copy()

    return make_analytic(f, lambda p: 0.0, float(np.linalg.norm(c)), grid, name="constant", seed=seed)


def bv_steps(grid, seed=0):
    """1D: f = y + 1 on [0, 1], y left of 0, y + 3 right of 1; f' = 1 with jumps +1 and +2."""
    if grid.dim != 1:
        raise ValueError("bv_steps is one-dimensional")

    def shift(c):
        return lambda p: np.asarray(p, dtype=float) + c

    one = lambda p: 1.0  # noqa: E731
    regions = [(AxisBox([0.0], [1.0]), shift(1.0), one),
               (HalfSpace([1.0], 0.0), shift(0.0), one),
               (HalfSpace([-1.0], -1.0), shift(3.0), one)]
    sup = float(max(abs(grid.lo[0]), abs(grid.hi[0]) + 3.0))
    return make_piecewise(regions, grid, sup_bound=sup, name="bv_steps", seed=seed)


def build_field(name, grid, seed=0):
    check_field_name(name)
    if name.startswith("sampled:"):
        from .export import read_grid

        values = read_grid(name[len("sampled:"):])
        return make_sampled(values, name=name)
    builders = {
        "linear": linear_field,
        "rotation": rotation_field,
        "constant": constant_field,
        "chen_frid": make_chen_frid,
        "radial_unit": lambda g, seed=0: radial_unit(g),
        "radial_inv": lambda g, seed=0: radial_inv(g),
        "bv_steps": bv_steps,
    }
    logger.debug(f"building field {name!r} on {grid.cells}")
    return builders[name](grid, seed=seed)
