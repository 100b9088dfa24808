"""
Scalar conservation laws u_t + f(u)_x = 0 in one space dimension.

Exact Riemann solutions, entropy pairs (eta, q) with q' = eta' f', and the
entropy dissipation measure div_(t,x) (eta(u), q(u)) of a piecewise
solution. Space-time points are ordered (t, x) everywhere, so every 2D
trace and flux operation applies unchanged.

Brackets are right minus left: [a] = a(u_R) - a(u_L). A shock line
x = x0 + s (t - t0) carries the unit normal (-s, 1) / sqrt(1 + s^2).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import LaxViolation, NonConvexUnsupported
from .fields import make_analytic, make_piecewise
from .flux import exceptional_recovery
from .geometry import SurfaceMesh
from .grid import GridSpec
from .measures import SignedMeasure
from .shapes import AxisBox, Complement, HalfSpace
from .traces import interior_trace

logger = logging.getLogger("divmeasure.conservation")

RH_TOL = 1e-12
LAX_TOL = 1e-10
FAN_FLOOR = 0.05  # fans are frozen below t0 + FAN_FLOOR in the space-time field
STATE_LATTICE = 401


@dataclass
class ScalarLaw:
    f: object
    df: object
    d2f: object = None
    df_inv: object = None
    convex: bool = True
    name: str = "law"

    @classmethod
    def burgers(cls):
        return cls(f=lambda u: 0.5 * np.asarray(u) ** 2,
                   df=lambda u: np.asarray(u, dtype=float),
                   d2f=lambda u: np.ones_like(np.asarray(u, dtype=float)),
                   df_inv=lambda xi: np.asarray(xi, dtype=float),
                   convex=True, name="burgers")

    def check_convex(self, lo, hi):
        if self.d2f is None:
            return self.convex
        states = np.linspace(lo, hi, STATE_LATTICE)
        return bool(np.all(np.asarray(self.d2f(states)) >= 0))

    def speed_inverse(self, xi, lo, hi):
        """(f')^{-1}(xi) for xi between f'(lo) and f'(hi)."""
        if self.df_inv is not None:
            return np.asarray(self.df_inv(xi), dtype=float)
        xi = np.asarray(xi, dtype=float)
        solve = np.vectorize(lambda v: brentq(lambda u: float(self.df(u)) - v, lo, hi, xtol=1e-14))
        return solve(xi)


@dataclass
class EntropySolution1D:
    """Riemann solution issued from (t0, x0): one shock, one fan, or a constant."""
    law: ScalarLaw
    u_left: float
    u_right: float
    kind: str  # shock | rarefaction | constant
    speed: float = 0.0
    x0: float = 0.0
    t0: float = 0.0

    @classmethod
    def forced_shock(cls, law, u_left, u_right, x0=0.0, t0=0.0):
        """A jump moving at the Rankine-Hugoniot speed whatever its admissibility."""
        s = _rh_speed(law, u_left, u_right)
        return cls(law, float(u_left), float(u_right), "shock", s, x0, t0)

    @property
    def u_min(self):
        return min(self.u_left, self.u_right)

    @property
    def u_max(self):
        return max(self.u_left, self.u_right)

    @property
    def admissible(self):
        return self.kind != "shock" or self.u_left > self.u_right

    def rankine_hugoniot_residual(self):
        if self.kind != "shock":
            return 0.0
        f = self.law.f
        jump_f = float(f(self.u_right) - f(self.u_left))
        return abs(jump_f - self.speed * (self.u_right - self.u_left))

    def shocks(self):
        if self.kind != "shock":
            return []
        return [{"x0": self.x0, "t0": self.t0, "speed": self.speed,
                 "u_left": self.u_left, "u_right": self.u_right}]

    def state(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        tau = t - self.t0
        xi = x - self.x0
        if self.kind == "constant":
            return np.full(np.broadcast(t, x).shape, self.u_left)
        if self.kind == "shock":
            return np.where(xi < self.speed * tau, self.u_left, self.u_right)
        df = self.law.df
        lo, hi = float(df(self.u_left)), float(df(self.u_right))
        tau_b, xi_b = np.broadcast_arrays(tau, xi)
        out = np.where(xi_b <= lo * tau_b, self.u_left, self.u_right).astype(float)
        fan = (xi_b > lo * tau_b) & (xi_b < hi * tau_b) & (tau_b > 0)
        if np.any(fan):
            out[fan] = self.law.speed_inverse(xi_b[fan] / tau_b[fan], self.u_left, self.u_right)
        return out

    def to_dict(self):
        return {"law": self.law.name, "u_left": self.u_left, "u_right": self.u_right,
                "kind": self.kind, "speed": self.speed, "x0": self.x0, "t0": self.t0}


def _rh_speed(law, u_left, u_right):
    return float((law.f(u_right) - law.f(u_left)) / (u_right - u_left))


def solve_riemann(law, u_left, u_right, x0=0.0, t0=0.0):
    """Entropy solution of the Riemann problem for a convex flux."""
    if not law.convex or not law.check_convex(min(u_left, u_right), max(u_left, u_right)):
        raise NonConvexUnsupported(f"{law.name} is not convex on [{u_left}, {u_right}]")
    u_left, u_right = float(u_left), float(u_right)
    if u_left == u_right:
        sol = EntropySolution1D(law, u_left, u_right, "constant", 0.0, x0, t0)
    elif u_left > u_right:
        sol = EntropySolution1D(law, u_left, u_right, "shock", _rh_speed(law, u_left, u_right), x0, t0)
    else:
        sol = EntropySolution1D(law, u_left, u_right, "rarefaction", 0.0, x0, t0)
    if sol.rankine_hugoniot_residual() > RH_TOL:
        logger.warning(f"⚠️ Rankine-Hugoniot residual {sol.rankine_hugoniot_residual():.3e}")
    logger.debug(f"riemann ({u_left:g}, {u_right:g}) for {law.name}: {sol.kind}")
    return sol


# --- Entropy pairs ---

@dataclass
class EntropyPair:
    eta: object
    d_eta: object
    q: object
    name: str = "entropy"
    kink: float = None  # state where eta is not differentiable

    def compatibility_residual(self, law, lo=-2.0, hi=2.0, step=1e-5):
        """max |q'(u) - eta'(u) f'(u)| over a state lattice (central differences for q')."""
        u = np.linspace(lo, hi, STATE_LATTICE)
        if self.kink is not None:
            u = u[np.abs(u - self.kink) > 10 * step]
        dq = (self.q(u + step) - self.q(u - step)) / (2 * step)
        return float(np.max(np.abs(dq - self.d_eta(u) * law.df(u))))

    def is_convex(self, lo=-2.0, hi=2.0):
        u = np.linspace(lo, hi, STATE_LATTICE)
        e = np.asarray(self.eta(u), dtype=float)
        second = e[2:] - 2 * e[1:-1] + e[:-2]
        return bool(np.all(second >= -1e-12 * max(1.0, float(np.max(np.abs(e))))))


def _numeric_derivative(g, step=1e-6):
    def dg(u):
        u = np.asarray(u, dtype=float)
        return (np.asarray(g(u + step)) - np.asarray(g(u - step))) / (2 * step)
    return dg


def make_entropy_pair(law, eta, d_eta=None, u_min=0.0, name="entropy"):
    """Pair (eta, q) with q(u) = int_{u_min}^u eta'(v) f'(v) dv, so q(u_min) = 0.

    Anchoring at 0 makes eta = +-u return q = +-f for fluxes with f(0) = 0.
    """
    d_eta = d_eta or _numeric_derivative(eta)

    def integrand(v):
        return float(d_eta(v) * law.df(v))

    def q_scalar(u):
        value, _ = quad(integrand, u_min, u, epsabs=1e-13, epsrel=1e-12, limit=200)
        return value

    vq = np.vectorize(q_scalar, otypes=[float])

    def q(u):
        return vq(np.asarray(u, dtype=float))

    return EntropyPair(eta=eta, d_eta=d_eta, q=q, name=name)


def kruzkov_pair(law, k):
    """eta = |u - k|, q = sign(u - k) (f(u) - f(k))."""
    k = float(k)
    return EntropyPair(eta=lambda u: np.abs(np.asarray(u, dtype=float) - k),
                       d_eta=lambda u: np.sign(np.asarray(u, dtype=float) - k),
                       q=lambda u: np.sign(np.asarray(u, dtype=float) - k) * (law.f(u) - law.f(k)),
                       name=f"kruzkov({k:g})", kink=k)


# --- Dissipation ---

def _shock_mesh(shock, box, spacing):
    """Segments of one shock line inside box = (t_lo, t_hi, x_lo, x_hi)."""
    t_lo, t_hi, x_lo, x_hi = box
    s, x0, t0 = shock["speed"], shock["x0"], shock["t0"]
    a, b = max(t_lo, t0), t_hi
    if s != 0:
        ta, tb = sorted(((x_lo - x0) / s + t0, (x_hi - x0) / s + t0))
        a, b = max(a, ta), min(b, tb)
    elif not x_lo <= x0 <= x_hi:
        return None
    if b <= a:
        return None
    length = (b - a) * np.sqrt(1 + s * s)
    n = max(int(np.ceil(length / spacing)), 1)
    ts = np.linspace(a, b, n + 1)
    pts = np.stack([ts, x0 + s * (ts - t0)], axis=1)
    vertices = np.stack([pts[:-1], pts[1:]], axis=1)
    normal = np.array([-s, 1.0]) / np.sqrt(1 + s * s)
    areas = np.full(n, length / n)
    return SurfaceMesh(2, vertices, np.tile(normal, (n, 1)), areas)


def shock_density(law, pair, shock):
    """([q] - s [eta]) / sqrt(1 + s^2) per unit length of the shock line."""
    uL, uR, s = shock["u_left"], shock["u_right"], shock["speed"]
    jump_q = float(pair.q(uR) - pair.q(uL))
    jump_eta = float(pair.eta(uR) - pair.eta(uL))
    return (jump_q - s * jump_eta) / np.sqrt(1 + s * s)


def entropy_dissipation(sol, pair, box, spacing=1 / 512):
    """mu_eta = div_(t,x) (eta(u), q(u)) on box = (t_lo, t_hi, x_lo, x_hi).

    Exact solutions are smooth off their shocks, so the measure is carried
    by the shock segments alone.
    """
    t_lo, t_hi, x_lo, x_hi = box
    grid = GridSpec.from_bounds([t_lo, x_lo], [t_hi, x_hi], spacing)
    parts = []
    for shock in sol.shocks():
        mesh = _shock_mesh(shock, box, spacing)
        if mesh is not None:
            parts.append((mesh, shock_density(sol.law, pair, shock)))
    return SignedMeasure(grid, surface_parts=parts)


def dissipation_report(sol, pair, box, spacing=1 / 512):
    mu = entropy_dissipation(sol, pair, box, spacing)
    shocks = []
    for shock in sol.shocks():
        uL, uR, s = shock["u_left"], shock["u_right"], shock["speed"]
        bracket = float(pair.q(uR) - pair.q(uL)) - s * float(pair.eta(uR) - pair.eta(uL))
        shocks.append({**shock, "density": shock_density(sol.law, pair, shock),
                       "per_unit_time": bracket})
    return {"pair": pair.name, "box": list(box), "total": mu.eval(), "shocks": shocks}


def lax_check(sol, pairs, boxes, spacing=1 / 512):
    """Every convex pair must dissipate: mu_eta(box) <= 0 on every box."""
    rows = []
    worst = None
    for pair in pairs:
        if not pair.is_convex(sol.u_min - 1, sol.u_max + 1):
            raise ValueError(f"entropy {pair.name} is not convex")
        for box in boxes:
            value = entropy_dissipation(sol, pair, box, spacing).eval()
            rows.append({"pair": pair.name, "box": list(box), "value": value})
            if value > LAX_TOL and (worst is None or value > worst["value"]):
                worst = {"pair": pair.name, "box": list(box), "value": value}
    if worst is not None:
        raise LaxViolation(worst)
    logger.info(f"✅ Lax inequality holds for {len(pairs)} entropies on {len(boxes)} boxes")
    return {"rows": rows, "pass": True}


# --- Space-time field ---

def _pair_values(pair, u):
    return np.stack([np.asarray(pair.eta(u), dtype=float), np.asarray(pair.q(u), dtype=float)], axis=-1)


def entropy_field(sol, pair, grid, seed=0):
    """G(t, x) = (eta(u), q(u)) as a DMField on a (t, x) grid.

    Shocks give a piecewise field. A fan is frozen below t0 + FAN_FLOOR so
    the field stays bounded; that strip carries the AC divergence
    d/dx q(u(t0 + FAN_FLOOR, x)).
    """
    if grid.dim != 2:
        raise ValueError("space-time grids are 2D with coordinates (t, x)")
    states = np.linspace(sol.u_min, sol.u_max, STATE_LATTICE)
    sup = float(np.max(np.linalg.norm(_pair_values(pair, states), axis=-1))) * (1 + 1e-9) + 1e-12
    name = f"G[{pair.name}]"

    if sol.kind == "constant":
        value = _pair_values(pair, np.array([sol.u_left]))[0]
        return make_analytic(lambda p: np.broadcast_to(value, np.shape(p)).copy(), lambda p: 0.0,
                             sup, grid, name=name, seed=seed)

    if sol.kind == "shock":
        s = sol.speed
        # {x - s t <= x0 - s t0}: the left state
        left = HalfSpace([-s, 1.0], sol.x0 - s * sol.t0)
        gl = _pair_values(pair, np.array([sol.u_left]))[0]
        gr = _pair_values(pair, np.array([sol.u_right]))[0]
        return make_piecewise([(left, lambda p: np.broadcast_to(gl, np.shape(p)).copy(), lambda p: 0.0),
                               (Complement(left), lambda p: np.broadcast_to(gr, np.shape(p)).copy(),
                                lambda p: 0.0)],
                              grid, sup_bound=sup, name=name, seed=seed)

    law = sol.law
    if law.d2f is None:
        raise ValueError("fans need the second derivative of the flux")
    lo, hi = float(law.df(sol.u_left)), float(law.df(sol.u_right))

    def G(p):
        pts = np.asarray(p, dtype=float)
        t = np.maximum(pts[..., 0], sol.t0 + FAN_FLOOR)
        return _pair_values(pair, sol.state(t, pts[..., 1]))

    def div(p):
        pts = np.asarray(p, dtype=float)
        frozen = pts[..., 0] < sol.t0 + FAN_FLOOR
        xi = (pts[..., 1] - sol.x0) / FAN_FLOOR
        in_fan = frozen & (xi > lo) & (xi < hi)
        out = np.zeros(pts.shape[:-1])
        if np.any(in_fan):
            u = law.speed_inverse(xi[in_fan], sol.u_left, sol.u_right)
            # d/dx q(u) = eta'(u) f'(u) u_x with u_x = 1 / (FAN_FLOOR f''(u))
            out[in_fan] = pair.d_eta(u) * law.df(u) / (FAN_FLOOR * law.d2f(u))
        return out

    return make_analytic(G, div, sup, grid, name=name, seed=seed)


def dissipation_by_traces(sol, pair, box, grid, schedule):
    """mu_eta(R) = -(interior trace total of G on R) for the rectangle R = box."""
    t_lo, t_hi, x_lo, x_hi = box
    G = entropy_field(sol, pair, grid)
    trace = interior_trace(G, AxisBox([t_lo, x_lo], [t_hi, x_hi]), schedule)
    return {"value": -trace.total, "trace": trace}


def cauchy_entropy_flux(sol, pair, surface, schedule, both=False):
    """F_eta(S) = -int_S G_i . nu through the traces of G = (eta(u), q(u)).

    With both=True returns (F_eta(S), F_eta(-S)) from the two one-sided
    traces, which differ on shock-aligned surfaces.
    """
    G = entropy_field(sol, pair, surface.grid)
    if both:
        rec = exceptional_recovery(G, surface, schedule)
        return rec["plus"], rec["minus"]
    trace = interior_trace(G, surface.reference_set, schedule)
    keep = surface.select(trace.boundary_mesh)
    return float(-np.sum(trace.density[keep] * trace.boundary_mesh.areas[keep]))
