import numpy as np
import pytest

from divmeasure.conservation import (EntropySolution1D, ScalarLaw, cauchy_entropy_flux, dissipation_by_traces,
                                     dissipation_report, entropy_dissipation, kruzkov_pair, lax_check,
                                     make_entropy_pair, solve_riemann)
from divmeasure.errors import LaxViolation, NonConvexUnsupported
from divmeasure.experiments.burgers_checks import conservation_pairs, convex_entropies
from divmeasure.flux import OrientedSurface, half_space_selector
from divmeasure.grid import GridSpec
from divmeasure.shapes import AxisBox, HalfSpace, Intersection
from divmeasure.traces import TraceSchedule

BOX = (0.0, 1.0, -1.0, 1.0)


@pytest.fixture(scope="module")
def burgers():
    return ScalarLaw.burgers()


@pytest.fixture(scope="module")
def energy(burgers):
    return make_entropy_pair(burgers, lambda u: 0.5 * np.asarray(u) ** 2, lambda u: np.asarray(u, dtype=float),
                             name="u^2/2")


@pytest.fixture(scope="module")
def shock(burgers):
    return solve_riemann(burgers, 1.0, 0.0)


@pytest.mark.parametrize("u_left, u_right, kind, speed", [
    (1.0, 0.0, "shock", 0.5),
    (2.0, -1.0, "shock", 0.5),
    (0.0, 1.0, "rarefaction", 0.0),
    (0.5, 0.5, "constant", 0.0),
])
def test_riemann_solutions(burgers, u_left, u_right, kind, speed):
    sol = solve_riemann(burgers, u_left, u_right)
    assert sol.kind == kind
    assert sol.speed == pytest.approx(speed)
    assert sol.rankine_hugoniot_residual() <= 1e-12
    assert sol.admissible


def test_solution_states(burgers, shock):
    assert shock.state(1.0, 0.4) == 1.0
    assert shock.state(1.0, 0.6) == 0.0
    fan = solve_riemann(burgers, 0.0, 1.0)
    assert fan.state(1.0, 0.5) == pytest.approx(0.5)
    assert fan.state(1.0, -0.2) == 0.0
    assert fan.state(1.0, 1.2) == 1.0


def test_non_convex_flux_is_refused():
    cubic = ScalarLaw(f=lambda u: np.asarray(u) ** 3 / 3, df=lambda u: np.asarray(u) ** 2,
                      d2f=lambda u: 2 * np.asarray(u), name="cubic")
    with pytest.raises(NonConvexUnsupported):
        solve_riemann(cubic, 1.0, -1.0)


def test_entropy_flux_is_integrated(burgers, energy):
    u = np.linspace(-1.0, 2.0, 13)
    assert np.allclose(energy.q(u), u ** 3 / 3, atol=1e-8)
    assert energy.compatibility_residual(burgers) < 1e-6
    assert energy.is_convex()


def test_linear_entropies_give_the_flux(burgers):
    plus, minus = conservation_pairs(burgers)
    u = np.array([-1.0, 0.3, 1.5])
    assert np.allclose(plus.q(u), burgers.f(u), atol=1e-10)
    assert np.allclose(minus.q(u), -burgers.f(u), atol=1e-10)


def test_shock_dissipation_closed_form(shock, energy):
    report = dissipation_report(shock, energy, BOX)
    assert report["total"] == pytest.approx(-1 / 12, rel=1e-9)
    assert report["shocks"][0]["per_unit_time"] == pytest.approx(-1 / 12, rel=1e-9)


@pytest.mark.parametrize("k", [0.0, 0.25, 0.8])
def test_shifted_quadratic_dissipates_independently_of_shift(burgers, shock, k):
    pair = make_entropy_pair(burgers, lambda u: (np.asarray(u) - k) ** 2, lambda u: 2 * (np.asarray(u) - k))
    assert dissipation_report(shock, pair, BOX)["total"] == pytest.approx(-1 / 6, rel=1e-9)


def test_dissipation_is_linear_in_time(shock, energy):
    half = entropy_dissipation(shock, energy, (0.0, 0.5, -1.0, 1.0)).eval()
    assert half == pytest.approx(-1 / 24, rel=1e-9)


def test_rarefaction_and_conservation_do_not_dissipate(burgers, shock, energy):
    fan = solve_riemann(burgers, 0.0, 1.0)
    assert dissipation_report(fan, energy, BOX)["total"] == 0.0
    for pair in conservation_pairs(burgers):
        assert abs(dissipation_report(shock, pair, BOX)["total"]) < 1e-12


def test_kruzkov_pair(burgers, shock):
    pair = kruzkov_pair(burgers, 0.5)
    assert pair.eta(0.0) == pytest.approx(0.5)
    assert pair.q(0.0) == pytest.approx(0.125)
    assert dissipation_report(shock, pair, BOX)["total"] == pytest.approx(-0.25)
    assert pair.compatibility_residual(burgers) < 1e-6


def test_lax_inequality_holds_for_the_shock(burgers, shock):
    boxes = [BOX, (0.0, 0.5, -1.0, 1.0), (0.25, 1.0, 0.0, 1.0)]
    report = lax_check(shock, convex_entropies(burgers), boxes)
    assert report["pass"]
    assert len(report["rows"]) == 5 * 3
    assert max(row["value"] for row in report["rows"]) <= 1e-10


def test_lax_catches_an_expansion_shock(burgers, energy):
    forced = EntropySolution1D.forced_shock(burgers, 0.0, 1.0)
    assert not forced.admissible
    with pytest.raises(LaxViolation) as info:
        lax_check(forced, [energy], [BOX])
    assert info.value.witness["value"] == pytest.approx(1 / 12, rel=1e-9)


def test_non_convex_entropy_is_refused(shock):
    concave = make_entropy_pair(ScalarLaw.burgers(), lambda u: -np.asarray(u) ** 2, lambda u: -2 * np.asarray(u))
    with pytest.raises(ValueError):
        lax_check(shock, [kruzkov_pair(ScalarLaw.burgers(), 0.5), concave], [BOX])


def test_horizontal_flux_of_a_constant_state(burgers, energy):
    grid = GridSpec.from_bounds([-0.5, -1.5], [1.5, 1.5], 1 / 128)
    schedule = TraceSchedule([0.2, 0.1, 0.05])
    sol = solve_riemann(burgers, 1.0, 1.0)
    # top edge t = 1 of the box, x in [-1/2, 1/2]: int eta(1) dx
    top = OrientedSurface(AxisBox([0.0, -0.5], [1.0, 0.5]), grid, schedule.finest, half_space_selector(0, 0.9))
    assert cauchy_entropy_flux(sol, energy, top, schedule) == pytest.approx(0.5, rel=0.03)


def test_dissipation_through_traces(shock, energy):
    grid = GridSpec.from_bounds([-0.5, -1.5], [1.5, 1.5], 1 / 256)
    out = dissipation_by_traces(shock, energy, BOX, grid, TraceSchedule([0.1, 0.05, 0.025]))
    assert out["value"] == pytest.approx(-1 / 12, rel=0.05)


def test_both_sides_of_the_shock(shock, energy):
    grid = GridSpec.from_bounds([-0.5, -1.5], [1.5, 1.5], 1 / 128)
    schedule = TraceSchedule([0.2, 0.1, 0.05])
    # left state region {x <= t / 2} cut down to a box; S is its shock edge for t in [1/4, 3/4]
    left = Intersection(HalfSpace([-0.5, 1.0], 0.0), AxisBox([0.0, -0.8], [1.0, 0.8]))

    def on_shock(p):
        return (p[:, 0] >= 0.25) & (p[:, 0] <= 0.75) & (np.abs(p[:, 1] - 0.5 * p[:, 0]) < 0.1)

    surface = OrientedSurface(left, grid, schedule.finest, on_shock)
    plus, minus = cauchy_entropy_flux(shock, energy, surface, schedule, both=True)
    # (eta, q)(1) = (1/2, 1/3) on the left, 0 on the right
    assert plus == pytest.approx(1 / 24, rel=0.05)
    assert abs(minus) < 2e-3
