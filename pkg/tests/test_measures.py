import numpy as np
import pytest

from divmeasure.errors import AtomOnBoundary
from divmeasure.geometry import reduced_boundary_mesh
from divmeasure.grid import MollifierKernel, ScalarGridField, rasterize
from divmeasure.measures import ConvergenceTable, SignedMeasure, liminf_check, mollify_measure, weak_star_cauchy
from divmeasure.shapes import AxisBox, Ball


@pytest.fixture(scope="module")
def circle(coarse_grid):
    return reduced_boundary_mesh(Ball([0, 0], 1.0), coarse_grid, 0.1)


def test_lebesgue_measure_of_a_box(coarse_grid):
    mu = SignedMeasure.lebesgue(coarse_grid)
    assert mu.eval(rasterize(AxisBox([0, 0], [1, 1]), coarse_grid)) == pytest.approx(1.0, rel=1e-9)
    assert mu.tv() == pytest.approx(16.0)


def test_surface_part_and_variation(coarse_grid, circle):
    mu = SignedMeasure(coarse_grid, surface_parts=[(circle, -1.0)])
    assert mu.eval() == pytest.approx(-circle.total_area())
    assert mu.tv() == pytest.approx(circle.total_area())
    assert mu.variation().is_nonnegative()
    assert not mu.is_nonnegative()
    inside = rasterize(Ball([0, 0], 0.5), coarse_grid)
    assert mu.eval(inside) == 0.0


def test_atoms(coarse_grid):
    mu = SignedMeasure(coarse_grid, atoms=[([0.01, 0.01], 3.0)])
    assert mu.eval(rasterize(Ball([0, 0], 0.5), coarse_grid)) == pytest.approx(3.0)
    assert mu.eval(rasterize(AxisBox([1, 1], [1.5, 1.5]), coarse_grid)) == 0.0
    with pytest.raises(AtomOnBoundary):
        mu.eval(rasterize(AxisBox([0.0, -1.0], [1.0, 1.0]), coarse_grid))


def test_parts_and_deposit(coarse_grid, circle):
    ac = ScalarGridField(coarse_grid, np.full(coarse_grid.shape, 2.0))
    mu = SignedMeasure(coarse_grid, ac, [(circle, 0.5)], [([0.3, -0.2], -1.0)])
    assert mu.ac_part().eval() == pytest.approx(32.0)
    assert mu.surface_total() == pytest.approx(0.5 * circle.total_area())
    assert mu.singular_part().eval() == pytest.approx(0.5 * circle.total_area() - 1.0)
    assert mu.deposit().sum() == pytest.approx(mu.eval(), rel=1e-12)
    restricted = mu.restrict(rasterize(Ball([0, 0], 0.5), coarse_grid))
    assert restricted.surface_total() == 0.0
    assert restricted.eval() == pytest.approx(2 * np.pi * 0.25 - 1.0, rel=0.02)


def test_integrate_test_function(coarse_grid, circle):
    mu = SignedMeasure(coarse_grid, surface_parts=[(circle, 1.0)])
    value = mu.integrate(lambda p: np.asarray(p)[..., 0] ** 2)
    # int_circle x^2 ds = pi
    assert value == pytest.approx(np.pi, rel=0.02)


def test_mollified_measure_keeps_mass(coarse_grid, circle):
    mu = SignedMeasure(coarse_grid, surface_parts=[(circle, 1.0)])
    density = mollify_measure(mu, MollifierKernel("smooth_bump", 0.2))
    assert density.total() == pytest.approx(mu.eval(), rel=1e-9)


def test_weak_star_and_liminf(coarse_grid):
    region = rasterize(AxisBox([-1, -1], [1, 1]), coarse_grid)
    seq = [SignedMeasure.lebesgue(coarse_grid, 1 + 2.0 ** -k) for k in range(1, 6)]
    report = weak_star_cauchy(seq, region)
    assert report["cauchy"]
    assert report["gaps"][-1] < report["gaps"][0]
    result = liminf_check(seq, SignedMeasure.lebesgue(coarse_grid), region)
    assert result["ok"]
    assert not liminf_check(seq, SignedMeasure.lebesgue(coarse_grid, 2.0), region)["ok"]


def test_convergence_table_ordering():
    table = ConvergenceTable()
    for eps, value in [(0.05, 1.0), (0.2, 4.0), (0.1, 2.0)]:
        table.add(eps, np.nan, value)
    assert table.epsilons() == [0.2, 0.1, 0.05]
    assert table.finest() == 1.0 and table.coarsest() == 4.0
    assert table.decrease_ratio() == pytest.approx(4.0)
    assert table.is_monotone("decreasing")
    assert not table.is_monotone("increasing")
    assert table.cauchy_gaps().tolist() == [2.0, 1.0]


def test_convergence_table_csv(tmp_path):
    table = ConvergenceTable([(0.2, 0.6, 1.5), (0.1, 0.6, 1.25)])
    path = tmp_path / "t.csv"
    table.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epsilon,t,value"
    assert lines[1] == "0.2,0.6,1.5"


def test_convergence_table_carries_its_expected_trend():
    rows = [(0.4, np.nan, 6.2), (0.2, np.nan, 6.0), (0.1, np.nan, 5.0)]
    assert ConvergenceTable(rows).monotone
    assert not ConvergenceTable(rows, direction="increasing", slack=0.05).monotone
    assert ConvergenceTable(rows, direction="decreasing").monotone
