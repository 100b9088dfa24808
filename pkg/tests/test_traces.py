import numpy as np
import pytest

from divmeasure.corpus import bv_steps, build_field, build_shape, linear_field
from divmeasure.errors import AtomRejected, FatnessViolated, ResolutionError
from divmeasure.fields import make_piecewise, radial_inv, radial_unit
from divmeasure.grid import GridSpec
from divmeasure.measures import SignedMeasure
from divmeasure.shapes import AxisBox, Ball, Complement
from divmeasure.traces import (FatnessConfig, TraceSchedule, classical_consistency, convergence_diagnostics,
                               exterior_trace, gauss_green_check, interior_trace, jump_check,
                               one_dimensional_traces, one_sided_inclusion, sigma_kt)


@pytest.fixture(scope="module")
def linear_reference(reference_grid):
    return linear_field(reference_grid)


def test_schedule_validation(coarse_grid):
    with pytest.raises(ValueError):
        TraceSchedule([0.1, 0.2])
    with pytest.raises(ValueError):
        TraceSchedule([0.2, 0.1], levels_per_band=3)
    with pytest.raises(ResolutionError):
        TraceSchedule([0.1, 0.02]).validate(coarse_grid)
    schedule = TraceSchedule([0.2, 0.1], delta_t=0.1)
    assert schedule.interior_band == pytest.approx((0.6, 0.9))
    assert schedule.exterior_band == pytest.approx((0.1, 0.4))


@pytest.mark.parametrize("c0, r0", [(0.0, 0.25), (1.0, 0.25), (0.4, 0.0)])
def test_fatness_config_ranges(c0, r0):
    with pytest.raises(ValueError):
        FatnessConfig(c0=c0, r0=r0)


def test_level_flux_of_linear_field(coarse_grid, disk):
    F = linear_field(coarse_grid)
    sigma = sigma_kt(F, disk, 0.1, 0.5)
    # F . nu = -r on a circle of radius r close to 1
    assert sigma.eval() == pytest.approx(-2 * np.pi, rel=0.02)


def test_linear_traces_on_the_disk(linear_reference, disk, reference_schedule, disk_family):
    inner = interior_trace(linear_reference, disk, reference_schedule, disk_family)
    outer = exterior_trace(linear_reference, disk, reference_schedule, disk_family)
    assert inner.total == pytest.approx(-2 * np.pi, rel=0.02)
    assert outer.total == pytest.approx(-2 * np.pi, rel=0.02)
    assert inner.sup_density <= 1.05 * linear_reference.sup_bound
    assert inner.relative_residual < 0.02
    assert len(inner.table.epsilons()) == 3
    assert set(inner.unassigned) == set(reference_schedule.eps_list)
    assert set(inner.to_dict()["unassigned"]) == {"0.2", "0.1", "0.05"}


def test_gauss_green_with_constant_test_function(linear_reference, disk, reference_schedule, disk_family):
    gg = gauss_green_check(linear_reference, disk, reference_schedule, family=disk_family)
    assert gg["pass"]
    assert gg["bulk"] == pytest.approx(2 * np.pi, rel=0.03)


def test_gauss_green_with_smooth_test_function(linear_reference, disk, reference_schedule, disk_family):
    def phi(p):
        return 1.0 + np.asarray(p)[..., 0]

    gg = gauss_green_check(linear_reference, disk, reference_schedule, phi=phi, family=disk_family)
    assert gg["residual"] < 0.02


def test_classical_consistency_of_continuous_field(linear_reference, disk, reference_schedule, disk_family):
    cc = classical_consistency(linear_reference, disk, reference_schedule, disk_family)
    assert cc["pass"]
    assert cc["aligned_fraction"] >= 0.85


def test_jump_of_radial_unit(reference_grid, disk, reference_schedule, disk_family):
    F = radial_unit(reference_grid)
    jc = jump_check(F, disk, reference_schedule, family=disk_family)
    assert jc["pass"]
    assert jc["jump_integral"] == pytest.approx(2 * np.pi, rel=0.02)
    assert jc["interior"].total == pytest.approx(0.0, abs=0.05)
    assert jc["exterior"].total == pytest.approx(-2 * np.pi, rel=0.02)


def test_one_dimensional_traces():
    grid = GridSpec.from_bounds([-1.0], [2.0], 1 / 1024)
    F = bv_steps(grid)
    out = one_dimensional_traces(F, AxisBox([0.0], [1.0]), TraceSchedule([0.1, 0.05, 0.025]))
    assert out["a"] == pytest.approx(0.0, abs=0.02)
    assert out["b"] == pytest.approx(1.0, abs=0.02)
    assert out["f_a_plus"] == pytest.approx(1.0, abs=0.1)
    assert out["f_a_minus"] == pytest.approx(0.0, abs=0.1)
    assert out["f_b_minus"] == pytest.approx(2.0, abs=0.1)
    assert out["f_b_plus"] == pytest.approx(4.0, abs=0.1)


def test_one_dimensional_traces_need_a_line(linear_reference, disk, reference_schedule):
    with pytest.raises(ValueError):
        one_dimensional_traces(linear_reference, disk, reference_schedule)


def test_convergence_diagnostics(linear_reference, disk, reference_schedule, reference_grid, disk_family):
    report = convergence_diagnostics(disk, linear_reference.divergence, reference_schedule, reference_grid,
                                     F=linear_reference, family=disk_family)
    assert report["outside_area_pass"]
    assert report["outside_flux_pass"]
    assert report["symdiff"].finest() < report["symdiff"].coarsest()


def test_atoms_are_rejected(disk, reference_schedule, reference_grid):
    mu = SignedMeasure(reference_grid, atoms=[([0.2, 0.1], 1.0)])
    with pytest.raises(AtomRejected):
        convergence_diagnostics(disk, mu, reference_schedule, reference_grid)


def test_disk_has_fat_complement(coarse_grid, disk, coarse_schedule):
    report = one_sided_inclusion(disk, FatnessConfig(c0=0.4, r0=0.25), coarse_schedule, coarse_grid)
    assert report["pass"]
    assert report["min_exterior_density"] >= 0.4
    assert report["t_pass"] >= report["threshold"]


def test_cusp_complement_is_thin(coarse_grid, coarse_schedule):
    with pytest.raises(FatnessViolated) as info:
        one_sided_inclusion(build_shape("cusp"), FatnessConfig(c0=0.4, r0=0.25), coarse_schedule, coarse_grid)
    assert info.value.witness["density"] < 0.4
    assert np.linalg.norm(info.value.witness["point"]) < 0.5


@pytest.fixture(scope="module")
def point_source(reference_grid):
    return radial_inv(reference_grid)


@pytest.mark.parametrize("radius", [0.5, 0.75, 1.0, 1.25])
def test_point_source_flux_does_not_depend_on_the_circle(point_source, reference_schedule, radius):
    inner = interior_trace(point_source, Ball([0.0, 0.0], radius), reference_schedule)
    # flux -(interior total) of y/|y|^2 through any circle around the source
    assert -inner.total == pytest.approx(2 * np.pi, rel=0.02)


@pytest.fixture(scope="module")
def reference_fields(reference_grid):
    return {name: build_field(name, reference_grid) for name in ("linear", "rotation", "chen_frid")}


@pytest.mark.parametrize("shape_name", ["square", "rotated_square"])
@pytest.mark.parametrize("field_name", ["linear", "rotation", "chen_frid"])
def test_gauss_green_on_polygons(reference_fields, reference_schedule, shape_name, field_name):
    gg = gauss_green_check(reference_fields[field_name], build_shape(shape_name), reference_schedule)
    assert gg["residual"] < 0.02
    assert gg["pass"]


def test_chen_frid_has_no_flux_through_the_rotated_square(reference_fields, reference_schedule):
    # one side of the rotated square lies on the line y1 = y2
    inner = interior_trace(reference_fields["chen_frid"], build_shape("rotated_square"), reference_schedule)
    assert abs(inner.total) < 0.02


def test_rotation_is_tangent_to_circles(reference_fields, disk, reference_schedule, disk_family):
    F = reference_fields["rotation"]
    inner = interior_trace(F, disk, reference_schedule, disk_family)
    outer = exterior_trace(F, disk, reference_schedule, disk_family)
    assert abs(inner.total) < 0.02
    assert abs(outer.total) < 0.02
    assert inner.sup_density < 0.05 * F.sup_bound


def test_constant_jump_across_a_flat_segment(reference_grid):
    """F = (0, 3) on the strip |y1| < 1 above y2 = 0, zero elsewhere; E sits below the strip."""
    strip = AxisBox([-1.0, 0.0], [1.0, 10.0])
    F = make_piecewise([(strip, lambda p: np.broadcast_to([0.0, 3.0], np.shape(p)).copy(), lambda p: 0.0),
                        (Complement(strip), lambda p: np.zeros(np.shape(p)), lambda p: 0.0)],
                       reference_grid, sup_bound=3.0, name="strip")
    E = AxisBox([-1.0, -1.0], [1.0, 0.0])
    jc = jump_check(F, E, TraceSchedule([0.1, 0.05, 0.025]))
    assert jc["jump_integral"] == pytest.approx(6.0, rel=0.02)
    assert jc["mu_collar"] == pytest.approx(6.0, rel=0.02)
    assert jc["pass"]
