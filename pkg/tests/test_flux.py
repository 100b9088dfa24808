import numpy as np
import pytest

from divmeasure.corpus import constant_field, linear_field, rotation_field
from divmeasure.errors import AxiomViolation, UnknownFace
from divmeasure.fields import radial_unit
from divmeasure.flux import (CubeLattice, FaceKey, FieldFlux, LatticeSurface, OrientedSurface, SyntheticFlux,
                             axioms_check, block_production, evaluate_flux, exceptional_recovery,
                             half_space_selector, production_measure, slice_reconstruct, table_frame)
from divmeasure.grid import GridSpec


@pytest.fixture(scope="module")
def small_grid():
    # 4 x 4 cubes of side 1/2
    return GridSpec.from_bounds([-1.0, -1.0], [1.0, 1.0], 1 / 32)


@pytest.fixture(scope="module")
def lattice(small_grid):
    return CubeLattice(small_grid)


@pytest.fixture(scope="module")
def linear_flux(small_grid, lattice, coarse_schedule):
    return FieldFlux(linear_field(small_grid), coarse_schedule, lattice)


def zero_entries(lattice):
    return {key: 0.0 for j in range(lattice.dim) for key in lattice.faces(j)}


def test_lattice_geometry(lattice):
    assert lattice.counts == (4, 4)
    assert lattice.side == pytest.approx(0.5)
    assert lattice.face_area == pytest.approx(0.5)
    assert lattice.plane_shape(0) == (33, 4)


def test_aliased_faces_share_an_index(lattice):
    assert lattice.index(FaceKey(0, (1, 2), 3)) == (0, (11, 2))
    assert lattice.index(FaceKey(0, (1, 2), 8)) == lattice.index(FaceKey(0, (2, 2), 0))


@pytest.mark.parametrize("key", [
    FaceKey(0, (1, 2), 9),
    FaceKey(1, (4, 0), 0),
    FaceKey(2, (0, 0), 0),
    FaceKey(0, (0,), 0),
])
def test_unknown_faces(lattice, key):
    with pytest.raises(UnknownFace):
        lattice.index(key)


def test_too_few_slices(small_grid):
    with pytest.raises(ValueError):
        CubeLattice(small_grid, n_slices=4)


def test_constant_field_reconstructs_exactly(small_grid, lattice, coarse_schedule):
    flux = FieldFlux(constant_field(small_grid, [1.0, 0.5]), coarse_schedule, lattice)
    recon = slice_reconstruct(flux)
    assert np.allclose(recon.values, [1.0, 0.5], atol=1e-10)


def test_linear_field_reconstructs_cube_centers(linear_flux, lattice):
    recon = slice_reconstruct(linear_flux)
    assert np.allclose(recon.values, lattice.cube_grid.centers(), atol=1e-10)


def test_linear_production_density(linear_flux, lattice):
    report = production_measure(linear_flux)
    assert np.allclose(report.per_cube / lattice.cube_volume, 2.0)
    assert report.total == pytest.approx(2.0 * 4.0)
    assert not report.shock_cubes.any()
    assert report.to_dict()["max_residual"] < 1e-10


def test_rotation_has_no_production(small_grid, lattice, coarse_schedule):
    flux = FieldFlux(rotation_field(small_grid), coarse_schedule, lattice)
    assert np.max(np.abs(production_measure(flux).per_cube)) < 1e-12


def test_block_production_is_additive(linear_flux):
    P = production_measure(linear_flux).per_cube
    assert block_production(linear_flux, (0, 0), (2, 1)) == pytest.approx(P[0, 0] + P[1, 0], abs=1e-12)
    assert block_production(linear_flux, (0, 0), (4, 4)) == pytest.approx(P.sum(), abs=1e-12)


def test_lattice_surface_flux_adds_over_faces(linear_flux, lattice):
    faces = [FaceKey(0, (2, 1), s) for s in (0, 4)]
    surface = LatticeSurface(faces)
    parts = [evaluate_flux(linear_flux, LatticeSurface([k])) for k in faces]
    assert evaluate_flux(linear_flux, surface) == pytest.approx(sum(parts))
    # y1 = 0 and y1 = 0.25 over a face of length 1/2
    assert parts == pytest.approx([0.0, -0.125])
    assert evaluate_flux(linear_flux, surface.reversed()) == pytest.approx(0.125)


def test_shock_face_reversal_carries_jump(lattice):
    key = FaceKey(0, (2, 1), 4)
    entries = zero_entries(lattice)
    entries[key] = 0.3
    flux = SyntheticFlux.from_entries(lattice, entries, {key: -1.0}, c_bound=1.0)
    forward = evaluate_flux(flux, LatticeSurface([key]))
    backward = evaluate_flux(flux, LatticeSurface([key], reverse=True))
    assert forward + backward == pytest.approx(-1.0 * lattice.face_area)


def test_missing_face_is_unknown(lattice):
    flux = SyntheticFlux.from_entries(lattice, {FaceKey(0, (0, 0), 0): 1.0})
    with pytest.raises(UnknownFace):
        evaluate_flux(flux, LatticeSurface([FaceKey(1, (0, 0), 0)]))


def test_conflicting_split_faces_break_additivity(lattice):
    entries = zero_entries(lattice)
    entries[FaceKey(0, (1, 2), 8)] = 0.1
    entries[FaceKey(0, (2, 2), 0)] = 0.2
    flux = SyntheticFlux.from_entries(lattice, entries, c_bound=1.0)
    with pytest.raises(AxiomViolation) as info:
        axioms_check(flux)
    assert info.value.axiom == "i"


def test_area_bound_with_zero_constant(lattice):
    entries = zero_entries(lattice)
    entries[FaceKey(1, (0, 3), 2)] = 1e-3
    flux = SyntheticFlux.from_entries(lattice, entries, c_bound=0.0)
    with pytest.raises(AxiomViolation) as info:
        axioms_check(flux)
    assert info.value.axiom == "iii"


def test_zero_table_satisfies_axioms(lattice):
    flux = SyntheticFlux.from_entries(lattice, zero_entries(lattice), c_bound=0.0)
    surface = LatticeSurface([FaceKey(0, (1, 1), s) for s in range(9)])
    report = axioms_check(flux, sample_surfaces=[surface])
    assert report["pass"]
    assert report["iii"]["checked"] > 0


@pytest.mark.parametrize("slope", [0.0, 1.0])
def test_step_table_production(slope):
    """F = (slope * y1 + u, 0) with u jumping from 0 to 1 across y1 = 1/2, inside a cube row."""
    lat = CubeLattice(GridSpec.from_bounds([-2.0, -2.0], [2.0, 2.0], 1 / 16))
    A = lat.face_area
    entries = {}
    for j in range(2):
        for key in lat.faces(j):
            tau = lat.face_bounds(key)[0][j]
            entries[key] = -A * (slope * tau + (tau >= 0.5)) if j == 0 else 0.0
    shocks = {FaceKey(0, (2, k), 4): -1.0 for k in range(4)}
    report = production_measure(SyntheticFlux.from_entries(lat, entries, shocks, c_bound=1.0))
    assert np.allclose(report.per_cube[2], A * (1 + slope))
    assert report.total == pytest.approx(4.0 + 16 * slope)
    assert report.shock_cubes[2].all()
    assert np.allclose(np.delete(report.per_cube, 2, axis=0), slope * A, atol=1e-12)
    assert report.to_dict()["max_residual"] < 1e-10


def test_shock_residual_flags_inconsistent_tables(lattice, rng):
    entries = {key: float(rng.normal()) for j in range(lattice.dim) for key in lattice.faces(j)}
    shocks = {FaceKey(0, (2, k), 4): 7.0 for k in range(4)}
    report = production_measure(SyntheticFlux.from_entries(lattice, entries, shocks, c_bound=10.0))
    assert report.shock_cubes.sum() == 4
    assert report.residual[report.shock_cubes].min() > 1e-6


def test_face_table_round_trip(linear_flux, lattice):
    frame = table_frame(linear_flux)
    entries = {FaceKey(int(r.axis), tuple(int(c) for c in r.cube.split()), int(r.slice)): r.value
               for r in frame.itertuples()}
    again = SyntheticFlux.from_entries(lattice, entries)
    assert not again.conflicts
    assert np.allclose(slice_reconstruct(again).values, slice_reconstruct(linear_flux).values)


def test_flux_through_the_circle(reference_grid, disk, reference_schedule):
    flux = FieldFlux(linear_field(reference_grid), reference_schedule)
    surface = OrientedSurface(disk, reference_grid, reference_schedule.finest)
    assert evaluate_flux(flux, surface) == pytest.approx(2 * np.pi, rel=0.02)
    assert evaluate_flux(flux, surface.reversed()) == pytest.approx(-2 * np.pi, rel=0.02)


def test_exceptional_surface_recovery(coarse_grid, disk, coarse_schedule):
    F = radial_unit(coarse_grid)
    upper = OrientedSurface(disk, coarse_grid, coarse_schedule.finest, half_space_selector(1, 0.0))
    out = exceptional_recovery(F, upper, coarse_schedule)
    assert out["plus"] == pytest.approx(0.0, abs=0.05)
    assert out["minus"] == pytest.approx(-np.pi, rel=0.03)
    assert out["surface_mass"] == pytest.approx(np.pi, rel=0.03)
    assert out["pass"]
