import numpy as np
import pytest

from divmeasure.errors import BoundsError, ResolutionError
from divmeasure.grid import (GridSpec, MollifierKernel, ScalarGridField, as_mask, gradient, gradient_mass,
                             mollify, rasterize)
from divmeasure.shapes import Ball


def test_from_bounds(coarse_grid):
    assert coarse_grid.cells == (256, 256)
    assert np.allclose(coarse_grid.hi, [2.0, 2.0])
    assert coarse_grid.cell_volume == pytest.approx(1 / 64 ** 2)


def test_centers_and_index(coarse_grid):
    c = coarse_grid.centers()
    assert c.shape == (256, 256, 2)
    assert c[0, 0, 0] == pytest.approx(-2 + 0.5 / 64)
    assert c[3, 7, 1] == pytest.approx(-2 + 7.5 / 64)
    idx = coarse_grid.index_of(np.array([[c[3, 7, 0], c[3, 7, 1]], [10.0, -10.0]]))
    assert idx.tolist() == [[3, 7], [255, 0]]


def test_too_few_cells():
    with pytest.raises(ValueError):
        GridSpec(2, (0.0, 0.0), 1.0, (3, 8))


@pytest.mark.parametrize("kind", ["smooth_bump", "plateau"])
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_stencil_normalized(kind, dim):
    stencil = MollifierKernel(kind, 0.1).stencil(1 / 64, dim)
    assert stencil.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(stencil >= 0)


def test_plateau_profile_is_flat_inside():
    k = MollifierKernel("plateau", 1.0)
    assert np.allclose(k.profile(np.array([0.0, 0.25, 0.5]), dim=2), 1.0)
    assert k.profile(np.array([1.0]), dim=2)[0] == pytest.approx(0.0, abs=1e-12)


def test_unknown_kernel():
    with pytest.raises(ValueError):
        MollifierKernel("gaussian", 0.1)


def test_rasterize_margin(coarse_grid):
    with pytest.raises(BoundsError):
        rasterize(Ball([0.0, 0.0], 1.9), coarse_grid, margin=0.2)
    chi = rasterize(Ball([0.0, 0.0], 1.0), coarse_grid, margin=0.2)
    assert set(np.unique(chi.values)) == {0.0, 1.0}
    assert chi.total() == pytest.approx(np.pi, rel=0.01)


def test_mollify_resolution(coarse_grid):
    chi = rasterize(Ball([0.0, 0.0], 1.0), coarse_grid)
    with pytest.raises(ResolutionError):
        mollify(chi, MollifierKernel("smooth_bump", 1 / 64))


def test_mollify_preserves_mass_and_range(coarse_grid):
    chi = rasterize(Ball([0.0, 0.0], 1.0), coarse_grid, margin=0.4)
    u = mollify(chi, MollifierKernel("smooth_bump", 0.2))
    assert u.values.min() >= 0.0 and u.values.max() <= 1.0
    assert u.total() == pytest.approx(chi.total(), abs=1e-9)


def test_gradient_of_linear_function(coarse_grid):
    x = coarse_grid.centers()[..., 0]
    g = gradient(ScalarGridField(coarse_grid, x))
    assert np.allclose(g.values[..., 0], 1.0)
    assert np.allclose(g.values[..., 1], 0.0)


def test_gradient_mass_of_mollified_disk(coarse_grid):
    chi = rasterize(Ball([0.0, 0.0], 1.0), coarse_grid, margin=0.4)
    u = mollify(chi, MollifierKernel("smooth_bump", 0.2))
    assert gradient_mass(u) == pytest.approx(2 * np.pi, rel=0.03)


def test_as_mask(coarse_grid):
    field = ScalarGridField(coarse_grid, np.full(coarse_grid.shape, 0.7))
    assert as_mask(field).all()
    assert not as_mask(np.zeros(coarse_grid.shape)).any()


def test_sample_interpolates(coarse_grid):
    x = coarse_grid.centers()[..., 0]
    field = ScalarGridField(coarse_grid, x)
    assert field.sample(np.array([[0.123, -0.5]]))[0] == pytest.approx(0.123, abs=1e-12)
