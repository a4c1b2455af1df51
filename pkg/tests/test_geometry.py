import numpy as np
import pytest

from hdtomo.geometry import (FanGeometry, GeometryError, Image, ImageGrid, ParallelGeometry, Sinogram,
                             geometry_from_dict, uniform_angles)


def test_uniform_angles_exclude_endpoint():
    a = uniform_angles(8)
    assert a[0] == 0.0 and a[-1] == pytest.approx(2 * np.pi * 7 / 8)


def test_grid_centers_symmetric():
    g = ImageGrid(4, 3, 0.5)
    np.testing.assert_allclose(g.x_centers(), [-0.75, -0.25, 0.25, 0.75])
    np.testing.assert_allclose(g.y_centers(), [-0.5, 0.0, 0.5])
    assert g.shape == (3, 4) and g.radius == 1.0


@pytest.mark.parametrize("kw", [dict(nx=0, ny=4), dict(nx=4, ny=4, pixel_size=0.0)])
def test_grid_validation(kw):
    with pytest.raises(GeometryError):
        ImageGrid(**kw)


@pytest.mark.parametrize("args", [(0, 4), (4, 0), (4, 4, -1.0)])
def test_parallel_validation(args):
    with pytest.raises(GeometryError):
        ParallelGeometry(*args)


def test_parallel_angles_must_increase():
    with pytest.raises(GeometryError):
        ParallelGeometry(3, 4, angles=[0.0, 0.2, 0.1])
    with pytest.raises(GeometryError):
        ParallelGeometry(3, 4, angles=[0.0, 0.2])


def test_fan_validation():
    with pytest.raises(GeometryError):
        FanGeometry(8, 8, 100.0, 50.0)
    g = FanGeometry(8, 8, 100.0, 200.0)
    with pytest.raises(GeometryError):
        g.check_object_radius(150.0)


def test_with_detector():
    g = ParallelGeometry(16, 32, 0.5)
    h = g.with_detector(8, 3.0)
    assert (h.n_views, h.n_dct, h.dct_pitch, h.dct_offset) == (16, 8, 0.5, 3.0)
    assert np.array_equal(h.angles, g.angles)


@pytest.mark.parametrize("g", [
    ParallelGeometry(12, 7, 0.5, 0.25),
    ParallelGeometry(3, 5, angles=[0.1, 0.5, 2.0]),
    FanGeometry(10, 9, 80.0, 160.0, 0.3, -0.1),
])
def test_geometry_dict_round_trip(g):
    assert geometry_from_dict(g.to_dict()) == g


def test_grid_dict_round_trip():
    g = ImageGrid(5, 7, 0.3, (1.0, -2.0))
    assert ImageGrid.from_dict(g.to_dict()) == g


def test_containers_check_shape_and_finiteness():
    g = ParallelGeometry(4, 6)
    with pytest.raises(GeometryError):
        Sinogram(g, np.zeros((4, 5)))
    with pytest.raises(GeometryError):
        Image(ImageGrid(2, 2), np.array([[0.0, np.nan], [0.0, 0.0]]))
    s = Sinogram.zeros(g, filtered=True)
    assert s.with_data(np.ones((4, 6))).filtered


def test_require_parallel():
    with pytest.raises(GeometryError):
        Sinogram.zeros(FanGeometry(4, 4, 50.0, 100.0)).require_parallel("fbp")
