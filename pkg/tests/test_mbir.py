import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdtomo.geometry import Image, ImageGrid, ParallelGeometry, Sinogram
from hdtomo.mbir import TVConfig, TVObjective, reconstruct_tv, tv_gradient, tv_value
from hdtomo.metrics import nrmse
from hdtomo.phantoms import PhantomSpec, analytic_sinogram, rasterize
from hdtomo.sparseview import ViewMask
from hdtomo.tomo import fbp, project


def test_config_validation():
    with pytest.raises(ValueError):
        TVConfig(lam=-1.0)
    with pytest.raises(ValueError):
        TVConfig(eps=0.0)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.floats(0.0, 2.0))
def test_objective_gradient_matches_central_differences(seed, lam):
    rng = np.random.default_rng(seed)
    grid = ImageGrid(16, 16)
    geom = ParallelGeometry(12, 24)
    kept = np.arange(12) % 3 == 0
    obj = TVObjective(rng.standard_normal((12, 24)), kept, grid, geom, lam, 0.1)
    f = rng.standard_normal(grid.shape)
    g = obj.gradient(f)
    h = 1e-6
    for _ in range(10):
        i, j = rng.integers(0, 16, 2)
        e = np.zeros_like(f)
        e[i, j] = h
        fd = (obj.value(f + e) - obj.value(f - e)) / (2 * h)
        assert abs(fd - g[i, j]) <= 1e-4 * max(abs(fd), 1e-3 * np.abs(g).max())


def test_tv_gradient_of_constant_is_zero():
    assert not tv_gradient(np.full((8, 8), 3.0), 1e-3).any()
    assert tv_value(np.full((8, 8), 3.0), 1e-3) == pytest.approx(64e-3)


def test_zero_data_gives_zero_image():
    grid = ImageGrid(16, 16)
    geom = ParallelGeometry(16, 24)
    img, trace = reconstruct_tv(Sinogram.zeros(geom), ViewMask(2, 16), grid, TVConfig(lam=1.0))
    assert not img.data.any()


def test_least_squares_full_view_improves_on_fbp():
    grid = ImageGrid(32, 32)
    geom = ParallelGeometry(48, 48)
    f = rasterize(PhantomSpec.shepp_logan(grid.radius), grid)
    p = project(f, geom)
    img, trace = reconstruct_tv(p, ViewMask(1, 48), grid, TVConfig(lam=0.0, max_iters=60, tol=0))
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert nrmse(img.data, f.data) < nrmse(fbp(p, grid).data, f.data)


def test_unmeasured_entries_are_ignored():
    grid = ImageGrid(24, 24)
    geom = ParallelGeometry(32, 36)
    p = analytic_sinogram(PhantomSpec.disk(8.0, center=(2.0, 1.0)), geom)
    mask = ViewMask(4, 32)
    noisy = p.data.copy()
    noisy[~mask.kept] = np.random.default_rng(0).standard_normal(noisy[~mask.kept].shape) * 50
    cfg = TVConfig(lam=0.5, max_iters=15)
    a, ta = reconstruct_tv(p.with_data(mask.apply(p.data)), mask, grid, cfg)
    b, tb = reconstruct_tv(p.with_data(noisy), mask, grid, cfg)
    assert np.array_equal(a.data, b.data) and ta == tb


def test_rejects_filtered_input():
    geom = ParallelGeometry(8, 12)
    with pytest.raises(ValueError):
        reconstruct_tv(Sinogram.zeros(geom, filtered=True), ViewMask(2, 8), ImageGrid(8, 8))
