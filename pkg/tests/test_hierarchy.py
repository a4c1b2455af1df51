import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdtomo.geometry import GeometryError, Image, ImageGrid, ParallelGeometry, Sinogram
from hdtomo.hierarchy import (compose_image, compose_image_array, decompose_image, decompose_image_array,
                              decompose_projection, patch_backproject, patch_backproject_array,
                              patch_project_array, plan, PatchSet)
from hdtomo.metrics import nrmse
from hdtomo.phantoms import Ellipse, PhantomSpec, analytic_sinogram, interior_mask
from hdtomo.tomo import fbp, filtered_backproject, ramp_filter


def test_plan_k1():
    dp = plan(ImageGrid(64, 64), ParallelGeometry(32, 96), 1)
    assert dp.J == 1 and dp.patch_ndct == 96
    np.testing.assert_array_equal(dp.centers(), [[0.0, 0.0]])


def test_plan_k3_sizes():
    dp = plan(ImageGrid(512, 512), ParallelGeometry(768, 768), 3)
    assert dp.J == 16 and dp.patch_ndct == 192 and dp.patch_nx == 128


def test_plan_k5_sizes():
    dp = plan(ImageGrid(512, 512), ParallelGeometry(768, 768), 5)
    assert dp.J == 256 and (dp.patch_ny, dp.patch_nx) == (32, 32) and dp.patch_ndct == 48


def test_plan_centers_are_tile_centers():
    grid = ImageGrid(64, 32, 0.5, origin=(3.0, -1.0))
    dp = plan(grid, ParallelGeometry(8, 64), 3)
    xs, ys = grid.x_centers(), grid.y_centers()
    for k in range(dp.J):
        i, j = dp.tile(k)
        cx = xs[j * dp.patch_nx:(j + 1) * dp.patch_nx].mean()
        cy = ys[i * dp.patch_ny:(i + 1) * dp.patch_ny].mean()
        np.testing.assert_allclose(dp.centers()[k], [cx, cy], atol=1e-12)
    c = dp.centers() - np.array(grid.origin)
    np.testing.assert_allclose(np.sort(c[:, 0]), np.sort(-c[:, 0]), atol=1e-12)


def test_plan_rejects_indivisible_sizes_with_hint():
    with pytest.raises(GeometryError, match="pad to 184"):
        plan(ImageGrid(128, 128), ParallelGeometry(16, 182), 3)
    with pytest.raises(GeometryError):
        plan(ImageGrid(64, 64), ParallelGeometry(16, 64), 0)


def test_decompose_projection_k1_is_identity(rng):
    geom = ParallelGeometry(12, 40)
    p = Sinogram(geom, rng.standard_normal((12, 40)))
    ps = decompose_projection(p, plan(ImageGrid(40, 40), geom, 1))
    assert np.array_equal(ps.data[0], p.data)


def test_decompose_projection_matches_np_interp(rng):
    grid = ImageGrid(32, 32, 0.8)
    geom = ParallelGeometry(10, 48, 0.9, 0.3)
    dp = plan(grid, geom, 3)
    p = rng.standard_normal((10, 48))
    ps = decompose_projection(Sinogram(geom, p), dp)
    u_full = geom.u_centers()
    u_patch = dp.patch_geom.u_centers()
    for k in range(dp.J):
        for v in range(geom.n_views):
            want = np.interp(u_patch + dp.tracks()[k, v], u_full, p[v], left=0.0, right=0.0)
            np.testing.assert_allclose(ps.data[k, v], want, atol=1e-12)


def _blob(center):
    """Nested disks: a radially decreasing profile that linear interpolation resolves."""
    return PhantomSpec(tuple(Ellipse(tuple(center), (r, r), 0.0, 0.25) for r in (2.0, 4.0, 6.0, 8.0)))


@pytest.mark.parametrize("K", [2, 3])
def test_blob_at_patch_center_is_centred(K):
    grid = ImageGrid(64, 64)
    geom = ParallelGeometry(90, 96)
    dp = plan(grid, geom, K)
    k = dp.J - 2
    full = analytic_sinogram(_blob(dp.centers()[k]), geom)
    patch = decompose_projection(full, dp).data[k]
    oracle = analytic_sinogram(_blob((0.0, 0.0)), dp.patch_geom).data
    assert np.linalg.norm(patch - oracle) / np.linalg.norm(oracle) < 0.03
    # linear interpolation moves the trace centroid by exactly the track shift
    u, uf = dp.patch_geom.u_centers(), geom.u_centers()
    centroid = (patch * u).sum(1) / patch.sum(1)
    full_centroid = (full.data * uf).sum(1) / full.data.sum(1)
    np.testing.assert_allclose(centroid, full_centroid - dp.tracks()[k], atol=1e-9)
    assert np.abs(centroid).max() < 0.1


def test_image_k2_tiling_on_ramp():
    grid = ImageGrid(4, 4)
    img = Image(grid, np.arange(16.0).reshape(4, 4))
    ps = decompose_image(img, plan(grid, ParallelGeometry(4, 4), 2))
    # k = 2 * j + i with i the tile row and j the tile column
    np.testing.assert_array_equal(ps.data[0], [[0, 1], [4, 5]])
    np.testing.assert_array_equal(ps.data[1], [[8, 9], [12, 13]])
    np.testing.assert_array_equal(ps.data[2], [[2, 3], [6, 7]])
    np.testing.assert_array_equal(ps.data[3], [[10, 11], [14, 15]])


def test_image_k1_identity(rng):
    grid = ImageGrid(8, 6)
    f = rng.standard_normal(grid.shape)
    ps = decompose_image(Image(grid, f), plan(grid, ParallelGeometry(4, 8), 1))
    assert np.array_equal(ps.data[0], f)


@settings(max_examples=30, deadline=None)
@given(K=st.integers(1, 5), mx=st.integers(1, 3), my=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_image_round_trip_bit_exact(K, mx, my, seed):
    n = 2 ** (K - 1)
    grid = ImageGrid(n * mx, n * my)
    dp = plan(grid, ParallelGeometry(2, 2 * n), K)
    f = np.random.default_rng(seed).standard_normal(grid.shape)
    assert np.array_equal(compose_image(decompose_image(Image(grid, f), dp)).data, f)
    assert np.array_equal(compose_image_array(decompose_image_array(f, dp), dp), f)


@pytest.mark.parametrize("K", [2, 3, 4])
def test_index_layout_by_delta(K):
    grid = ImageGrid(32, 32)
    dp = plan(grid, ParallelGeometry(4, 32), K)
    for k in range(dp.J):
        i, j = dp.tile(k)
        assert dp.index(i, j) == k
        f = np.zeros(grid.shape)
        f[i * dp.patch_ny + 1, j * dp.patch_nx + 1] = 1.0
        tiles = decompose_image_array(f, dp)
        assert tiles[k, 1, 1] == 1.0 and tiles.sum() == 1.0


def test_patch_backproject_zero_and_unfiltered():
    grid, geom = ImageGrid(16, 16), ParallelGeometry(8, 16)
    dp = plan(grid, geom, 2)
    zero = PatchSet(dp, "projection", np.zeros((4, 8, 8)), filtered=True)
    assert not patch_backproject(zero).data.any()
    with pytest.raises(ValueError):
        patch_backproject(PatchSet(dp, "projection", np.zeros((4, 8, 8)), filtered=False))


def test_patch_backproject_k1_is_filtered_backprojection(rng):
    grid, geom = ImageGrid(24, 24), ParallelGeometry(16, 32)
    q = ramp_filter(Sinogram(geom, rng.standard_normal((16, 32))))
    dp = plan(grid, geom, 1)
    out = compose_image(patch_backproject(decompose_projection(q, dp)))
    np.testing.assert_array_equal(out.data, filtered_backproject(q, grid).data)


@settings(max_examples=15, deadline=None)
@given(K=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_patch_project_is_adjoint(K, seed):
    rng = np.random.default_rng(seed)
    dp = plan(ImageGrid(16, 16), ParallelGeometry(6, 24), K)
    q = rng.standard_normal((dp.J, 6, dp.patch_ndct))
    f = rng.standard_normal((dp.J, dp.patch_ny, dp.patch_nx))
    lhs = np.sum(patch_backproject_array(q, dp) * f)
    rhs = np.sum(q * patch_project_array(f, dp))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs) + 1e-12


def _border_mask(dp, margin=2):
    m = np.zeros((dp.patch_ny, dp.patch_nx), bool)
    m[margin:-margin, margin:-margin] = True
    return compose_image_array(np.broadcast_to(m, (dp.J, *m.shape)).astype(float), dp) > 0


@pytest.mark.parametrize("K", [2, 3])
def test_commutation_with_fbp(K, grid128, shepp128):
    geom = ParallelGeometry(384, 192)
    p = analytic_sinogram(shepp128, geom)
    ref = fbp(p, grid128).data
    dp = plan(grid128, geom, K)
    out = compose_image(patch_backproject(decompose_projection(ramp_filter(p), dp))).data
    mask = interior_mask(shepp128, grid128) & _border_mask(dp)
    assert nrmse(out, ref, mask) < 0.05


def test_disk_k2_patch_fbp_matches_crop():
    grid = ImageGrid(64, 64)
    geom = ParallelGeometry(256, 96)
    spec = PhantomSpec.disk(22.0, center=(4.0, -3.0))
    p = analytic_sinogram(spec, geom)
    dp = plan(grid, geom, 2)
    full = decompose_image_array(fbp(p, grid).data, dp)
    patches = decompose_projection(ramp_filter(p), dp)
    inner = decompose_image_array((interior_mask(spec, grid) & _border_mask(dp)).astype(float), dp) > 0
    for k in range(dp.J):
        img = filtered_backproject(patches.sinogram(k), dp.patch_grid).data
        assert nrmse(img, full[k], inner[k]) < 0.05
