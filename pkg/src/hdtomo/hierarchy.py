"""Hierarchical decomposition of images and parallel-beam measurements.

At level ``K`` the image is tiled into ``n_k x n_k`` patches, ``n_k = 2**(K-1)``.
Patch ``k = n_k * j + i`` covers tile row ``i`` (y) and tile column ``j`` (x).
For each patch the sinogram is shifted along the detector so the patch center
projects to the middle of the detector, and a window of ``n_dct / n_k`` bins is
kept. The result is the measurement needed to reconstruct that patch alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import GeometryError, Image, ImageGrid, ParallelGeometry, Sinogram
from .tomo import backproject_array, fbp_scale, project_array


@dataclass(frozen=True, eq=False)
class DecompositionPlan:
    grid: ImageGrid
    geom: ParallelGeometry
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise GeometryError("decomposition level K must be >= 1")
        n = self.n_k
        bad = [f"{name}={val}" for name, val in
               (("nx", self.grid.nx), ("ny", self.grid.ny), ("n_dct", self.geom.n_dct)) if val % n]
        if bad:
            hints = ", ".join(f"{b} (pad to {-(-int(b.split('=')[1]) // n) * n})" for b in bad)
            raise GeometryError(f"level K={self.K} needs sizes divisible by {n}: {hints}")

    @property
    def n_k(self) -> int:
        return 2 ** (self.K - 1)

    @property
    def J(self) -> int:
        return self.n_k**2

    @property
    def patch_nx(self) -> int:
        return self.grid.nx // self.n_k

    @property
    def patch_ny(self) -> int:
        return self.grid.ny // self.n_k

    @property
    def patch_ndct(self) -> int:
        return self.geom.n_dct // self.n_k

    @property
    def patch_grid(self) -> ImageGrid:
        return ImageGrid(self.patch_nx, self.patch_ny, self.grid.pixel_size)

    @property
    def window_start(self) -> int:
        """First full-detector index of the unshifted window (center index floored)."""
        return (self.geom.n_dct - self.patch_ndct) // 2

    @property
    def patch_geom(self) -> ParallelGeometry:
        n, m = self.geom.n_dct, self.patch_ndct
        shift = self.window_start + (m - 1) / 2.0 - (n - 1) / 2.0
        return self.geom.with_detector(m, self.geom.dct_offset + shift * self.geom.dct_pitch)

    def x_centers(self) -> np.ndarray:
        half = self.grid.nx / 2 - self.grid.nx / 2**self.K
        return self.grid.origin[0] + np.linspace(-half, half, self.n_k) * self.grid.pixel_size

    def y_centers(self) -> np.ndarray:
        half = self.grid.ny / 2 - self.grid.ny / 2**self.K
        return self.grid.origin[1] + np.linspace(-half, half, self.n_k) * self.grid.pixel_size

    def index(self, i: int, j: int) -> int:
        return self.n_k * j + i

    def tile(self, k: int) -> tuple[int, int]:
        """``(i, j)`` tile position of patch ``k``."""
        return k % self.n_k, k // self.n_k

    def centers(self) -> np.ndarray:
        """``(J, 2)`` array of patch centers ``(x, y)`` in mm, in patch order."""
        xs, ys = self.x_centers(), self.y_centers()
        out = np.empty((self.J, 2))
        for k in range(self.J):
            i, j = self.tile(k)
            out[k] = xs[j], ys[i]
        return out

    def tracks(self) -> np.ndarray:
        """Detector coordinate of each patch center per view, shape ``(J, n_views)``."""
        c = self.centers()
        th = self.geom.angles
        return c[:, :1] * np.cos(th)[None, :] + c[:, 1:] * np.sin(th)[None, :]

    def to_dict(self) -> dict:
        return {"K": self.K, "grid": self.grid.to_dict(), "geometry": self.geom.to_dict()}


def plan(grid: ImageGrid, geom: ParallelGeometry, K: int) -> DecompositionPlan:
    return DecompositionPlan(grid, geom, K)


@dataclass(frozen=True, eq=False)
class PatchSet:
    plan: DecompositionPlan
    domain: str  # "projection" or "image"
    data: np.ndarray  # (J, n_views, patch_ndct) or (J, patch_ny, patch_nx)
    filtered: bool = False

    def __post_init__(self):
        p = self.plan
        if self.domain == "projection":
            shape = (p.J, p.geom.n_views, p.patch_ndct)
        elif self.domain == "image":
            shape = (p.J, p.patch_ny, p.patch_nx)
        else:
            raise ValueError(f"unknown patch domain {self.domain!r}")
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != shape:
            raise GeometryError(f"{self.domain} patches have shape {data.shape}, expected {shape}")
        object.__setattr__(self, "data", data)

    def __len__(self):
        return self.data.shape[0]

    def sinogram(self, k: int) -> Sinogram:
        if self.domain != "projection":
            raise ValueError("image-domain patches have no sinogram")
        return Sinogram(self.plan.patch_geom, self.data[k], self.filtered)

    def image(self, k: int) -> Image:
        if self.domain != "image":
            raise ValueError("projection-domain patches have no image")
        return Image(self.plan.patch_grid, self.data[k])


def sample_positions(dp: DecompositionPlan) -> np.ndarray:
    """Fractional full-detector indices read by every patch, ``(J, n_views, patch_ndct)``."""
    base = dp.window_start + np.arange(dp.patch_ndct)
    return base[None, None, :] + (dp.tracks() / dp.geom.dct_pitch)[:, :, None]


def decompose_projection_array(data: np.ndarray, dp: DecompositionPlan) -> np.ndarray:
    data = np.ascontiguousarray(data, dtype=np.float64)
    pos = sample_positions(dp)
    return np.stack([_kernels.shift_rows(data, pos[k]) for k in range(dp.J)])


def decompose_projection(sino: Sinogram, dp: DecompositionPlan) -> PatchSet:
    """Align the sinogram on each patch's detector track and cut its window.

    Shifts use linear interpolation along the detector; samples that fall off
    the detector read zero. Content outside the window is dropped.
    """
    geom = sino.require_parallel("decompose_projection")
    if geom != dp.geom:
        raise GeometryError("sinogram geometry does not match the decomposition plan")
    return PatchSet(dp, "projection", decompose_projection_array(sino.data, dp), sino.filtered)


def decompose_image_array(data: np.ndarray, dp: DecompositionPlan) -> np.ndarray:
    n, py, px = dp.n_k, dp.patch_ny, dp.patch_nx
    # (i, py, j, px) -> (j, i, py, px) so the flat index is n_k * j + i
    tiles = data.reshape(n, py, n, px).transpose(2, 0, 1, 3)
    return np.ascontiguousarray(tiles.reshape(n * n, py, px))


def compose_image_array(patches: np.ndarray, dp: DecompositionPlan) -> np.ndarray:
    n, py, px = dp.n_k, dp.patch_ny, dp.patch_nx
    tiles = patches.reshape(n, n, py, px).transpose(1, 2, 0, 3)
    return np.ascontiguousarray(tiles.reshape(n * py, n * px))


def decompose_image(img: Image, dp: DecompositionPlan) -> PatchSet:
    if img.grid.shape != dp.grid.shape:
        raise GeometryError(f"image shape {img.grid.shape} does not match plan grid {dp.grid.shape}")
    return PatchSet(dp, "image", decompose_image_array(img.data, dp))


def compose_image(patches: PatchSet) -> Image:
    if patches.domain != "image":
        raise ValueError("compose_image needs image-domain patches")
    return Image(patches.plan.grid, compose_image_array(patches.data, patches.plan))


def patch_backproject_array(data: np.ndarray, dp: DecompositionPlan) -> np.ndarray:
    """FBP-normalised backprojection of each filtered patch sinogram onto the patch grid."""
    g, geom = dp.patch_grid, dp.patch_geom
    scale = fbp_scale(geom, g)
    return np.stack([backproject_array(d, geom, g) * scale for d in data])


def patch_project_array(images: np.ndarray, dp: DecompositionPlan) -> np.ndarray:
    """Transpose of :func:`patch_backproject_array` (scaled Joseph projection per patch)."""
    g, geom = dp.patch_grid, dp.patch_geom
    scale = fbp_scale(geom, g)
    return np.stack([project_array(im, g, geom) * scale for im in images])


def patch_backproject(patches: PatchSet, dp: DecompositionPlan | None = None) -> PatchSet:
    dp = patches.plan if dp is None else dp
    if patches.domain != "projection":
        raise ValueError("patch_backproject needs projection-domain patches")
    if not patches.filtered:
        raise ValueError("patch_backproject expects filtered patches")
    return PatchSet(dp, "image", patch_backproject_array(patches.data, dp))
