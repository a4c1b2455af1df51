"""Sparse-view masks and the input-generation pipeline for the networks.

Pipeline for a full-view sinogram ``p`` and view mask ``M``::

    p_S   = M * p                       zero-filled sparse measurement
    f_S   = S * FBP(p_S)                sparse FBP, scaled to full-view level
    p_hat = R(f_S)                      reprojection
    p_bar = (1 - M) * p_hat + M * p     measured views kept exactly
    q_S   = ramp(p_bar)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import GeometryError, Image, ImageGrid, ParallelGeometry, Sinogram
from .tomo import fbp, project, ramp_filter

DS_FACTORS = (1, 2, 3, 4, 6, 8, 12)
TRAIN_DS_FACTORS = (2, 3, 4, 6, 8, 12)


@dataclass(frozen=True, eq=False)
class ViewMask:
    ds_factor: int
    n_views: int

    def __post_init__(self):
        if self.ds_factor not in DS_FACTORS:
            raise ValueError(f"ds_factor must be one of {DS_FACTORS}, got {self.ds_factor}")
        if self.n_views % self.ds_factor:
            raise GeometryError(f"n_views={self.n_views} is not divisible by ds_factor={self.ds_factor}")

    @property
    def kept(self) -> np.ndarray:
        m = np.zeros(self.n_views, dtype=bool)
        m[:: self.ds_factor] = True
        return m

    @property
    def n_kept(self) -> int:
        return self.n_views // self.ds_factor

    def apply(self, data: np.ndarray) -> np.ndarray:
        """Zero the rows of unmeasured views."""
        return np.where(self.kept[:, None], data, 0.0)

    def merge(self, measured: np.ndarray, estimate: np.ndarray) -> np.ndarray:
        """Measured rows from ``measured``, the rest from ``estimate``."""
        return np.where(self.kept[:, None], measured, estimate)

    def to_dict(self) -> dict:
        return {"ds_factor": self.ds_factor, "n_views": self.n_views}


def make_mask(geom: ParallelGeometry, ds_factor: int) -> ViewMask:
    return ViewMask(int(ds_factor), geom.n_views)


def random_ds_factor(rng: np.random.Generator, choices=TRAIN_DS_FACTORS) -> int:
    return int(rng.choice(choices))


@dataclass(frozen=True, eq=False)
class SparseInputs:
    mask: ViewMask
    p_s: Sinogram
    f_s: Image
    p_bar: Sinogram
    q_s: Sinogram


def sparse_fbp(p_s: Sinogram, mask: ViewMask, grid: ImageGrid) -> Image:
    """FBP of zero-filled sparse data, scaled by the downsampling factor."""
    img = fbp(p_s, grid)
    if mask.ds_factor == 1:
        return img
    return img.with_data(img.data * mask.ds_factor)


def generate_inputs(p: Sinogram, mask: ViewMask, grid: ImageGrid) -> SparseInputs:
    geom = p.require_parallel("generate_inputs")
    if p.filtered:
        raise ValueError("generate_inputs expects unfiltered data")
    if mask.n_views != geom.n_views:
        raise GeometryError("mask and sinogram disagree on the number of views")
    p_s = p.with_data(mask.apply(p.data))
    f_s = sparse_fbp(p_s, mask, grid)
    if mask.ds_factor == 1:
        p_bar = p
    else:
        p_hat = project(f_s, geom)
        p_bar = p.with_data(mask.merge(p.data, p_hat.data))
    return SparseInputs(mask, p_s, f_s, p_bar, ramp_filter(p_bar))


def cubic_view_interp(p_s: Sinogram, mask: ViewMask) -> Sinogram:
    """Fill unmeasured views by periodic cubic splines along the view axis."""
    if mask.ds_factor == 1:
        return p_s.with_data(p_s.data.copy())
    angles = p_s.geometry.angles
    kept = mask.kept
    x = np.append(angles[kept], angles[kept][0] + 2.0 * np.pi)
    y = p_s.data[kept]
    y = np.vstack([y, y[:1]])
    spline = CubicSpline(x, y, axis=0, bc_type="periodic")
    est = spline(np.where(angles < x[0], angles + 2.0 * np.pi, angles))
    return p_s.with_data(mask.merge(p_s.data, est))
