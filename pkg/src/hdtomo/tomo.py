"""Parallel-beam projection, backprojection, ramp filtering, FBP and fan rebinning."""

from __future__ import annotations

import numpy as np
from scipy.fft import irfft, rfft

from . import _kernels
from .geometry import FanGeometry, GeometryError, Image, ImageGrid, ParallelGeometry, Sinogram


def _grid_start(grid: ImageGrid) -> tuple[float, float]:
    x0 = grid.origin[0] - 0.5 * (grid.nx - 1) * grid.pixel_size
    y0 = grid.origin[1] - 0.5 * (grid.ny - 1) * grid.pixel_size
    return x0, y0


def project_array(data: np.ndarray, grid: ImageGrid, geom: ParallelGeometry) -> np.ndarray:
    x0, y0 = _grid_start(grid)
    return _kernels.joseph_project(np.ascontiguousarray(data, dtype=np.float64), geom.angles,
                                   geom.u_centers(), x0, y0, float(grid.pixel_size))


def backproject_array(data: np.ndarray, geom: ParallelGeometry, grid: ImageGrid) -> np.ndarray:
    x0, y0 = _grid_start(grid)
    return _kernels.joseph_backproject(np.ascontiguousarray(data, dtype=np.float64), geom.angles,
                                       geom.u_centers(), x0, y0, float(grid.pixel_size),
                                       grid.ny, grid.nx)


def project(image: Image, geom: ParallelGeometry) -> Sinogram:
    """Line integrals of ``image`` along every ray of ``geom`` (Joseph interpolation).

    Values are in attenuation x mm. The operator is linear and its exact
    transpose is :func:`backproject`.
    """
    if not isinstance(geom, ParallelGeometry):
        raise GeometryError("project needs a ParallelGeometry")
    return Sinogram(geom, project_array(image.data, image.grid, geom))


def backproject(sino: Sinogram, grid: ImageGrid) -> Image:
    """Transpose of :func:`project`. No filtering or angular scaling is applied."""
    geom = sino.require_parallel("backproject")
    return Image(grid, backproject_array(sino.data, geom, grid))


def ramp_kernel(n: int, pitch: float) -> np.ndarray:
    """Band-limited Ram-Lak taps for offsets ``-(n-1) .. n-1``."""
    offs = np.arange(-(n - 1), n)
    h = np.zeros(offs.shape)
    h[offs == 0] = 1.0 / (4.0 * pitch**2)
    odd = offs % 2 == 1
    h[odd] = -1.0 / (np.pi * offs[odd] * pitch) ** 2
    return h


def _padded_size(n: int) -> int:
    return max(64, int(2 ** np.ceil(np.log2(2 * n))))


def ramp_response(n_dct: int, pitch: float, window: str | None = None) -> np.ndarray:
    """Real frequency response of the padded ramp convolution (rfft layout)."""
    size = _padded_size(n_dct)
    h = np.zeros(size)
    taps = ramp_kernel(size // 2 + 1, pitch)
    centre = size // 2
    h[: centre + 1] = taps[centre:]
    h[-(centre - 1):] = taps[1:centre]
    resp = np.real(rfft(h)) * pitch
    if window == "hann":
        freq = np.arange(resp.size) / size
        resp = resp * 0.5 * (1.0 + np.cos(2.0 * np.pi * freq))
    elif window not in (None, "none", "ram-lak"):
        raise ValueError(f"unknown filter window {window!r}")
    return resp


def ramp_filter_array(data: np.ndarray, pitch: float, window: str | None = None) -> np.ndarray:
    n = data.shape[-1]
    size = _padded_size(n)
    resp = ramp_response(n, pitch, window)
    return irfft(rfft(data, n=size, axis=-1) * resp, n=size, axis=-1)[..., :n]


def ramp_filter(sino: Sinogram, window: str | None = None) -> Sinogram:
    """Convolve every view with the discrete ramp kernel (``q = F(p)``).

    Linear convolution: views are zero padded to at least twice their length
    before the FFT, so there is no circular wrap.
    """
    geom = sino.require_parallel("ramp_filter")
    if sino.filtered:
        raise ValueError("sinogram is already filtered")
    return Sinogram(geom, ramp_filter_array(sino.data, geom.dct_pitch, window), filtered=True)


def fbp_scale(geom: ParallelGeometry, grid: ImageGrid) -> float:
    """Angular weight turning a backprojection of filtered data into an image.

    Views cover 2 pi, so conjugate pairs are averaged: ``pi / n_views``. The
    Joseph transpose spreads each sample over ``pixel_size**2 / dct_pitch``,
    which is divided out.
    """
    return np.pi / geom.n_views * geom.dct_pitch / grid.pixel_size**2


def filtered_backproject(q: Sinogram, grid: ImageGrid) -> Image:
    """Backproject already-filtered data with FBP normalisation."""
    geom = q.require_parallel("filtered_backproject")
    if not q.filtered:
        raise ValueError("filtered_backproject expects filtered data")
    return Image(grid, backproject_array(q.data, geom, grid) * fbp_scale(geom, grid))


def fbp(sino: Sinogram, grid: ImageGrid, window: str | None = None) -> Image:
    return filtered_backproject(ramp_filter(sino, window), grid)


def rebin_fan_to_parallel(sino: Sinogram, target: ParallelGeometry) -> tuple[Sinogram, np.ndarray]:
    """Resample a flat-detector fan sinogram onto a parallel grid.

    Each target ray ``(theta, u)`` maps to source angle
    ``beta = theta - arcsin(u / source_to_iso)`` and detector position
    ``s = source_to_dct * tan(arcsin(u / source_to_iso))``; the fan data is
    interpolated bilinearly, periodic in ``beta``. Samples whose ``s`` leaves the
    detector are clamped to the edge and marked ``False`` in the returned
    coverage mask.
    """
    fan = sino.geometry
    if not isinstance(fan, FanGeometry):
        raise GeometryError("rebin_fan_to_parallel needs a fan-beam sinogram")
    n_views = fan.n_views
    dbeta = 2.0 * np.pi / n_views
    if not np.allclose(fan.angles, np.arange(n_views) * dbeta, atol=1e-12):
        raise GeometryError("rebinning needs uniformly sampled fan views over [0, 2 pi)")

    u = target.u_centers()[None, :]
    theta = target.angles[:, None]
    ratio = u / fan.source_to_iso
    inside = np.abs(ratio) < 1.0
    gamma = np.arcsin(np.clip(ratio, -1.0, 1.0))
    beta = theta - gamma
    s = fan.source_to_dct * np.tan(np.where(inside, gamma, 0.0))

    fv = np.mod(beta / dbeta, n_views)
    v0 = np.floor(fv).astype(np.int64)
    tv = fv - v0
    v0 %= n_views
    v1 = (v0 + 1) % n_views

    fs = (s - fan.dct_offset) / fan.dct_pitch + (fan.n_dct - 1) / 2.0
    covered = inside & (fs >= 0.0) & (fs <= fan.n_dct - 1)
    fs = np.clip(fs, 0.0, fan.n_dct - 1)
    s0 = np.minimum(np.floor(fs).astype(np.int64), fan.n_dct - 2) if fan.n_dct > 1 else np.zeros(fs.shape, np.int64)
    ts = fs - s0 if fan.n_dct > 1 else np.zeros(fs.shape)
    s1 = np.minimum(s0 + 1, fan.n_dct - 1)

    d = sino.data
    out = ((1 - tv) * ((1 - ts) * d[v0, s0] + ts * d[v0, s1])
           + tv * ((1 - ts) * d[v1, s0] + ts * d[v1, s1]))
    out = np.where(inside, out, 0.0)
    return Sinogram(target, out), np.broadcast_to(covered, out.shape).copy()
