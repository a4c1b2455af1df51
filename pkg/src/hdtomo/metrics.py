"""NRMSE, PSNR and SSIM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter


def _pair(x, ref, mask=None):
    x = np.asarray(getattr(x, "data", x), dtype=np.float64)
    ref = np.asarray(getattr(ref, "data", ref), dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        return x[mask], ref[mask]
    return x, ref


def _data_range(ref, data_range):
    if data_range is None:
        data_range = float(ref.max() - ref.min())
        if data_range == 0:
            raise ValueError("reference is constant; pass data_range explicitly")
    return data_range


def nrmse(x, ref, mask=None) -> float:
    """``||x - ref|| / ||ref||``."""
    x, ref = _pair(x, ref, mask)
    denom = np.linalg.norm(ref)
    if denom == 0:
        return 0.0 if not np.any(x) else float("inf")
    return float(np.linalg.norm(x - ref) / denom)


def psnr(x, ref, data_range: float | None = None, mask=None) -> float:
    """``20 log10(data_range / RMSE)``; ``inf`` for identical inputs.

    ``data_range`` defaults to ``max(ref) - min(ref)``.
    """
    x, ref = _pair(x, ref, mask)
    data_range = _data_range(ref, data_range)
    mse = np.mean((x - ref) ** 2)
    if mse == 0:
        return float("inf")
    return float(20.0 * np.log10(data_range / np.sqrt(mse)))


def ssim(x, ref, data_range: float | None = None, win_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity with a Gaussian window.

    Local statistics use population (biased) moments; the map is averaged over
    the region where the window fits entirely inside the image.
    """
    x, ref = _pair(x, ref)
    data_range = _data_range(ref, data_range)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    radius = (win_size - 1) // 2
    filt = dict(sigma=sigma, truncate=radius / sigma, mode="reflect")
    mx = gaussian_filter(x, **filt)
    my = gaussian_filter(ref, **filt)
    sxx = gaussian_filter(x * x, **filt) - mx * mx
    syy = gaussian_filter(ref * ref, **filt) - my * my
    sxy = gaussian_filter(x * ref, **filt) - mx * my
    smap = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx**2 + my**2 + c1) * (sxx + syy + c2))
    if min(smap.shape) > 2 * radius:
        smap = smap[radius:-radius, radius:-radius]
    return float(smap.mean())


@dataclass(frozen=True)
class MetricReport:
    nrmse: float
    psnr: float
    ssim: float

    def format(self, sep: str | None = None) -> str:
        """Four decimals; with ``sep`` the bare values are joined for tables."""
        vals = (self.nrmse, self.psnr, self.ssim)
        if sep is not None:
            return sep.join(f"{v:.4f}" for v in vals)
        return "NRMSE={:.4f}  PSNR={:.4f} dB  SSIM={:.4f}".format(*vals)


def evaluate(x, ref, data_range: float | None = None, mask=None) -> MetricReport:
    return MetricReport(nrmse(x, ref, mask), psnr(x, ref, data_range, mask), ssim(x, ref, data_range))
