"""Hankel rank, Fourier sparsity and bowtie-support measurements on sinograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ImageGrid, ParallelGeometry, Sinogram
from .hierarchy import decompose_projection_array, plan
from .phantoms import PhantomSpec, analytic_sinogram
from .tomo import ramp_filter_array


@dataclass(frozen=True, eq=False)
class HankelMatrix:
    """Wrap-around Hankel embedding ``H[i, j] = f[(i + j) mod n]`` of shape ``(n, d)``."""

    signal: np.ndarray
    d: int

    @property
    def n(self) -> int:
        return self.signal.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        idx = (np.arange(self.n)[:, None] + np.arange(self.d)[None, :]) % self.n
        return self.signal[idx]


def hankel(signal, d: int) -> HankelMatrix:
    signal = np.asarray(signal)
    if signal.ndim != 1:
        raise ValueError("hankel expects a 1-D signal")
    if not 1 <= d <= signal.shape[0]:
        raise ValueError(f"pencil parameter d={d} must lie in [1, {signal.shape[0]}]")
    return HankelMatrix(signal, int(d))


def numerical_rank(H: HankelMatrix | np.ndarray, rel_tol: float = 1e-6) -> int:
    """Number of singular values above ``rel_tol * sigma_max``."""
    m = H.matrix if isinstance(H, HankelMatrix) else np.asarray(H)
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def fourier_support_count(signal, rel_tol: float = 1e-6) -> int:
    """Number of DFT bins whose magnitude exceeds ``rel_tol`` times the largest."""
    mag = np.abs(np.fft.fft(np.asarray(signal)))
    top = mag.max(initial=0.0)
    if top == 0:
        return 0
    return int(np.count_nonzero(mag > rel_tol * top))


# --- bowtie support --------------------------------------------------------

def spectral_axes(n_views: int, n_dct: int) -> tuple[np.ndarray, np.ndarray]:
    """Angular harmonic index and detector frequency (rad/sample), FFT order.

    The view axis is periodic over 2 pi, so its frequency is the integer harmonic.
    """
    m = np.fft.fftfreq(n_views) * n_views
    w = 2.0 * np.pi * np.fft.fftfreq(n_dct)
    return m, w


def essential_bandlimit(data: np.ndarray, energy: float = 0.999) -> float:
    """Smallest detector frequency (rad/sample) holding ``energy`` of the per-view spectra."""
    spec = np.abs(np.fft.fft(data, axis=-1)) ** 2
    per_freq = spec.reshape(-1, spec.shape[-1]).sum(axis=0)
    w = np.abs(2.0 * np.pi * np.fft.fftfreq(spec.shape[-1]))
    order = np.argsort(w, kind="stable")
    total = per_freq.sum()
    if total == 0:
        return 0.0
    cum = np.cumsum(per_freq[order]) / total
    hit = np.searchsorted(cum, energy - 1e-15)
    return float(w[order][min(hit, w.size - 1)])


@dataclass(frozen=True, eq=False)
class BowtieMask:
    """Boolean mask over the 2-D sinogram spectrum (FFT order).

    True where ``|omega_u| <= bandlimit`` and
    ``|m| <= n_obj * |omega_u| + core``, with ``m`` the angular harmonic,
    ``omega_u`` in rad/sample and ``n_obj`` the object radius in detector samples.
    """

    n_views: int
    n_dct: int
    n_obj: float
    bandlimit: float = np.pi
    core: float = 1.0

    @property
    def mask(self) -> np.ndarray:
        m, w = spectral_axes(self.n_views, self.n_dct)
        aw = np.abs(w)[None, :]
        return (aw <= self.bandlimit + 1e-12) & (np.abs(m)[:, None] <= self.n_obj * aw + self.core)

    @property
    def n_samples(self) -> int:
        return int(self.mask.sum())

    @property
    def area(self) -> float:
        """Mask area in (harmonic x rad/sample) units: samples times ``2 pi / n_dct``."""
        return self.n_samples * 2.0 * np.pi / self.n_dct

    @property
    def continuous_area(self) -> float:
        """Wedge area ``2 B^2 N`` plus the core strip, in (harmonic x rad/sample) units."""
        b = min(self.bandlimit, np.pi)
        return 2.0 * b**2 * self.n_obj + 2.0 * b * (2.0 * self.core + 1.0)


def bowtie_mask(n_views: int, n_dct: int, n_obj: float, bandlimit: float = np.pi,
                core: float = 1.0) -> BowtieMask:
    return BowtieMask(n_views, n_dct, float(n_obj), float(bandlimit), float(core))


def bowtie_energy_fraction(sino: Sinogram | np.ndarray, n_obj: float, bandlimit: float | None = np.pi,
                           core: float = 1.0) -> float:
    """Fraction of 2-D spectral energy lying outside the bowtie of radius ``n_obj``.

    ``bandlimit=None`` uses :func:`essential_bandlimit`.
    """
    data = sino.data if isinstance(sino, Sinogram) else np.asarray(sino, dtype=np.float64)
    power = np.abs(np.fft.fft2(data)) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    b = essential_bandlimit(data) if bandlimit is None else bandlimit
    m = bowtie_mask(data.shape[0], data.shape[1], n_obj, b, core).mask
    return float(power[~m].sum() / total)


def patch_radius(grid: ImageGrid, K: int, pitch: float = 1.0) -> float:
    """Object radius of a level-``K`` patch in detector samples: ``N / 2**(K-1)``."""
    return grid.radius / pitch / 2 ** (K - 1)


@dataclass
class RankRow:
    K: int
    n_patches: int
    support_count: float
    mask_area: float
    bandlimit: float
    out_of_bowtie: float


def rank_report(phantom: PhantomSpec, grid: ImageGrid, geom: ParallelGeometry, levels=(1, 2, 3, 4, 5),
                rel_tol: float = 1e-6, filtered: bool = True) -> list[RankRow]:
    """Per-level spectral summary of decomposed measurements.

    ``support_count`` is the mean per-view Fourier support size of the patches;
    ``mask_area`` the bowtie area for the patch radius, using one bandlimit (the
    essential bandlimit of the undecomposed data) for every level so that only
    the radius changes between rows. Empty patches count as zero.
    """
    p = analytic_sinogram(phantom, geom).data
    data = ramp_filter_array(p, geom.dct_pitch) if filtered else p
    band = essential_bandlimit(data) if np.any(data) else 0.0
    rows = []
    for K in levels:
        dp = plan(grid, geom, K)
        patches = decompose_projection_array(data, dp)
        n_obj = patch_radius(grid, K, geom.dct_pitch)
        counts, fracs = [], []
        for patch in patches:
            if not np.any(patch):
                counts.append(0.0)
                fracs.append(0.0)
                continue
            counts.append(np.mean([fourier_support_count(row, rel_tol) for row in patch]))
            fracs.append(bowtie_energy_fraction(patch, n_obj))
        area = bowtie_mask(geom.n_views, dp.patch_ndct, n_obj, band).area if band > 0 else 0.0
        rows.append(RankRow(K, dp.J, float(np.mean(counts)), float(area), band,
                            float(np.max(fracs))))
    return rows


def format_rank_report(rows: list[RankRow], sep: str = ",") -> str:
    head = sep.join(["K", "patches", "support_count", "mask_area", "bandlimit", "max_out_of_bowtie"])
    lines = [head]
    for r in rows:
        lines.append(sep.join([str(r.K), str(r.n_patches), f"{r.support_count:.4f}",
                               f"{r.mask_area:.4f}", f"{r.bandlimit:.4f}", f"{r.out_of_bowtie:.4f}"]))
    return "\n".join(lines)
