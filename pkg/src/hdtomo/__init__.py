"""Hierarchical decomposition for sparse-view parallel-beam CT.

Numerics (projectors, filters, decomposition, spectral analysis, TV
reconstruction, metrics) import eagerly; the torch-based networks live in
:mod:`hdtomo.nn` and load on demand.
"""

from .geometry import FanGeometry, GeometryError, Image, ImageGrid, ParallelGeometry, Sinogram, uniform_angles
from .tomo import backproject, fbp, filtered_backproject, project, ramp_filter, rebin_fan_to_parallel
from .phantoms import PhantomSpec, Ellipse, analytic_sinogram, analytic_fan_sinogram, interior_mask, rasterize
from .hierarchy import (DecompositionPlan, PatchSet, compose_image, decompose_image, decompose_projection,
                        patch_backproject, plan)
from .sparseview import ViewMask, SparseInputs, cubic_view_interp, generate_inputs, make_mask, sparse_fbp
from .spectral import (BowtieMask, bowtie_energy_fraction, fourier_support_count, hankel, numerical_rank,
                       rank_report)
from .mbir import DivergenceError, TVConfig, reconstruct_tv
from .metrics import MetricReport, evaluate, nrmse, psnr, ssim

__version__ = "0.1.0"
