"""scikit-learn style wrappers over the reconstruction pipelines.

Samples are stacked along the first axis: sinograms as ``(n, n_views, n_dct)``
and images as ``(n, ny, nx)``. Geometry is taken from the array shape plus the
estimator parameters, so the wrappers work on plain arrays.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .geometry import ImageGrid, ParallelGeometry, Sinogram
from .mbir import TVConfig, reconstruct_tv
from .metrics import psnr
from .sparseview import ViewMask, generate_inputs, sparse_fbp
from .tomo import fbp


def _check_stack(X, name="X") -> np.ndarray:
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"{name} must be a 2-D array or a stack of them, got ndim={X.ndim}")
    return X


class _TomoBase(BaseEstimator):
    def _grid(self) -> ImageGrid:
        return ImageGrid(self.nx, self.ny or self.nx, self.pixel_size)

    def _geom(self, X) -> ParallelGeometry:
        return ParallelGeometry(X.shape[1], X.shape[2], self.dct_pitch)

    def fit(self, X, y=None):
        X = _check_stack(X)
        self.geometry_ = self._geom(X)
        self.grid_ = self._grid()
        return self

    def _check_geom(self, X):
        check_is_fitted(self, "geometry_")
        if (X.shape[1], X.shape[2]) != (self.geometry_.n_views, self.geometry_.n_dct):
            raise ValueError(f"sinogram shape {X.shape[1:]} differs from the fitted "
                             f"{(self.geometry_.n_views, self.geometry_.n_dct)}")


class FBPReconstructor(TransformerMixin, _TomoBase):
    """Filtered backprojection; with ``ds_factor > 1`` the sparse-view scaled variant."""

    def __init__(self, nx=128, ny=None, pixel_size=1.0, dct_pitch=1.0, window=None, ds_factor=1):
        self.nx = nx
        self.ny = ny
        self.pixel_size = pixel_size
        self.dct_pitch = dct_pitch
        self.window = window
        self.ds_factor = ds_factor

    def transform(self, X):
        X = _check_stack(X)
        self._check_geom(X)
        mask = ViewMask(self.ds_factor, X.shape[1])
        out = []
        for x in X:
            sino = Sinogram(self.geometry_, mask.apply(x))
            img = fbp(sino, self.grid_, self.window) if self.ds_factor == 1 else sparse_fbp(sino, mask, self.grid_)
            out.append(img.data)
        return np.stack(out)


class SparseViewInputs(TransformerMixin, _TomoBase):
    """Full-view sinograms -> filtered, reprojection-completed sparse sinograms ``q_S``."""

    def __init__(self, ds_factor=4, nx=128, ny=None, pixel_size=1.0, dct_pitch=1.0):
        self.ds_factor = ds_factor
        self.nx = nx
        self.ny = ny
        self.pixel_size = pixel_size
        self.dct_pitch = dct_pitch

    def transform(self, X):
        X = _check_stack(X)
        self._check_geom(X)
        mask = ViewMask(self.ds_factor, X.shape[1])
        return np.stack([generate_inputs(Sinogram(self.geometry_, x), mask, self.grid_).q_s.data for x in X])


class TVReconstructor(TransformerMixin, _TomoBase):
    """Sparse-view TV-regularised reconstruction of each sinogram."""

    def __init__(self, ds_factor=4, lam=0.01, max_iters=200, eps=1e-3, tol=1e-7,
                 nx=128, ny=None, pixel_size=1.0, dct_pitch=1.0):
        self.ds_factor = ds_factor
        self.lam = lam
        self.max_iters = max_iters
        self.eps = eps
        self.tol = tol
        self.nx = nx
        self.ny = ny
        self.pixel_size = pixel_size
        self.dct_pitch = dct_pitch

    def transform(self, X):
        X = _check_stack(X)
        self._check_geom(X)
        mask = ViewMask(self.ds_factor, X.shape[1])
        cfg = TVConfig(self.lam, self.max_iters, self.eps, self.tol)
        self.traces_ = []
        out = []
        for x in X:
            img, trace = reconstruct_tv(Sinogram(self.geometry_, mask.apply(x)), mask, self.grid_, cfg)
            self.traces_.append(trace)
            out.append(img.data)
        return np.stack(out)


class DualDomainNet(_TomoBase):
    """Trainable PI-Net (``model="pi"``) or II-Net (``model="ii"``) at decomposition level ``K``.

    ``fit(X, y)`` takes full-view sinograms and their ground-truth images; each
    training sample gets a downsampling factor drawn from ``train_ds_factors``.
    ``predict`` reconstructs at ``ds_factor``.
    """

    def __init__(self, model="pi", K=1, ds_factor=4, train_ds_factors=(2, 3, 4, 6, 8, 12), depth=3,
                 base_width=16, lr=1e-4, steps=200, batch_images=4, eval_every=25, seed=0,
                 nx=64, ny=None, pixel_size=1.0, dct_pitch=1.0):
        self.model = model
        self.K = K
        self.ds_factor = ds_factor
        self.train_ds_factors = train_ds_factors
        self.depth = depth
        self.base_width = base_width
        self.lr = lr
        self.steps = steps
        self.batch_images = batch_images
        self.eval_every = eval_every
        self.seed = seed
        self.nx = nx
        self.ny = ny
        self.pixel_size = pixel_size
        self.dct_pitch = dct_pitch

    def fit(self, X, y):
        import torch
        from .hierarchy import decompose_image_array, decompose_projection_array, plan
        from .nn import NetConfig, TrainConfig, random_ds_list, train
        from .nn.dualdomain import IINet, PatchData, PINet

        X = _check_stack(X)
        y = _check_stack(y, "y")
        if len(X) != len(y):
            raise ValueError("X and y have different numbers of samples")
        super().fit(X)
        if y.shape[1:] != self.grid_.shape:
            raise ValueError(f"y images have shape {y.shape[1:]}, expected {self.grid_.shape}")
        dp = plan(self.grid_, self.geometry_, self.K)
        ds = random_ds_list(len(X), self.seed, tuple(self.train_ds_factors))
        fk, fks, qks, kept = [], [], [], []
        for x, f, s in zip(X, y, ds):
            mask = ViewMask(s, X.shape[1])
            inp = generate_inputs(Sinogram(self.geometry_, x), mask, self.grid_)
            fk.append(decompose_image_array(f, dp))
            fks.append(decompose_image_array(inp.f_s.data, dp))
            qks.append(decompose_projection_array(inp.q_s.data, dp))
            kept.append(np.broadcast_to(mask.kept[None, :, None], (dp.J, X.shape[1], 1)))
        t = lambda a: torch.from_numpy(np.concatenate(a)).float().unsqueeze(1)
        data = PatchData(dp, t(fk), t(fks), t(qks), torch.from_numpy(np.concatenate(kept)).unsqueeze(1), ds)
        mk = lambda dom, s: NetConfig(depth=self.depth, base_width=self.base_width, seed=s, domain=dom, K=self.K)
        if self.model == "pi":
            net = PINet(dp, mk("projection", self.seed), mk("image", self.seed + 1))
        elif self.model == "ii":
            net = IINet(mk("image", self.seed), mk("image", self.seed + 1))
        else:
            raise ValueError(f"model must be 'pi' or 'ii', got {self.model!r}")
        cfg = TrainConfig(lr=self.lr, steps=self.steps, batch_images=min(self.batch_images, len(X)),
                          eval_every=self.eval_every, seed=self.seed)
        result = train(net, data, None, cfg)
        self.net_ = result.model
        self.log_ = result.log
        self.plan_ = dp
        return self

    def predict(self, X):
        from .nn import infer_pipeline

        check_is_fitted(self, "net_")
        X = _check_stack(X)
        self._check_geom(X)
        mask = ViewMask(self.ds_factor, X.shape[1])
        return np.stack([infer_pipeline(self.net_, Sinogram(self.geometry_, x), mask, self.grid_, self.K).data
                         for x in X])

    def score(self, X, y):
        """Mean PSNR of the predictions against ``y``."""
        y = _check_stack(y, "y")
        return float(np.mean([psnr(a, b) for a, b in zip(self.predict(X), y)]))
