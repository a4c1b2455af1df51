"""Two-phase networks on hierarchically decomposed data.

* ``IINet``: image-domain network twice (``f1 = Q1(f_S)``, ``f2 = Q2(f1)``).
* ``PINet``: projection-domain network with hard data consistency, level-K
  backprojection, then an image-domain network.

Every sub-network is residual (``x - UNet(x)``), so with a zero head the whole
model reduces to the sparse-input baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from ..geometry import Image, ImageGrid, ParallelGeometry, Sinogram
from ..mbir import DivergenceError
from ..hierarchy import (DecompositionPlan, compose_image_array, decompose_image_array,
                         decompose_projection_array, plan)
from ..phantoms import PhantomSpec, analytic_sinogram, rasterize
from ..sparseview import ViewMask, generate_inputs, random_ds_factor, TRAIN_DS_FACTORS
from .layers import NetConfig, ResidualNet
from .ops import consistency_merge, patch_backprojection


class TrainingDiverged(DivergenceError):
    """Non-finite training loss; ``trace`` holds the log rows recorded so far."""


@dataclass
class TrainConfig:
    lr: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    steps: int = 500
    batch_images: int = 4
    eval_every: int = 25
    patience: int = 5
    decay: float = 0.1
    seed: int = 0
    threads: int | None = 1

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")


# --- data -------------------------------------------------------------------

@dataclass
class PatchData:
    """Decomposed training pairs; patches of image ``n`` occupy rows ``n*J .. n*J+J-1``."""

    plan: DecompositionPlan
    f_k: torch.Tensor      # (N*J, 1, py, px) target patches
    f_ks: torch.Tensor     # (N*J, 1, py, px) sparse FBP patches
    q_ks: torch.Tensor     # (N*J, 1, V, D) filtered, interpolated projection patches
    kept: torch.Tensor     # (N*J, 1, V, 1) measured-view mask
    ds: list[int]

    @property
    def n_images(self) -> int:
        return self.f_k.shape[0] // self.plan.J

    def images(self, idx) -> "PatchData":
        J = self.plan.J
        rows = torch.cat([torch.arange(i * J, (i + 1) * J) for i in idx])
        return PatchData(self.plan, self.f_k[rows], self.f_ks[rows], self.q_ks[rows], self.kept[rows],
                         [self.ds[i] for i in idx])


def make_sample(spec: PhantomSpec, grid: ImageGrid, geom: ParallelGeometry, ds: int):
    """Full-size ``(f, f_S, q_S, kept)`` arrays for one phantom."""
    f = rasterize(spec, grid).data
    p = analytic_sinogram(spec, geom)
    inputs = generate_inputs(p, ViewMask(ds, geom.n_views), grid)
    return f, inputs.f_s.data, inputs.q_s.data, inputs.mask.kept


def build_dataset(specs, grid: ImageGrid, geom: ParallelGeometry, K: int, ds_factors,
                  dtype=torch.float32) -> PatchData:
    dp = plan(grid, geom, K)
    fk, fks, qks, kept = [], [], [], []
    for spec, ds in zip(specs, ds_factors):
        f, f_s, q_s, m = make_sample(spec, grid, geom, ds)
        fk.append(decompose_image_array(f, dp))
        fks.append(decompose_image_array(f_s, dp))
        qks.append(decompose_projection_array(q_s, dp))
        kept.append(np.broadcast_to(m[None, :, None], (dp.J, geom.n_views, 1)))
    t = lambda xs: torch.from_numpy(np.concatenate(xs)).to(dtype).unsqueeze(1)
    return PatchData(dp, t(fk), t(fks), t(qks), torch.from_numpy(np.concatenate(kept)).unsqueeze(1),
                     list(ds_factors))


def random_phantoms(grid: ImageGrid, n: int, seed: int, count: int = 8) -> list[PhantomSpec]:
    return [PhantomSpec.random_ellipses(grid.radius, seed * 100_003 + i, count) for i in range(n)]


def random_ds_list(n: int, seed: int, choices=TRAIN_DS_FACTORS) -> list[int]:
    rng = np.random.default_rng(seed)
    return [random_ds_factor(rng, choices) for _ in range(n)]


# --- models -----------------------------------------------------------------

class IINet(nn.Module):
    def __init__(self, cfg1: NetConfig, cfg2: NetConfig):
        super().__init__()
        self.img1 = ResidualNet(cfg1)
        self.img2 = ResidualNet(cfg2)

    def forward(self, batch: PatchData):
        f1 = self.img1(batch.f_ks)
        return f1, self.img2(f1)


class PINet(nn.Module):
    def __init__(self, dp: DecompositionPlan, cfg_prj: NetConfig, cfg_img: NetConfig):
        super().__init__()
        self.plan = dp
        self.prj = ResidualNet(cfg_prj)
        self.img = ResidualNet(cfg_img)

    def complete(self, q, kept):
        """Phase-1 sinogram: network estimate on unmeasured views only."""
        return consistency_merge(q, self.prj(q), kept)

    def forward(self, batch: PatchData):
        f1 = patch_backprojection(self.complete(batch.q_ks, batch.kept), self.plan)
        return f1, self.img(f1)


def two_phase_loss(f1, f2, target):
    return F.mse_loss(f1, target) + F.mse_loss(f2, target)


@dataclass
class TrainResult:
    model: nn.Module
    log: list[dict] = field(default_factory=list)

    def log_csv(self) -> str:
        lines = ["step,train_loss,val_loss,lr"]
        lines += [f"{r['step']},{r['train_loss']:.8e},{r['val_loss']:.8e},{r['lr']:.3e}" for r in self.log]
        return "\n".join(lines)


def _evaluate(model, data: PatchData, chunk: int = 8) -> float:
    total, n = 0.0, 0
    with torch.no_grad():
        for start in range(0, data.n_images, chunk):
            b = data.images(range(start, min(start + chunk, data.n_images)))
            f1, f2 = model(b)
            total += two_phase_loss(f1, f2, b.f_k).item() * b.n_images
            n += b.n_images
    return total / max(n, 1)


def train(model: nn.Module, data: PatchData, val: PatchData | None, cfg: TrainConfig) -> TrainResult:
    """Joint two-phase training with Adam and plateau learning-rate decay."""
    if cfg.threads:
        torch.set_num_threads(cfg.threads)
    gen = torch.Generator().manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=tuple(cfg.betas))
    sched = torch.optim.lr_scheduler.ReduceLROnPlateau(opt, factor=cfg.decay, patience=cfg.patience)
    result = TrainResult(model)
    running = []
    for step in range(1, cfg.steps + 1):
        idx = torch.randperm(data.n_images, generator=gen)[: cfg.batch_images].tolist()
        batch = data.images(sorted(idx))
        opt.zero_grad()
        f1, f2 = model(batch)
        loss = two_phase_loss(f1, f2, batch.f_k)
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}", result.log)
        loss.backward()
        opt.step()
        running.append(loss.item())
        if step % cfg.eval_every == 0 or step == cfg.steps:
            val_loss = _evaluate(model, val) if val is not None else float(np.mean(running))
            sched.step(val_loss)
            result.log.append({"step": step, "train_loss": float(np.mean(running)),
                               "val_loss": val_loss, "lr": opt.param_groups[0]["lr"]})
            running = []
    return result


def train_ii_net(data: PatchData, val: PatchData | None, cfg1: NetConfig, cfg2: NetConfig,
                 tcfg: TrainConfig) -> TrainResult:
    return train(IINet(cfg1, cfg2), data, val, tcfg)


def train_pi_net(data: PatchData, val: PatchData | None, cfg_prj: NetConfig, cfg_img: NetConfig,
                 tcfg: TrainConfig, pretrained: "PINet | None" = None) -> TrainResult:
    model = PINet(data.plan, cfg_prj, cfg_img)
    if pretrained is not None:
        model.prj.load_state_dict(pretrained.prj.state_dict())
        model.img.load_state_dict(pretrained.img.state_dict())
    return train(model, data, val, tcfg)


# --- evaluation / inference -------------------------------------------------

def compose_batch(patches: torch.Tensor, dp: DecompositionPlan) -> np.ndarray:
    """``(N*J, 1, py, px)`` tensor -> ``(N, ny, nx)`` array of full images."""
    arr = patches.detach().double().numpy()[:, 0]
    return np.stack([compose_image_array(arr[i * dp.J:(i + 1) * dp.J], dp)
                     for i in range(arr.shape[0] // dp.J)])


def predict_images(model: nn.Module, data: PatchData, chunk: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composed phase-1 and final images for every sample in ``data``."""
    out1, out2 = [], []
    with torch.no_grad():
        for start in range(0, data.n_images, chunk):
            b = data.images(range(start, min(start + chunk, data.n_images)))
            f1, f2 = model(b)
            out1.append(compose_batch(f1, data.plan))
            out2.append(compose_batch(f2, data.plan))
    return np.concatenate(out1), np.concatenate(out2)


def infer_pipeline(model: nn.Module, p: Sinogram, mask: ViewMask, grid: ImageGrid, K: int | None = None,
                   return_phase1: bool = False):
    """Sparse data -> inputs -> decomposition -> network phases -> composed image."""
    dp = model.plan if isinstance(model, PINet) else plan(grid, p.geometry, K or 1)
    if K is not None and dp.K != K:
        raise ValueError(f"model was built for K={dp.K}, got K={K}")
    if dp.grid.shape != grid.shape or dp.geom != p.geometry:
        raise ValueError("grid or geometry does not match the model's decomposition plan")
    inputs = generate_inputs(p, mask, grid)
    dtype = next(model.parameters()).dtype
    t = lambda a: torch.from_numpy(np.ascontiguousarray(a)).to(dtype).unsqueeze(1)
    kept = torch.from_numpy(np.broadcast_to(mask.kept[None, :, None], (dp.J, p.geometry.n_views, 1)).copy())
    batch = PatchData(dp, t(np.zeros((dp.J, dp.patch_ny, dp.patch_nx))),
                      t(decompose_image_array(inputs.f_s.data, dp)),
                      t(decompose_projection_array(inputs.q_s.data, dp)), kept.unsqueeze(1),
                      [mask.ds_factor])
    with torch.no_grad():
        f1, f2 = model(batch)
    img2 = Image(grid, compose_batch(f2, dp)[0])
    if return_phase1:
        return img2, Image(grid, compose_batch(f1, dp)[0])
    return img2


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(model: nn.Module, path, extra: dict | None = None) -> None:
    """Parameters to ``<path>.npz``; configs and plan to ``<path>.json``."""
    path = Path(path)
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    np.savez(path.with_suffix(".npz"), **arrays)
    meta = {"kind": type(model).__name__}
    if isinstance(model, PINet):
        meta.update(prj=model.prj.cfg.to_dict(), img=model.img.cfg.to_dict(), plan=model.plan.to_dict())
    else:
        meta.update(img1=model.img1.cfg.to_dict(), img2=model.img2.cfg.to_dict())
    meta.update(extra or {})
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_checkpoint(path) -> nn.Module:
    from ..geometry import geometry_from_dict

    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta["kind"] == "PINet":
        pl = meta["plan"]
        dp = plan(ImageGrid.from_dict(pl["grid"]), geometry_from_dict(pl["geometry"]), pl["K"])
        model = PINet(dp, NetConfig(**meta["prj"]), NetConfig(**meta["img"]))
    else:
        model = IINet(NetConfig(**meta["img1"]), NetConfig(**meta["img2"]))
    with np.load(path.with_suffix(".npz")) as z:
        model.load_state_dict({k: torch.from_numpy(z[k]) for k in z.files})
    return model
