"""Differentiable tomography operators for the training graph."""

from __future__ import annotations

import numpy as np
import torch

from ..hierarchy import DecompositionPlan, patch_backproject_array, patch_project_array


class PatchBackprojection(torch.autograd.Function):
    """Level-K backprojection of filtered patch sinograms, ``(B, 1, V, D) -> (B, 1, py, px)``.

    The backward pass applies the transposed operator, i.e. the scaled forward
    projection of each patch.
    """

    @staticmethod
    def forward(ctx, q, dp: DecompositionPlan):
        ctx.dp = dp
        arr = q.detach().cpu().numpy().astype(np.float64)[:, 0]
        out = patch_backproject_array(arr, dp)
        return torch.from_numpy(out).to(q.dtype).unsqueeze(1)

    @staticmethod
    def backward(ctx, grad):
        arr = grad.detach().cpu().numpy().astype(np.float64)[:, 0]
        gq = patch_project_array(arr, ctx.dp)
        return torch.from_numpy(gq).to(grad.dtype).unsqueeze(1), None


def patch_backprojection(q: torch.Tensor, dp: DecompositionPlan) -> torch.Tensor:
    return PatchBackprojection.apply(q, dp)


def consistency_merge(measured: torch.Tensor, estimate: torch.Tensor, kept: torch.Tensor) -> torch.Tensor:
    """Measured views pass through untouched; ``kept`` broadcasts as ``(B, 1, V, 1)``."""
    return torch.where(kept, measured, estimate)
