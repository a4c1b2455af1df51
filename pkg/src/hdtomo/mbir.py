"""Total-variation regularised iterative reconstruction.

Minimises ``0.5 * ||M * (p - R f)||^2 + lam * sum(sqrt(|grad f|^2 + eps^2))`` by
gradient descent. Trial steps come from the Barzilai-Borwein rule and are
halved until the Armijo condition holds, so the cost never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Image, ImageGrid, Sinogram
from .sparseview import ViewMask, sparse_fbp
from .tomo import backproject_array, project_array


class DivergenceError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class TVConfig:
    lam: float = 0.01
    max_iters: int = 200
    eps: float = 1e-3
    tol: float = 1e-7
    max_backtracks: int = 40
    armijo: float = 1e-4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")


def _grad2d(f):
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    gx[:, :-1] = f[:, 1:] - f[:, :-1]
    gy[:-1, :] = f[1:, :] - f[:-1, :]
    return gx, gy


def _grad2d_adjoint(gx, gy):
    out = np.zeros_like(gx)
    out[:, :-1] -= gx[:, :-1]
    out[:, 1:] += gx[:, :-1]
    out[:-1, :] -= gy[:-1, :]
    out[1:, :] += gy[:-1, :]
    return out


def tv_value(f: np.ndarray, eps: float) -> float:
    gx, gy = _grad2d(f)
    return float(np.sum(np.sqrt(gx**2 + gy**2 + eps**2)))


def tv_gradient(f: np.ndarray, eps: float) -> np.ndarray:
    gx, gy = _grad2d(f)
    mag = np.sqrt(gx**2 + gy**2 + eps**2)
    return _grad2d_adjoint(gx / mag, gy / mag)


@dataclass
class TVObjective:
    p: np.ndarray
    kept: np.ndarray
    grid: ImageGrid
    geom: object
    lam: float
    eps: float
    _w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._w = self.kept[:, None].astype(np.float64)

    def residual(self, f):
        return self._w * (self.p - project_array(f, self.grid, self.geom))

    def value(self, f, r=None) -> float:
        r = self.residual(f) if r is None else r
        return 0.5 * float(np.sum(r * r)) + self.lam * tv_value(f, self.eps)

    def gradient(self, f, r=None) -> np.ndarray:
        r = self.residual(f) if r is None else r
        g = -backproject_array(r, self.geom, self.grid)
        if self.lam:
            g = g + self.lam * tv_gradient(f, self.eps)
        return g


def reconstruct_tv(p_s: Sinogram, mask: ViewMask, grid: ImageGrid, cfg: TVConfig | None = None,
                   init: Image | None = None) -> tuple[Image, list[float]]:
    """Returns the reconstruction and the per-iteration cost trace."""
    cfg = cfg or TVConfig()
    geom = p_s.require_parallel("reconstruct_tv")
    if p_s.filtered:
        raise ValueError("reconstruct_tv expects unfiltered data")
    kept = mask.kept
    p = mask.apply(p_s.data)
    obj = TVObjective(p, kept, grid, geom, cfg.lam, cfg.eps)

    f = (sparse_fbp(p_s.with_data(p), mask, grid) if init is None else init).data.copy()
    r = obj.residual(f)
    cost = obj.value(f, r)
    trace = [cost]
    g = obj.gradient(f, r)
    step = 1.0 / max(float(np.sum(g * g)) ** 0.5, 1e-12)
    prev_f = prev_g = None

    for _ in range(cfg.max_iters):
        gg = float(np.sum(g * g))
        if gg == 0.0:
            break
        if prev_f is not None:
            s, y = f - prev_f, g - prev_g
            sy = float(np.sum(s * y))
            if sy > 0:
                step = float(np.sum(s * s)) / sy
        for _ in range(cfg.max_backtracks):
            f_new = f - step * g
            r_new = obj.residual(f_new)
            new_cost = obj.value(f_new, r_new)
            if new_cost <= cost - cfg.armijo * step * gg:
                break
            step *= 0.5
        else:
            raise DivergenceError("line search failed to decrease the cost", trace)
        prev_f, prev_g = f, g
        f, r = f_new, r_new
        g = obj.gradient(f, r)
        rel = (cost - new_cost) / max(abs(cost), 1e-300)
        cost = new_cost
        trace.append(cost)
        if rel < cfg.tol:
            break
    return Image(grid, f), trace
