"""Grids, acquisition geometries and the array containers passed between operators.

Coordinate conventions (fixed throughout the package):

* Image arrays have shape ``(ny, nx)``. Pixel ``(iy, ix)`` has its center at
  ``x = origin_x + (ix - (nx - 1) / 2) * pixel_size`` and
  ``y = origin_y + (iy - (ny - 1) / 2) * pixel_size``; y grows with the row index.
* A parallel view at angle ``theta`` integrates along the direction
  ``(-sin theta, cos theta)``. The detector coordinate of a point is
  ``u = x cos theta + y sin theta``, so at ``theta = 0`` rays run along +y and
  ``u`` grows with +x.
* Detector bin ``k`` sits at ``u = dct_offset + (k - (n_dct - 1) / 2) * dct_pitch``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class GeometryError(ValueError):
    """Raised when grids, geometries or arrays are inconsistent."""


def uniform_angles(n_views: int) -> np.ndarray:
    """``n_views`` angles uniformly covering ``[0, 2 pi)``."""
    return np.arange(n_views, dtype=np.float64) * (2.0 * np.pi / n_views)


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ImageGrid:
    nx: int
    ny: int
    pixel_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise GeometryError(f"grid must have at least one pixel, got {self.nx}x{self.ny}")
        if not self.pixel_size > 0:
            raise GeometryError(f"pixel_size must be positive, got {self.pixel_size}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def radius(self) -> float:
        """Object radius in mm (half the grid width)."""
        return 0.5 * self.nx * self.pixel_size

    def x_centers(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) - (self.nx - 1) / 2.0) * self.pixel_size

    def y_centers(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) - (self.ny - 1) / 2.0) * self.pixel_size

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        return np.meshgrid(self.x_centers(), self.y_centers())

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "pixel_size": self.pixel_size,
                "origin": list(self.origin)}

    @classmethod
    def from_dict(cls, d: dict) -> "ImageGrid":
        return cls(int(d["nx"]), int(d["ny"]), float(d["pixel_size"]),
                   tuple(d.get("origin", (0.0, 0.0))))


@dataclass(frozen=True)
class ParallelGeometry:
    n_views: int
    n_dct: int
    dct_pitch: float = 1.0
    dct_offset: float = 0.0
    angles: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n_views < 1:
            raise GeometryError("n_views must be >= 1")
        if self.n_dct < 1:
            raise GeometryError("n_dct must be >= 1")
        if not self.dct_pitch > 0:
            raise GeometryError("dct_pitch must be positive")
        angles = uniform_angles(self.n_views) if self.angles is None else self.angles
        angles = _freeze(angles)
        if angles.shape != (self.n_views,):
            raise GeometryError(f"expected {self.n_views} angles, got shape {angles.shape}")
        if self.n_views > 1 and not np.all(np.diff(angles) > 0):
            raise GeometryError("angles must be strictly increasing")
        object.__setattr__(self, "angles", angles)

    @property
    def kind(self) -> str:
        return "parallel"

    def u_centers(self) -> np.ndarray:
        return self.dct_offset + (np.arange(self.n_dct) - (self.n_dct - 1) / 2.0) * self.dct_pitch

    def is_uniform_full(self) -> bool:
        return np.allclose(self.angles, uniform_angles(self.n_views), atol=1e-12)

    def with_detector(self, n_dct: int, dct_offset: float | None = None) -> "ParallelGeometry":
        return replace(self, n_dct=n_dct,
                       dct_offset=self.dct_offset if dct_offset is None else dct_offset)

    def __eq__(self, other):
        if not isinstance(other, ParallelGeometry):
            return NotImplemented
        return (self.n_views, self.n_dct, self.dct_pitch, self.dct_offset) == (
            other.n_views, other.n_dct, other.dct_pitch, other.dct_offset
        ) and np.array_equal(self.angles, other.angles)

    __hash__ = None

    def to_dict(self) -> dict:
        d = {"type": "parallel", "n_views": self.n_views, "n_dct": self.n_dct,
             "dct_pitch": self.dct_pitch, "dct_offset": self.dct_offset}
        if not self.is_uniform_full():
            d["angles"] = self.angles.tolist()
        return d


@dataclass(frozen=True)
class FanGeometry:
    """Equi-spaced flat-detector fan beam.

    Source angle ``beta`` follows the view angles. A ray hitting the detector at
    coordinate ``s`` makes the fan angle ``gamma = arctan(s / source_to_dct)`` and
    coincides with the parallel ray ``theta = beta + gamma``,
    ``u = source_to_iso * sin(gamma)``.
    """

    n_views: int
    n_dct: int
    source_to_iso: float
    source_to_dct: float
    dct_pitch: float = 1.0
    dct_offset: float = 0.0
    angles: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n_views < 1 or self.n_dct < 1:
            raise GeometryError("n_views and n_dct must be >= 1")
        if not self.dct_pitch > 0:
            raise GeometryError("dct_pitch must be positive")
        if not self.source_to_dct > self.source_to_iso > 0:
            raise GeometryError("need source_to_dct > source_to_iso > 0")
        angles = uniform_angles(self.n_views) if self.angles is None else self.angles
        angles = _freeze(angles)
        if angles.shape != (self.n_views,):
            raise GeometryError(f"expected {self.n_views} angles, got shape {angles.shape}")
        if self.n_views > 1 and not np.all(np.diff(angles) > 0):
            raise GeometryError("angles must be strictly increasing")
        object.__setattr__(self, "angles", angles)

    @property
    def kind(self) -> str:
        return "fan"

    def s_centers(self) -> np.ndarray:
        return self.dct_offset + (np.arange(self.n_dct) - (self.n_dct - 1) / 2.0) * self.dct_pitch

    def check_object_radius(self, radius: float) -> None:
        if not self.source_to_iso > radius:
            raise GeometryError(
                f"source_to_iso={self.source_to_iso} must exceed the object radius {radius}")

    def parallel_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """``(theta, u)`` of every fan ray, each shaped ``(n_views, n_dct)``."""
        gamma = np.arctan(self.s_centers() / self.source_to_dct)
        theta = self.angles[:, None] + gamma[None, :]
        u = np.broadcast_to(self.source_to_iso * np.sin(gamma), theta.shape)
        return theta, np.array(u)

    def __eq__(self, other):
        if not isinstance(other, FanGeometry):
            return NotImplemented
        return (self.n_views, self.n_dct, self.source_to_iso, self.source_to_dct,
                self.dct_pitch, self.dct_offset) == (
            other.n_views, other.n_dct, other.source_to_iso, other.source_to_dct,
            other.dct_pitch, other.dct_offset) and np.array_equal(self.angles, other.angles)

    __hash__ = None

    def to_dict(self) -> dict:
        d = {"type": "fan", "n_views": self.n_views, "n_dct": self.n_dct,
             "source_to_iso": self.source_to_iso, "source_to_dct": self.source_to_dct,
             "dct_pitch": self.dct_pitch, "dct_offset": self.dct_offset}
        if not np.allclose(self.angles, uniform_angles(self.n_views), atol=1e-12):
            d["angles"] = self.angles.tolist()
        return d


def geometry_from_dict(d: dict) -> ParallelGeometry | FanGeometry:
    angles = d.get("angles")
    if d.get("type", "parallel") == "parallel":
        return ParallelGeometry(int(d["n_views"]), int(d["n_dct"]), float(d["dct_pitch"]),
                                float(d.get("dct_offset", 0.0)), angles)
    return FanGeometry(int(d["n_views"]), int(d["n_dct"]), float(d["source_to_iso"]),
                       float(d["source_to_dct"]), float(d["dct_pitch"]),
                       float(d.get("dct_offset", 0.0)), angles)


def _check_array(data, shape, what) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.shape != shape:
        if data.size == int(np.prod(shape)):
            data = data.reshape(shape)
        else:
            raise GeometryError(f"{what} data has shape {data.shape}, expected {shape}")
    if not np.all(np.isfinite(data)):
        raise GeometryError(f"{what} data contains non-finite values")
    return data


@dataclass(frozen=True, eq=False)
class Image:
    grid: ImageGrid
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _check_array(self.data, self.grid.shape, "image"))

    @classmethod
    def zeros(cls, grid: ImageGrid) -> "Image":
        return cls(grid, np.zeros(grid.shape))

    def with_data(self, data) -> "Image":
        return Image(self.grid, data)


@dataclass(frozen=True, eq=False)
class Sinogram:
    geometry: ParallelGeometry | FanGeometry
    data: np.ndarray
    filtered: bool = False

    def __post_init__(self):
        shape = (self.geometry.n_views, self.geometry.n_dct)
        object.__setattr__(self, "data", _check_array(self.data, shape, "sinogram"))

    @classmethod
    def zeros(cls, geometry, filtered: bool = False) -> "Sinogram":
        return cls(geometry, np.zeros((geometry.n_views, geometry.n_dct)), filtered)

    def with_data(self, data, filtered: bool | None = None) -> "Sinogram":
        return Sinogram(self.geometry, data, self.filtered if filtered is None else filtered)

    def require_parallel(self, op: str) -> ParallelGeometry:
        if not isinstance(self.geometry, ParallelGeometry):
            raise GeometryError(f"{op} needs a parallel-beam sinogram")
        return self.geometry
