"""Array files: a JSON sidecar header plus a raw little-endian payload.

``name.json`` holds ``{dtype, shape, kind, endianness, ...metadata}`` and
``name.bin`` holds the row-major IEEE-754 values. Either path (or the bare
stem) can be passed to the readers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Image, ImageGrid, Sinogram, geometry_from_dict
from .hierarchy import PatchSet, plan

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
KINDS = ("image", "sinogram", "patchset", "mask")


class ArrayFileError(ValueError):
    """Malformed or inconsistent array file."""


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".json", ".bin") else p


@dataclass
class ArrayFile:
    data: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)
    dtype: str = "f64"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArrayFileError(f"unknown kind {self.kind!r}")
        if self.dtype not in DTYPES:
            raise ArrayFileError(f"dtype must be one of {sorted(DTYPES)}")

    def header(self) -> dict:
        return {"dtype": self.dtype, "shape": list(self.data.shape), "kind": self.kind,
                "endianness": "little", **self.meta}

    def write(self, path) -> Path:
        stem = _stem(path)
        stem.parent.mkdir(parents=True, exist_ok=True)
        payload = np.ascontiguousarray(self.data, dtype=DTYPES[self.dtype])
        stem.with_suffix(".bin").write_bytes(payload.tobytes(order="C"))
        stem.with_suffix(".json").write_text(json.dumps(self.header(), indent=2, sort_keys=True) + "\n")
        return stem

    @classmethod
    def read(cls, path) -> "ArrayFile":
        stem = _stem(path)
        try:
            header = json.loads(stem.with_suffix(".json").read_text())
            raw = stem.with_suffix(".bin").read_bytes()
        except FileNotFoundError as exc:
            raise ArrayFileError(f"missing array file: {exc.filename}") from None
        except json.JSONDecodeError as exc:
            raise ArrayFileError(f"bad header {stem.with_suffix('.json')}: {exc}") from None
        for key in ("dtype", "shape", "kind"):
            if key not in header:
                raise ArrayFileError(f"header lacks {key!r}")
        if header.get("endianness", "little") != "little":
            raise ArrayFileError("only little-endian payloads are supported")
        dt = DTYPES.get(header["dtype"])
        if dt is None:
            raise ArrayFileError(f"unsupported dtype {header['dtype']!r}")
        shape = tuple(int(s) for s in header["shape"])
        if len(raw) != int(np.prod(shape)) * dt.itemsize:
            raise ArrayFileError(f"payload has {len(raw)} bytes, header implies "
                                 f"{int(np.prod(shape)) * dt.itemsize}")
        data = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
        meta = {k: v for k, v in header.items() if k not in ("dtype", "shape", "kind", "endianness")}
        return cls(data, header["kind"], meta, header["dtype"])


def save_image(img: Image, path, dtype: str = "f64", **meta) -> Path:
    return ArrayFile(img.data, "image", {"grid": img.grid.to_dict(), **meta}, dtype).write(path)


def save_sinogram(sino: Sinogram, path, dtype: str = "f64", **meta) -> Path:
    m = {"geometry": sino.geometry.to_dict(), "filtered": sino.filtered, **meta}
    return ArrayFile(sino.data, "sinogram", m, dtype).write(path)


def save_patchset(ps: PatchSet, path, dtype: str = "f64", **meta) -> Path:
    m = {"plan": ps.plan.to_dict(), "domain": ps.domain, "filtered": ps.filtered, **meta}
    return ArrayFile(ps.data, "patchset", m, dtype).write(path)


def _expect(af: ArrayFile, kind: str) -> ArrayFile:
    if af.kind != kind:
        raise ArrayFileError(f"expected a {kind} file, got {af.kind}")
    return af


def load_image(path) -> Image:
    af = _expect(ArrayFile.read(path), "image")
    return Image(ImageGrid.from_dict(af.meta["grid"]), af.data.astype(np.float64))


def load_sinogram(path) -> Sinogram:
    af = _expect(ArrayFile.read(path), "sinogram")
    return Sinogram(geometry_from_dict(af.meta["geometry"]), af.data.astype(np.float64),
                    bool(af.meta.get("filtered", False)))


def load_patchset(path) -> PatchSet:
    af = _expect(ArrayFile.read(path), "patchset")
    p = af.meta["plan"]
    dp = plan(ImageGrid.from_dict(p["grid"]), geometry_from_dict(p["geometry"]), int(p["K"]))
    return PatchSet(dp, af.meta["domain"], af.data.astype(np.float64), bool(af.meta.get("filtered", False)))
