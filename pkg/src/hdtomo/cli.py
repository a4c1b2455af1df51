"""Command-line driver. Every subcommand reads and writes array files.

Outputs go to ``--output`` or, when omitted, to ``$HDTOMO_OUT/<subcommand>``
(current directory if the variable is unset). Exit codes: 0 success,
2 configuration or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import io
from .geometry import FanGeometry, GeometryError, ImageGrid, ParallelGeometry
from .hierarchy import (compose_image, decompose_image, decompose_projection,
                        patch_backproject, plan)
from .mbir import DivergenceError, TVConfig, reconstruct_tv
from .metrics import evaluate
from .phantoms import PRESETS, PhantomSpec, analytic_fan_sinogram, analytic_sinogram, interior_mask, rasterize
from .sparseview import ViewMask, cubic_view_interp, generate_inputs
from .spectral import format_rank_report, rank_report
from .tomo import fbp, project, ramp_filter, rebin_fan_to_parallel

OUT_ENV = "HDTOMO_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _out(args, default_name: str) -> Path:
    if args.output:
        return Path(args.output)
    return Path(os.environ.get(OUT_ENV, ".")) / default_name


def _grid(args) -> ImageGrid:
    return ImageGrid(args.nx, args.ny or args.nx, args.pixel_size)


def _default_dets(nx: int) -> int:
    """Covers the FOV diagonal, rounded up so every level up to K=5 divides it."""
    return 16 * math.ceil(math.sqrt(2.0) * nx / 16)


def _phantom_of(meta: dict) -> PhantomSpec | None:
    d = meta.get("phantom")
    return PhantomSpec.from_dict(d) if d else None


def _grid_args(p, required=False):
    p.add_argument("--nx", type=int, required=required, default=None if required else 128)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--pixel-size", type=float, default=1.0)


# --- subcommands ------------------------------------------------------------

def cmd_phantom(args):
    grid = _grid(args)
    kw = {"seed": args.seed}
    if args.radius is not None:
        kw["radius"] = args.radius
    spec = PhantomSpec.preset(args.preset, grid, **kw)
    return io.save_image(rasterize(spec, grid), _out(args, "phantom"), phantom=spec.to_dict())


def _load_image_with_meta(path):
    af = io.ArrayFile.read(path)
    return io.load_image(path), af.meta


def cmd_project(args):
    img, meta = _load_image_with_meta(args.input)
    n_dct = args.dets or _default_dets(img.grid.nx)
    spec = _phantom_of(meta)
    method = args.method
    if method == "auto":
        method = "analytic" if spec is not None else "numeric"
    if method == "analytic" and spec is None:
        raise ConfigError("analytic projection needs an image written by `phantom`")
    extra = {"phantom": meta["phantom"]} if spec is not None else {}
    if args.fan:
        if method != "analytic":
            raise ConfigError("fan-beam projection is only available analytically")
        geom = FanGeometry(args.views, n_dct, args.sid, args.sdd, args.pitch, args.offset)
        geom.check_object_radius(img.grid.radius)
        return io.save_sinogram(analytic_fan_sinogram(spec, geom), _out(args, "sinogram"), **extra)
    geom = ParallelGeometry(args.views, n_dct, args.pitch, args.offset)
    sino = analytic_sinogram(spec, geom) if method == "analytic" else project(img, geom)
    return io.save_sinogram(sino, _out(args, "sinogram"), grid=img.grid.to_dict(), **extra)


def _grid_for(args, meta) -> ImageGrid:
    if args.nx:
        return _grid(args)
    if "grid" in meta:
        return ImageGrid.from_dict(meta["grid"])
    raise ConfigError("no image grid: pass --nx or use a sinogram written by `project`")


def cmd_fbp(args):
    af = io.ArrayFile.read(args.input)
    sino = io.load_sinogram(args.input)
    grid = _grid_for(args, af.meta)
    img = fbp(sino, grid, args.window)
    ds = af.meta.get("ds_factor")
    if ds and ds > 1 and not args.no_ds_scale:
        img = img.with_data(img.data * ds)
    return io.save_image(img, _out(args, "fbp"))


def cmd_sparsify(args):
    af = io.ArrayFile.read(args.input)
    sino = io.load_sinogram(args.input)
    mask = ViewMask(args.ds, sino.geometry.n_views)
    meta = {k: v for k, v in af.meta.items() if k in ("grid", "phantom")}
    return io.save_sinogram(sino.with_data(mask.apply(sino.data)), _out(args, "sparse"),
                            ds_factor=args.ds, live_views=mask.n_kept, **meta)


def _sparse_input(path, ds=None):
    af = io.ArrayFile.read(path)
    sino = io.load_sinogram(path)
    ds = ds or af.meta.get("ds_factor")
    if not ds:
        raise ConfigError("downsampling factor unknown: pass --ds or use a file written by `sparsify`")
    return sino, ViewMask(int(ds), sino.geometry.n_views), af.meta


def cmd_interp(args):
    sino, mask, meta = _sparse_input(args.input, args.ds)
    if args.method == "cubic":
        out = cubic_view_interp(sino.with_data(mask.apply(sino.data)), mask)
    else:
        out = generate_inputs(sino, mask, _grid_for(args, meta)).p_bar
    return io.save_sinogram(out, _out(args, "interp"), ds_factor=mask.ds_factor)


def cmd_decompose(args):
    af = io.ArrayFile.read(args.input)
    if af.kind == "image":
        img = io.load_image(args.input)
        dp = plan(img.grid, _parallel_geom(args, img.grid), args.K)
        ps = decompose_image(img, dp)
    elif af.kind == "sinogram":
        sino = io.load_sinogram(args.input)
        if args.filter and not sino.filtered:
            sino = ramp_filter(sino)
        dp = plan(_grid_for(args, af.meta), sino.require_parallel("decompose"), args.K)
        ps = decompose_projection(sino, dp)
    else:
        raise ConfigError(f"cannot decompose a {af.kind} file")
    return io.save_patchset(ps, _out(args, f"patches_K{args.K}"))


def _parallel_geom(args, grid) -> ParallelGeometry:
    return ParallelGeometry(args.views, args.dets or _default_dets(grid.nx), args.pitch)


def cmd_compose(args):
    ps = io.load_patchset(args.input)
    if ps.domain == "projection":
        if not ps.filtered:
            raise ConfigError("projection patches must be ramp-filtered before backprojection")
        ps = patch_backproject(ps)
    return io.save_image(compose_image(ps), _out(args, "composed"))


def cmd_rank_report(args):
    grid = _grid(args)
    spec = PhantomSpec.preset(args.preset, grid, seed=args.seed)
    geom = ParallelGeometry(args.views, args.dets or _default_dets(grid.nx), args.pitch)
    rows = rank_report(spec, grid, geom, tuple(args.levels), args.rel_tol)
    text = format_rank_report(rows) + "\n"
    out = _out(args, "rank_report.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    sys.stdout.write(text)
    return out


def cmd_mbir(args):
    sino, mask, meta = _sparse_input(args.input, args.ds)
    cfg = TVConfig(lam=args.lam, max_iters=args.iters, eps=args.eps, tol=args.tol)
    img, trace = reconstruct_tv(sino.with_data(mask.apply(sino.data)), mask, _grid_for(args, meta), cfg)
    out = io.save_image(img, _out(args, "mbir"))
    out.with_suffix(".trace.csv").write_text("iter,cost\n" + "".join(f"{i},{c:.12e}\n" for i, c in enumerate(trace)))
    return out


def cmd_train(args):
    from .nn import NetConfig, TrainConfig, build_dataset, random_ds_list, random_phantoms, save_checkpoint
    from .nn.dualdomain import IINet, PINet, train

    grid = _grid(args)
    geom = _parallel_geom(args, grid)
    ds = tuple(args.ds) if args.ds else (2, 3, 4, 6, 8, 12)
    tr = build_dataset(random_phantoms(grid, args.n_train, args.seed), grid, geom, args.K,
                       random_ds_list(args.n_train, args.seed, ds))
    va = build_dataset(random_phantoms(grid, args.n_val, args.seed + 1), grid, geom, args.K,
                       random_ds_list(args.n_val, args.seed + 1, ds)) if args.n_val else None
    mk = lambda dom, s: NetConfig(depth=args.depth, base_width=args.width, seed=s, domain=dom, K=args.K)
    if args.model == "pi":
        model = PINet(tr.plan, mk("projection", args.seed), mk("image", args.seed + 1))
    else:
        model = IINet(mk("image", args.seed), mk("image", args.seed + 1))
    if args.init:
        from .nn import load_checkpoint
        model.load_state_dict(load_checkpoint(args.init).state_dict())
    tcfg = TrainConfig(lr=args.lr, steps=args.steps, batch_images=args.batch, eval_every=args.eval_every,
                       seed=args.seed)
    result = train(model, tr, va, tcfg)
    out = _out(args, f"{args.model}net_K{args.K}")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.model, out, {"train": asdict(tcfg)})
    out.with_suffix(".log.csv").write_text(result.log_csv() + "\n")
    return out


def cmd_infer(args):
    from .nn import load_checkpoint, infer_pipeline
    from .nn.dualdomain import PINet

    sino, mask, meta = _sparse_input(args.input, args.ds)
    model = load_checkpoint(args.checkpoint)
    grid = model.plan.grid if isinstance(model, PINet) else _grid_for(args, meta)
    img = infer_pipeline(model, sino, mask, grid, args.K)
    return io.save_image(img, _out(args, "infer"))


def cmd_eval(args):
    ref, ref_meta = _load_image_with_meta(args.reference)
    mask = None
    if args.mask == "interior":
        spec = _phantom_of(ref_meta)
        if spec is None:
            raise ConfigError("--mask interior needs a reference written by `phantom`")
        mask = interior_mask(spec, ref.grid)
    rows = []
    for path in args.inputs:
        img = io.load_image(path)
        if img.grid.shape != ref.grid.shape:
            raise ConfigError(f"{path}: shape {img.grid.shape} differs from reference {ref.grid.shape}")
        rows.append((Path(path).name, evaluate(img.data, ref.data, args.data_range, mask)))
    lines = ["name\tnrmse\tpsnr\tssim"] + [f"{n}\t{r.format(sep=chr(9))}" for n, r in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.output:
        Path(args.output).write_text(text)
    return None


def cmd_rebin(args):
    af = io.ArrayFile.read(args.input)
    sino = io.load_sinogram(args.input)
    if not isinstance(sino.geometry, FanGeometry):
        raise ConfigError("rebin needs a fan-beam sinogram")
    target = ParallelGeometry(args.views or sino.geometry.n_views, args.dets or sino.geometry.n_dct, args.pitch)
    out, coverage = rebin_fan_to_parallel(sino, target)
    meta = {k: v for k, v in af.meta.items() if k == "phantom"}
    return io.save_sinogram(out, _out(args, "rebinned"), coverage=float(coverage.mean()), **meta)


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdtomo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, inp=True):
        p = sub.add_parser(name)
        if inp:
            p.add_argument("input")
        p.add_argument("-o", "--output", default=None)
        p.set_defaults(func=fn)
        return p

    def geom_args(p, views=768):
        p.add_argument("--views", type=int, default=views)
        p.add_argument("--dets", type=int, default=None)
        p.add_argument("--pitch", type=float, default=1.0)

    p = add("phantom", cmd_phantom, inp=False)
    p.add_argument("--preset", choices=PRESETS, default="shepp-logan")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=float, default=None)
    _grid_args(p)

    p = add("project", cmd_project)
    geom_args(p)
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--method", choices=("auto", "analytic", "numeric"), default="auto")
    p.add_argument("--fan", action="store_true")
    p.add_argument("--sid", type=float, default=None, help="source to isocenter distance")
    p.add_argument("--sdd", type=float, default=None, help="source to detector distance")

    p = add("fbp", cmd_fbp)
    _grid_args(p)
    p.set_defaults(nx=None)
    p.add_argument("--window", choices=("hann",), default=None)
    p.add_argument("--no-ds-scale", action="store_true")

    p = add("sparsify", cmd_sparsify)
    p.add_argument("--ds", type=int, required=True)

    p = add("interp", cmd_interp)
    p.add_argument("--method", choices=("reproject", "cubic"), default="reproject")
    p.add_argument("--ds", type=int, default=None)
    _grid_args(p)
    p.set_defaults(nx=None)

    p = add("decompose", cmd_decompose)
    p.add_argument("-K", "--K", type=int, required=True)
    p.add_argument("--filter", action="store_true", help="ramp-filter a sinogram before decomposing")
    geom_args(p)
    _grid_args(p)
    p.set_defaults(nx=None)

    add("compose", cmd_compose)

    p = add("rank-report", cmd_rank_report, inp=False)
    p.add_argument("--preset", choices=PRESETS, default="shepp-logan")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--rel-tol", type=float, default=1e-3)
    geom_args(p, views=256)
    _grid_args(p)

    p = add("mbir", cmd_mbir)
    p.add_argument("--lambda", dest="lam", type=float, default=TVConfig.lam)
    p.add_argument("--iters", type=int, default=TVConfig.max_iters)
    p.add_argument("--eps", type=float, default=TVConfig.eps)
    p.add_argument("--tol", type=float, default=TVConfig.tol)
    p.add_argument("--ds", type=int, default=None)
    _grid_args(p)
    p.set_defaults(nx=None)

    p = add("train", cmd_train, inp=False)
    p.add_argument("--model", choices=("pi", "ii"), default="pi")
    p.add_argument("-K", "--K", type=int, default=1)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch", type=int, default=4, help="images per step (all their patches)")
    p.add_argument("--eval-every", type=int, default=25)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--n-train", type=int, default=32)
    p.add_argument("--n-val", type=int, default=8)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ds", type=int, nargs="+", default=None)
    p.add_argument("--init", default=None, help="checkpoint to start from (e.g. a K=1 model)")
    geom_args(p, views=96)
    _grid_args(p)
    p.set_defaults(nx=64)

    p = add("infer", cmd_infer)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ds", type=int, default=None)
    p.add_argument("-K", "--K", type=int, default=None)
    _grid_args(p)
    p.set_defaults(nx=None)

    p = sub.add_parser("eval")
    p.add_argument("reference")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--mask", choices=("none", "interior"), default="none")
    p.add_argument("--data-range", type=float, default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_eval)

    p = add("rebin", cmd_rebin)
    geom_args(p, views=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = args.func(args)
    except (DivergenceError, FloatingPointError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, GeometryError, io.ArrayFileError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if out is not None:
        print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
