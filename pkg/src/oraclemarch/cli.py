"""Command-line entry point: one executable, one subcommand per stage.

Thread control happens before numpy is imported: --threads N (or the
ORACLEMARCH_THREADS env var) caps the BLAS pool, --strict forces a single
thread for bit-reproducible runs. Heavy modules are therefore imported
lazily inside main().
"""
from __future__ import annotations

import argparse
import json
import os
import sys


def _setup_threads(argv: list[str]) -> None:
    threads = os.environ.get("ORACLEMARCH_THREADS")
    if "--strict" in argv:
        threads = "1"
    elif "--threads" in argv:
        threads = argv[argv.index("--threads") + 1]
    if threads is not None:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = threads


def _parse_vec(text: str, n: int, what: str) -> list[float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != n:
        raise ValueError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    return [float(p) for p in parts]


def _parse_resolution(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oraclemarch",
        description="Depth-oracle guided neural raymarching: data generation, "
        "training, rendering, evaluation, and interactive serving.",
    )
    parser.add_argument("--threads", type=int, default=None, help="BLAS/worker thread cap")
    parser.add_argument("--strict", action="store_true", help="single-threaded deterministic mode")
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="render a synthetic RGBD dataset")
    p.add_argument("--scene", default="sphere-room", help="preset: sphere-room | corridor")
    p.add_argument("--view-cell", default=None, help="override 'cx,cy,cz,sx,sy,sz'")
    p.add_argument("--images", type=int, default=60)
    p.add_argument("--resolution", default="64x64")
    p.add_argument("--fov", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.7,0.1,0.2", help="train,val,test split ratios")
    p.add_argument("--out", required=True)

    def training_args(p, shading: bool):
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--iters", type=int, default=20000)
        p.add_argument("--batch", type=int, default=1024)
        p.add_argument("--lr", type=float, default=5e-4)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--val-every", type=int, default=500)
        p.add_argument("--hidden-layers", type=int, default=4)
        p.add_argument("--hidden-width", type=int, default=64)
        p.add_argument("--full-scale", action="store_true",
                       help="full-size networks and schedule (8x256, 300k iters, batch 4096)")

    p = sub.add_parser("train-oracle", help="phase one: fit the sampling oracle")
    training_args(p, shading=False)
    p.add_argument("--bins", type=int, default=128)
    p.add_argument("--i", dest="inputs", type=int, default=128, help="ray input point count")
    p.add_argument("--k", type=int, default=5, help="image-space filter size")
    p.add_argument("--z", type=int, default=5, help="depth filter size")
    p.add_argument("--single-depth", action="store_true", help="regress one depth instead")
    p.add_argument("--no-unify", action="store_true", help="feed raw camera-origin rays")

    p = sub.add_parser("train-shading", help="phase two: fit the shading network")
    training_args(p, shading=True)
    p.add_argument("--oracle", default=None, help="oracle checkpoint (omit for fixed sampling)")
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--mode", default="logwarp",
                   choices=["uniform", "log", "logwarp", "ndc", "local-gt"])
    p.add_argument("--local-base", default="uniform", choices=["uniform", "log", "logwarp"])
    p.add_argument("--alpha-mode", default="direct", choices=["direct", "density"])
    p.add_argument("--beta", type=float, default=10.0, help="opacity loss weight")

    p = sub.add_parser("render", help="render one pose from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--pose", required=True, help="'px,py,pz,yaw,pitch'")
    p.add_argument("--resolution", default="64x64")
    p.add_argument("--out", required=True, help=".png or raw .f32 output")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--report", default=None, help="write the JSON report here")

    p = sub.add_parser("ablate", help="train/evaluate a grid of configurations")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", required=True,
                   help="JSON cells or shorthand 'mode=uniform,log;samples=4'")
    p.add_argument("--report", default=None)
    p.add_argument("--iters-oracle", type=int, default=3000)
    p.add_argument("--iters-shading", type=int, default=3000)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", default="test")

    p = sub.add_parser("serve", help="interactive rendering endpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--addr", default="127.0.0.1:8707")
    p.add_argument("--resolution", default="64x64")

    return parser


def _cmd_gen_data(args) -> int:
    from . import dataset as ds
    from . import scenes

    preset = scenes.get_preset(args.scene)
    if args.view_cell:
        v = _parse_vec(args.view_cell, 6, "--view-cell")
        from dataclasses import replace

        from .geom import ViewCell

        cell = ViewCell(
            center=v[:3], size=v[3:], forward=preset.cell.forward,
            max_pitch_deg=preset.cell.max_pitch_deg, max_yaw_deg=preset.cell.max_yaw_deg,
        )
        preset = replace(preset, cell=cell)
    ratios = tuple(_parse_vec(args.ratios, 3, "--ratios"))
    out = ds.generate_dataset(
        preset,
        args.out,
        n_images=args.images,
        resolution=_parse_resolution(args.resolution),
        fov_deg=args.fov,
        ratios=ratios,
        seed=args.seed,
    )
    print(f"wrote {args.images} images to {out.root}")
    return 0


def _oracle_config(args):
    from dataclasses import replace

    from .train import OracleTrainConfig, full_scale_oracle

    if args.full_scale:
        cfg = full_scale_oracle(k=args.k, z=args.z, single_depth=args.single_depth,
                                 unify=not args.no_unify, seed=args.seed)
        return replace(cfg, iterations=args.iters) if args.iters != 20000 else cfg
    return OracleTrainConfig(
        iterations=args.iters, batch_rays=args.batch, lr=args.lr, seed=args.seed,
        val_every=args.val_every, hidden_layers=args.hidden_layers,
        hidden_width=args.hidden_width, bins=args.bins, inputs=args.inputs,
        k=args.k, z=args.z, single_depth=args.single_depth, unify=not args.no_unify,
    )


def _cmd_train_oracle(args) -> int:
    from .checkpoint import save_checkpoint
    from .dataset import load_dataset
    from .train import train_oracle

    ckpt = train_oracle(load_dataset(args.data), _oracle_config(args))
    save_checkpoint(ckpt, args.out)
    print(f"oracle checkpoint: {args.out} (best val {ckpt.validation_loss:.5f} "
          f"at iter {ckpt.iteration})")
    return 0


def _cmd_train_shading(args) -> int:
    from dataclasses import replace

    from .checkpoint import load_checkpoint, save_checkpoint
    from .dataset import load_dataset
    from .train import ShadingTrainConfig, full_scale_shading, train_shading

    if args.full_scale:
        cfg = full_scale_shading(samples=args.samples, mode=args.mode,
                                  local_base=args.local_base, seed=args.seed,
                                  alpha_mode=args.alpha_mode, loss_beta=args.beta)
        if args.iters != 20000:
            cfg = replace(cfg, iterations=args.iters)
    else:
        cfg = ShadingTrainConfig(
            iterations=args.iters, batch_rays=args.batch, lr=args.lr, seed=args.seed,
            val_every=args.val_every, hidden_layers=args.hidden_layers,
            hidden_width=args.hidden_width, samples=args.samples, mode=args.mode,
            local_base=args.local_base, alpha_mode=args.alpha_mode, loss_beta=args.beta,
        )
    oracle = load_checkpoint(args.oracle) if args.oracle else None
    ckpt = train_shading(load_dataset(args.data), oracle, cfg)
    save_checkpoint(ckpt, args.out)
    print(f"shading checkpoint: {args.out} (best val {ckpt.validation_loss:.5f} "
          f"at iter {ckpt.iteration})")
    return 0


def _write_image(img, path: str) -> None:
    import numpy as np

    if path.endswith(".f32"):
        img.astype("<f4").tofile(path)
        return
    from PIL import Image

    Image.fromarray((np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)).save(path)


def _cmd_render(args) -> int:
    from .checkpoint import load_checkpoint
    from .geom import Pose

    ckpt = load_checkpoint(args.ckpt)
    v = _parse_vec(args.pose, 5, "--pose")
    pose = Pose(position=v[:3], yaw_deg=v[3], pitch_deg=v[4], fov_deg=ckpt.fov_deg)
    w, h = _parse_resolution(args.resolution)
    img, stats = ckpt.build_pipeline().render_image(pose, w, h)
    _write_image(img, args.out)
    print(f"rendered {w}x{h} in {stats['wall_ms']:.1f} ms -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .dataset import load_dataset
    from .metrics import evaluate, format_table, write_report

    report = evaluate(load_checkpoint(args.ckpt), load_dataset(args.data), split=args.split)
    if args.report:
        write_report(report, args.report)
    print(format_table([{"name": args.split, **report}]))
    return 0


def _cmd_ablate(args) -> int:
    from .dataset import load_dataset
    from .metrics import ablation, format_table, parse_grid_spec, write_report
    from .train import OracleTrainConfig, ShadingTrainConfig

    data = load_dataset(args.data)
    cells = parse_grid_spec(args.grid)
    rows = ablation(
        data,
        cells,
        OracleTrainConfig(iterations=args.iters_oracle, batch_rays=args.batch, seed=args.seed),
        ShadingTrainConfig(iterations=args.iters_shading, batch_rays=args.batch, seed=args.seed),
        split=args.split,
    )
    if args.report:
        write_report(rows, args.report)
    print(format_table(rows))
    return 0


def _cmd_serve(args) -> int:
    from .serve import run_server

    host, _, port = args.addr.rpartition(":")
    w, h = _parse_resolution(args.resolution)
    run_server(args.ckpt, host or "127.0.0.1", int(port), (w, h))
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train-oracle": _cmd_train_oracle,
    "train-shading": _cmd_train_shading,
    "render": _cmd_render,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    _setup_threads(argv)
    args = build_parser().parse_args(argv)
    if args.verbose:
        import logging

        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s %(message)s")
    from .errors import OracleMarchError

    try:
        return _COMMANDS[args.command](args)
    except (OracleMarchError, ValueError, KeyError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
