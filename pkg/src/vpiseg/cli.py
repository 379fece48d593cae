"""Command-line surface: gen-data, train, eval, predict, compare.

Every command validates its flags before touching the filesystem, writes
outputs atomically (temp file + rename), and is idempotent for identical
inputs and seed.  Failures print one line with the ``vpiseg: error:``
prefix and exit nonzero.  The VPISEG_THREADS environment variable caps
per-scene worker parallelism where a command supports it.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from vpiseg.pgm import read_pgm, write_pgm, write_pgm16
from vpiseg.synth import PROFILES, SceneSpec, generate_dataset
from vpiseg.train import compare_runs, evaluate, parse_config, predict_map, train
from vpiseg.unet import load_params


def _workers() -> int:
    val = os.environ.get("VPISEG_THREADS", "1")
    try:
        n = int(val)
    except ValueError:
        raise ValueError(f"VPISEG_THREADS must be an integer, got {val!r}") from None
    if n < 1:
        raise ValueError(f"VPISEG_THREADS must be >= 1, got {n}")
    return n


def _parse_split(text: str, n: int) -> tuple[int, int]:
    try:
        a, b = (int(p) for p in text.split(":"))
    except ValueError:
        raise ValueError(f"--split must look like TRAIN:TEST, got {text!r}") from None
    if a + b != n:
        raise ValueError(f"split {a}:{b} does not partition --n {n}")
    return a, b


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"expected HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise ValueError(f"size must be positive, got {text!r}")
    return h, w


def _cmd_gen_data(args) -> None:
    split = _parse_split(args.split, args.n)
    template = SceneSpec(height=args.height, width=args.width, seed=args.seed,
                         speckle_sigma=args.speckle_sigma,
                         speckle_grain=args.speckle_grain,
                         occl_period=args.occl_period,
                         occl_width=args.occl_width,
                         occl_atten=args.occl_atten)
    manifest = generate_dataset(args.n, template, split, args.profile, args.out,
                                max_workers=_workers())
    print(f"wrote {args.n} scenes, manifest {manifest}")


def _manifest_of(data_dir: str) -> str:
    path = os.path.join(data_dir, "manifest.csv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no manifest.csv under {data_dir}")
    return path


def _cmd_train(args) -> None:
    cfg, net = parse_config(args.config)
    ckpt, log = train(_manifest_of(args.data), cfg, net, args.out)
    print(f"checkpoint {ckpt}")
    print(f"loss log {log}")


def _cmd_eval(args) -> None:
    ws = _parse_size(args.working_size) if args.working_size else None
    report = evaluate(args.ckpt, _manifest_of(args.data), out_dir=args.out,
                      threshold=args.threshold, working_size=ws)
    print(f"mean_dice {report.mean_dice!r}")
    print(f"auc {report.auc!r}")


def _cmd_predict(args) -> None:
    params = load_params(args.ckpt)
    image = read_pgm(args.image)
    prob = predict_map(params, image)
    mask = (prob >= args.threshold).astype(np.float64)
    write_pgm(mask, args.out_mask)
    write_pgm16(prob, args.out_prob)
    print(f"wrote {args.out_mask} and {args.out_prob}")


def _cmd_compare(args) -> None:
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise ValueError(f"--seeds must be comma-separated integers, got {args.seeds!r}") from None
    rows = compare_runs(args.config_a, args.config_b, _manifest_of(args.data),
                        seeds, args.out)
    for seed, da, db, aa, ab in rows:
        print(f"seed {seed}: dice_a {da!r} dice_b {db!r} auc_a {aa!r} auc_b {ab!r}")
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vpiseg",
                                description="bone-feature segmentation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset")
    g.add_argument("--n", type=int, required=True, help="number of scenes")
    g.add_argument("--split", required=True, help="TRAIN:TEST scene counts")
    g.add_argument("--profile", choices=PROFILES, default="speckle+occlusion")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--height", type=int, default=128)
    g.add_argument("--width", type=int, default=512)
    g.add_argument("--speckle-sigma", type=float, default=0.3)
    g.add_argument("--speckle-grain", type=int, default=2)
    g.add_argument("--occl-period", type=int, default=24)
    g.add_argument("--occl-width", type=int, default=6)
    g.add_argument("--occl-atten", type=float, default=0.4)
    g.set_defaults(func=_cmd_gen_data)

    t = sub.add_parser("train", help="train on a dataset's train split")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--config", required=True, help="key=value config file")
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--threshold", type=float, default=0.5)
    e.add_argument("--working-size", default=None, metavar="HxW",
                   help="resize images to this size before the network (default: native)")
    e.set_defaults(func=_cmd_eval)

    r = sub.add_parser("predict", help="segment a single image")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--image", required=True)
    r.add_argument("--out-mask", required=True)
    r.add_argument("--out-prob", required=True)
    r.add_argument("--threshold", type=float, default=0.5)
    r.set_defaults(func=_cmd_predict)

    c = sub.add_parser("compare", help="train/evaluate two configs per seed")
    c.add_argument("--config-a", required=True)
    c.add_argument("--config-b", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--seeds", required=True, help="comma-separated seed list")
    c.add_argument("--out", required=True, help="comparison CSV path")
    c.set_defaults(func=_cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"vpiseg: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
