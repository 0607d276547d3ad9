"""Batch command-line interface.

Subcommands: gen-toy, downsample, train, synth, eval. Exit codes: 0 on
success, 2 on input/validation errors, 3 on numerical failures. Training
knobs come from a flat key=value config file with CLI-flag overrides;
unknown config keys are rejected.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .dataset import (
    Manifest,
    ToyCorpusSpec,
    generate_toy_corpus,
    load_manifest,
    make_synthetic_probes,
    save_manifest,
)
from .dictlearn import DictLearnConfig
from .errors import InputError, NumericalError
from .imaging import GrayImage, bicubic_resize, devectorize, load_image, save_image, vectorize
from .evaluate import evaluate_pipeline
from .modelio import read_model, write_model
from .sparse import LassoConfig
from .synthesis import SynthesisConfig, synthesize, train

CONFIG_KEYS = {
    "levels": int,
    "atoms": str,  # comma-separated per-level atom counts
    "lam": str,  # comma-separated per-level sparsity weights (or one value)
    "lambda_m": float,
    "lr_size": int,
    "epochs": int,
    "seed": int,
    "lasso_max_iters": int,
    "lasso_tol": float,
    "encode_mode": str,
}

DEFAULTS = {
    "levels": 2,
    "atoms": "100,80",
    "lam": "0.85",
    "lambda_m": 1e-6,
    "lr_size": 24,
    "epochs": 30,
    "seed": 0,
    "lasso_max_iters": 300,
    "lasso_tol": 1e-6,
    "encode_mode": "lasso",
}


def _load_config_file(path) -> dict:
    values = {}
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](raw)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def _int_list(raw: str, what: str) -> list:
    try:
        return [int(s) for s in str(raw).split(",") if s.strip()]
    except ValueError as exc:
        raise InputError(f"bad {what} list {raw!r}: {exc}") from exc


def _float_list(raw: str, what: str) -> list:
    try:
        return [float(s) for s in str(raw).split(",") if s.strip()]
    except ValueError as exc:
        raise InputError(f"bad {what} list {raw!r}: {exc}") from exc


def _resolve_run_config(args) -> dict:
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        values.update(_load_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _build_synthesis_config(values: dict, lr_shape, hr_shape) -> SynthesisConfig:
    levels = int(values["levels"])
    atoms = _int_list(values["atoms"], "atoms")
    lams = _float_list(values["lam"], "lam")
    if len(atoms) != levels:
        raise InputError(
            f"atoms list has {len(atoms)} entries for {levels} levels"
        )
    if len(lams) == 1:
        lams = lams * levels
    if len(lams) != levels:
        raise InputError(f"lam list has {len(lams)} entries for {levels} levels")
    lasso = LassoConfig(
        lam=lams[0],
        max_iters=int(values["lasso_max_iters"]),
        tol=float(values["lasso_tol"]),
    )
    per_level = tuple(
        DictLearnConfig(
            n_atoms=atoms[j],
            lam=lams[j],
            epochs=int(values["epochs"]),
            seed=int(values["seed"]) + j,
            lasso=lasso,
        )
        for j in range(levels)
    )
    return SynthesisConfig(
        levels=levels,
        per_level=per_level,
        lr_shape=lr_shape,
        hr_shape=hr_shape,
        lambda_m=float(values["lambda_m"]),
        encode_mode=str(values["encode_mode"]),
    )


def cmd_gen_toy(args) -> int:
    spec = ToyCorpusSpec(
        n_subjects=args.subjects,
        hr_size=args.hr_size,
        lr_size=args.lr_size,
        probes_per_subject=args.probes,
        seed=args.seed,
        perturbation=args.perturbation,
    )
    generate_toy_corpus(spec, args.out)
    manifest_path = Path(args.out) / "manifest.csv"
    print(manifest_path)
    return 0


def cmd_downsample(args) -> int:
    manifest = load_manifest(args.manifest)
    out = make_synthetic_probes(
        manifest, args.lr_size, args.out, prefilter=args.prefilter
    )
    manifest_path = Path(args.out) / "manifest.csv"
    save_manifest(out, manifest_path)
    print(manifest_path)
    return 0


def cmd_train(args) -> int:
    values = _resolve_run_config(args)
    manifest = load_manifest(args.manifest)
    gallery = manifest.gallery
    if not gallery:
        raise InputError("train: manifest has no gallery entries")
    hr_shapes = {(e.height, e.width) for e in gallery}
    if len(hr_shapes) != 1:
        raise InputError(f"train: gallery images have mixed sizes: {hr_shapes}")
    hr_shape = hr_shapes.pop()
    lr_size = int(values["lr_size"])
    if lr_size > min(hr_shape):
        raise InputError(
            f"train: lr_size {lr_size} exceeds gallery size {hr_shape}"
        )
    cfg = _build_synthesis_config(values, (lr_size, lr_size), hr_shape)

    hr_cols, lr_cols = [], []
    for e in gallery:
        img = load_image(e.path)
        hr_cols.append(vectorize(img))
        lr_cols.append(vectorize(bicubic_resize(img, lr_size, lr_size)))
    xh = np.stack(hr_cols, axis=1)
    xl = np.stack(lr_cols, axis=1)

    try:
        result = train(xl, xh, cfg)
    except NumericalError as exc:
        raise NumericalError(f"train: {exc}") from exc
    for name, levels in (("low", result.low_levels), ("high", result.high_levels)):
        for j, lvl in enumerate(levels, start=1):
            objs = [p.objective for p in lvl.trace]
            replaced = sum(len(p.replaced_atoms) for p in lvl.trace)
            print(
                f"{name} level {j}: objective {objs[0]:.6g} -> {objs[-1]:.6g} "
                f"over {len(objs)} epochs, {replaced} dead-atom replacements"
            )
    write_model(result.model, args.model_out)
    print(f"model written to {args.model_out}")
    return 0


def cmd_synth(args) -> int:
    model = read_model(args.model)
    lr_h, lr_w = model.config.lr_shape
    hr_h, hr_w = model.config.hr_shape
    lasso = LassoConfig(
        lam=model.config.per_level[0].lam,
        max_iters=args.lasso_max_iters,
        tol=args.lasso_tol,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for inp in args.inputs:
        img = load_image(inp)
        if img.pixels.shape != (lr_h, lr_w):
            if not args.resize:
                raise InputError(
                    f"synth: {inp} is {img.height}x{img.width}, model expects "
                    f"{lr_h}x{lr_w} (pass --resize to coerce)"
                )
            img = bicubic_resize(img, lr_w, lr_h)
        t0 = time.perf_counter()
        out_vec = synthesize(model, vectorize(img), lasso)
        latency_ms = (time.perf_counter() - t0) * 1e3
        out_img = devectorize(out_vec, hr_w, hr_h)
        out_path = out_dir / f"{Path(inp).stem}_hr.pgm"
        save_image(out_img, out_path)
        print(f"{out_path}  ({latency_ms:.2f} ms)")
    return 0


def cmd_eval(args) -> int:
    model = read_model(args.model)
    manifest = load_manifest(args.manifest)
    lasso = LassoConfig(
        lam=model.config.per_level[0].lam,
        max_iters=args.lasso_max_iters,
        tol=args.lasso_tol,
    )
    baselines = () if args.baselines == "none" else ("bicubic",)
    report = evaluate_pipeline(
        model, manifest, lasso, baselines=baselines, metric=args.metric
    )
    ranks = _int_list(args.ranks, "ranks") if args.ranks else None
    prefix = Path(args.report_out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    report.write_csv(csv_path, ranks=ranks)
    report.write_json(json_path)
    for name, rep in report.methods.items():
        print(
            f"{name}: rank-1 {rep.cmc.accuracy_at(1):.3f}  "
            f"psnr {rep.mean_psnr:.2f} dB  ssim {rep.mean_ssim:.4f}  "
            f"latency {rep.mean_latency_ms:.2f} ms"
        )
    print(csv_path)
    print(json_path)
    return 0


def _add_run_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--levels", type=int, help=f"dictionary depth (default {DEFAULTS['levels']})")
    p.add_argument("--atoms", help=f"per-level atom counts, comma-separated (default {DEFAULTS['atoms']})")
    p.add_argument("--lam", help=f"per-level sparsity weights (default {DEFAULTS['lam']})")
    p.add_argument("--lambda-m", dest="lambda_m", type=float, help=f"mapping ridge (default {DEFAULTS['lambda_m']})")
    p.add_argument("--lr-size", dest="lr_size", type=int, help=f"low-resolution training size (default {DEFAULTS['lr_size']})")
    p.add_argument("--epochs", type=int, help=f"alternating-minimization epochs (default {DEFAULTS['epochs']})")
    p.add_argument("--seed", type=int, help=f"RNG seed (default {DEFAULTS['seed']})")
    p.add_argument("--lasso-max-iters", dest="lasso_max_iters", type=int, help=f"(default {DEFAULTS['lasso_max_iters']})")
    p.add_argument("--lasso-tol", dest="lasso_tol", type=float, help=f"(default {DEFAULTS['lasso_tol']})")
    p.add_argument("--encode-mode", dest="encode_mode", choices=["lasso", "exact"], help=f"(default {DEFAULTS['encode_mode']})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepsr",
        description="Coupled deep sparse dictionary synthesis of high-resolution "
        "face images from low-resolution probes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", help="generate a procedural toy corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=40)
    p.add_argument("--hr-size", dest="hr_size", type=int, default=24)
    p.add_argument("--lr-size", dest="lr_size", type=int, default=6)
    p.add_argument("--probes", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturbation", type=float, default=0.3)
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("downsample", help="downsample manifest probes to lr size")
    p.add_argument("--manifest", required=True)
    p.add_argument("--lr-size", dest="lr_size", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--prefilter", choices=["none", "box"], default="none")
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("train", help="train a model on a manifest's gallery")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-out", dest="model_out", required=True)
    _add_run_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="synthesize HR images from LR inputs")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resize", action="store_true", help="bicubic pre-resize inputs to the model's LR size")
    p.add_argument("--lasso-max-iters", dest="lasso_max_iters", type=int, default=300)
    p.add_argument("--lasso-tol", dest="lasso_tol", type=float, default=1e-6)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate a model over a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report-out", dest="report_out", required=True)
    p.add_argument("--ranks", help="comma-separated ranks to keep in the CSV")
    p.add_argument("--baselines", choices=["bicubic", "none"], default="bicubic")
    p.add_argument("--metric", choices=["euclidean", "cosine"], default="euclidean")
    p.add_argument("--lasso-max-iters", dest="lasso_max_iters", type=int, default=300)
    p.add_argument("--lasso-tol", dest="lasso_tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:  # includes FormatError
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
