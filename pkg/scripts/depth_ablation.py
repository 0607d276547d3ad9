#!/usr/bin/env python3
"""Sweep dictionary depth k and report rank-1 accuracy, PSNR, and latency
for each depth on the procedural toy corpus.

Example:
    python3 scripts/depth_ablation.py --out /tmp/depth_ablation --depths 1,2,3
"""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from deepsr.dataset import ToyCorpusSpec, generate_toy_corpus
from deepsr.dictlearn import DictLearnConfig
from deepsr.evaluate import evaluate_pipeline
from deepsr.imaging import bicubic_resize, load_image, vectorize
from deepsr.sparse import LassoConfig
from deepsr.synthesis import SynthesisConfig, train

ATOM_SCHEDULE = [60, 40, 30, 24, 20]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--depths", default="1,2,3", help="comma-separated depths")
    ap.add_argument("--subjects", type=int, default=40)
    ap.add_argument("--hr-size", type=int, default=24)
    ap.add_argument("--lr-size", type=int, default=6)
    ap.add_argument("--lam", type=float, default=0.05)
    ap.add_argument("--epochs", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    depths = [int(d) for d in args.depths.split(",")]
    if max(depths) > len(ATOM_SCHEDULE):
        raise SystemExit(f"depth > {len(ATOM_SCHEDULE)} not in the atom schedule")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    spec = ToyCorpusSpec(
        n_subjects=args.subjects,
        hr_size=args.hr_size,
        lr_size=args.lr_size,
        seed=args.seed,
    )
    manifest = generate_toy_corpus(spec, out / "corpus")
    lasso = LassoConfig(lam=args.lam, max_iters=2000, tol=1e-12)
    lr_cols, hr_cols = [], []
    for e in manifest.gallery:
        img = load_image(e.path)
        hr_cols.append(vectorize(img))
        lr_cols.append(vectorize(bicubic_resize(img, args.lr_size, args.lr_size)))
    xl = np.stack(lr_cols, axis=1)
    xh = np.stack(hr_cols, axis=1)

    rows = []
    for k in depths:
        cfg = SynthesisConfig(
            levels=k,
            per_level=tuple(
                DictLearnConfig(
                    n_atoms=ATOM_SCHEDULE[j], lam=args.lam, epochs=args.epochs,
                    lasso=lasso, seed=args.seed + j,
                )
                for j in range(k)
            ),
            lr_shape=(args.lr_size, args.lr_size),
            hr_shape=(args.hr_size, args.hr_size),
            lambda_m=1e-6,
        )
        t0 = time.perf_counter()
        result = train(xl, xh, cfg)
        train_s = time.perf_counter() - t0
        report = evaluate_pipeline(result.model, manifest, lasso, baselines=())
        rep = report.methods["synthesis"]
        rows.append(
            {
                "depth": k,
                "rank1": rep.cmc.accuracy_at(1),
                "mean_psnr_db": rep.mean_psnr,
                "mean_ssim": rep.mean_ssim,
                "mean_latency_ms": rep.mean_latency_ms,
                "train_seconds": train_s,
            }
        )
        print(
            f"k={k}: rank-1 {rep.cmc.accuracy_at(1):.3f}  "
            f"psnr {rep.mean_psnr:.2f} dB  ssim {rep.mean_ssim:.4f}  "
            f"latency {rep.mean_latency_ms:.2f} ms  train {train_s:.1f}s"
        )

    csv_path = out / "depth_ablation.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"table written to {csv_path}")


if __name__ == "__main__":
    main()
