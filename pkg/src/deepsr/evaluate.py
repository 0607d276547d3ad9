"""Image quality (PSNR/SSIM) and closed-set identification (CMC) metrics,
plus the end-to-end evaluation report over a manifest.

Identification is nearest neighbor in pixel space; distance ties break by
gallery manifest order, which keeps reports deterministic.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import Manifest
from .errors import InputError
from .imaging import GrayImage, bicubic_resize, load_image, vectorize
from .sparse import LassoConfig
from .synthesis import SynthesisModel, synthesize

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 8
_C1 = 0.01**2
_C2 = 0.03**2


def psnr(a: GrayImage, b: GrayImage) -> float:
    """10*log10(1/MSE) for unit-range images, capped at 99 dB."""
    if a.pixels.shape != b.pixels.shape:
        raise InputError(
            f"psnr: shapes differ {a.pixels.shape} vs {b.pixels.shape}"
        )
    mse = float(np.mean((a.pixels - b.pixels) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def ssim(a: GrayImage, b: GrayImage) -> float:
    """Mean local SSIM over all 8x8 sliding windows (uniform weights)."""
    if a.pixels.shape != b.pixels.shape:
        raise InputError(
            f"ssim: shapes differ {a.pixels.shape} vs {b.pixels.shape}"
        )
    if min(a.pixels.shape) < SSIM_WINDOW:
        raise InputError(
            f"ssim: image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    wa = sliding_window_view(a.pixels, (SSIM_WINDOW, SSIM_WINDOW))
    wb = sliding_window_view(b.pixels, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = wa.var(axis=(-2, -1))
    var_b = wb.var(axis=(-2, -1))
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + _C1) * (2 * cov + _C2)
    den = (mu_a**2 + mu_b**2 + _C1) * (var_a + var_b + _C2)
    return float(np.mean(num / den))


@dataclass
class CmcResult:
    """Cumulative match characteristic over a closed-set gallery."""

    ranks: List[Tuple[int, float]]
    n_probes: int

    def accuracy_at(self, rank: int) -> float:
        for r, acc in self.ranks:
            if r == rank:
                return acc
        raise InputError(f"CmcResult: rank {rank} not recorded")


def identify(
    gallery: np.ndarray,
    gallery_ids: Sequence[str],
    probes: np.ndarray,
    probe_ids: Sequence[str],
    metric: str = "euclidean",
) -> CmcResult:
    """Nearest-neighbor identification; columns are feature vectors."""
    gallery = np.asarray(gallery, dtype=np.float64)
    probes = np.asarray(probes, dtype=np.float64)
    if gallery.shape[0] != probes.shape[0]:
        raise InputError(
            f"identify: feature dims differ ({gallery.shape[0]} vs {probes.shape[0]})"
        )
    if len(gallery_ids) != gallery.shape[1] or len(probe_ids) != probes.shape[1]:
        raise InputError("identify: id count does not match column count")
    if len(set(gallery_ids)) != len(gallery_ids):
        raise InputError("identify: gallery ids must be unique")
    known = set(gallery_ids)
    for pid in probe_ids:
        if pid not in known:
            raise InputError(f"identify: probe id {pid!r} not in gallery")
    if metric == "euclidean":
        g2 = np.sum(gallery**2, axis=0)
        p2 = np.sum(probes**2, axis=0)
        dist = p2[:, None] - 2.0 * probes.T @ gallery + g2[None, :]
    elif metric == "cosine":
        gn = gallery / np.maximum(np.linalg.norm(gallery, axis=0), 1e-300)
        pn = probes / np.maximum(np.linalg.norm(probes, axis=0), 1e-300)
        dist = -(pn.T @ gn)
    else:
        raise InputError(f"identify: unknown metric {metric!r}")
    n_gallery = gallery.shape[1]
    id_arr = list(gallery_ids)
    hit_ranks = np.empty(probes.shape[1], dtype=np.int64)
    for i, pid in enumerate(probe_ids):
        order = np.argsort(dist[i], kind="stable")  # ties keep manifest order
        true_col = id_arr.index(pid)
        hit_ranks[i] = int(np.flatnonzero(order == true_col)[0]) + 1
    ranks = [
        (r, float(np.mean(hit_ranks <= r))) for r in range(1, n_gallery + 1)
    ]
    return CmcResult(ranks=ranks, n_probes=probes.shape[1])


@dataclass
class MethodReport:
    cmc: CmcResult
    mean_psnr: float
    mean_ssim: float
    mean_latency_ms: float


@dataclass
class EvalReport:
    methods: Dict[str, MethodReport]
    n_probes: int
    config_echo: dict = field(default_factory=dict)

    def write_csv(self, path, ranks: Optional[Sequence[int]] = None) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["method", "rank", "accuracy"])
            for method, rep in self.methods.items():
                for r, acc in rep.cmc.ranks:
                    if ranks is None or r in ranks:
                        writer.writerow([method, r, f"{acc:.6f}"])

    def write_json(self, path) -> None:
        summary = {
            "n_probes": self.n_probes,
            "config": self.config_echo,
            "methods": {
                name: {
                    "rank1": rep.cmc.accuracy_at(1),
                    "mean_psnr_db": rep.mean_psnr,
                    "mean_ssim": rep.mean_ssim,
                    "mean_latency_ms": rep.mean_latency_ms,
                }
                for name, rep in self.methods.items()
            },
        }
        with open(path, "w") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")


def evaluate_pipeline(
    model: SynthesisModel,
    manifest: Manifest,
    lasso: LassoConfig,
    baselines: Sequence[str] = ("bicubic",),
    metric: str = "euclidean",
) -> EvalReport:
    """Synthesize every probe, score quality against the subject's gallery
    HR image, and run nearest-neighbor identification per method."""
    for b in baselines:
        if b != "bicubic":
            raise InputError(f"evaluate_pipeline: unknown baseline {b!r}")
    hr_h, hr_w = model.config.hr_shape
    lr_h, lr_w = model.config.lr_shape
    gallery_entries = manifest.gallery
    gallery_imgs = {e.subject_id: load_image(e.path) for e in gallery_entries}
    for sid, img in gallery_imgs.items():
        if img.pixels.shape != (hr_h, hr_w):
            raise InputError(
                f"evaluate_pipeline: gallery image for {sid} is "
                f"{img.height}x{img.width}, model expects {hr_h}x{hr_w}"
            )
    gallery_ids = [e.subject_id for e in gallery_entries]
    gallery_mat = np.stack(
        [vectorize(gallery_imgs[sid]) for sid in gallery_ids], axis=1
    )

    methods = ["synthesis"] + list(baselines)
    feats: Dict[str, list] = {m: [] for m in methods}
    psnrs: Dict[str, list] = {m: [] for m in methods}
    ssims: Dict[str, list] = {m: [] for m in methods}
    latencies: Dict[str, list] = {m: [] for m in methods}
    probe_ids = []
    for e in manifest.probes:
        probe = load_image(e.path)
        if probe.pixels.shape != (lr_h, lr_w):
            raise InputError(
                f"evaluate_pipeline: probe {e.path} is {probe.height}x{probe.width}, "
                f"model expects {lr_h}x{lr_w}"
            )
        probe_ids.append(e.subject_id)
        truth = gallery_imgs[e.subject_id]
        t0 = time.perf_counter()
        out = synthesize(model, vectorize(probe), lasso)
        latencies["synthesis"].append((time.perf_counter() - t0) * 1e3)
        img = GrayImage(np.clip(out.reshape(hr_h, hr_w), 0.0, 1.0))
        feats["synthesis"].append(vectorize(img))
        psnrs["synthesis"].append(psnr(img, truth))
        ssims["synthesis"].append(ssim(img, truth))
        if "bicubic" in baselines:
            t0 = time.perf_counter()
            up = bicubic_resize(probe, hr_w, hr_h)
            latencies["bicubic"].append((time.perf_counter() - t0) * 1e3)
            feats["bicubic"].append(vectorize(up))
            psnrs["bicubic"].append(psnr(up, truth))
            ssims["bicubic"].append(ssim(up, truth))

    reports: Dict[str, MethodReport] = {}
    for m in methods:
        probe_mat = np.stack(feats[m], axis=1)
        cmc = identify(gallery_mat, gallery_ids, probe_mat, probe_ids, metric)
        reports[m] = MethodReport(
            cmc=cmc,
            mean_psnr=float(np.mean(psnrs[m])),
            mean_ssim=float(np.mean(ssims[m])),
            mean_latency_ms=float(np.mean(latencies[m])),
        )
    echo = {
        "levels": model.config.levels,
        "atoms": [c.n_atoms for c in model.config.per_level],
        "lambda": [c.lam for c in model.config.per_level],
        "lambda_m": model.config.lambda_m,
        "lr_shape": list(model.config.lr_shape),
        "hr_shape": list(model.config.hr_shape),
        "lasso": {"lam": lasso.lam, "max_iters": lasso.max_iters, "tol": lasso.tol},
        "metric": metric,
    }
    return EvalReport(methods=reports, n_probes=len(probe_ids), config_echo=echo)
