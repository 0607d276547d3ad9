"""Corpus ingestion (CSV manifests), synthetic probe generation, and a
procedural toy-identity generator for self-contained experiments.

The protocol is closed set: exactly one gallery image per subject, and
every probe subject has a gallery entry. Manifest paths are stored
relative to the CSV file and resolved on load.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import InputError
from .imaging import (
    GrayImage,
    bicubic_resample,
    bicubic_resize,
    box_prefilter,
    load_image,
    save_image,
)

MANIFEST_HEADER = ["subject_id", "role", "path"]


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    role: str  # "gallery" | "probe"
    path: Path
    width: int
    height: int


@dataclass
class Manifest:
    entries: List[ManifestEntry]

    def __post_init__(self):
        self.validate()

    def validate(self):
        gallery_ids = set()
        for e in self.entries:
            if e.role not in ("gallery", "probe"):
                raise InputError(f"manifest: unknown role {e.role!r} for {e.subject_id}")
            if e.role == "gallery":
                if e.subject_id in gallery_ids:
                    raise InputError(
                        f"manifest: duplicate gallery entry for subject {e.subject_id}"
                    )
                gallery_ids.add(e.subject_id)
        for e in self.entries:
            if e.role == "probe" and e.subject_id not in gallery_ids:
                raise InputError(
                    f"manifest: probe subject {e.subject_id} has no gallery entry "
                    "(closed-set violation)"
                )

    @property
    def gallery(self) -> List[ManifestEntry]:
        return [e for e in self.entries if e.role == "gallery"]

    @property
    def probes(self) -> List[ManifestEntry]:
        return [e for e in self.entries if e.role == "probe"]


def load_manifest(path) -> Manifest:
    """Load and validate a subject_id,role,path CSV manifest."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"load_manifest: no such file: {path}")
    entries: List[ManifestEntry] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"load_manifest: {path} is empty") from None
        if header != MANIFEST_HEADER:
            raise InputError(
                f"load_manifest: header must be {','.join(MANIFEST_HEADER)}, "
                f"got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"load_manifest: {path}:{lineno}: expected 3 fields")
            subject_id, role, rel = row
            img_path = (path.parent / rel).resolve()
            img = load_image(img_path)
            entries.append(
                ManifestEntry(subject_id, role, img_path, img.width, img.height)
            )
    return Manifest(entries)


def save_manifest(manifest: Manifest, path) -> None:
    """Write a manifest CSV with paths relative to the CSV location."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_HEADER)
        for e in manifest.entries:
            rel = os.path.relpath(e.path, path.parent)
            writer.writerow([e.subject_id, e.role, rel])


def make_synthetic_probes(
    manifest: Manifest, lr_size: int, out_dir, prefilter: str = "none"
) -> Manifest:
    """Bicubic-downsample every probe image to lr_size x lr_size.

    prefilter="box" averages over blocks first (integer factors only);
    gallery entries are passed through unchanged.
    """
    if lr_size < 1:
        raise InputError(f"make_synthetic_probes: bad lr_size {lr_size}")
    if prefilter not in ("none", "box"):
        raise InputError(f"make_synthetic_probes: unknown prefilter {prefilter!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries: List[ManifestEntry] = list(manifest.gallery)
    counters: dict = {}
    for e in manifest.probes:
        if e.width < lr_size or e.height < lr_size:
            raise InputError(
                f"make_synthetic_probes: probe {e.path} is smaller than "
                f"{lr_size}x{lr_size}"
            )
        try:
            img = load_image(e.path)
        except InputError as exc:
            raise InputError(f"make_synthetic_probes: {e.path}: {exc}") from exc
        if prefilter == "box" and img.width > lr_size:
            factor = img.width // lr_size
            if factor > 1 and img.width % lr_size == 0 and img.height % lr_size == 0:
                img = GrayImage(
                    np.clip(box_prefilter(img.pixels, factor), 0.0, 1.0)
                )
        small = bicubic_resize(img, lr_size, lr_size)
        k = counters.get(e.subject_id, 0)
        counters[e.subject_id] = k + 1
        out_path = out_dir / f"{e.subject_id}_probe{k}_{lr_size}.pgm"
        save_image(small, out_path)
        entries.append(
            ManifestEntry(e.subject_id, "probe", out_path.resolve(), lr_size, lr_size)
        )
    return Manifest(entries)


@dataclass(frozen=True)
class ToyCorpusSpec:
    """Procedural corpus: each subject is a smooth random blob field."""

    n_subjects: int = 40
    hr_size: int = 24
    lr_size: int = 6
    probes_per_subject: int = 2
    seed: int = 0
    perturbation: float = 0.3

    def __post_init__(self):
        if self.n_subjects < 1 or self.probes_per_subject < 0:
            raise InputError("ToyCorpusSpec: counts must be positive")
        if not (0.0 <= self.perturbation <= 1.0):
            raise InputError("ToyCorpusSpec: perturbation must be in [0, 1]")
        if self.hr_size < 2 * self.lr_size:
            raise InputError(
                f"ToyCorpusSpec: hr_size {self.hr_size} must be >= "
                f"2 * lr_size ({self.lr_size})"
            )


_N_BLOBS = 8


def _render_field(params: np.ndarray, size: int, shift=(0.0, 0.0)) -> np.ndarray:
    """Evaluate a sum-of-Gaussians identity field on a size x size grid.

    shift is in HR pixel units; the field is analytic, so shifted probes
    are exact re-renders rather than resampled copies.
    """
    coords = (np.arange(size) + 0.5) / size
    yy = coords[:, None] - shift[0] / size
    xx = coords[None, :] - shift[1] / size
    field = np.full((size, size), 0.5)
    for cy, cx, sigma, amp in params:
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        field += amp * np.exp(-d2 / (2.0 * sigma**2))
    return np.clip(field, 0.0, 1.0)


def _subject_params(rng: np.random.Generator) -> np.ndarray:
    cy = rng.uniform(0.1, 0.9, _N_BLOBS)
    cx = rng.uniform(0.1, 0.9, _N_BLOBS)
    sigma = rng.uniform(0.06, 0.22, _N_BLOBS)
    amp = rng.uniform(0.2, 0.5, _N_BLOBS) * rng.choice([-1.0, 1.0], _N_BLOBS)
    return np.stack([cy, cx, sigma, amp], axis=1)


def generate_toy_corpus(spec: ToyCorpusSpec, out_dir) -> Manifest:
    """Write a deterministic gallery/probe corpus of procedural identities.

    Gallery images are clean HR renders; probes are geometrically and
    photometrically jittered renders downsampled to lr_size. Raises if the
    intra/inter-subject correlation margin (>= 0.1) fails, which would make
    identification experiments meaningless.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    entries: List[ManifestEntry] = []
    hr_renders = []
    probe_renders = []
    for s in range(spec.n_subjects):
        sid = f"s{s:03d}"
        params = _subject_params(rng)
        hr = _render_field(params, spec.hr_size)
        hr_renders.append(hr)
        gal_path = out_dir / f"{sid}_gallery.pgm"
        save_image(GrayImage(hr), gal_path)
        entries.append(
            ManifestEntry(sid, "gallery", gal_path.resolve(), spec.hr_size, spec.hr_size)
        )
        for p in range(spec.probes_per_subject):
            shift = rng.uniform(-2.0, 2.0, 2) * spec.perturbation
            contrast = 1.0 + rng.uniform(-0.1, 0.1) * spec.perturbation
            probe_hr = _render_field(params, spec.hr_size, shift=shift)
            probe_hr = np.clip(0.5 + contrast * (probe_hr - 0.5), 0.0, 1.0)
            probe_renders.append((s, probe_hr))
            probe = bicubic_resize(GrayImage(probe_hr), spec.lr_size, spec.lr_size)
            probe_path = out_dir / f"{sid}_probe{p}.pgm"
            save_image(probe, probe_path)
            entries.append(
                ManifestEntry(
                    sid, "probe", probe_path.resolve(), spec.lr_size, spec.lr_size
                )
            )
    _check_separability(hr_renders, probe_renders)
    manifest = Manifest(entries)
    save_manifest(manifest, out_dir / "manifest.csv")
    return manifest


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom) if denom > 0 else 0.0


def _check_separability(hr_renders, probe_renders) -> None:
    if not probe_renders or len(hr_renders) < 2:
        return
    intra = [ _corr(hr_renders[s], render) for s, render in probe_renders ]
    inter = []
    for i in range(len(hr_renders)):
        for j in range(i + 1, len(hr_renders)):
            inter.append(_corr(hr_renders[i], hr_renders[j]))
    margin = float(np.mean(intra)) - float(np.mean(inter))
    if margin < 0.1:
        raise InputError(
            f"generate_toy_corpus: intra/inter correlation margin {margin:.3f} "
            "< 0.1; adjust perturbation or blob parameters"
        )
