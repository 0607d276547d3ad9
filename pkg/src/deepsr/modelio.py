"""Binary model container.

Layout: magic b"SDSR", format_version (u32 LE), length-prefixed (u64 LE)
UTF-8 JSON config block, then per-level dictionaries low-then-high and
the mapping, each as {rows u64 LE, cols u64 LE, row-major f64 LE payload}.
The reader validates the dimension-chain invariant before returning.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dictlearn import DictLearnConfig, Dictionary
from .errors import FormatError, InputError
from .sparse import LassoConfig
from .synthesis import FORMAT_VERSION, SynthesisConfig, SynthesisModel

MAGIC = b"SDSR"


def _config_to_json(cfg: SynthesisConfig) -> dict:
    return {
        "levels": cfg.levels,
        "per_level": [
            {
                "n_atoms": c.n_atoms,
                "lam": c.lam,
                "epochs": c.epochs,
                "seed": c.seed,
                "dead_atom_threshold": c.dead_atom_threshold,
                "ridge": c.ridge,
                "lasso": {
                    "lam": c.lasso.lam,
                    "max_iters": c.lasso.max_iters,
                    "tol": c.lasso.tol,
                },
            }
            for c in cfg.per_level
        ],
        "lr_shape": list(cfg.lr_shape),
        "hr_shape": list(cfg.hr_shape),
        "lambda_m": cfg.lambda_m,
        "encode_mode": cfg.encode_mode,
    }


def _config_from_json(doc: dict) -> SynthesisConfig:
    try:
        per_level = tuple(
            DictLearnConfig(
                n_atoms=c["n_atoms"],
                lam=c["lam"],
                epochs=c["epochs"],
                seed=c["seed"],
                dead_atom_threshold=c["dead_atom_threshold"],
                ridge=c["ridge"],
                lasso=LassoConfig(**c["lasso"]),
            )
            for c in doc["per_level"]
        )
        return SynthesisConfig(
            levels=doc["levels"],
            per_level=per_level,
            lr_shape=tuple(doc["lr_shape"]),
            hr_shape=tuple(doc["hr_shape"]),
            lambda_m=doc["lambda_m"],
            encode_mode=doc.get("encode_mode", "lasso"),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"model config block is malformed: {exc}") from exc


def _write_matrix(f, arr: np.ndarray) -> None:
    rows, cols = arr.shape
    f.write(struct.pack("<QQ", rows, cols))
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    offset = f.tell()
    data = f.read(n)
    if len(data) != n:
        raise FormatError(
            f"model file truncated at offset {offset}: needed {n} bytes for "
            f"{what}, got {len(data)}"
        )
    return data


def _read_matrix(f, what: str) -> np.ndarray:
    rows, cols = struct.unpack("<QQ", _read_exact(f, 16, f"{what} header"))
    if rows == 0 or cols == 0 or rows * cols > 10**9:
        raise FormatError(f"model file: implausible {what} shape {rows}x{cols}")
    payload = _read_exact(f, rows * cols * 8, f"{what} payload")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_model(model: SynthesisModel, path) -> None:
    config_bytes = json.dumps(_config_to_json(model.config)).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", model.format_version))
        f.write(struct.pack("<Q", len(config_bytes)))
        f.write(config_bytes)
        for d in model.low_dicts:
            _write_matrix(f, d.atoms)
        for d in model.high_dicts:
            _write_matrix(f, d.atoms)
        _write_matrix(f, model.mapping)


def read_model(path) -> SynthesisModel:
    path = Path(path)
    if not path.exists():
        raise InputError(f"read_model: no such file: {path}")
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise FormatError(
                f"model file: bad magic {magic!r} at offset 0, expected {MAGIC!r}"
            )
        (version,) = struct.unpack("<I", _read_exact(f, 4, "format_version"))
        if version != FORMAT_VERSION:
            raise FormatError(
                f"model file: unsupported format_version {version} at offset 4; "
                f"this reader supports version {FORMAT_VERSION} — upgrade required"
            )
        (config_len,) = struct.unpack("<Q", _read_exact(f, 8, "config length"))
        if config_len > 10**8:
            raise FormatError(f"model file: implausible config length {config_len}")
        config_bytes = _read_exact(f, config_len, "config block")
        try:
            doc = json.loads(config_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"model config block is not valid JSON: {exc}") from exc
        cfg = _config_from_json(doc)
        low = [
            Dictionary(_read_matrix(f, f"low dictionary {j + 1}"))
            for j in range(cfg.levels)
        ]
        high = [
            Dictionary(_read_matrix(f, f"high dictionary {j + 1}"))
            for j in range(cfg.levels)
        ]
        mapping = _read_matrix(f, "mapping")
        trailing = f.read(1)
        if trailing:
            raise FormatError(
                f"model file: unexpected trailing bytes at offset {f.tell() - 1}"
            )
    return SynthesisModel(
        low_dicts=low,
        high_dicts=high,
        mapping=mapping,
        config=cfg,
        format_version=version,
    )
