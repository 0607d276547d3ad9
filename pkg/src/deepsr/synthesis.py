"""Coupled multi-level dictionary model and low-to-high synthesis.

Training is greedy and per-chain: level j of the low (high) chain learns a
dictionary on the codes produced by level j-1, starting from the raw
low (high) resolution image columns; the two chains never share state. A
linear map from deepest low codes to deepest high codes is then fit in
closed form. Synthesis encodes a probe down the low chain, applies the
map, and decodes up the high chain by plain matrix products.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dictlearn import DictLearnConfig, Dictionary, LevelResult, learn_level
from .errors import InputError, NumericalError
from .linalg import as_matrix, solve_spd
from .sparse import LassoConfig, sparse_encode_batch

FORMAT_VERSION = 1

ENCODE_LASSO = "lasso"
ENCODE_EXACT = "exact"


@dataclass(frozen=True)
class SynthesisConfig:
    """Depth, per-level learning knobs, and image geometry.

    lr_shape/hr_shape are (height, width); the vectorized lengths lr_dim
    and hr_dim derive from them. encode_mode selects how levels >= 2 are
    encoded at synthesis time: "lasso" reuses each level's training
    sparsity weight, "exact" solves the level as unregularized least
    squares.
    """

    levels: int
    per_level: Tuple[DictLearnConfig, ...]
    lr_shape: Tuple[int, int]
    hr_shape: Tuple[int, int]
    lambda_m: float = 1e-6
    encode_mode: str = ENCODE_LASSO

    def __post_init__(self):
        object.__setattr__(self, "per_level", tuple(self.per_level))
        object.__setattr__(self, "lr_shape", tuple(int(v) for v in self.lr_shape))
        object.__setattr__(self, "hr_shape", tuple(int(v) for v in self.hr_shape))
        if self.levels < 1:
            raise InputError("SynthesisConfig: levels must be >= 1")
        if len(self.per_level) != self.levels:
            raise InputError(
                f"SynthesisConfig: per_level has {len(self.per_level)} entries "
                f"for {self.levels} levels"
            )
        if self.lambda_m < 0:
            raise InputError("SynthesisConfig: lambda_m must be >= 0")
        if self.encode_mode not in (ENCODE_LASSO, ENCODE_EXACT):
            raise InputError(
                f"SynthesisConfig: unknown encode_mode {self.encode_mode!r}"
            )
        if any(v < 1 for v in self.lr_shape + self.hr_shape):
            raise InputError("SynthesisConfig: image shapes must be positive")
        if self.levels >= 2 and any(c.lam == 0 for c in self.per_level):
            warnings.warn(
                "a zero sparsity weight at depth >= 2 lets adjacent levels "
                "collapse into one dictionary",
                stacklevel=2,
            )

    @property
    def lr_dim(self) -> int:
        return self.lr_shape[0] * self.lr_shape[1]

    @property
    def hr_dim(self) -> int:
        return self.hr_shape[0] * self.hr_shape[1]


@dataclass
class SynthesisModel:
    """Trained artifact: per-level low/high dictionaries plus the code map."""

    low_dicts: List[Dictionary]
    high_dicts: List[Dictionary]
    mapping: np.ndarray
    config: SynthesisConfig
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self):
        cfg = self.config
        if len(self.low_dicts) != cfg.levels or len(self.high_dicts) != cfg.levels:
            raise InputError("SynthesisModel: dictionary count != levels")
        for chain, root_dim, name in (
            (self.low_dicts, cfg.lr_dim, "low"),
            (self.high_dicts, cfg.hr_dim, "high"),
        ):
            if chain[0].signal_dim != root_dim:
                raise InputError(
                    f"SynthesisModel: {name} level-1 signal_dim "
                    f"{chain[0].signal_dim} != {root_dim}"
                )
            for j in range(len(chain) - 1):
                if chain[j].n_atoms != chain[j + 1].signal_dim:
                    raise InputError(
                        f"SynthesisModel: {name} chain broken at level {j + 1}: "
                        f"{chain[j].n_atoms} atoms feed signal_dim "
                        f"{chain[j + 1].signal_dim}"
                    )
        mapping = as_matrix(self.mapping, "mapping")
        want = (self.high_dicts[-1].n_atoms, self.low_dicts[-1].n_atoms)
        if mapping.shape != want:
            raise InputError(
                f"SynthesisModel: mapping shape {mapping.shape} != {want}"
            )
        self.mapping = mapping


@dataclass
class TrainResult:
    model: SynthesisModel
    low_levels: List[LevelResult]
    high_levels: List[LevelResult]


def learn_mapping(codes_high, codes_low, lambda_m: float) -> np.ndarray:
    """Closed-form ridge fit of M minimizing
    0.5*||A_h - M A_l||_F^2 + (lambda_m/2)*||M||_F^2."""
    codes_high = as_matrix(codes_high, "codes_high")
    codes_low = as_matrix(codes_low, "codes_low")
    if codes_high.shape[1] != codes_low.shape[1]:
        raise InputError(
            f"learn_mapping: sample counts differ "
            f"({codes_high.shape[1]} vs {codes_low.shape[1]})"
        )
    gram = codes_low @ codes_low.T
    if lambda_m > 0:
        gram = gram + lambda_m * np.eye(gram.shape[0])
    gram = 0.5 * (gram + gram.T)
    try:
        m_t = solve_spd(gram, codes_low @ codes_high.T)
    except NumericalError as exc:
        raise NumericalError(
            f"learn_mapping: low-code Gram matrix is rank deficient ({exc}); "
            "use a nonzero lambda_m"
        ) from exc
    return m_t.T


def _train_chain(xs, cfg: SynthesisConfig) -> List[LevelResult]:
    results: List[LevelResult] = []
    data = xs
    for level_cfg in cfg.per_level:
        res = learn_level(data, level_cfg)
        results.append(res)
        data = res.codes
    return results


def train(xl, xh, cfg: SynthesisConfig) -> TrainResult:
    """Greedy layer-wise training of both chains plus the code mapping.

    Column i of xl and xh must be the same subject. The low chain sees
    only xl and the high chain only xh; the deepest code pair then fits
    the mapping.
    """
    xl = as_matrix(xl, "xl")
    xh = as_matrix(xh, "xh")
    if xl.shape[1] != xh.shape[1]:
        raise InputError(
            f"train: paired column counts differ ({xl.shape[1]} vs {xh.shape[1]})"
        )
    if xl.shape[0] != cfg.lr_dim:
        raise InputError(f"train: xl rows {xl.shape[0]} != lr_dim {cfg.lr_dim}")
    if xh.shape[0] != cfg.hr_dim:
        raise InputError(f"train: xh rows {xh.shape[0]} != hr_dim {cfg.hr_dim}")
    low = _train_chain(xl, cfg)
    high = _train_chain(xh, cfg)
    mapping = learn_mapping(high[-1].codes, low[-1].codes, cfg.lambda_m)
    model = SynthesisModel(
        low_dicts=[r.dictionary for r in low],
        high_dicts=[r.dictionary for r in high],
        mapping=mapping,
        config=cfg,
    )
    return TrainResult(model, low, high)


def encode_low(model: SynthesisModel, xs_low, lasso: LassoConfig) -> np.ndarray:
    """Deepest-level low codes for the columns of xs_low."""
    data = as_matrix(xs_low, "xs_low")
    if data.shape[0] != model.config.lr_dim:
        raise InputError(
            f"encode_low: signal length {data.shape[0]} != lr_dim "
            f"{model.config.lr_dim}"
        )
    for j, dictionary in enumerate(model.low_dicts):
        level_lam = model.config.per_level[j].lam
        if j >= 1 and model.config.encode_mode == ENCODE_EXACT:
            gram = dictionary.atoms.T @ dictionary.atoms
            gram = gram + 1e-10 * np.eye(gram.shape[0])
            data = solve_spd(gram, dictionary.atoms.T @ data)
        else:
            cfg = dataclasses.replace(lasso, lam=level_lam)
            data = sparse_encode_batch(dictionary, data, cfg)
    return data


def decode_high(model: SynthesisModel, codes_high) -> np.ndarray:
    """Apply the high-dictionary chain to deepest-level high codes."""
    data = as_matrix(codes_high, "codes_high")
    if data.shape[0] != model.high_dicts[-1].n_atoms:
        raise InputError(
            f"decode_high: code length {data.shape[0]} != deepest atom count "
            f"{model.high_dicts[-1].n_atoms}"
        )
    for dictionary in reversed(model.high_dicts):
        data = dictionary.atoms @ data
    return data


def synthesize_batch(model: SynthesisModel, xs_low, lasso: LassoConfig) -> np.ndarray:
    """Encode down the low chain, map deepest codes, decode up the high
    chain; columns are independent."""
    codes_low = encode_low(model, xs_low, lasso)
    codes_high = model.mapping @ codes_low
    return decode_high(model, codes_high)


def synthesize(model: SynthesisModel, x_low, lasso: LassoConfig) -> np.ndarray:
    """Synthesize one high-resolution column from one low-resolution column."""
    x_low = np.asarray(x_low, dtype=np.float64).ravel()
    return synthesize_batch(model, x_low.reshape(-1, 1), lasso)[:, 0]
