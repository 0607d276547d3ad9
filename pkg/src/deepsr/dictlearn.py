"""Single-level dictionary learning by alternating minimization.

Codes come from the lasso solver; the dictionary half-step is the method
of optimal directions (closed-form least squares), followed by atom
normalization and dead-atom replacement. An epoch is only accepted if the
mean objective did not increase, which keeps the recorded trace monotone
even though normalization perturbs the l1 term.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import InputError, NumericalError
from .linalg import as_matrix, solve_spd
from .sparse import LassoConfig, lasso_objective, sparse_encode_batch

_NORM_TOL = 1e-6


@dataclass(frozen=True)
class Dictionary:
    """Column-normalized atom matrix (signal_dim x n_atoms)."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = as_matrix(self.atoms, "atoms")
        object.__setattr__(self, "atoms", atoms)
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(norms < 1.0 - _NORM_TOL) or np.any(norms > 1.0 + _NORM_TOL):
            raise InputError("Dictionary: atom columns must have unit 2-norm")

    @property
    def signal_dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class DictLearnConfig:
    """Knobs for one level of alternating-minimization learning."""

    n_atoms: int
    lam: float = 0.85
    epochs: int = 30
    lasso: LassoConfig = field(default_factory=LassoConfig)
    seed: int = 0
    dead_atom_threshold: float = 1e-8
    ridge: float = 1e-6

    def __post_init__(self):
        if self.n_atoms < 1:
            raise InputError("DictLearnConfig: n_atoms must be >= 1")
        if self.epochs < 1:
            raise InputError("DictLearnConfig: epochs must be >= 1")
        if self.dead_atom_threshold < 0:
            raise InputError("DictLearnConfig: dead_atom_threshold must be >= 0")


@dataclass(frozen=True)
class TracePoint:
    """One accepted objective value; replaced_atoms lists atoms swapped in
    by the dead-atom rule during the update that preceded this point."""

    epoch: int
    objective: float
    replaced_atoms: Tuple[int, ...] = ()


@dataclass
class LevelResult:
    dictionary: Dictionary
    codes: np.ndarray
    trace: List[TracePoint]


def init_dictionary(xs, n_atoms: int, seed: int) -> Dictionary:
    """Sample data columns as initial atoms, deterministically per seed.

    Without replacement when n_atoms <= n; with replacement plus Gaussian
    jitter (sigma 1e-3) otherwise. Atoms are column-normalized.
    """
    xs = as_matrix(xs, "xs")
    n = xs.shape[1]
    if n < 1:
        raise InputError("init_dictionary: need at least one data column")
    rng = np.random.default_rng(seed)
    if n_atoms <= n:
        idx = rng.choice(n, size=n_atoms, replace=False)
        atoms = xs[:, idx].copy()
    else:
        idx = rng.choice(n, size=n_atoms, replace=True)
        atoms = xs[:, idx] + 1e-3 * rng.standard_normal((xs.shape[0], n_atoms))
    norms = np.linalg.norm(atoms, axis=0)
    dead = norms < 1e-12
    if np.any(dead):
        atoms[:, dead] += 1e-3 * rng.standard_normal((xs.shape[0], int(dead.sum())))
        norms = np.linalg.norm(atoms, axis=0)
    return Dictionary(atoms / norms)


def update_dictionary(
    xs, codes, ridge: float = 1e-6, dead_atom_threshold: float = 1e-8
) -> Tuple[Dictionary, Tuple[int, ...]]:
    """Method-of-optimal-directions update: D = X A^T (A A^T + ridge I)^-1.

    Atoms are rescaled to unit norm afterwards; atoms whose
    pre-normalization norm falls below dead_atom_threshold are replaced by
    the worst-reconstructed data columns. Returns the new dictionary and
    the indices of replaced atoms.
    """
    xs = as_matrix(xs, "xs")
    codes = as_matrix(codes, "codes")
    if xs.shape[1] != codes.shape[1]:
        raise InputError(
            f"update_dictionary: sample counts differ "
            f"({xs.shape[1]} vs {codes.shape[1]})"
        )
    if ridge < 0:
        raise InputError("update_dictionary: ridge must be >= 0")
    gram = codes @ codes.T
    if ridge > 0:
        gram = gram + ridge * np.eye(gram.shape[0])
    gram = 0.5 * (gram + gram.T)
    try:
        d_t = solve_spd(gram, codes @ xs.T)
    except NumericalError as exc:
        raise NumericalError(
            f"update_dictionary: code Gram matrix is singular ({exc}); "
            "use a nonzero ridge"
        ) from exc
    atoms = d_t.T
    norms = np.linalg.norm(atoms, axis=0)
    dead = np.flatnonzero(norms < dead_atom_threshold)
    replaced: Tuple[int, ...] = ()
    if dead.size:
        resid = np.linalg.norm(xs - atoms @ codes, axis=0)
        worst = np.argsort(resid)[::-1]
        for j, col in zip(dead, worst):
            atoms[:, j] = xs[:, col]
        norms = np.linalg.norm(atoms, axis=0)
        replaced = tuple(int(j) for j in dead)
    if np.any(norms < 1e-300):
        raise NumericalError("update_dictionary: zero-norm atom after replacement")
    return Dictionary(atoms / norms), replaced


def mean_objective(dictionary: Dictionary, xs, codes, lam: float) -> float:
    """Mean over samples of the per-sample lasso objective."""
    xs = as_matrix(xs, "xs")
    codes = as_matrix(codes, "codes")
    n = xs.shape[1]
    resid = xs - dictionary.atoms @ codes
    total = 0.5 * float(np.sum(resid * resid)) + lam * float(np.abs(codes).sum())
    return total / n


def learn_level(xs, cfg: DictLearnConfig) -> LevelResult:
    """Run `epochs` rounds of {encode; dictionary update}, then a final
    encode so the returned codes match the returned dictionary.

    An epoch whose re-encoded objective would increase (outside of a
    dead-atom replacement) reverts to the previous state and stops early,
    so the trace is non-increasing between replacement events.
    """
    xs = as_matrix(xs, "xs")
    if xs.shape[1] < 1:
        raise InputError("learn_level: need at least one data column")
    lasso = dataclasses.replace(cfg.lasso, lam=cfg.lam)
    dictionary = init_dictionary(xs, cfg.n_atoms, cfg.seed)
    prev: LevelResult | None = None
    trace: List[TracePoint] = []
    replaced_last: Tuple[int, ...] = ()
    codes = np.zeros((cfg.n_atoms, xs.shape[1]))
    for epoch in range(cfg.epochs + 1):
        new_codes = sparse_encode_batch(dictionary, xs, lasso)
        obj = mean_objective(dictionary, xs, new_codes, cfg.lam)
        if (
            prev is not None
            and not replaced_last
            and obj > trace[-1].objective + 1e-12
        ):
            return prev  # alternating step stalled; keep the best state
        codes = new_codes
        trace.append(TracePoint(epoch, obj, replaced_last))
        prev = LevelResult(dictionary, codes, list(trace))
        if epoch == cfg.epochs:
            break
        dictionary, replaced_last = update_dictionary(
            xs, codes, cfg.ridge, cfg.dead_atom_threshold
        )
    return LevelResult(dictionary, codes, trace)
