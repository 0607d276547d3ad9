"""L1-regularized least-squares (lasso) encoding against a fixed dictionary.

Solver: FISTA with step 1/L and function-value adaptive restart, so the
sequence of accepted objective values is non-increasing. L is the largest
eigenvalue of D^T D estimated by power iteration with a 1.01 safety factor.
Columns of a batch are solved independently; sparse_encode is the
single-column case of the same routine, so the two agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError, NumericalError
from .linalg import as_matrix

_ACCEPT_SLACK = 1e-12


@dataclass(frozen=True)
class LassoConfig:
    """Sparsity weight and stopping rule for the lasso solver.

    lam is the absolute l1 weight (not scaled by signal dimension). The
    solver stops when the relative objective change drops below tol or
    after max_iters iterations.
    """

    lam: float = 0.85
    max_iters: int = 300
    tol: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise InputError(f"LassoConfig: lam must be >= 0, got {self.lam}")
        if self.max_iters < 1:
            raise InputError("LassoConfig: max_iters must be >= 1")
        if self.tol <= 0:
            raise InputError("LassoConfig: tol must be > 0")


def soft_threshold(v, t):
    """sign(v) * max(|v| - t, 0); elementwise for arrays."""
    if np.any(np.asarray(t) < 0):
        raise InputError("soft_threshold: threshold must be >= 0")
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def lasso_objective(atoms, x, alpha, lam: float) -> float:
    """0.5 * ||x - D @ alpha||_2^2 + lam * ||alpha||_1."""
    atoms = as_matrix(atoms, "atoms")
    x = np.asarray(x, dtype=np.float64).ravel()
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if x.shape[0] != atoms.shape[0] or alpha.shape[0] != atoms.shape[1]:
        raise InputError(
            f"lasso_objective: dims inconsistent (D {atoms.shape}, "
            f"x {x.shape[0]}, alpha {alpha.shape[0]})"
        )
    r = x - atoms @ alpha
    return float(0.5 * r @ r + lam * np.abs(alpha).sum())


def lipschitz_estimate(atoms, n_iters: int = 50, tol: float = 1e-6) -> float:
    """Largest eigenvalue of D^T D by power iteration, times a 1.01 margin."""
    atoms = as_matrix(atoms, "atoms")
    gram = atoms.T @ atoms
    rng = np.random.default_rng(0)
    v = rng.standard_normal(gram.shape[0])
    v /= max(np.linalg.norm(v), 1e-300)
    ev = 0.0
    for _ in range(n_iters):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            ev = 0.0
            break
        v = w / nw
        ev_new = float(v @ (gram @ v))
        if abs(ev_new - ev) <= tol * max(abs(ev_new), 1.0):
            ev = ev_new
            break
        ev = ev_new
    lip = ev * 1.01
    if lip <= 0.0:
        raise NumericalError("lipschitz_estimate: nonpositive estimate")
    return lip


def _encode_columns(atoms, xs, cfg: LassoConfig, lip: float, collect_traces: bool):
    """FISTA over the columns of xs. Returns (codes, per-column traces).

    Each column runs its own iterate/momentum/stop state; a column that
    converges is frozen, so results match one-column solves exactly.
    """
    n_atoms = atoms.shape[1]
    n = xs.shape[1]
    gram = atoms.T @ atoms
    dtx = atoms.T @ xs
    step = 1.0 / lip
    thr = cfg.lam / lip

    a = np.zeros((n_atoms, n))
    y = np.zeros((n_atoms, n))
    t = np.ones(n)
    r0 = xs
    obj_prev = 0.5 * np.einsum("ij,ij->j", r0, r0)
    traces = [[o] for o in obj_prev] if collect_traces else None
    active = np.arange(n)

    for _ in range(cfg.max_iters):
        if active.size == 0:
            break
        ya = y[:, active]
        grad = gram @ ya - dtx[:, active]
        cand = soft_threshold(ya - step * grad, thr)
        resid = xs[:, active] - atoms @ cand
        obj = 0.5 * np.einsum("ij,ij->j", resid, resid) + cfg.lam * np.abs(
            cand
        ).sum(axis=0)

        # Restart: re-take the step from the last accepted iterate (plain
        # ISTA step, non-increasing for step <= 1/L) and reset momentum.
        inc = obj > obj_prev[active] + _ACCEPT_SLACK
        if np.any(inc):
            cols = active[inc]
            grad_r = gram @ a[:, cols] - dtx[:, cols]
            cand_r = soft_threshold(a[:, cols] - step * grad_r, thr)
            resid_r = xs[:, cols] - atoms @ cand_r
            cand[:, inc] = cand_r
            obj[inc] = 0.5 * np.einsum("ij,ij->j", resid_r, resid_r) + (
                cfg.lam * np.abs(cand_r).sum(axis=0)
            )
            t[cols] = 1.0

        t_old = t[active]
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_old * t_old))
        y[:, active] = cand + ((t_old - 1.0) / t_new) * (cand - a[:, active])
        a[:, active] = cand
        t[active] = t_new

        if collect_traces:
            for k, col in enumerate(active):
                traces[col].append(obj[k])

        done = np.abs(obj_prev[active] - obj) <= cfg.tol * np.maximum(
            np.abs(obj_prev[active]), 1e-12
        )
        obj_prev[active] = obj
        active = active[~done]

    return a, traces


def sparse_encode(atoms_or_dict, x, cfg: LassoConfig, return_trace: bool = False):
    """Approximate minimizer of the lasso objective for one signal column.

    Returns the code vector, or (code, objective trace) when return_trace
    is set. The trace is the sequence of accepted objective values and is
    non-increasing up to 1e-12 slack.
    """
    atoms = _atoms_of(atoms_or_dict)
    x = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise InputError("sparse_encode: signal contains non-finite entries")
    if x.shape[0] != atoms.shape[0]:
        raise InputError(
            f"sparse_encode: signal length {x.shape[0]} != signal_dim {atoms.shape[0]}"
        )
    lip = lipschitz_estimate(atoms)
    codes, traces = _encode_columns(
        atoms, x.reshape(-1, 1), cfg, lip, collect_traces=return_trace
    )
    if return_trace:
        return codes[:, 0], traces[0]
    return codes[:, 0]


def sparse_encode_batch(atoms_or_dict, xs, cfg: LassoConfig) -> np.ndarray:
    """Column-wise sparse_encode; column i encodes signal xs[:, i]."""
    atoms = _atoms_of(atoms_or_dict)
    xs = as_matrix(xs, "xs")
    if xs.shape[0] != atoms.shape[0]:
        raise InputError(
            f"sparse_encode_batch: signal length {xs.shape[0]} != "
            f"signal_dim {atoms.shape[0]}"
        )
    lip = lipschitz_estimate(atoms)
    codes, _ = _encode_columns(atoms, xs, cfg, lip, collect_traces=False)
    return codes


def kkt_violation(atoms_or_dict, x, alpha, lam: float) -> float:
    """Max violation of the lasso optimality conditions at alpha.

    For alpha_j != 0 the violation is |d_j^T (x - D alpha) - lam*sign(alpha_j)|;
    for alpha_j == 0 it is max(|d_j^T (x - D alpha)| - lam, 0).
    """
    atoms = _atoms_of(atoms_or_dict)
    x = np.asarray(x, dtype=np.float64).ravel()
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    corr = atoms.T @ (x - atoms @ alpha)
    nz = alpha != 0
    viol = np.where(
        nz,
        np.abs(corr - lam * np.sign(alpha)),
        np.maximum(np.abs(corr) - lam, 0.0),
    )
    return float(viol.max()) if viol.size else 0.0


def _atoms_of(atoms_or_dict) -> np.ndarray:
    atoms = getattr(atoms_or_dict, "atoms", atoms_or_dict)
    return as_matrix(atoms, "atoms")
