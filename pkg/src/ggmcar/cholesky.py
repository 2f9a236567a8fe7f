"""Cholesky free-element parameterization of the positive definite cone.

A precision matrix K constrained to a graph's cone is written
K = Q^T (Psi^T Psi) Q with Q the upper Cholesky factor of D^{-1} and Psi
upper triangular. Only the entries of Psi at the free positions (diagonal
plus edges) are coordinates; the remaining upper entries are filled by the
completion operation, which solves each zero constraint K_ij = 0 for the
single unknown Psi_ij in lexicographic order. Phi = Psi Q is the upper
Cholesky factor of K itself, so det K = prod (Psi_ii Q_ii)^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConeViolationError, ConfigError, NotPositiveDefiniteError
from .graphs import Graph, free_index_set, free_mask

DIAG_EPS = 1e-12
ZERO_TOL = 1e-10


@dataclass(frozen=True)
class FreePsi:
    """Free elements of Psi for a graph, aligned with free_index_set(graph).pairs."""

    graph: Graph
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        fis = free_index_set(self.graph)
        if vals.shape != (fis.size,):
            raise ConfigError(
                f"expected {fis.size} free values for this graph, got {vals.shape}"
            )
        diag = [k for k, (i, j) in enumerate(fis.pairs) if i == j]
        if np.any(vals[diag] <= 0.0):
            raise ConfigError("diagonal free elements must be strictly positive")
        object.__setattr__(self, "values", vals)

    def as_dict(self):
        fis = free_index_set(self.graph)
        return dict(zip(fis.pairs, self.values.tolist()))


def _first_bad_pivot(d: np.ndarray) -> int:
    """1-based index of the first non-positive-definite leading minor."""
    for k in range(1, d.shape[0] + 1):
        try:
            np.linalg.cholesky(d[:k, :k])
        except np.linalg.LinAlgError:
            return k
    return d.shape[0]


def _chol_lower(d: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(d)
    except np.linalg.LinAlgError:
        pivot = _first_bad_pivot(d)
        raise NotPositiveDefiniteError(
            f"{what} is not positive definite (leading minor {pivot} fails)",
            pivot=pivot,
        ) from None


def inverse_cholesky(d: np.ndarray) -> np.ndarray:
    """Upper-triangular Q with positive diagonal and D^{-1} = Q^T Q."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {d.shape}")
    low = _chol_lower(d, "D")
    # D = L L^T  =>  D^{-1} = L^{-T} L^{-1}; refactor the symmetrized inverse.
    linv = scipy.linalg.solve_triangular(low, np.eye(d.shape[0]), lower=True)
    dinv = linv.T @ linv
    dinv = 0.5 * (dinv + dinv.T)
    return scipy.linalg.cholesky(dinv, lower=False)


def _nonfree_cols(mask: np.ndarray):
    """Per-row integer arrays of the non-free upper-triangular columns."""
    p = mask.shape[0]
    out = []
    for i in range(p):
        cols = np.flatnonzero(~mask[i, i + 1 :]) + i + 1
        out.append(cols)
    return out


def complete_tail(
    psi: np.ndarray,
    phi: np.ndarray,
    q: np.ndarray,
    nonfree_cols,
    start_row: int = 0,
) -> None:
    """Fill non-free entries of ``psi`` from ``start_row`` on, updating ``phi``.

    Rows before ``start_row`` (and their phi rows) must already be consistent.
    Each non-free Psi_ij solves K_ij = 0 given everything lexicographically
    before it, so a perturbation in row i0 only requires recompleting rows >= i0.
    """
    p = psi.shape[0]
    for i in range(start_row, p):
        psi_ii = psi[i, i]
        if psi_ii <= DIAG_EPS:
            raise NotPositiveDefiniteError(
                f"degenerate diagonal Psi[{i + 1},{i + 1}] = {psi_ii!r} in completion",
                pivot=i + 1,
            )
        cols = nonfree_cols[i]
        if cols.size:
            phi_ii = psi_ii * q[i, i]
            if i > 0:
                s2 = phi[:i, i] @ phi[:i, :]
            for j in cols:
                s1 = psi[i, i:j] @ q[i:j, j]
                acc = s1 if i == 0 else s1 + s2[j] / phi_ii
                psi[i, j] = -acc / q[j, j]
        phi[i, i:] = psi[i, i:] @ q[i:, i:]


def complete_psi(free: FreePsi, q: np.ndarray) -> np.ndarray:
    """Full upper-triangular Psi obtained by completing the free elements."""
    graph = free.graph
    q = np.asarray(q, dtype=float)
    if q.shape != (graph.p, graph.p):
        raise ConfigError(f"Q shape {q.shape} does not match p={graph.p}")
    psi = np.zeros((graph.p, graph.p))
    for (i, j), val in zip(free_index_set(graph).pairs, free.values):
        psi[i, j] = val
    phi = np.zeros_like(psi)
    complete_tail(psi, phi, q, _nonfree_cols(free_mask(graph)))
    return psi


def assemble_precision(
    psi: np.ndarray, q: np.ndarray, graph: Graph, check: bool = True
) -> np.ndarray:
    """K = Q^T (Psi^T Psi) Q for a completed Psi; optionally verify the cone."""
    phi = psi @ q
    k = phi.T @ phi
    k = 0.5 * (k + k.T)
    if check:
        check_cone(k, graph)
    return k


def check_cone(k: np.ndarray, graph: Graph) -> None:
    """Raise unless K has (numerical) zeros at every non-edge."""
    off = ~graph.adjacency()
    np.fill_diagonal(off := off.copy(), False)
    scale = max(1.0, float(np.abs(k).max()))
    worst = float(np.abs(k[off]).max()) if off.any() else 0.0
    if worst > ZERO_TOL * scale:
        raise ConeViolationError(
            f"precision matrix violates the zero pattern (max |K_ij| = {worst:.3e} at non-edges)"
        )


def extract_full_psi(k: np.ndarray, q: np.ndarray):
    """(Psi, Phi) with K = Phi^T Phi, Phi = Psi Q, both upper triangular."""
    try:
        phi = scipy.linalg.cholesky(k, lower=False)
    except scipy.linalg.LinAlgError:
        pivot = _first_bad_pivot(np.asarray(k, dtype=float))
        raise NotPositiveDefiniteError(
            f"K is not positive definite (leading minor {pivot} fails)", pivot=pivot
        ) from None
    psi = scipy.linalg.solve_triangular(q.T, phi.T, lower=True).T
    return psi, phi


def extract_free_psi(k: np.ndarray, q: np.ndarray, graph: Graph) -> FreePsi:
    """Free coordinates of K in the (Psi, Q) parameterization."""
    psi, _ = extract_full_psi(k, q)
    pairs = free_index_set(graph).pairs
    return FreePsi(graph, np.array([psi[i, j] for i, j in pairs]))


def log_jacobians(psi: np.ndarray, q: np.ndarray, graph: Graph):
    """(log J(K -> Phi^nu), log J(Phi^nu -> Psi^nu)).

    J(K -> Phi^nu) = 2^p prod_i Phi_ii^{v_i + 1} and
    J(Phi^nu -> Psi^nu) = prod_i Q_ii^{d_i + 1} with Phi_ii = Psi_ii Q_ii.
    """
    fis = free_index_set(graph)
    phi_diag = np.diag(psi) * np.diag(q)
    if np.any(phi_diag <= 0.0):
        raise ConfigError("Phi diagonal must be strictly positive")
    log_j1 = graph.p * np.log(2.0) + float(((fis.v + 1) * np.log(phi_diag)).sum())
    log_j2 = float(((fis.d + 1) * np.log(np.diag(q))).sum())
    return log_j1, log_j2


def log_free_psi_density(free: FreePsi, q: np.ndarray, delta: float) -> float:
    """Unnormalized log density of the free elements.

    Returns sum_i (v_i + delta - 1) log Psi_ii - (1/2) sum_{i,j} Psi_ij^2 with
    the sum over the completed matrix; the normalizing constant I_G and the
    2^p prod Q_ii^{v_i+d_i+delta} factor are omitted.
    """
    if delta <= 2.0:
        raise ConfigError(f"degrees of freedom must exceed 2, got {delta}")
    fis = free_index_set(free.graph)
    psi = complete_psi(free, q)
    diag = np.diag(psi)
    return float(((fis.v + delta - 1.0) * np.log(diag)).sum() - 0.5 * (psi**2).sum())
