"""Sampling from and evaluating the G-Wishart distribution on arbitrary graphs.

The Metropolis-Hastings sampler perturbs the free elements of the upper
Cholesky coordinate Psi one at a time: diagonal entries get a normal proposal
truncated below at zero (corrected through the standard-normal CDF ratio),
off-diagonal entries a symmetric normal proposal, and after each perturbation
the non-free entries are recompleted. The ordering of the variables is
redrawn every iteration so that no free element is systematically penalized
by how much of the completion it drags along.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtri

from .cholesky import (
    FreePsi,
    check_cone,
    complete_psi,
    complete_tail,
    extract_full_psi,
    inverse_cholesky,
    _nonfree_cols,
)
from .errors import ConfigError
from .graphs import (
    Graph,
    free_index_set,
    free_mask,
    permute_matrix,
    random_ordering,
    unpermute_matrix,
)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GWishartParams:
    """Parameters (graph, delta, D) with the cached factor Q of D^{-1}."""

    graph: Graph
    delta: float
    D: np.ndarray
    Q: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.delta <= 2.0:
            raise ConfigError(f"degrees of freedom must exceed 2, got {self.delta}")
        d = np.asarray(self.D, dtype=float)
        if d.shape != (self.graph.p, self.graph.p):
            raise ConfigError(f"D shape {d.shape} does not match p={self.graph.p}")
        object.__setattr__(self, "D", d)
        object.__setattr__(self, "Q", inverse_cholesky(d))


@dataclass(frozen=True)
class StepSizes:
    """Proposal scales: sigma_m (precision), sigma_g (graph), sigma_tilde (latent GLM)."""

    sigma_m: float = 0.5
    sigma_g: float = 0.5
    sigma_tilde: float = 0.5

    def __post_init__(self):
        for name in ("sigma_m", "sigma_g", "sigma_tilde"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be strictly positive")


class SweepPlan:
    """Precomputed index structure for sweeps over a (possibly relabeled) graph.

    Built straight from a boolean adjacency matrix so chains can relabel each
    iteration without constructing Graph objects.
    """

    __slots__ = ("pairs", "v", "nonfree_cols", "n_free")

    def __init__(self, adj: np.ndarray):
        p = adj.shape[0]
        upper = np.triu(adj, k=1)
        self.v = upper.sum(axis=1).astype(np.int64)
        pairs = []
        nonfree = []
        for i in range(p):
            pairs.append((i, i))
            row = upper[i, i + 1 :]
            pairs.extend((i, int(j) + i + 1) for j in np.flatnonzero(row))
            nonfree.append(np.flatnonzero(~row) + i + 1)
        self.pairs = pairs
        self.nonfree_cols = nonfree
        self.n_free = len(pairs)


def plan_for_graph(graph: Graph) -> SweepPlan:
    return SweepPlan(np.asarray(graph.adjacency()))


def log_density_unnorm(k: np.ndarray, params: GWishartParams) -> float:
    """((delta-2)/2) log det K - <K, D>/2; raises if K leaves the cone."""
    k = np.asarray(k, dtype=float)
    check_cone(k, params.graph)
    sign, logdet = np.linalg.slogdet(k)
    if sign <= 0:
        raise ConfigError("K must be positive definite")
    return 0.5 * (params.delta - 2.0) * logdet - 0.5 * float((k * params.D).sum())


def _truncnorm_below_zero(mean: float, sigma: float, rng) -> float:
    """One draw from N(mean, sigma^2) truncated below at zero (inverse CDF)."""
    lo = 0.5 * math.erfc(mean / (sigma * math.sqrt(2.0)))  # CDF at zero
    u = lo + rng.random() * (1.0 - lo)
    if u >= 1.0:
        u = math.nextafter(1.0, 0.0)
    return mean + sigma * float(ndtri(u))


def sweep_arrays(
    psi: np.ndarray,
    phi: np.ndarray,
    q: np.ndarray,
    pairs,
    v: np.ndarray,
    nonfree_cols,
    delta: float,
    sigma_m: float,
    skip_first: bool,
    rng: np.random.Generator,
) -> int:
    """One in-place MH sweep over the free elements; returns the accept count.

    ``psi``/``phi`` must be a consistent completed pair for ``q``. With
    ``skip_first`` the (0, 0) element is pinned (the K_11 = 1 constraint).
    """
    accepted = 0
    for i, j in pairs:
        if skip_first and i == 0 and j == 0:
            continue
        cur = psi[i, j]
        if i == j:
            gamma = _truncnorm_below_zero(cur, sigma_m, rng)
            if gamma <= 0.0:
                continue
            log_r = (
                log_ndtr(cur / sigma_m)
                - log_ndtr(gamma / sigma_m)
                + (v[i] + delta - 1.0) * (math.log(gamma) - math.log(cur))
            )
        else:
            gamma = cur + sigma_m * rng.standard_normal()
            log_r = 0.0
        psi_new = psi.copy()
        phi_new = phi.copy()
        psi_new[i, j] = gamma
        complete_tail(psi_new, phi_new, q, nonfree_cols, start_row=i)
        # entries before row i are untouched, so the squared sums over rows >= i
        # carry the whole difference in the exponential kernel
        delta_ss = float((psi_new[i:] ** 2).sum() - (psi[i:] ** 2).sum())
        log_r -= 0.5 * delta_ss
        if log_r >= 0.0 or math.log(rng.random()) < log_r:
            psi[...] = psi_new
            phi[...] = phi_new
            accepted += 1
    return accepted


def mh_sweep(
    free: FreePsi,
    params: GWishartParams,
    sigma_m: float,
    constrain_11: bool,
    rng: np.random.Generator,
):
    """One full sweep of Metropolis-Hastings updates over the free elements.

    Returns (updated FreePsi, accept_count). With ``constrain_11`` the (1,1)
    free element is skipped, preserving K_11 = Psi_11^2 Q_11^2 exactly.
    """
    graph = free.graph
    fis = free_index_set(graph)
    mask = free_mask(graph)
    psi = complete_psi(free, params.Q)
    phi = psi @ params.Q
    accepted = sweep_arrays(
        psi,
        phi,
        params.Q,
        fis.pairs,
        fis.v,
        _nonfree_cols(mask),
        params.delta,
        sigma_m,
        constrain_11,
        rng,
    )
    vals = np.array([psi[i, j] for i, j in fis.pairs])
    return FreePsi(graph, vals), accepted


def sample_chain(
    params: GWishartParams,
    iters: int,
    sigma_m: float,
    constrain_11: bool,
    rng: np.random.Generator,
    k_init: np.ndarray | None = None,
):
    """Generate precision matrices from the Metropolis-Hastings chain.

    Each iteration draws a fresh vertex ordering (fixing vertex 1 when the
    K_11 = 1 constraint is active), refactorizes D^{-1} in the new order,
    sweeps the free elements, and yields K mapped back to canonical labels.
    """
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    if k_init is None:
        k = np.diag(params.delta / np.diag(params.D)).astype(float)
        if constrain_11:
            k[0, 0] = 1.0
    else:
        k = np.asarray(k_init, dtype=float).copy()
    for _ in range(iters):
        k, _, _ = resample_precision(
            k, params.graph, params.delta, params.D, sigma_m, rng, constrain_11=constrain_11
        )
        yield k


def resample_precision(
    k: np.ndarray,
    graph: Graph,
    delta: float,
    d: np.ndarray,
    sigma_m: float,
    rng: np.random.Generator,
    ordering=None,
    constrain_11: bool = False,
):
    """One relabeled sweep of the current precision matrix.

    Draws a vertex ordering when none is supplied (from the v(1)=1 set under
    the constraint), refactorizes D^{-1}, sweeps, and returns
    (K, accepted, total updates) in canonical labeling.
    """
    p = graph.p
    if ordering is None:
        ordering = random_ordering(p, constrain_11, rng)
    elif constrain_11 and ordering.order[0] != 0:
        raise ConfigError("constrained sweeps need an ordering fixing vertex 1")
    plan = SweepPlan(permute_matrix(np.asarray(graph.adjacency()), ordering))
    d_rel = permute_matrix(np.asarray(d, dtype=float), ordering)
    q_rel = inverse_cholesky(d_rel)
    k_rel = permute_matrix(np.asarray(k, dtype=float), ordering)
    psi, phi = extract_full_psi(k_rel, q_rel)
    if constrain_11:
        psi[0, 0] = 1.0 / q_rel[0, 0]  # exact pin against rounding drift
    accepted = sweep_arrays(
        psi,
        phi,
        q_rel,
        plan.pairs,
        plan.v,
        plan.nonfree_cols,
        delta,
        sigma_m,
        constrain_11,
        rng,
    )
    k_new = phi.T @ phi
    k_new = unpermute_matrix(0.5 * (k_new + k_new.T), ordering)
    total = plan.n_free - (1 if constrain_11 else 0)
    return k_new, accepted, total


def sample_wishart_complete(
    delta: float, d: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Exact draw for the complete graph via the triangular construction.

    All entries of Psi are free: Psi_ii^2 ~ chi-square(v_i + delta) with
    v_i = p - i, off-diagonals standard normal; K = (Psi Q)^T (Psi Q).
    """
    d = np.asarray(d, dtype=float)
    if delta <= 2.0:
        raise ConfigError(f"degrees of freedom must exceed 2, got {delta}")
    p = d.shape[0]
    q = inverse_cholesky(d)
    psi = np.triu(rng.standard_normal((p, p)), k=1)
    dof = np.arange(p - 1, -1, -1) + delta
    np.fill_diagonal(psi, np.sqrt(rng.chisquare(dof)))
    phi = psi @ q
    k = phi.T @ phi
    return 0.5 * (k + k.T)


def _complete_batch(psi: np.ndarray, q: np.ndarray, nonfree_cols) -> np.ndarray:
    """Vectorized completion across a batch; returns sum of squared non-free entries."""
    n, p, _ = psi.shape
    phi = np.zeros_like(psi)
    total = np.zeros(n)
    for i in range(p):
        cols = nonfree_cols[i]
        if cols.size:
            phi_ii = psi[:, i, i] * q[i, i]
            if i > 0:
                s2 = np.einsum("nk,nkj->nj", phi[:, :i, i], phi[:, :i, :])
            for j in cols:
                s1 = psi[:, i, i:j] @ q[i:j, j]
                acc = s1 if i == 0 else s1 + s2[:, j] / phi_ii
                val = -acc / q[j, j]
                psi[:, i, j] = val
                total += val**2
        phi[:, i, i:] = psi[:, i, i:] @ q[i:, i:]
    return total


def log_norm_const_mc(params: GWishartParams, n_samples: int, rng: np.random.Generator):
    """Monte Carlo estimate of log I_G(delta, D) with a delta-method standard error.

    Free diagonals are drawn chi with v_i + delta degrees of freedom, free
    off-diagonals standard normal; after completion the average of
    exp(-sum of squared non-free entries / 2) corrects the closed-form factor
    2^p prod_i Q_ii^{v_i+d_i+delta} times the chi/Gaussian normalizers. On a
    complete graph there are no non-free entries and the estimate is exact.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    graph, delta, q = params.graph, params.delta, params.Q
    p = graph.p
    fis = free_index_set(graph)
    dof = fis.v + delta
    log_const = (
        p * math.log(2.0)
        + float(((fis.v + fis.d + delta) * np.log(np.diag(q))).sum())
        + float(((0.5 * dof - 1.0) * math.log(2.0) + gammaln(0.5 * dof)).sum())
        + 0.5 * graph.n_edges * math.log(2.0 * math.pi)
    )
    n_nonfree = p * (p + 1) // 2 - fis.size
    if n_nonfree == 0:
        return log_const, 0.0
    psi = np.zeros((n_samples, p, p))
    diag = np.sqrt(rng.chisquare(dof, size=(n_samples, p)))
    for i in range(p):
        psi[:, i, i] = diag[:, i]
    for i, j in graph.edges:
        psi[:, i, j] = rng.standard_normal(n_samples)
    total = _complete_batch(psi, q, _nonfree_cols(free_mask(graph)))
    log_w = -0.5 * total
    shift = float(log_w.max())
    w = np.exp(log_w - shift)
    mean_w = float(w.mean())
    log_est = log_const + shift + math.log(mean_w)
    if n_samples == 1:
        return log_est, float("inf")
    se_w = float(w.std(ddof=1)) / math.sqrt(n_samples)
    return log_est, se_w / mean_w
