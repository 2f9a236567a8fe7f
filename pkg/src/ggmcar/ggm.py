"""Joint posterior sampling over precision matrix and graph for Gaussian data.

Each iteration proposes one edge move (add and delete sides get equal
probability, so very sparse or very dense graphs still mix) and accepts it
with a reversible-jump ratio that needs only the *prior* normalizing
constants of the two graphs, then resamples the precision matrix from its
conjugate G-Wishart conditional with Metropolis-Hastings sweeps. Prior
constants are Monte Carlo estimates memoized per labeled graph so each run
uses a fixed constant per graph.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cholesky import complete_tail, extract_full_psi, inverse_cholesky
from .errors import ConfigError
from .graphs import (
    Graph,
    VertexOrdering,
    permute_matrix,
    random_ordering,
    unpermute_matrix,
)
from .gwishart import (
    LOG_SQRT_2PI,
    GWishartParams,
    SweepPlan,
    log_norm_const_mc,
    resample_precision,
)
from .rng import chain_rng


@dataclass(frozen=True)
class SufficientStats:
    """Observed sum-of-products matrix U = sum_j x_j x_j^T and the sample count."""

    U: np.ndarray
    n: int

    @classmethod
    def from_data(cls, data: np.ndarray) -> "SufficientStats":
        x = np.asarray(data, dtype=float)
        if x.ndim != 2:
            raise ConfigError(f"expected an n x p data matrix, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise ConfigError("data contains non-finite entries")
        u = x.T @ x
        return cls(U=0.5 * (u + u.T), n=x.shape[0])


@dataclass(frozen=True)
class GgmPrior:
    """G-Wishart prior (delta0, D0); defaults delta0=3, D0=identity."""

    delta0: float = 3.0
    D0: np.ndarray | None = None

    def __post_init__(self):
        if self.delta0 <= 2.0:
            raise ConfigError(f"delta0 must exceed 2, got {self.delta0}")

    def d0_for(self, p: int) -> np.ndarray:
        if self.D0 is None:
            return np.eye(p)
        d = np.asarray(self.D0, dtype=float)
        if d.shape != (p, p):
            raise ConfigError(f"D0 shape {d.shape} does not match p={p}")
        return d


@dataclass
class GgmChainState:
    K: np.ndarray
    G: Graph


class PriorConstCache:
    """Memoized Monte Carlo log normalizing constants, keyed by labeled graph."""

    def __init__(self, delta: float, d: np.ndarray, n_samples: int, rng: np.random.Generator):
        if n_samples < 2:
            raise ConfigError("n_samples for prior constants must be >= 2")
        self.delta = float(delta)
        self.d = np.asarray(d, dtype=float)
        self.n_samples = int(n_samples)
        self._rng = rng
        self._values: dict = {}

    def get(self, graph: Graph) -> float:
        key = graph.key()
        val = self._values.get(key)
        if val is None:
            params = GWishartParams(graph, self.delta, self.d)
            val, _ = log_norm_const_mc(params, self.n_samples, self._rng)
            self._values[key] = val
        return val

    def __len__(self):
        return len(self._values)


def _propose_edge(graph: Graph, rng: np.random.Generator):
    """Draw one edge move; returns (edge, direction, log q_fwd, log q_rev).

    Add and delete sides each get probability 1/2 with a uniform edge within
    the side; when one side is empty its mass goes to the other side, and the
    reverse probability is computed under the same rule from the target graph.
    """
    absent = graph.absent_edges()
    present = list(graph.edges)
    na, nd = len(absent), len(present)
    if na + nd == 0:
        raise ConfigError("no graph moves exist for p=1")
    p_add = 0.0 if na == 0 else (1.0 if nd == 0 else 0.5)
    if rng.random() < p_add:
        edge = absent[int(rng.integers(na))]
        direction = "add"
        log_q_fwd = math.log(p_add) - math.log(na)
        # reverse move deletes the edge from G' (na-1 absent, nd+1 present)
        p_rev = 1.0 if na - 1 == 0 else 0.5
        log_q_rev = math.log(p_rev) - math.log(nd + 1)
    else:
        edge = present[int(rng.integers(nd))]
        direction = "delete"
        log_q_fwd = math.log(1.0 - p_add) - math.log(nd)
        p_rev = 1.0 if nd - 1 == 0 else 0.5
        log_q_rev = math.log(p_rev) - math.log(na + 1)
    return edge, direction, log_q_fwd, log_q_rev


def propose_graph(graph: Graph, rng: np.random.Generator):
    """One candidate graph from the balanced edge proposal.

    Returns (candidate, direction, proposal probability actually used).
    """
    edge, direction, log_q_fwd, _ = _propose_edge(graph, rng)
    g_new = (
        graph.add_edge(*edge) if direction == "add" else graph.remove_edge(*edge)
    )
    return g_new, direction, math.exp(log_q_fwd)


def rj_log_prefactor(sigma_g: float, q_ii: float, q_jj: float, psi_ii: float) -> float:
    """log of sigma_g sqrt(2 pi) Q*_{i0 i0} Q*_{j0 j0} Psi_{i0 i0} (the add-move prefactor)."""
    return (
        math.log(sigma_g)
        + LOG_SQRT_2PI
        + math.log(q_ii)
        + math.log(q_jj)
        + math.log(psi_ii)
    )


def graph_step(
    k: np.ndarray,
    graph: Graph,
    d_post: np.ndarray,
    cache: PriorConstCache,
    sigma_g: float,
    ordering: VertexOrdering,
    rng: np.random.Generator,
    log_z: float = 0.0,
):
    """One reversible-jump edge move; returns (K, G, accepted).

    ``d_post`` is U + D0 (the column variant passes U*_C + z D_C and
    ``log_z`` = log z, which weights the target by z^{+/-1} for add/delete).
    Everything runs in the coordinates of ``ordering``; the returned state is
    canonical.
    """
    edge, direction, log_q_fwd, log_q_rev = _propose_edge(graph, rng)
    adding = direction == "add"
    g_new = graph.add_edge(*edge) if adding else graph.remove_edge(*edge)
    inv = ordering.new_labels()
    a, b = int(inv[edge[0]]), int(inv[edge[1]])
    i0, j0 = (a, b) if a < b else (b, a)

    d_rel = permute_matrix(d_post, ordering)
    qs = inverse_cholesky(d_rel)
    k_rel = permute_matrix(k, ordering)
    psi, phi = extract_full_psi(k_rel, qs)

    adj_new = permute_matrix(np.asarray(g_new.adjacency()), ordering)
    plan_new = SweepPlan(adj_new)
    psi2, phi2 = psi.copy(), phi.copy()
    if adding:
        psi2[i0, j0] = psi[i0, j0] + sigma_g * rng.standard_normal()
    complete_tail(psi2, phi2, qs, plan_new.nonfree_cols, start_row=i0)

    k2_rel = phi2.T @ phi2
    trace_term = float(((k2_rel - k_rel) * d_rel).sum())
    gamma_sq = (psi2[i0, j0] - psi[i0, j0]) ** 2
    prefactor = rj_log_prefactor(sigma_g, qs[i0, i0], qs[j0, j0], psi[i0, i0])
    log_r = (
        cache.get(graph)
        - cache.get(g_new)
        + (log_q_rev - log_q_fwd)
        - 0.5 * trace_term
    )
    if adding:
        log_r += prefactor + log_z + 0.5 * gamma_sq / sigma_g**2
    else:
        log_r += -prefactor - log_z - 0.5 * gamma_sq / sigma_g**2

    if log_r >= 0.0 or math.log(rng.random()) < log_r:
        # the move leaves det K unchanged (Psi diagonals are shared)
        assert (
            abs(np.prod(np.diag(phi2)) ** 2 - np.prod(np.diag(phi)) ** 2)
            <= 1e-8 * np.prod(np.diag(phi)) ** 2
        )
        k_new = unpermute_matrix(0.5 * (k2_rel + k2_rel.T), ordering)
        return k_new, g_new, True
    return k, graph, False


def rj_graph_update(
    state: GgmChainState,
    stats: SufficientStats,
    prior: GgmPrior,
    sigma_g: float,
    cache: PriorConstCache,
    rng: np.random.Generator,
    ordering: VertexOrdering | None = None,
) -> GgmChainState:
    """Step 1 of the joint sampler: one edge add/delete with the RJ ratio."""
    p = state.G.p
    if ordering is None:
        ordering = random_ordering(p, False, rng)
    d_post = stats.U + prior.d0_for(p)
    k, g, _ = graph_step(state.K, state.G, d_post, cache, sigma_g, ordering, rng)
    return GgmChainState(K=k, G=g)


def precision_update(
    state: GgmChainState,
    stats: SufficientStats,
    prior: GgmPrior,
    sigma_m: float,
    rng: np.random.Generator,
    ordering: VertexOrdering | None = None,
) -> GgmChainState:
    """Step 2: resample K from its G-Wishart conditional Wis_G(n+delta0, U+D0)."""
    p = state.G.p
    d_post = stats.U + prior.d0_for(p)
    k, _, _ = resample_precision(
        state.K, state.G, stats.n + prior.delta0, d_post, sigma_m, rng, ordering=ordering
    )
    return GgmChainState(K=k, G=state.G)


@dataclass
class GgmConfig:
    iters: int = 10000
    burnin: int = 1000
    thin: int = 10
    sigma_m: float = 0.5
    sigma_g: float = 0.5
    mc_const_n: int = 10000
    seed: int = 0
    chain_index: int = 0

    def __post_init__(self):
        if not (self.iters > self.burnin >= 0):
            raise ConfigError("need iters > burnin >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.sigma_m <= 0 or self.sigma_g <= 0:
            raise ConfigError("step sizes must be strictly positive")


@dataclass
class GgmResult:
    edge_freq: np.ndarray
    edge_freq_se: np.ndarray
    k_mean: np.ndarray
    k_samples: list
    graph_accept_rate: float
    precision_accept_rate: float
    n_saved: int


N_BATCHES = 20


def batch_means_se(batch_sums: np.ndarray, batch_counts: np.ndarray) -> np.ndarray:
    """Monte Carlo standard error of a mean from contiguous batch sums."""
    means = batch_sums / np.maximum(batch_counts, 1)[:, None, None]
    nb = batch_sums.shape[0]
    return means.std(axis=0, ddof=1) / math.sqrt(nb)


def run_ggm_chain(
    data: np.ndarray,
    config: GgmConfig,
    prior: GgmPrior | None = None,
    cache: PriorConstCache | None = None,
) -> GgmResult:
    """Run the two-step (graph, precision) sampler and gather summaries."""
    prior = prior or GgmPrior()
    stats = SufficientStats.from_data(data)
    p = stats.U.shape[0]
    if p < 2:
        raise ConfigError("need at least two variables")
    d0 = prior.d0_for(p)
    d_post = stats.U + d0
    rng = chain_rng(config.seed, config.chain_index)
    if cache is None:
        cache = PriorConstCache(
            prior.delta0, d0, config.mc_const_n, chain_rng(config.seed, config.chain_index, stream=1)
        )

    g = Graph(p)
    k = np.diag(np.diag((stats.n + prior.delta0) * np.linalg.inv(d_post))).copy()
    delta_post = stats.n + prior.delta0

    kept = config.iters - config.burnin
    edge_sum = np.zeros((p, p))
    k_sum = np.zeros((p, p))
    batch_sums = np.zeros((N_BATCHES, p, p))
    batch_counts = np.zeros(N_BATCHES, dtype=np.int64)
    k_samples = []
    acc_g = acc_m = tot_m = 0
    for s in range(config.iters):
        ordering = random_ordering(p, False, rng)
        k, g, accepted = graph_step(k, g, d_post, cache, config.sigma_g, ordering, rng)
        acc_g += accepted
        k, a, t = resample_precision(
            k, g, delta_post, d_post, config.sigma_m, rng, ordering=ordering
        )
        acc_m += a
        tot_m += t
        if s >= config.burnin:
            idx = s - config.burnin
            adj = np.asarray(g.adjacency(), dtype=float)
            edge_sum += adj
            k_sum += k
            b = min(idx * N_BATCHES // kept, N_BATCHES - 1)
            batch_sums[b] += adj
            batch_counts[b] += 1
            if idx % config.thin == 0:
                k_samples.append(k.copy())

    return GgmResult(
        edge_freq=edge_sum / kept,
        edge_freq_se=batch_means_se(batch_sums, batch_counts),
        k_mean=k_sum / kept,
        k_samples=k_samples,
        graph_accept_rate=acc_g / config.iters,
        precision_accept_rate=acc_m / max(tot_m, 1),
        n_saved=len(k_samples),
    )


def all_graphs(p: int):
    """Every labeled graph on p vertices (use only for tiny p)."""
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    for bits in itertools.product((False, True), repeat=len(pairs)):
        yield Graph(p, [e for e, b in zip(pairs, bits) if b])


def enumerate_posterior(
    data: np.ndarray,
    prior: GgmPrior,
    mc_n: int,
    rng: np.random.Generator,
):
    """Exact posterior edge probabilities by enumerating all graphs (p <= 4).

    Per graph the log marginal likelihood is
    log I_G(n+delta0, U+D0) - log I_G(delta0, D0) - (np/2) log(2 pi),
    both constants Monte Carlo estimates with ``mc_n`` samples.

    Returns (edge probability matrix, {graph key: posterior probability}).
    """
    stats = SufficientStats.from_data(data)
    p = stats.U.shape[0]
    if p > 4:
        raise ConfigError(f"enumeration supports p <= 4, got p={p}")
    d0 = prior.d0_for(p)
    d_post = stats.U + d0
    graphs = list(all_graphs(p))
    log_marg = np.empty(len(graphs))
    for idx, g in enumerate(graphs):
        post, _ = log_norm_const_mc(GWishartParams(g, stats.n + prior.delta0, d_post), mc_n, rng)
        pri, _ = log_norm_const_mc(GWishartParams(g, prior.delta0, d0), mc_n, rng)
        log_marg[idx] = post - pri - 0.5 * stats.n * p * math.log(2.0 * math.pi)
    log_marg -= log_marg.max()
    weights = np.exp(log_marg)
    weights /= weights.sum()
    edge_prob = np.zeros((p, p))
    for g, w in zip(graphs, weights):
        edge_prob += w * np.asarray(g.adjacency(), dtype=float)
    posterior = {g.key(): float(w) for g, w in zip(graphs, weights)}
    return edge_prob, posterior
