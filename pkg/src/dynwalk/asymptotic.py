"""Closed-form limits of the walker's stationary distribution.

Four results are implemented:

* per-configuration stationaries: within a connected component the walker
  on a static graph occupies node v proportionally to degree/rate, with an
  isolated node keeping all of its component's mass,
* the fast-walker limit: as the walker rate grows without bound, the
  stationary law is the sigma-weighted mixture of per-configuration
  stationaries; when configurations are disconnected the mixture weights
  come from a Markov chain over (configuration, component) states,
* the slow-walker limit: as the environment speeds up, the walker sees an
  iid configuration sequence and its law solves pi = pi P for a lazy
  sigma-averaged step matrix P,
* the rate-invariance fixed point: a single distribution annihilating every
  configuration's walker generator, which (when it exists) is the walker's
  stationary law at every rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._linalg import stationary_from_stochastic
from .environment import EnvironmentSpec, embedded_jump_chain, stationary_sigma
from .errors import ValidationError
from .model import ComponentPartition, ConfigSet, connected_components


@dataclass(frozen=True)
class ComponentChain:
    """Markov chain over (configuration, component) states in the fast limit.

    ``transitions[(k1,l1), (k2,l2)]`` is the probability that the walker,
    occupying component l1 of configuration k1 in local equilibrium, lands
    in component l2 when the environment jumps to configuration k2.
    ``occupancy`` weights the stationary vector of this chain by mean
    holding times, giving the long-run fraction of time spent in each
    component.
    """

    states: tuple[tuple[int, int], ...]
    transitions: sp.csr_matrix
    stationary: np.ndarray
    occupancy: np.ndarray


@dataclass(frozen=True)
class SlowChain:
    """The lazy sigma-averaged step matrix of the slow-walker limit."""

    matrix: np.ndarray
    beta_max: float


def _check_beta(cs: ConfigSet, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (cs.m, cs.n):
        raise ValidationError(f"beta of shape {beta.shape}, expected {(cs.m, cs.n)}")
    return beta


def _config_weights(cs: ConfigSet, k: int, beta_k: np.ndarray) -> np.ndarray:
    """Per-node weights degree/rate in configuration k, with isolated nodes
    assigned weight 1.

    The unit weight realizes the 0/0 := 1 convention: an isolated node is
    its own component, keeps mass 1 within it, and hands that mass to
    whichever component of the next configuration contains it.
    """
    d = cs.degrees[k].astype(float)
    bad = (d > 0) & (beta_k <= 0)
    if bad.any():
        v = int(np.flatnonzero(bad)[0])
        raise ValidationError(
            f"walker rate multiplier is zero at non-isolated node "
            f"{cs.labels[v]!r} in config {k}"
        )
    w = np.ones(cs.n)
    np.divide(d, beta_k, out=w, where=d > 0)
    return w


def _scattered_stationaries(cs, parts: ComponentPartition, beta) -> np.ndarray:
    """(m, n) array: entry (k, v) is pi^(k,l)_v for the component l owning v."""
    out = np.zeros((cs.m, cs.n))
    for k in range(cs.m):
        w = _config_weights(cs, k, beta[k])
        idx = parts.block_index[k]
        denom = np.bincount(idx, weights=w, minlength=len(parts.blocks[k]))
        out[k] = w / denom[idx]
    return out


def per_config_stationary(cs: ConfigSet, k: int, beta_k) -> list[np.ndarray]:
    """Stationary walker distribution on configuration k, per component.

    Within component V of configuration k the walker occupies node v with
    probability (d_v/beta_v) / sum over V of (d_j/beta_j); an isolated node
    is a singleton component with mass 1.
    """
    beta_k = np.asarray(beta_k, dtype=float)
    if beta_k.shape != (cs.n,):
        raise ValidationError(f"beta of shape {beta_k.shape}, expected ({cs.n},)")
    parts = connected_components(cs)
    w = _config_weights(cs, k, beta_k)
    idx = parts.block_index[k]
    denom = np.bincount(idx, weights=w, minlength=len(parts.blocks[k]))
    scattered = w / denom[idx]
    return [scattered[list(block)].copy() for block in parts.blocks[k]]


def fast_walker_connected(cs: ConfigSet, env: EnvironmentSpec, beta) -> np.ndarray:
    """Fast-walker limit when every configuration is connected.

    pi = sum_k sigma_k pi^(k).
    """
    beta = _check_beta(cs, beta)
    parts = connected_components(cs)
    bad = [k for k, blocks in enumerate(parts.blocks) if len(blocks) > 1]
    if bad:
        raise ValidationError(
            f"configurations {bad} are disconnected; use fast_walker_general"
        )
    sigma = stationary_sigma(env)
    scattered = _scattered_stationaries(cs, parts, beta)
    return sigma @ scattered


def fast_walker_general(cs: ConfigSet, env: EnvironmentSpec, beta):
    """Fast-walker limit allowing disconnected configurations.

    Builds the (configuration, component) jump chain: a transition from
    component l1 of configuration k1 to component l2 of k2 happens with the
    environment's jump probability times the equilibrium mass of l1 that
    sits on nodes shared with l2. Its stationary vector, weighted by mean
    holding times, gives the component occupancies; the walker law is the
    occupancy-weighted concatenation of per-component stationaries.

    Requires a Markovian environment (which ``EnvironmentSpec`` is by
    construction): the component-chain characterization rests on iid
    configuration holding times. Returns ``(pi, component_chain)``; a model
    that is not T-connected surfaces as a reducible component chain.
    """
    beta = _check_beta(cs, beta)
    parts = connected_components(cs)
    counts = parts.counts()
    offsets = np.concatenate([[0], np.cumsum(counts)])
    n_states = int(offsets[-1])
    states = tuple((k, l) for k in range(cs.m) for l in range(counts[k]))

    scattered = _scattered_stationaries(cs, parts, beta)

    if cs.m == 1:
        jump = sp.identity(1, format="csr")
        holdings = np.ones(1)
    else:
        chain = embedded_jump_chain(env)
        jump = chain.jump_probs
        holdings = chain.mean_holdings

    rows, cols, vals = [], [], []
    jump_coo = jump.tocoo()
    for k1, k2, p in zip(jump_coo.row, jump_coo.col, jump_coo.data):
        src = offsets[k1] + parts.block_index[k1]
        dst = offsets[k2] + parts.block_index[k2]
        mass = p * scattered[k1]
        rows.extend(src)
        cols.extend(dst)
        vals.extend(mass)
    p_hat = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))

    labels = [f"(config {k}, component {l})" for k, l in states]
    psi_star = stationary_from_stochastic(p_hat, labels=labels, what="component chain")
    config_of = np.repeat(np.arange(cs.m), counts)
    psi = psi_star * holdings[config_of]
    psi /= psi.sum()

    pi = np.zeros(cs.n)
    for k in range(cs.m):
        pi += psi[offsets[k] + parts.block_index[k]] * scattered[k]
    chain = ComponentChain(states=states, transitions=p_hat, stationary=psi_star, occupancy=psi)
    return pi, chain


def slow_walker(cs: ConfigSet, env_or_sigma, beta, beta_max: float | None = None):
    """Slow-walker limit: stationary law of the lazy sigma-averaged chain.

    P(u, v) = sum_k sigma_k (beta_{k,u}/beta_max) A_k(u,v)/d_{k,u} for
    u != v (terms with d_{k,u} = 0 drop out), diagonal filled to make rows
    sum to one. The stationary vector is invariant to the admissible choice
    of beta_max (default 2 max beta), which only controls laziness.

    Returns ``(pi, slow_chain)``.
    """
    beta = _check_beta(cs, beta)
    if isinstance(env_or_sigma, EnvironmentSpec):
        sigma = stationary_sigma(env_or_sigma)
    else:
        sigma = np.asarray(env_or_sigma, dtype=float)
    if sigma.shape != (cs.m,):
        raise ValidationError(f"sigma of shape {sigma.shape}, expected ({cs.m},)")
    top = float(beta.max())
    if top <= 0:
        raise ValidationError("all walker rate multipliers are zero")
    if beta_max is None:
        beta_max = 2.0 * top
    if beta_max <= top:
        raise ValidationError(f"beta_max = {beta_max} must exceed max beta = {top}")

    p = np.zeros((cs.n, cs.n))
    d = cs.degrees.astype(float)
    for k in range(cs.m):
        rate = np.zeros(cs.n)
        np.divide(beta[k], d[k], out=rate, where=d[k] > 0)
        p += sigma[k] * (rate / beta_max)[:, None] * cs.configs[k]
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))

    pi = stationary_from_stochastic(p, labels=cs.labels, what="slow-walker chain")
    return pi, SlowChain(matrix=p, beta_max=float(beta_max))


def walker_generator(cs: ConfigSet, k: int, beta_k, gamma: float = 1.0) -> np.ndarray:
    """Generator of the walker confined to configuration k.

    Off-diagonal (u, v) entry is gamma beta_u A_k(u,v)/d_u; rows of
    isolated nodes are zero (the walker waits there).
    """
    beta_k = np.asarray(beta_k, dtype=float)
    d = cs.degrees[k].astype(float)
    rate = np.zeros(cs.n)
    np.divide(gamma * beta_k, d, out=rate, where=d > 0)
    q = rate[:, None] * cs.configs[k]
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def check_fixed_point(cs: ConfigSet, beta, tol: float = 1e-9):
    """Seek one distribution stationary under every configuration at once.

    Solves the stacked homogeneous system (every per-configuration balance
    equation) plus normalization in least squares, and accepts the result
    only if it is a probability vector whose residual against every
    configuration generator is below ``tol`` in infinity norm. Returns the
    fixed point or ``None``; absence is a valid answer, not an error.
    """
    beta = _check_beta(cs, beta)
    gens = [walker_generator(cs, k, beta[k]) for k in range(cs.m)]
    stacked = np.vstack([q.T for q in gens] + [np.ones((1, cs.n))])
    rhs = np.zeros(stacked.shape[0])
    rhs[-1] = 1.0
    x, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    if x.min() < -1e-9:
        return None
    x = np.clip(x, 0.0, None)
    total = x.sum()
    if total <= 0:
        return None
    x /= total
    resid = max(np.abs(x @ q).max() for q in gens)
    return x if resid < tol else None
