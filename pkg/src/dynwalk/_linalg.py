"""Stationary-distribution solves shared by the environment and exact modules.

The policy is a direct solve everywhere: dense LU (normalization row
replacing one balance equation) for systems up to ``DENSE_LIMIT`` states,
sparse LU on the grounded system above it. Grounding removes one redundant
balance equation and pins that state's unnormalized mass to one, which
keeps the matrix sparse (a normalization row of ones is dense and ruins
sparse fill-in). One step of iterative refinement is applied in both paths
so stationary vectors stay accurate near machine precision even when rates
span many orders of magnitude.

Irreducibility is decided from the nonzero pattern by strongly-connected-
component analysis; a reducible chain raises ``ReducibleChainError``
listing the recurrent classes (the terminal strongly connected components).
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import ReducibleChainError, SolverError

DENSE_LIMIT = 5000


def terminal_classes(pattern: sp.spmatrix) -> list[np.ndarray]:
    """Recurrent classes of a chain with the given transition pattern.

    A class is recurrent iff its strongly connected component has no edge
    into another component.
    """
    pattern = sp.csr_matrix(pattern, dtype=bool)
    n_comp, labels = connected_components(pattern, directed=True, connection="strong")
    coo = pattern.tocoo()
    has_exit = np.zeros(n_comp, dtype=bool)
    mask = labels[coo.row] != labels[coo.col]
    has_exit[labels[coo.row[mask]]] = True
    return [np.flatnonzero(labels == c) for c in range(n_comp) if not has_exit[c]]


def check_irreducible(pattern: sp.spmatrix, labels=None, what="chain") -> None:
    """Raise ReducibleChainError unless the pattern is strongly connected."""
    pattern = sp.csr_matrix(pattern, dtype=bool)
    n = pattern.shape[0]
    n_comp, _ = connected_components(pattern, directed=True, connection="strong")
    if n_comp == 1:
        return
    classes = terminal_classes(pattern)
    parts = []
    for cls in classes:
        names = [str(labels[i]) if labels is not None else str(i) for i in cls[:8]]
        more = f", ... ({len(cls)} states)" if len(cls) > 8 else ""
        parts.append("{" + ", ".join(names) + more + "}")
    raise ReducibleChainError(
        f"{what} is reducible ({n_comp} strongly connected components over "
        f"{n} states); recurrent classes: " + "; ".join(parts),
        [tuple(cls) for cls in classes],
    )


def _finish(x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise SolverError("stationary solve produced non-finite values")
    total = x.sum()
    if x.min() < -1e-8 * max(total, 1.0):
        raise SolverError(
            f"stationary solve produced a negative probability ({x.min():.3e}); "
            "the chain is likely numerically degenerate"
        )
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def _stationary_dense(q: np.ndarray) -> np.ndarray:
    """Dense path: replace the last balance equation by normalization."""
    scale = max(np.abs(q).max(), 1.0)
    a_t = (q / scale).T.copy()
    a_t[-1, :] = 1.0
    b = np.zeros(q.shape[0])
    b[-1] = 1.0
    lu, piv = scipy.linalg.lu_factor(a_t)
    x = scipy.linalg.lu_solve((lu, piv), b)
    x += scipy.linalg.lu_solve((lu, piv), b - a_t @ x)
    return _finish(x)


@dataclass(frozen=True)
class ProductStructure:
    """Structure hint for generators of the form
    kron(env, I_n) + blockdiag(walker blocks) - diag(exits).

    Lets the sparse path precondition by whichever half dominates instead
    of paying the (large) sparse-LU fill of the full product pattern.
    ``walker_blocks`` holds the off-diagonal walker rates, one n-by-n
    block per environment state.
    """

    env_rates: sp.csr_matrix
    walker_blocks: np.ndarray
    env_stationary: np.ndarray | None = None


def _grounded(q: sp.csr_matrix):
    """Drop one redundant balance equation and pin that state's mass to 1.

    Keeps the system sparse (a normalization row of ones is dense and
    ruins fill-in). The grounded state is the one with the smallest exit
    rate (longest holding), which tends to carry non-negligible mass.
    """
    n = q.shape[0]
    g = int(np.argmin(-q.diagonal()))
    keep = np.concatenate([np.arange(g), np.arange(g + 1, n)])
    a_t = q.T.tocsr()
    b_mat = a_t[keep][:, keep].tocsr()
    rhs = -np.asarray(a_t[keep][:, [g]].todense()).ravel()
    return b_mat, rhs, keep, g


def _embed(y: np.ndarray, keep: np.ndarray, g: int, n: int) -> np.ndarray:
    x = np.empty(n)
    x[keep] = y
    x[g] = 1.0
    return x


_env_factor_cache: dict[tuple, object] = {}
_env_factor_lock = threading.Lock()


def _env_stage_factor(env: sp.csr_matrix, shift: float):
    """Incomplete LU of the shifted environment generator transpose.

    The factor is computed on unscaled rates (LU factors scale linearly
    with the matrix, so one factorization serves every walker rate) and
    cached per (environment matrix, shift magnitude), evicted when the
    matrix dies.
    """
    key = (id(env), float(f"{shift:.2g}"))
    with _env_factor_lock:
        hit = _env_factor_cache.get(key)
        if hit is not None:
            return hit
    env_exit = np.asarray(env.sum(axis=1)).ravel()
    env_gen = (env.T - sp.diags(env_exit + shift)).tocsc()
    ilu = spla.spilu(env_gen, drop_tol=1e-4, fill_factor=10)
    with _env_factor_lock:
        _env_factor_cache[key] = ilu
        weakref.finalize(env, _env_factor_cache.pop, key, None)
    return ilu


def _structured_preconditioner(q_t: sp.csr_matrix, structure: ProductStructure, keep, scale):
    """Multi-stage preconditioner exploiting the product form of the generator.

    Stage one solves the per-environment-state walker blocks exactly
    (batched small inverses), which captures states where walker rates
    dominate. Stage two corrects the remaining residual with an ILU of the
    (shifted) environment generator applied per node, which captures
    states where the environment dominates, including nodes the walker
    cannot leave. In any mixed-rate chain both kinds of state exist at
    once, so neither stage suffices alone. When the environment's
    stationary vector is known, a final Galerkin correction on the
    n-dimensional subspace spanned by (sigma x node indicator) removes the
    slow walker-marginal modes that otherwise stall the Krylov iteration.
    """
    env = structure.env_rates
    m = env.shape[0]
    n = structure.walker_blocks.shape[1]
    total = m * n
    env_exit = np.asarray(env.sum(axis=1)).ravel()
    walker_exit = structure.walker_blocks.sum(axis=2)

    # per-state blocks of Q^T: walker_block^T - diag(total exit)
    blocks = np.transpose(structure.walker_blocks, (0, 2, 1)) / scale
    diag = (walker_exit + env_exit[:, None]) / scale
    idx = np.arange(n)
    blocks = blocks.copy()
    blocks[:, idx, idx] -= diag
    block_inv = np.linalg.inv(blocks)

    # shift grounds the singular environment generator: comparable to the
    # walker exit for slow walkers, but never so large that states the
    # walker cannot leave (whose true diagonal is the environment exit
    # alone) are mis-scaled
    env_scale = float(env_exit.max())
    shift = float(np.clip(walker_exit.mean(), 1e-8 * env_scale, 1e-2 * env_scale))
    env_ilu = _env_stage_factor(env, shift)

    coarse = None
    if structure.env_stationary is not None:
        basis = np.zeros((total, n))
        for u in range(n):
            grid = np.zeros((m, n))
            grid[:, u] = structure.env_stationary
            basis[:, u] = grid.ravel()
        galerkin = np.zeros((n, n))
        for u in range(n):
            galerkin[:, u] = np.asarray(q_t @ basis[:, u]).reshape(m, n).sum(axis=0)
        coarse = (basis, np.linalg.pinv(galerkin, rcond=1e-12))

    def apply_full(x):
        y1 = np.einsum("kij,kj->ki", block_inv, x.reshape(m, n)).ravel()
        r = np.asarray(x - q_t @ y1)
        y = y1 + scale * env_ilu.solve(r.reshape(m, n)).ravel()
        if coarse is not None:
            basis, pinv = coarse
            r2 = np.asarray(x - q_t @ y).reshape(m, n).sum(axis=0)
            y = y + basis @ (pinv @ r2)
        return y

    def matvec(y):
        x = np.zeros(total)
        x[keep] = y
        return apply_full(x)[keep]

    return spla.LinearOperator((len(keep), len(keep)), matvec)


def _stationary_sparse(q: sp.csr_matrix, structure: ProductStructure | None = None) -> np.ndarray:
    """Sparse path: grounded solve, structured Krylov first, direct LU fallback.

    The structured path is accepted on the measured residual of the full
    balance system, not on the iteration's stopping flag.
    """
    n = q.shape[0]
    scale = max(abs(q).max(), 1.0)
    q = (q / scale).tocsr()
    b_mat, rhs, keep, g = _grounded(q)

    if structure is not None and structure.walker_blocks.shape[1] <= 64:
        prec = _structured_preconditioner(q.T.tocsr(), structure, keep, scale)
        y, _ = spla.lgmres(b_mat, rhs, M=prec, rtol=1e-11, atol=0.0,
                           maxiter=60, inner_m=60, outer_k=6)
        # refine until the true balance residual is near machine precision;
        # the stationary-vector error is the residual amplified by the
        # reciprocal spectral gap, so a merely small residual is not enough
        for _ in range(3):
            x = _embed(y, keep, g, n)
            resid = np.abs(x @ q).max() / max(x.max(), 1.0)
            if resid < 5e-14:
                break
            dy, _ = spla.lgmres(b_mat, rhs - b_mat @ y, M=prec, rtol=1e-5,
                                atol=1e-16, maxiter=20, inner_m=60, outer_k=6)
            y += dy
        x = _embed(y, keep, g, n)
        resid = np.abs(x @ q).max() / max(x.max(), 1.0)
        if resid < 1e-12:
            return _finish(x)

    lu = spla.splu(b_mat.tocsc(), permc_spec="MMD_AT_PLUS_A")
    y = lu.solve(rhs)
    y += lu.solve(rhs - b_mat @ y)
    return _finish(_embed(y, keep, g, n))


def stationary_from_generator(q, labels=None, what="chain", structure=None) -> np.ndarray:
    """Stationary distribution pi of a CTMC generator (pi q = 0, sum = 1).

    ``q`` may be dense or sparse; rows must sum to zero. Raises
    ``ReducibleChainError`` when the chain is not irreducible.
    """
    if sp.issparse(q):
        q = q.tocsr()
        n = q.shape[0]
        if n == 1:
            return np.ones(1)
        off = q.copy()
        off.setdiag(0)
        off.eliminate_zeros()
        check_irreducible(off, labels=labels, what=what)
        if n <= DENSE_LIMIT:
            return _stationary_dense(q.toarray())
        return _stationary_sparse(q, structure)
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    if n == 1:
        return np.ones(1)
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    check_irreducible(sp.csr_matrix(off != 0), labels=labels, what=what)
    if n <= DENSE_LIMIT:
        return _stationary_dense(q)
    return _stationary_sparse(sp.csr_matrix(q))


def stationary_from_stochastic(p, labels=None, what="chain") -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix (pi p = pi)."""
    if sp.issparse(p):
        q = p.tocsr().astype(float) - sp.eye(p.shape[0], format="csr")
        return stationary_from_generator(q, labels=labels, what=what)
    p = np.asarray(p, dtype=float)
    q = p - np.eye(p.shape[0])
    return stationary_from_generator(q, labels=labels, what=what)
