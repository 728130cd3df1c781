"""Exact stationary distribution of the joint (configuration, walker) chain.

The environment and the walker together form a continuous-time Markov
chain on m*n states indexed (configuration k, node v): within a
configuration the walker steps to a uniformly chosen current neighbor at
rate gamma*beta_{k,v} (an isolated node has zero out-rate, which is what
"waits for the next step event" means in continuous time), and the
environment jumps independently of the walker position. Solving this chain
at a given rate is the ground truth the asymptotic limits are checked
against; ``gamma_sweep`` tabulates it across rates together with
total-variation distances to the fast- and slow-walker predictions.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from ._linalg import ProductStructure, stationary_from_generator
from .asymptotic import fast_walker_general, slow_walker
from .environment import EnvironmentSpec, product_stationary
from .errors import ValidationError
from .model import ConfigSet


@dataclass(frozen=True)
class WalkerSpec:
    """Walker rates: a global rate gamma and per-(config, node) multipliers.

    The step rate of the walker at node v while the graph is in
    configuration k is gamma * beta[k, v].
    """

    gamma: float
    beta: np.ndarray

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 2:
            raise ValidationError("beta must be an m-by-n array")
        if not np.all(np.isfinite(beta)) or beta.min() < 0:
            raise ValidationError("beta entries must be finite and nonnegative")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def constant(cls, gamma: float, cs: ConfigSet) -> "WalkerSpec":
        """Constant-rate walker: beta = 1 everywhere."""
        return cls(gamma=gamma, beta=np.ones((cs.m, cs.n)))

    @classmethod
    def degree(cls, gamma: float, cs: ConfigSet) -> "WalkerSpec":
        """Degree-proportional walker: beta_{k,v} = degree of v in config k."""
        return cls(gamma=gamma, beta=cs.degrees.astype(float))

    def with_gamma(self, gamma: float) -> "WalkerSpec":
        return replace(self, gamma=gamma)


@dataclass(frozen=True)
class JointGenerator:
    """Sparse generator of the joint (configuration, node) chain.

    State (k, v) has flat index k*n + v. Walker steps stay within a
    configuration block; environment jumps preserve the node coordinate.
    """

    m: int
    n: int
    matrix: sp.csr_matrix
    state_labels: tuple[str, ...]
    structure: ProductStructure | None = None


def joint_generator(cs: ConfigSet, env: EnvironmentSpec, w: WalkerSpec) -> JointGenerator:
    """Assemble the joint chain's rate matrix.

    Off-diagonal rates: (k,u) -> (k,v) at gamma beta_{k,u} A_k(u,v)/d_{k,u}
    when u has neighbors, and (k,u) -> (l,u) at the environment rate from
    k to l. No transition changes both coordinates.
    """
    if env.m != cs.m:
        raise ValidationError(f"environment has {env.m} states for {cs.m} configs")
    if w.beta.shape != (cs.m, cs.n):
        raise ValidationError(f"beta of shape {w.beta.shape}, expected {(cs.m, cs.n)}")
    d = cs.degrees.astype(float)
    rate = np.zeros((cs.m, cs.n))
    np.divide(w.gamma * w.beta, d, out=rate, where=d > 0)
    walker = rate[:, :, None] * np.stack(cs.configs)
    kk, uu, vv = np.nonzero(walker)
    env_coo = env.rates.tocoo()
    node = np.arange(cs.n)
    rows = np.concatenate([kk * cs.n + uu, (env_coo.row[:, None] * cs.n + node).ravel()])
    cols = np.concatenate([kk * cs.n + vv, (env_coo.col[:, None] * cs.n + node).ravel()])
    vals = np.concatenate([walker[kk, uu, vv], np.repeat(env_coo.data, cs.n)])
    total = cs.m * cs.n
    off = sp.csr_matrix((vals, (rows, cols)), shape=(total, total))
    q = (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()
    labels = tuple(
        f"(config {k}, node {cs.labels[v]})" for k in range(cs.m) for v in range(cs.n)
    )
    structure = ProductStructure(
        env_rates=env.rates, walker_blocks=walker, env_stationary=product_stationary(env)
    )
    return JointGenerator(m=cs.m, n=cs.n, matrix=q, state_labels=labels, structure=structure)


def stationary_joint(g: JointGenerator):
    """Stationary law of the joint chain plus its two marginals.

    Returns ``(joint, walker_marginal, config_marginal)``. A joint chain
    with several recurrent classes (model not T-connected, or walker
    frozen by zero rates) raises ``ReducibleChainError`` naming them.
    """
    joint = stationary_from_generator(
        g.matrix, labels=g.state_labels, what="joint chain", structure=g.structure
    )
    grid = joint.reshape(g.m, g.n)
    return joint, grid.sum(axis=0), grid.sum(axis=1)


def total_variation(p, q) -> float:
    """Distance between two distributions: the maximum absolute
    componentwise difference (not the half-L1 convention)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"length mismatch: {p.shape} vs {q.shape}")
    return float(np.abs(p - q).max())


@dataclass(frozen=True)
class SweepResult:
    """Exact walker law across a list of rates, with distances to the limits.

    One row per rate: the walker marginal, the configuration marginal, and
    the total-variation distances to the fast- and slow-walker predictions.
    """

    gammas: tuple[float, ...]
    walker: np.ndarray
    config: np.ndarray
    tv_fast: np.ndarray
    tv_slow: np.ndarray
    node_labels: tuple[str, ...]

    def write_csv(self, target) -> None:
        """Write rows as CSV with 17-significant-digit floats.

        Header: gamma,node_1..node_n,config_1..config_m,tv_fast,tv_slow.
        """
        n = self.walker.shape[1]
        m = self.config.shape[1]
        close = False
        if isinstance(target, (str, os.PathLike)):
            target = open(target, "w")
            close = True
        try:
            cols = (
                ["gamma"]
                + [f"node_{i + 1}" for i in range(n)]
                + [f"config_{k + 1}" for k in range(m)]
                + ["tv_fast", "tv_slow"]
            )
            target.write(",".join(cols) + "\n")
            for i, gamma in enumerate(self.gammas):
                row = [gamma, *self.walker[i], *self.config[i], self.tv_fast[i], self.tv_slow[i]]
                target.write(",".join(f"{x:.17g}" for x in row) + "\n")
        finally:
            if close:
                target.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def default_workers() -> int:
    """Worker count for sweep evaluation; DYNWALK_THREADS caps it."""
    raw = os.environ.get("DYNWALK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def gamma_sweep(cs: ConfigSet, env: EnvironmentSpec, w_base: WalkerSpec, gammas,
                workers: int | None = None) -> SweepResult:
    """Solve the joint chain at every rate in ``gammas``.

    Rows are ordered like the input regardless of evaluation order; rates
    may be evaluated concurrently (each solve is independent and pure).
    The fast and slow predictions are rate-free and computed once.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValidationError("gamma list is empty")
    if any(g <= 0 for g in gammas):
        raise ValidationError("all gamma values must be positive")

    fast_pi, _ = fast_walker_general(cs, env, w_base.beta)
    slow_pi, _ = slow_walker(cs, env, w_base.beta)

    def solve_one(gamma: float):
        g = joint_generator(cs, env, w_base.with_gamma(gamma))
        _, walker, config = stationary_joint(g)
        return walker, config

    if workers is None:
        workers = default_workers()
    if workers > 1 and len(gammas) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_one, gammas))
    else:
        results = [solve_one(g) for g in gammas]

    walker = np.array([r[0] for r in results])
    config = np.array([r[1] for r in results])
    tv_fast = np.array([total_variation(row, fast_pi) for row in walker])
    tv_slow = np.array([total_variation(row, slow_pi) for row in walker])
    return SweepResult(
        gammas=tuple(gammas),
        walker=walker,
        config=config,
        tv_fast=tv_fast,
        tv_slow=tv_slow,
        node_labels=cs.labels,
    )
