"""The Markovian environment process over configurations.

The environment is a continuous-time Markov chain on the configuration
indices, given by its off-diagonal transition-rate matrix (the diagonal is
implied as the negative row sum). This module computes its stationary
distribution sigma (the long-run fraction of time spent in each
configuration), the embedded jump chain, and the mean holding times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._linalg import stationary_from_generator
from .errors import ValidationError
from .model import FactorChain


@dataclass(frozen=True)
class EnvironmentSpec:
    """Environment transition rates among the m configurations.

    ``rates`` holds the off-diagonal rates (any diagonal entries in the
    input are discarded; the generator diagonal is the negative row sum).
    ``factors``, when present, records that the chain is a product of
    independent small CTMCs (set by the edge-Markovian and bus builders);
    the simulator exploits it, the solvers do not need it.
    """

    rates: sp.csr_matrix
    factors: tuple[FactorChain, ...] | None = None

    def __post_init__(self):
        r = sp.csr_matrix(self.rates, dtype=float)
        if r.shape[0] != r.shape[1]:
            raise ValidationError(f"rate matrix of shape {r.shape} is not square")
        r.setdiag(0.0)
        r.eliminate_zeros()
        if r.nnz and r.data.min() < 0:
            raise ValidationError("negative transition rate")
        object.__setattr__(self, "rates", r)
        if self.m > 1 and np.any(self.exit_rates <= 0):
            k = int(np.flatnonzero(self.exit_rates <= 0)[0])
            raise ValidationError(
                f"configuration {k} has no exit rate; every holding time "
                "must have a finite positive mean"
            )

    @property
    def m(self) -> int:
        return self.rates.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        return np.asarray(self.rates.sum(axis=1)).ravel()

    def generator(self) -> sp.csr_matrix:
        q = self.rates.copy().tolil()
        q.setdiag(-self.exit_rates)
        return q.tocsr()


@dataclass(frozen=True)
class EmbeddedChain:
    """Jump chain of the environment plus mean holding times.

    ``jump_probs[k, l]`` is the probability that the next configuration is
    l given a jump out of k; ``mean_holdings[k]`` is E[S_k] = 1/(total exit
    rate of k).
    """

    jump_probs: sp.csr_matrix
    mean_holdings: np.ndarray


def environment_from_rates(rates, factors=None) -> EnvironmentSpec:
    """Build an EnvironmentSpec from a dense or sparse rate matrix."""
    return EnvironmentSpec(rates=sp.csr_matrix(np.asarray(rates, dtype=float))
                           if not sp.issparse(rates) else rates, factors=factors)


def product_stationary(env: EnvironmentSpec) -> np.ndarray | None:
    """Stationary configuration distribution from independent factors.

    Available only for product-form environments (edge-Markovian and bus
    builders); returns None otherwise. ``stationary_sigma`` deliberately
    does not use this closed form so the two routes stay independent and
    can be cross-checked against each other.
    """
    if env.factors is None:
        return None
    m = env.m
    sigma = np.ones(m)
    states = np.arange(m)
    for f in env.factors:
        gen = f.rates - np.diag(f.rates.sum(axis=1))
        a = gen.T.copy()
        a[-1, :] = 1.0
        b = np.zeros(f.size)
        b[-1] = 1.0
        pi_f = np.linalg.solve(a, b)
        sigma = sigma * pi_f[(states // f.stride) % f.size]
    return sigma


def stationary_sigma(env: EnvironmentSpec) -> np.ndarray:
    """Stationary configuration distribution: sigma Q = 0, sum sigma = 1.

    Every entry is strictly positive for an irreducible environment; a
    reducible one raises ``ReducibleChainError`` listing the recurrent
    classes.
    """
    if env.m == 1:
        return np.ones(1)
    labels = [f"config {k}" for k in range(env.m)]
    return stationary_from_generator(env.generator(), labels=labels, what="environment chain")


def embedded_jump_chain(env: EnvironmentSpec) -> EmbeddedChain:
    """Jump probabilities and mean holdings of the environment chain."""
    if env.m == 1:
        raise ValidationError("a single-configuration environment has no jumps")
    exit_rates = env.exit_rates
    inv = sp.diags(1.0 / exit_rates)
    probs = (inv @ env.rates).tocsr()
    return EmbeddedChain(jump_probs=probs, mean_holdings=1.0 / exit_rates)
