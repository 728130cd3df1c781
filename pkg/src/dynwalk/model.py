"""Graph configurations and model builders.

A dynamic-graph model is a finite set of symmetric 0/1 adjacency
configurations over a fixed node set, together with an environment process
that switches among them (see ``environment``). This module owns the
structural side: validation, T-connectivity (connectivity of the OR-union
of all configurations), per-configuration connected components, and the two
model builders:

* ``expand_edge_markovian`` turns independent per-edge On/Off processes
  into the explicit configuration set (one per edge subset) plus the
  induced environment rate matrix and its product-form stationary vector.
* ``build_bus_model`` turns a cyclic bus system (lines, stops, dwell and
  travel rates) into a model whose walker nodes are buses and whose
  configurations are cliques of co-located buses.

All types are immutable after construction; operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import accumulate
from operator import mul

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .errors import (
    AsymmetryError,
    DimensionMismatchError,
    NonBinaryEntryError,
    NonzeroDiagonalError,
    SolverError,
    ValidationError,
)

EDGE_EXPANSION_CAP = 20
BUS_STATE_CAP = 200_000


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConfigSet:
    """The node set plus the finite family of adjacency configurations.

    ``configs[k]`` is an n-by-n symmetric 0/1 matrix with zero diagonal;
    ``degrees[k, v]`` caches the degree of node v in configuration k.
    Build instances through ``validate_config_set``.
    """

    labels: tuple[str, ...]
    configs: tuple[np.ndarray, ...]
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def m(self) -> int:
        return len(self.configs)


@dataclass(frozen=True)
class ComponentPartition:
    """Connected components of every configuration.

    ``blocks[k]`` partitions the node set of configuration k into connected
    components, ordered by smallest member index; isolated nodes appear as
    singletons. ``block_index[k][v]`` is the component id of node v.
    """

    blocks: tuple[tuple[tuple[int, ...], ...], ...]
    block_index: tuple[np.ndarray, ...]

    def counts(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)


def validate_config_set(raw_configs, labels=None) -> ConfigSet:
    """Check and freeze a list of adjacency matrices into a ConfigSet.

    Each matrix must be square, symmetric, 0/1-valued with a zero diagonal,
    and all must share one dimension. Violations raise a distinct
    validation error naming the offending configuration and entry.
    """
    if not raw_configs:
        raise ValidationError("at least one configuration is required")
    configs = []
    n = None
    for k, raw in enumerate(raw_configs):
        a = np.asarray(raw)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"config {k}: matrix of shape {a.shape} is not square")
        if n is None:
            n = a.shape[0]
        elif a.shape[0] != n:
            raise DimensionMismatchError(
                f"config {k}: size {a.shape[0]} differs from config 0 size {n}"
            )
        bad = np.argwhere((a != 0) & (a != 1))
        if bad.size:
            u, v = bad[0]
            raise NonBinaryEntryError(f"config {k}: entry ({u}, {v}) = {a[u, v]!r} is not 0/1")
        a = a.astype(np.int8)
        if a.diagonal().any():
            v = int(np.flatnonzero(a.diagonal())[0])
            raise NonzeroDiagonalError(f"config {k}: nonzero diagonal at node ({v}, {v})")
        asym = np.argwhere(a != a.T)
        if asym.size:
            u, v = asym[0]
            raise AsymmetryError(f"config {k}: entry ({u}, {v}) != entry ({v}, {u})")
        configs.append(_frozen(a))
    if labels is None:
        labels = tuple(str(i + 1) for i in range(n))
    else:
        labels = tuple(str(x) for x in labels)
        if len(labels) != n:
            raise ValidationError(f"{len(labels)} labels for {n} nodes")
    degrees = _frozen(np.array([a.sum(axis=1) for a in configs], dtype=np.int64))
    return ConfigSet(labels=labels, configs=tuple(configs), degrees=degrees)


def t_connectivity(cs: ConfigSet) -> tuple[bool, np.ndarray]:
    """Whether the OR-union of all configurations is a connected graph.

    Returns (connected, union_adjacency). A model must be T-connected for
    the walker's stationary distribution to be unique.
    """
    union = np.zeros((cs.n, cs.n), dtype=np.int8)
    for a in cs.configs:
        union |= a
    n_comp, _ = _cc(sp.csr_matrix(union), directed=False)
    return n_comp == 1, _frozen(union)


def connected_components(cs: ConfigSet) -> ComponentPartition:
    """Per-configuration connected components (isolated nodes -> singletons)."""
    blocks = []
    index = []
    for a in cs.configs:
        n_comp, lab = _cc(sp.csr_matrix(a), directed=False)
        order = {}
        for v in range(cs.n):
            order.setdefault(lab[v], len(order))
        relabeled = np.array([order[c] for c in lab], dtype=np.int64)
        comp = [[] for _ in range(n_comp)]
        for v in range(cs.n):
            comp[relabeled[v]].append(v)
        blocks.append(tuple(tuple(c) for c in comp))
        index.append(_frozen(relabeled))
    return ComponentPartition(blocks=tuple(blocks), block_index=tuple(index))


@dataclass(frozen=True)
class EdgeMarkovSpec:
    """Independent On/Off processes over a base edge set.

    ``on_rates[i]`` is the Off->On rate of edge i and ``off_rates[i]`` the
    On->Off rate, so edge i is On a stationary fraction
    ``on/(on + off)`` of the time.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    on_rates: tuple[float, ...]
    off_rates: tuple[float, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("node count must be positive")
        if len(self.on_rates) != len(self.edges) or len(self.off_rates) != len(self.edges):
            raise ValidationError("one On rate and one Off rate per edge required")
        seen = set()
        norm = []
        for i, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.n and 0 <= v < self.n) or u == v:
                raise ValidationError(f"edge {i} = ({u}, {v}) is not a valid node pair")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValidationError(f"duplicate edge ({u}, {v})")
            seen.add(key)
            norm.append(key)
        for i, (lo, l1) in enumerate(zip(self.off_rates, self.on_rates)):
            if not (lo > 0 and l1 > 0):
                raise ValidationError(f"edge {i}: rates must be positive (got On={l1}, Off={lo})")
        object.__setattr__(self, "edges", tuple(norm))

    def on_fractions(self) -> np.ndarray:
        on = np.asarray(self.on_rates, dtype=float)
        off = np.asarray(self.off_rates, dtype=float)
        return on / (on + off)


@dataclass(frozen=True)
class FactorChain:
    """One independent CTMC factor of a product-form environment.

    The environment state index decomposes as ``sum(state_f * stride_f)``
    over factors; ``rates`` holds the factor's off-diagonal transition
    rates. Used by the simulator to skip over environment events without
    enumerating them.
    """

    rates: np.ndarray
    stride: int

    @property
    def size(self) -> int:
        return self.rates.shape[0]


def expand_edge_markovian(spec: EdgeMarkovSpec, cap: int = EDGE_EXPANSION_CAP):
    """Expand per-edge On/Off processes into the explicit model.

    Returns ``(config_set, environment, sigma)`` with one configuration per
    edge subset (subset bitmask ascending; bit i = edge i present).
    Environment transitions flip exactly one edge, at that edge's On or Off
    rate. ``sigma`` is the stationary configuration distribution from the
    closed product formula; it is cross-checked against the environment
    balance solve before being returned.
    """
    from .environment import EnvironmentSpec, stationary_sigma

    ne = len(spec.edges)
    if ne > cap:
        raise ValidationError(
            f"{ne} edges would expand to 2^{ne} = {2 ** ne} configurations "
            f"(cap is 2^{cap}); raise the cap only if you mean it"
        )
    m = 1 << ne
    configs = []
    for mask in range(m):
        a = np.zeros((spec.n, spec.n), dtype=np.int8)
        for i, (u, v) in enumerate(spec.edges):
            if mask >> i & 1:
                a[u, v] = a[v, u] = 1
        configs.append(a)
    cs = validate_config_set(configs)

    rows, cols, vals = [], [], []
    for mask in range(m):
        for i in range(ne):
            other = mask ^ (1 << i)
            rate = spec.off_rates[i] if mask >> i & 1 else spec.on_rates[i]
            rows.append(mask)
            cols.append(other)
            vals.append(rate)
    rates = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    factors = tuple(
        FactorChain(
            rates=_frozen(np.array([[0.0, spec.on_rates[i]], [spec.off_rates[i], 0.0]])),
            stride=1 << i,
        )
        for i in range(ne)
    )
    env = EnvironmentSpec(rates=rates, factors=factors)

    q = spec.on_fractions()
    sigma = np.ones(m)
    for i in range(ne):
        bit = (np.arange(m) >> i) & 1
        sigma *= np.where(bit == 1, q[i], 1.0 - q[i])

    balance = stationary_sigma(env)
    err = np.max(np.abs(sigma - balance))
    if err > 1e-12:
        raise SolverError(
            f"product-form sigma disagrees with the balance solve by {err:.3e}"
        )
    return cs, env, _frozen(sigma)


@dataclass(frozen=True)
class BusSystemSpec:
    """A cyclic bus system: stops, lines, bus counts, and motion rates.

    ``lines[i]`` is the cyclic stop sequence of line i (stop names drawn
    from ``stops``); ``dwell_rates[i][k]`` is the rate of leaving stop k of
    line i (1/mean dwell) and ``travel_rates[i][k]`` the rate of completing
    the leg from stop k to the next stop (1/mean travel time). Buses move
    independently; the walker node set is the set of buses.
    """

    stops: tuple[str, ...]
    lines: tuple[tuple[str, ...], ...]
    bus_counts: tuple[int, ...]
    dwell_rates: tuple[tuple[float, ...], ...]
    travel_rates: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(set(self.stops)) != len(self.stops):
            raise ValidationError("duplicate stop names")
        if not self.lines:
            raise ValidationError("at least one line required")
        if not (len(self.lines) == len(self.bus_counts) == len(self.dwell_rates) == len(self.travel_rates)):
            raise ValidationError("lines, bus_counts, dwell_rates and travel_rates must align")
        known = set(self.stops)
        for i, line in enumerate(self.lines):
            if len(line) < 1:
                raise ValidationError(f"line {i} has no stops")
            missing = [s for s in line if s not in known]
            if missing:
                raise ValidationError(f"line {i} references unknown stops {missing}")
            if len(self.dwell_rates[i]) != len(line) or len(self.travel_rates[i]) != len(line):
                raise ValidationError(f"line {i}: one dwell and one travel rate per stop required")
            if any(r <= 0 for r in self.dwell_rates[i]) or any(r <= 0 for r in self.travel_rates[i]):
                raise ValidationError(f"line {i}: rates must be positive")
        if any(b < 1 for b in self.bus_counts):
            raise ValidationError("every line needs at least one bus")

    @property
    def total_buses(self) -> int:
        return sum(self.bus_counts)


def build_bus_model(spec: BusSystemSpec, cap: int = BUS_STATE_CAP):
    """Build the dynamic-graph model induced by a bus system.

    Environment states are joint bus positions; a bus is either dwelling at
    stop k of its line (position 2k) or in transit on the leg k -> k+1
    (position 2k+1). Transitions move a single bus (no simultaneous
    departures). Every environment state carries its own configuration:
    a clique among the buses located at the same stop. Distinct bus
    placements that induce equal cliques remain distinct environment
    states.

    Returns ``(config_set, environment)``.
    """
    from .environment import EnvironmentSpec

    stop_id = {s: i for i, s in enumerate(spec.stops)}
    bus_line = []  # line index of each bus, in node order
    for i, count in enumerate(spec.bus_counts):
        bus_line.extend([i] * count)
    nb = len(bus_line)
    sizes = [2 * len(spec.lines[i]) for i in bus_line]
    total = math.prod(sizes)
    if total > cap:
        raise ValidationError(
            f"bus system expands to {total} environment states (cap {cap})"
        )

    # stride of the last bus is 1 (row-major over bus positions)
    strides = list(accumulate([1] + sizes[:0:-1], mul))[::-1]

    factor_rates = []
    for b, i in enumerate(bus_line):
        ni = len(spec.lines[i])
        r = np.zeros((2 * ni, 2 * ni))
        for k in range(ni):
            r[2 * k, 2 * k + 1] = spec.dwell_rates[i][k]
            r[2 * k + 1, 2 * ((k + 1) % ni)] = spec.travel_rates[i][k]
        factor_rates.append(r)
    factors = tuple(
        FactorChain(rates=_frozen(r), stride=strides[b]) for b, r in enumerate(factor_rates)
    )

    # every environment state: configuration + single-bus transitions
    configs = []
    rows, cols, vals = [], [], []
    positions = np.zeros(nb, dtype=np.int64)
    for state in range(total):
        rem = state
        for b in range(nb):
            positions[b] = (rem // strides[b]) % sizes[b]
        a = np.zeros((nb, nb), dtype=np.int8)
        at_stop = {}
        for b in range(nb):
            pos = positions[b]
            if pos % 2 == 0:
                s = stop_id[spec.lines[bus_line[b]][pos // 2]]
                at_stop.setdefault(s, []).append(b)
        for group in at_stop.values():
            for x in range(len(group)):
                for y in range(x + 1, len(group)):
                    a[group[x], group[y]] = a[group[y], group[x]] = 1
        configs.append(a)
        for b in range(nb):
            r = factor_rates[b]
            pos = positions[b]
            nxt = np.flatnonzero(r[pos])
            for j in nxt:
                rows.append(state)
                cols.append(state + (int(j) - int(pos)) * strides[b])
                vals.append(r[pos, j])

    labels = []
    for i, count in enumerate(spec.bus_counts):
        labels.extend(f"L{i + 1}-B{j + 1}" for j in range(count))
    cs = validate_config_set(configs, labels=labels)
    rates = sp.csr_matrix((vals, (rows, cols)), shape=(total, total))
    return cs, EnvironmentSpec(rates=rates, factors=factors)
