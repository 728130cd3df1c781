"""Continuous-time random walks on time-varying graphs.

Exact stationary solves of the joint (configuration, walker) chain,
fast/slow-walker limits, the rate-invariance fixed-point test,
edge-Markovian and bus-system model builders, and Monte-Carlo validation.
"""

from .environment import EmbeddedChain, EnvironmentSpec, embedded_jump_chain, environment_from_rates, stationary_sigma
from .errors import DynwalkError, ReducibleChainError, SolverError, ValidationError
from .exact import (
    JointGenerator,
    SweepResult,
    WalkerSpec,
    gamma_sweep,
    joint_generator,
    stationary_joint,
    total_variation,
)
from .asymptotic import (
    ComponentChain,
    SlowChain,
    check_fixed_point,
    fast_walker_connected,
    fast_walker_general,
    per_config_stationary,
    slow_walker,
)
from .model import (
    BusSystemSpec,
    ComponentPartition,
    ConfigSet,
    EdgeMarkovSpec,
    FactorChain,
    build_bus_model,
    connected_components,
    expand_edge_markovian,
    t_connectivity,
    validate_config_set,
)

__version__ = "0.1.0"
