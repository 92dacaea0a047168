"""Hitting-time quasi-distances for finite MDPs and a Gromov-Wasserstein
distance between MDPs built on them."""

from .gw import (
    GwParams,
    GwResult,
    MetricMeasureTriple,
    build_triple,
    check_coupling,
    equivalence_check,
    gw_exhaustive,
    gw_objective,
    gw_solve,
)
from .hitting import (
    HittingMatrix,
    hitting_discounted,
    hitting_plain,
    hitting_restart,
    quasi_metric_check,
    restart_from_discounted,
)
from .mdp_core import (
    MdpSpec,
    StateActionIndex,
    from_arrays,
    induced_transition,
    initial_pair_distribution,
    occupancy_measure,
    validate,
)
from .restart_chain import (
    build_restart_chain,
    stationary_distribution,
    support_set,
    verify_pagerank_identity,
)

__version__ = "0.1.0"
