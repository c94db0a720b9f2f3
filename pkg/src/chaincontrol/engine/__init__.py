"""Box coverings, transition graphs and chain-set extraction."""

from .analysis import (
    ChainSetResult,
    LadderResult,
    antipodal_classification,
    central_sets,
    chain_control_sets,
    chain_reachable_set,
    classify_antipodal,
    equator_containment,
    hemisphere_restriction,
    projective_quotient,
    strong_chain_ladder,
    strongly_connected_components,
)
from .covering import BoxCovering, DomainSpec, build_covering
from .graph import TransitionGraph, build_transition_graph, graph_from_samples, sample_flow
from .jumps import JumpSpec

__all__ = [
    "BoxCovering",
    "ChainSetResult",
    "DomainSpec",
    "JumpSpec",
    "LadderResult",
    "TransitionGraph",
    "antipodal_classification",
    "build_covering",
    "build_transition_graph",
    "central_sets",
    "chain_control_sets",
    "chain_reachable_set",
    "classify_antipodal",
    "equator_containment",
    "graph_from_samples",
    "hemisphere_restriction",
    "projective_quotient",
    "sample_flow",
    "strong_chain_ladder",
    "strongly_connected_components",
]
