"""Synthetic planar-scene sequences with exact oracles."""

from tau_depth.simulation.render import PlaneRenderer
from tau_depth.simulation.scene import PlanarScene, TextureSpec
from tau_depth.simulation.simulator import (
    OracleBundle,
    OracleModel,
    Scenario,
    SimulatedSequence,
    SimulationRates,
    bundled_scenarios,
    load_scenario,
    oracle_foc,
    simulate,
)
from tau_depth.simulation.trajectory import (
    Excitation,
    RotationSpec,
    RotationTerm,
    TrajectorySpec,
)

__all__ = [
    "Excitation",
    "OracleBundle",
    "OracleModel",
    "PlanarScene",
    "PlaneRenderer",
    "RotationSpec",
    "RotationTerm",
    "Scenario",
    "SimulatedSequence",
    "SimulationRates",
    "TextureSpec",
    "TrajectorySpec",
    "bundled_scenarios",
    "load_scenario",
    "oracle_foc",
    "simulate",
]
