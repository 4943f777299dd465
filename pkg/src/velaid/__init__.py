"""Globally convergent velocity-aided attitude observer with a simulation harness."""

from velaid.attitude import hat_R, roll_pitch_from_gamma, tilde_R
from velaid.observer import (
    Gains,
    ObserverState,
    observer_step,
    reinitialize,
    scalar_gains,
    structured_gain,
    validate_gains,
)
from velaid.rigid_body import TruthState, WorldConstants, truth_step
from velaid.sensors import Measurement, SensorSuite, measure

__all__ = [
    "Gains",
    "Measurement",
    "ObserverState",
    "SensorSuite",
    "TruthState",
    "WorldConstants",
    "hat_R",
    "measure",
    "observer_step",
    "reinitialize",
    "roll_pitch_from_gamma",
    "scalar_gains",
    "structured_gain",
    "tilde_R",
    "truth_step",
    "validate_gains",
]
