"""Pursuit-evasion with an uncertain dynamic obstacle.

A fixed-speed pursuer chases a slower evader around a drifting circular
obstacle. The pursuer plans against a nominal obstacle velocity; the evader
knows the true one and can exploit the gap. The package provides the
risk-desensitized receding-horizon pursuer, the deceptive evader, and a
closed-loop simulator with CSV trace output.
"""

from __future__ import annotations

from .game import (
    ControlSequence,
    EvaderMode,
    GameState,
    Outcome,
    OutcomeKind,
    ScenarioConfig,
    UncertaintySpec,
    ValidationError,
    check_termination,
    constraint_g,
    initial_state,
    step_state,
)
from .scenarios import PRESETS, load_scenario, preset, scenario_from_mapping
from .sim import SimulationTrace, run, run_batch

__all__ = [
    "ControlSequence",
    "EvaderMode",
    "GameState",
    "Outcome",
    "OutcomeKind",
    "PRESETS",
    "ScenarioConfig",
    "SimulationTrace",
    "UncertaintySpec",
    "ValidationError",
    "check_termination",
    "constraint_g",
    "initial_state",
    "load_scenario",
    "preset",
    "run",
    "run_batch",
    "scenario_from_mapping",
    "step_state",
]
