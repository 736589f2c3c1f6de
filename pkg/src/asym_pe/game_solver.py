"""Per-step strategy computation for both players.

The pursuer and the non-deceptive evader each solve a two-player horizon
game by alternating best responses (Gauss-Seidel) until both heading
sequences stop changing. The deceptive evader solves a single-player
problem instead, replacing the pursuer with a pure-pursuit feedback model.

Information asymmetry is enforced here: every best response inside the
pursuer's game is constrained against the nominal obstacle, while the
evader's own best responses use the true obstacle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import ControlSequence, EvaderMode, GameState, ScenarioConfig, ValidationError
from .trajopt import (
    CoincidentPositions,
    HorizonProblem,
    ObjectiveKind,
    ObstacleModel,
    Role,
    best_response,
    pure_pursuit_model,
)

__all__ = [
    "CoincidentPositions",
    "GaussSeidelConfig",
    "StepDecision",
    "pure_pursuit_model",
    "solve_evader_deceptive",
    "solve_evader_original",
    "solve_pursuer_game",
]


@dataclass(frozen=True)
class GaussSeidelConfig:
    conv_tol: float = 5e-3
    max_iters: int = 50

    def __post_init__(self):
        if self.conv_tol <= 0:
            raise ValidationError("conv_tol must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")


@dataclass(frozen=True)
class StepDecision:
    """First headings to apply plus solver diagnostics and warm-start data.

    u_seq/v_seq carry the full final sequences so the next receding-horizon
    step can warm-start; u_head and u_seq are NaN/None for the deceptive
    evader, whose solve involves no pursuer sequence.
    """

    u_head: float
    v_head: float
    iters: int
    converged: bool
    residual_u: float
    residual_v: float
    u_seq: ControlSequence | None
    v_seq: ControlSequence | None


def _residual(new: ControlSequence, old: ControlSequence) -> float:
    """Change between iterates: 2-norm over implied velocity vectors."""
    return float(np.linalg.norm(new.velocities() - old.velocities()))


# Best responses inside the alternating loop run from the warm iterate
# only, mirroring warm-started per-block local solves. Multi-start winners
# hopping between distant local optima on successive iterations turn the
# fixed-point iteration into a limit cycle and select equilibria no
# warm-started local solver would reach.
_EXPLORE_STARTS = 1
_REFINE_STARTS = 1


def _gauss_seidel(s: GameState, cfg: ScenarioConfig, gs: GaussSeidelConfig,
                  pursuer_objective: ObjectiveKind,
                  evader_obstacle: ObstacleModel,
                  warm: tuple[ControlSequence, ControlSequence]) -> StepDecision:
    u_seq, v_seq = warm
    residual_u = math.inf
    residual_v = math.inf
    converged = False
    iters = 0
    for iters in range(1, gs.max_iters + 1):
        n_starts = _EXPLORE_STARTS if iters == 1 else _REFINE_STARTS
        u_prev, v_prev = u_seq, v_seq
        prob_p = HorizonProblem(
            role=Role.PURSUER_MIN, objective=pursuer_objective, start_state=s,
            opponent_seq=v_seq, obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
        u_seq = best_response(prob_p, u_seq, n_starts=n_starts).sequence
        prob_e = HorizonProblem(
            role=Role.EVADER_MAX, objective=ObjectiveKind.TERMINAL_DISTANCE,
            start_state=s, opponent_seq=u_seq, obstacle_model=evader_obstacle,
            cfg=cfg)
        v_seq = best_response(prob_e, v_seq, n_starts=n_starts).sequence
        residual_u = _residual(u_seq, u_prev)
        residual_v = _residual(v_seq, v_prev)
        if residual_u <= gs.conv_tol and residual_v <= gs.conv_tol:
            converged = True
            break
    return StepDecision(
        u_head=float(u_seq.headings[0]),
        v_head=float(v_seq.headings[0]),
        iters=iters,
        converged=converged,
        residual_u=residual_u,
        residual_v=residual_v,
        u_seq=u_seq,
        v_seq=v_seq,
    )


def solve_pursuer_game(s: GameState, cfg: ScenarioConfig, gs: GaussSeidelConfig,
                       desensitized: bool,
                       warm: tuple[ControlSequence, ControlSequence]) -> StepDecision:
    """The pursuer's horizon game, played entirely in nominal-obstacle terms.

    The pursuer minimizes terminal distance (plus the sensitivity risk when
    desensitized); its internal evader model maximizes terminal distance.
    Neither side of this game may touch the true obstacle.
    """
    objective = (ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK if desensitized
                 else ObjectiveKind.TERMINAL_DISTANCE)
    return _gauss_seidel(s, cfg, gs, objective, ObstacleModel.NOMINAL, warm)


def solve_evader_original(s: GameState, cfg: ScenarioConfig, gs: GaussSeidelConfig,
                          warm: tuple[ControlSequence, ControlSequence]) -> StepDecision:
    """The evader's horizon game with its informed view of the obstacle.

    The modeled pursuer still plans against the nominal obstacle (the
    evader knows the pursuer's information set); the evader's own best
    responses avoid the true obstacle.
    """
    return _gauss_seidel(
        s, cfg, gs, ObjectiveKind.TERMINAL_DISTANCE, ObstacleModel.TRUE, warm)


def solve_evader_deceptive(s: GameState, cfg: ScenarioConfig,
                           warm: ControlSequence) -> StepDecision:
    """Single-player deception solve against a pure-pursuit pursuer model."""
    if cfg.evader_mode is not EvaderMode.DECEPTIVE:
        raise ValidationError("deceptive solve requires evader_mode=deceptive")
    prob = HorizonProblem(
        role=Role.EVADER_MAX, objective=ObjectiveKind.DECEPTION_BLEND,
        start_state=s, opponent_seq=None, obstacle_model=ObstacleModel.TRUE,
        cfg=cfg)
    resp = best_response(prob, warm)
    return StepDecision(
        u_head=math.nan,
        v_head=float(resp.sequence.headings[0]),
        iters=1,
        converged=resp.converged,
        residual_u=math.nan,
        residual_v=0.0,
        u_seq=None,
        v_seq=resp.sequence,
    )
