"""Closed-loop receding-horizon simulation.

Each step, both players solve their own horizon game from the same
pre-step state with their own information (pursuer: nominal obstacle;
evader: true obstacle), the first headings are applied, and the world
advances under the true dynamics. Decisions are logged with enough data
to replay either player's pipeline bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .game import (
    ControlSequence,
    EvaderMode,
    GameState,
    Outcome,
    ScenarioConfig,
    check_termination,
    initial_state,
    line_of_sight_heading,
    step_state,
)
from .game_solver import (
    GaussSeidelConfig,
    StepDecision,
    solve_evader_deceptive,
    solve_evader_original,
    solve_pursuer_game,
)
from .sensitivity import rcs_sample, risk_of_sequence
from .trajopt import NoFeasibleSequence, horizon_times, player_positions, shift_and_hold

logger = logging.getLogger(__name__)

_DEFAULT_GS = GaussSeidelConfig()


@dataclass(frozen=True)
class SimRecord:
    """One trace row: the pre-step state and the decisions taken there.

    The terminal record carries the final state with no controls.
    """

    t: float
    state: GameState
    u_head: float | None
    v_head: float | None
    risk: float | None
    pursuer: StepDecision | None = None
    evader: StepDecision | None = None
    pursuer_infeasible: bool = False
    evader_infeasible: bool = False


@dataclass(frozen=True)
class SimulationTrace:
    records: list[SimRecord]
    outcome: Outcome
    cfg: ScenarioConfig

    @property
    def decision_records(self) -> list[SimRecord]:
        return [r for r in self.records if r.u_head is not None]

    @property
    def states(self) -> list[GameState]:
        return [r.state for r in self.records]


def plan_risk(cfg: ScenarioConfig, state: GameState, u_seq: ControlSequence) -> float:
    """Risk of the pursuer's horizon plan against the nominal obstacle.

    Sensitivity time runs from the planning instant (the sensitivity ODE
    restarts at each solve), while the nominal obstacle keeps game time.
    """
    n = len(u_seq)
    ts = horizon_times(state.t, n, cfg.dt)
    rel_ts = horizon_times(0.0, n, cfg.dt)
    pos = player_positions(state.x_p, u_seq.velocities(), cfg.dt)
    w = np.asarray(cfg.obstacle_start) + np.asarray(cfg.rho_nominal) * ts[:, None]
    samples = [rcs_sample(pos[i], w[i], rel_ts[i], cfg) for i in range(n)]
    return risk_of_sequence(samples)


def _los_sequence(state: GameState, n: int, speed: float) -> ControlSequence:
    los = line_of_sight_heading(state.x_p, state.x_e)
    return ControlSequence(headings=np.full(n, los), speed=speed)


class _PursuerPipeline:
    """The pursuer's decision chain, isolated so it can be replayed.

    Holds the warm-start pair and the previously applied heading; sees
    only the states fed to decide(). Never reads rho_true.
    """

    def __init__(self, cfg: ScenarioConfig, gs: GaussSeidelConfig,
                 desensitized: bool):
        self.cfg = cfg
        self.gs = gs
        self.desensitized = desensitized
        self.warm: tuple[ControlSequence, ControlSequence] | None = None
        self.prev_head: float | None = None

    def decide(self, state: GameState):
        cfg = self.cfg
        if self.warm is None:
            self.warm = (_los_sequence(state, cfg.N, cfg.u_c),
                         _los_sequence(state, cfg.N, cfg.v_c))
        try:
            dec = solve_pursuer_game(state, cfg, self.gs, self.desensitized,
                                     self.warm)
        except NoFeasibleSequence:
            logger.warning(
                "pursuer solve infeasible at t=%.3f; holding heading", state.t)
            u_head = (self.prev_head if self.prev_head is not None
                      else line_of_sight_heading(state.x_p, state.x_e))
            plan = self.warm[0]
            self.warm = (shift_and_hold(self.warm[0]),
                         shift_and_hold(self.warm[1]))
            self.prev_head = u_head
            return u_head, None, True, plan
        self.warm = (shift_and_hold(dec.u_seq), shift_and_hold(dec.v_seq))
        self.prev_head = dec.u_head
        return dec.u_head, dec, False, dec.u_seq


class _EvaderPipeline:
    def __init__(self, cfg: ScenarioConfig, gs: GaussSeidelConfig):
        self.cfg = cfg
        self.gs = gs
        self.deceptive = cfg.evader_mode is EvaderMode.DECEPTIVE
        self.warm_pair: tuple[ControlSequence, ControlSequence] | None = None
        self.warm_v: ControlSequence | None = None
        self.prev_head: float | None = None

    def decide(self, state: GameState):
        cfg = self.cfg
        try:
            if self.deceptive:
                if self.warm_v is None:
                    self.warm_v = _los_sequence(state, cfg.N, cfg.v_c)
                dec = solve_evader_deceptive(state, cfg, self.warm_v)
                self.warm_v = shift_and_hold(dec.v_seq)
            else:
                if self.warm_pair is None:
                    self.warm_pair = (_los_sequence(state, cfg.N, cfg.u_c),
                                      _los_sequence(state, cfg.N, cfg.v_c))
                dec = solve_evader_original(state, cfg, self.gs, self.warm_pair)
                self.warm_pair = (shift_and_hold(dec.u_seq),
                                  shift_and_hold(dec.v_seq))
        except NoFeasibleSequence:
            logger.warning(
                "evader solve infeasible at t=%.3f; holding heading", state.t)
            v_head = (self.prev_head if self.prev_head is not None
                      else line_of_sight_heading(state.x_p, state.x_e))
            if self.deceptive:
                self.warm_v = shift_and_hold(self.warm_v)
            else:
                self.warm_pair = (shift_and_hold(self.warm_pair[0]),
                                  shift_and_hold(self.warm_pair[1]))
            self.prev_head = v_head
            return v_head, None, True
        self.prev_head = dec.v_head
        return dec.v_head, dec, False


def run(cfg: ScenarioConfig, gs: GaussSeidelConfig | None = None) -> SimulationTrace:
    """Simulate one game to termination.

    The pursuer desensitizes exactly when its risk weight is nonzero; the
    evader plays the mode selected in the config.
    """
    gs = gs or _DEFAULT_GS
    pursuer = _PursuerPipeline(cfg, gs, desensitized=not cfg.q_is_zero)
    evader = _EvaderPipeline(cfg, gs)
    state = initial_state(cfg)
    records: list[SimRecord] = []
    while True:
        outcome = check_termination(state, cfg)
        if outcome is not None:
            records.append(SimRecord(
                t=state.t, state=state, u_head=None, v_head=None, risk=None))
            return SimulationTrace(records=records, outcome=outcome, cfg=cfg)
        u_head, p_dec, p_inf, plan = pursuer.decide(state)
        v_head, e_dec, e_inf = evader.decide(state)
        records.append(SimRecord(
            t=state.t, state=state, u_head=u_head, v_head=v_head,
            risk=plan_risk(cfg, state, plan), pursuer=p_dec, evader=e_dec,
            pursuer_infeasible=p_inf, evader_infeasible=e_inf))
        state = step_state(state, u_head, v_head, cfg)


def run_batch(cfgs: list[ScenarioConfig],
              gs: GaussSeidelConfig | None = None) -> list[SimulationTrace]:
    """Independent runs, output order matching input order."""
    return [run(cfg, gs) for cfg in cfgs]


def replay_pursuer_decisions(cfg: ScenarioConfig, states: list[GameState],
                             desensitized: bool | None = None,
                             gs: GaussSeidelConfig | None = None) -> list[float]:
    """Re-run only the pursuer's pipeline over externally supplied states.

    Feeding the decision-time states of a finished run reproduces that
    run's u_head stream exactly; the function exists so tests can perturb
    cfg fields the pursuer must not depend on (rho_true) or force the
    desensitized flag, and compare streams bitwise.
    """
    if desensitized is None:
        desensitized = not cfg.q_is_zero
    pipeline = _PursuerPipeline(cfg, gs or _DEFAULT_GS, desensitized)
    return [pipeline.decide(s)[0] for s in states]
