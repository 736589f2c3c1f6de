"""Finite-horizon best responses over heading sequences.

One player optimizes its N-step heading sequence against a frozen opponent
sequence (or a pure-pursuit opponent model in the deception game), subject
to obstacle clearance at every horizon sample. Solved by an exterior
quadratic penalty with finite-difference gradient descent, backtracking
line search, and seeded multi-start; all candidate evaluation is batched
but reproduces the sequential step_state arithmetic bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .game import (
    COLLISION_TOL,
    ControlSequence,
    GameState,
    ScenarioConfig,
    ValidationError,
    step_state,
)
from .sensitivity import rcs_sample, risk_of_sequence, weighted_terms


class Role(Enum):
    PURSUER_MIN = "pursuer_min"
    EVADER_MAX = "evader_max"


class ObjectiveKind(Enum):
    TERMINAL_DISTANCE = "terminal_distance"
    TERMINAL_DISTANCE_PLUS_RISK = "terminal_distance_plus_risk"
    DECEPTION_BLEND = "deception_blend"


class ObstacleModel(Enum):
    NOMINAL = "nominal"
    TRUE = "true"


class NoFeasibleSequence(RuntimeError):
    """Every optimizer start ended with obstacle violation above tolerance."""


class CoincidentPositions(ValueError):
    """Pure-pursuit direction undefined: modeled pursuer sits on the evader."""


# Shared with the termination check: plans accepted at this tolerance
# must not register as collisions when executed.
FEASIBILITY_TOL = COLLISION_TOL
MU_SCHEDULE = tuple(10.0 ** k for k in range(1, 8))
N_STARTS = 8
MAX_DESCENT_ITERS = 60
INITIAL_STEP = 0.2
BACKTRACK_FACTOR = 0.5
N_BACKTRACKS = 12
GRAD_H = 1e-6
GRAD_TOL = 1e-8
# Perturbation spread for multi-start seeds, radians; last entry covers
# full heading reversals.
PERTURB_SCALES = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, math.pi)


def pure_pursuit_model(x_p_hat: np.ndarray, x_e: np.ndarray, u_c: float) -> np.ndarray:
    """Feedback pursuit velocity: full speed straight at the evader."""
    d = np.asarray(x_e, dtype=float) - np.asarray(x_p_hat, dtype=float)
    n = float(np.linalg.norm(d))
    if n == 0.0:
        raise CoincidentPositions("pursuit direction undefined at zero separation")
    return u_c * d / n


@dataclass(frozen=True)
class HorizonProblem:
    """One player's fixed-opponent horizon optimization.

    opponent_seq is None only for the deception objective, where the
    opponent is the pure-pursuit model instead of a frozen sequence.
    """

    role: Role
    objective: ObjectiveKind
    start_state: GameState
    opponent_seq: ControlSequence | None
    obstacle_model: ObstacleModel
    cfg: ScenarioConfig

    def __post_init__(self):
        if self.role is Role.PURSUER_MIN:
            if self.obstacle_model is not ObstacleModel.NOMINAL:
                raise ValidationError(
                    "the pursuer can only constrain against the nominal obstacle")
            if self.objective is ObjectiveKind.DECEPTION_BLEND:
                raise ValidationError("deception objective is evader-side only")
        elif self.objective is ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK:
            raise ValidationError("risk objective is pursuer-side only")
        if self.opponent_seq is None:
            if self.objective is not ObjectiveKind.DECEPTION_BLEND:
                raise ValidationError("opponent_seq required outside the deception game")
        else:
            if len(self.opponent_seq) != self.cfg.N:
                raise ValidationError(
                    f"opponent_seq length {len(self.opponent_seq)} != N={self.cfg.N}")
            want = self.cfg.v_c if self.role is Role.PURSUER_MIN else self.cfg.u_c
            if self.opponent_seq.speed != want:
                raise ValidationError("opponent_seq speed does not match role")

    @property
    def my_speed(self) -> float:
        return self.cfg.u_c if self.role is Role.PURSUER_MIN else self.cfg.v_c

    @property
    def my_start(self) -> np.ndarray:
        s = self.start_state
        return s.x_p if self.role is Role.PURSUER_MIN else s.x_e

    @property
    def sign(self) -> float:
        """Multiplier turning the raw payoff into a minimization target."""
        return 1.0 if self.role is Role.PURSUER_MIN else -1.0


@dataclass(frozen=True)
class BestResponse:
    sequence: ControlSequence
    objective_value: float
    constraint_max_violation: float
    solver_iters: int
    converged: bool


def _effective_objective(prob: HorizonProblem) -> ObjectiveKind:
    # Zero risk weight collapses the desensitized objective onto the plain
    # one so both take the identical code path.
    if (prob.objective is ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK
            and prob.cfg.q_is_zero):
        return ObjectiveKind.TERMINAL_DISTANCE
    return prob.objective


def horizon_times(t0: float, n: int, dt: float) -> np.ndarray:
    """Sample times t0+dt, ..., accumulated exactly as step_state does."""
    ts = np.empty(n)
    t = t0
    for i in range(n):
        t = t + dt
        ts[i] = t
    return ts


def rollout(start: GameState, mine: ControlSequence, theirs: ControlSequence,
            cfg: ScenarioConfig) -> list[GameState]:
    """N+1 states applying both heading sequences; roles resolved by speed."""
    if len(mine) != len(theirs):
        raise ValidationError(
            f"sequence lengths differ: {len(mine)} vs {len(theirs)}")
    if mine.speed == cfg.u_c:
        u_seq, v_seq = mine, theirs
    else:
        u_seq, v_seq = theirs, mine
    states = [start]
    s = start
    for u_head, v_head in zip(u_seq.headings, v_seq.headings):
        s = step_state(s, float(u_head), float(v_head), cfg)
        states.append(s)
    return states


def player_positions(start_pos: np.ndarray, velocities: np.ndarray,
                      dt: float) -> np.ndarray:
    pos = np.empty_like(velocities)
    p = start_pos
    for i in range(len(velocities)):
        p = p + velocities[i] * dt
        pos[i] = p
    return pos


def _deception_terminals(start: GameState, v_seq: ControlSequence,
                         cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(modeled pursuer, evader, true obstacle) positions at the horizon end."""
    e_pos = player_positions(start.x_e, v_seq.velocities(), cfg.dt)
    xp = start.x_p
    e_prev = start.x_e
    for i in range(len(v_seq)):
        vel = pure_pursuit_model(xp, e_prev, cfg.u_c)
        xp = xp + vel * cfg.dt
        e_prev = e_pos[i]
    ts = horizon_times(start.t, len(v_seq), cfg.dt)
    w_true = np.asarray(cfg.obstacle_start) + np.asarray(cfg.rho_true) * ts[-1]
    return xp, e_pos[-1], w_true


def evaluate_objective(prob: HorizonProblem, seq: ControlSequence) -> float:
    """Raw payoff of one heading sequence (unpenalized, unsigned)."""
    cfg = prob.cfg
    objective = _effective_objective(prob)
    if objective is ObjectiveKind.DECEPTION_BLEND:
        xp_hat, x_e_term, w_true = _deception_terminals(prob.start_state, seq, cfg)
        return (cfg.alpha_o * float(np.linalg.norm(xp_hat - x_e_term))
                - cfg.alpha_d * float(np.linalg.norm(xp_hat - w_true)))
    states = rollout(prob.start_state, seq, prob.opponent_seq, cfg)
    value = float(np.linalg.norm(states[-1].x_p - states[-1].x_e))
    if objective is ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK:
        # Sensitivity time restarts at each planning step: the sensitivity
        # ODE integrates from zero at the start of every horizon solve, so
        # uncertainty acts over the lookahead, not over elapsed game time.
        rel_ts = horizon_times(0.0, len(seq), cfg.dt)
        samples = [rcs_sample(s.x_p, s.x_w_nominal, tau, cfg)
                   for s, tau in zip(states[1:], rel_ts)]
        value += risk_of_sequence(samples)
    return value


class _BatchEval:
    """Vectorized objective/constraint evaluation over candidate headings.

    Positions are accumulated step by step with the same float operations
    as step_state, so a one-row batch matches evaluate_objective through
    rollout exactly.
    """

    def __init__(self, prob: HorizonProblem):
        cfg = prob.cfg
        s0 = prob.start_state
        self.cfg = cfg
        self.n = cfg.N
        self.dt = cfg.dt
        self.objective = _effective_objective(prob)
        self.speed = prob.my_speed
        self.my_start = prob.my_start
        self.ts = horizon_times(s0.t, self.n, cfg.dt)
        self.rel_ts = horizon_times(0.0, self.n, cfg.dt)
        w0 = np.asarray(cfg.obstacle_start)
        self.w_nominal = w0 + np.asarray(cfg.rho_nominal) * self.ts[:, None]
        # The true obstacle stream is materialized only where the problem
        # is allowed to know it; pursuer-side problems never touch rho_true.
        need_true = (prob.obstacle_model is ObstacleModel.TRUE
                     or self.objective is ObjectiveKind.DECEPTION_BLEND)
        self.w_true = (w0 + np.asarray(cfg.rho_true) * self.ts[:, None]
                       if need_true else None)
        self.w_model = (self.w_nominal
                        if prob.obstacle_model is ObstacleModel.NOMINAL
                        else self.w_true)
        if prob.opponent_seq is not None:
            opp_start = s0.x_e if prob.role is Role.PURSUER_MIN else s0.x_p
            self.opp_pos = player_positions(
                opp_start, prob.opponent_seq.velocities(), cfg.dt)
        else:
            self.opp_pos = None
        self.x_p0 = s0.x_p
        self.x_e0 = s0.x_e

    def positions(self, headings: np.ndarray) -> np.ndarray:
        """(B, N, 2) rollout of the optimizing player."""
        h = np.atleast_2d(np.asarray(headings, dtype=float))
        vel = self.speed * np.stack([np.cos(h), np.sin(h)], axis=-1)
        pos = np.empty_like(vel)
        p = np.broadcast_to(self.my_start, (h.shape[0], 2))
        for i in range(self.n):
            p = p + vel[:, i] * self.dt
            pos[:, i] = p
        return pos

    def violations(self, pos: np.ndarray) -> np.ndarray:
        d = pos - self.w_model
        g = self.cfg.r_o * self.cfg.r_o - np.sum(d * d, axis=-1)
        return np.maximum(g, 0.0)

    def __call__(self, headings: np.ndarray):
        """Returns (raw payoff, penalty sum, max violation), each (B,)."""
        cfg = self.cfg
        pos = self.positions(headings)
        viol = self.violations(pos)
        pen = np.sum(viol * viol, axis=-1)
        viol_max = viol.max(axis=-1)
        if self.objective is ObjectiveKind.DECEPTION_BLEND:
            b = pos.shape[0]
            xp = np.broadcast_to(self.x_p0, (b, 2))
            e_prev = np.broadcast_to(self.x_e0, (b, 2))
            with np.errstate(invalid="ignore", divide="ignore"):
                for i in range(self.n):
                    d = e_prev - xp
                    n = np.linalg.norm(d, axis=-1, keepdims=True)
                    xp = xp + (cfg.u_c * d / n) * self.dt
                    e_prev = pos[:, i]
                raw = (cfg.alpha_o * np.linalg.norm(xp - pos[:, -1], axis=-1)
                       - cfg.alpha_d * np.linalg.norm(xp - self.w_true[-1], axis=-1))
        else:
            raw = np.linalg.norm(pos[:, -1] - self.opp_pos[-1], axis=-1)
            if self.objective is ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK:
                raw = raw + np.sum(
                    weighted_terms(pos - self.w_nominal, self.rel_ts, cfg),
                    axis=-1)
        return raw, pen, viol_max


def constraint_violations(prob: HorizonProblem, seq: ControlSequence) -> np.ndarray:
    """Per-sample max(0, g) of the optimizing player, shape (N,)."""
    ev = _BatchEval(prob)
    return ev.violations(ev.positions(seq.headings[None, :]))[0]


def objective_gradient(prob: HorizonProblem, seq: ControlSequence,
                       h: float = GRAD_H) -> np.ndarray:
    """Central-difference gradient of evaluate_objective w.r.t. headings."""
    ev = _BatchEval(prob)
    n = prob.cfg.N
    stencil = np.repeat(seq.headings[None, :], 2 * n, axis=0)
    for j in range(n):
        stencil[2 * j, j] += h
        stencil[2 * j + 1, j] -= h
    raw, _, _ = ev(stencil)
    return (raw[0::2] - raw[1::2]) / (2.0 * h)


def shift_and_hold(seq: ControlSequence) -> ControlSequence:
    """Receding-horizon warm start: drop the applied step, repeat the last."""
    h = seq.headings
    return ControlSequence(
        headings=np.concatenate([h[1:], h[-1:]]), speed=seq.speed)


def _perturbed_starts(init: ControlSequence, n_starts: int, seed: int) -> np.ndarray:
    n = len(init)
    h = np.empty((n_starts, n))
    h[0] = init.headings
    for m in range(1, n_starts):
        rng = np.random.default_rng([seed, m])
        scale = PERTURB_SCALES[(m - 1) % len(PERTURB_SCALES)]
        h[m] = init.headings + scale * rng.standard_normal(n)
    return h


def best_response(prob: HorizonProblem, init: ControlSequence, *,
                  n_starts: int = N_STARTS,
                  feasibility_tol: float = FEASIBILITY_TOL) -> BestResponse:
    """Feasible local optimizer of the horizon problem from a warm start.

    Exterior penalty method: for each start, gradient-descend the
    sign-adjusted payoff plus mu * sum(max(0, g)^2), escalating mu until
    the response is feasible; best feasible start wins, ties broken by
    objective then lexicographically smaller heading vector.
    """
    cfg = prob.cfg
    n = cfg.N
    if len(init) != n:
        raise ValidationError(f"init length {len(init)} != N={n}")
    if init.speed != prob.my_speed:
        raise ValidationError("init speed does not match the optimizing role")
    ev = _BatchEval(prob)
    sign = prob.sign
    mu_arr = np.asarray(MU_SCHEDULE)
    ladder = INITIAL_STEP * BACKTRACK_FACTOR ** np.arange(N_BACKTRACKS)

    h_cur = _perturbed_starts(init, n_starts, cfg.seed)
    mu_idx = np.zeros(n_starts, dtype=int)
    round_iters = np.zeros(n_starts, dtype=int)
    total_iters = np.zeros(n_starts, dtype=int)
    finished = np.zeros(n_starts, dtype=bool)
    hit_cap = np.zeros(n_starts, dtype=bool)

    def end_round(m: int, viol: float):
        if viol <= feasibility_tol or mu_idx[m] == len(mu_arr) - 1:
            finished[m] = True
        else:
            mu_idx[m] += 1
            round_iters[m] = 0
            hit_cap[m] = False

    while not finished.all():
        act = np.flatnonzero(~finished)
        a = len(act)
        mu_act = mu_arr[mu_idx[act]]
        # One batched call covers current points and all gradient stencils.
        stencil = np.repeat(h_cur[act][:, None, :], 2 * n, axis=1)
        for j in range(n):
            stencil[:, 2 * j, j] += GRAD_H
            stencil[:, 2 * j + 1, j] -= GRAD_H
        rows = np.concatenate([h_cur[act], stencil.reshape(a * 2 * n, n)])
        raw, pen, viol_max = ev(rows)
        # Penalized values: current block then stencil block.
        f_cur = sign * raw[:a] + mu_act * pen[:a]
        f_sten = (sign * raw[a:] + np.repeat(mu_act, 2 * n) * pen[a:]).reshape(a, 2 * n)
        grad = (f_sten[:, 0::2] - f_sten[:, 1::2]) / (2.0 * GRAD_H)
        gnorm = np.linalg.norm(grad, axis=1)

        searchable = np.isfinite(f_cur) & (gnorm > GRAD_TOL) & (
            round_iters[act] < MAX_DESCENT_ITERS)
        idx_s = np.flatnonzero(searchable)
        accepted = np.zeros(a, dtype=bool)
        if len(idx_s):
            direction = -grad[idx_s] / gnorm[idx_s][:, None]
            cand = (h_cur[act][idx_s][:, None, :]
                    + ladder[None, :, None] * direction[:, None, :])
            raw_l, pen_l, _ = ev(cand.reshape(len(idx_s) * N_BACKTRACKS, n))
            f_l = (sign * raw_l
                   + np.repeat(mu_act[idx_s], N_BACKTRACKS) * pen_l
                   ).reshape(len(idx_s), N_BACKTRACKS)
            better = f_l < f_cur[idx_s][:, None]
            for row, m_local in enumerate(idx_s):
                m = act[m_local]
                if better[row].any():
                    j = int(np.argmax(better[row]))
                    h_cur[m] = cand[row, j]
                    round_iters[m] += 1
                    total_iters[m] += 1
                    accepted[m_local] = True

        for m_local in range(a):
            m = act[m_local]
            if accepted[m_local]:
                continue
            if round_iters[m] >= MAX_DESCENT_ITERS:
                hit_cap[m] = True
            end_round(m, float(viol_max[m_local]))

    raw_f, pen_f, viol_f = ev(h_cur)
    feasible = (viol_f <= feasibility_tol) & np.isfinite(raw_f)
    if not feasible.any():
        raise NoFeasibleSequence(
            f"no feasible heading sequence from {n_starts} starts "
            f"(best violation {viol_f.min():.3g})")
    keyed = np.where(feasible, sign * raw_f, np.inf)
    best_val = keyed.min()
    tied = np.flatnonzero(keyed == best_val)
    winner = min(tied, key=lambda m: tuple(h_cur[m]))

    seq = ControlSequence(headings=h_cur[winner].copy(), speed=prob.my_speed)
    obj = evaluate_objective(prob, seq)
    viol = float(constraint_violations(prob, seq).max(initial=0.0))
    converged = bool(not hit_cap[winner])

    # Multi-start descent never accepts a worse penalized point, but the
    # raw payoff can still regress in corner cases; fall back to the warm
    # start if it was feasible and strictly better.
    init_viol = float(constraint_violations(prob, init).max(initial=0.0))
    if init_viol <= feasibility_tol:
        try:
            init_obj = evaluate_objective(prob, init)
        except CoincidentPositions:
            init_obj = None
        if init_obj is not None and math.isfinite(init_obj) \
                and sign * init_obj < sign * obj:
            seq, obj, viol, converged = init, init_obj, init_viol, True

    return BestResponse(
        sequence=seq,
        objective_value=float(obj),
        constraint_max_violation=viol,
        solver_iters=int(total_iters[winner]),
        converged=converged,
    )
