"""Horizon best responses against brute-force heading-grid oracles."""

import math
from dataclasses import replace

import numpy as np
import pytest

from asym_pe.game import (
    ControlSequence,
    GameState,
    UncertaintySpec,
    ValidationError,
    initial_state,
    line_of_sight_heading,
)
from asym_pe.scenarios import preset
from asym_pe.trajopt import (
    FEASIBILITY_TOL,
    CoincidentPositions,
    HorizonProblem,
    NoFeasibleSequence,
    ObjectiveKind,
    ObstacleModel,
    Role,
    best_response,
    constraint_violations,
    evaluate_objective,
    horizon_times,
    objective_gradient,
    pure_pursuit_model,
    rollout,
    shift_and_hold,
)


def make_cfg(**overrides):
    return replace(preset("fig2_collision"), **overrides)


FAR_OBSTACLE = dict(obstacle_start=(1e6, 1e6), rho_nominal=(0.0, 0.0),
                    rho_true=(0.0, 0.0))


def constant_seq(heading: float, n: int, speed: float) -> ControlSequence:
    return ControlSequence(headings=np.full(n, heading), speed=speed)


def grid_headings(step_deg: float = 0.5) -> np.ndarray:
    return np.deg2rad(np.arange(0.0, 360.0, step_deg))


def constant_heading_oracle(prob: HorizonProblem) -> tuple[float, float]:
    """Exhaustive constant-heading search, independent closed-form rollout.

    Constant headings make the player's position at sample i exactly
    start + i*dt*velocity; the opponent's terminal position comes from the
    frozen sequence. Returns (best objective, best heading) in the
    problem's own min/max sense.
    """
    cfg = prob.cfg
    thetas = grid_headings()
    n = cfg.N
    vel = prob.my_speed * np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
    my_term = prob.my_start + n * cfg.dt * vel
    opp_start = (prob.start_state.x_e if prob.role is Role.PURSUER_MIN
                 else prob.start_state.x_p)
    opp_term = opp_start + np.sum(prob.opponent_seq.velocities() * cfg.dt, axis=0)
    dist = np.linalg.norm(my_term - opp_term, axis=-1)
    if prob.role is Role.PURSUER_MIN:
        k = int(np.argmin(dist))
    else:
        k = int(np.argmax(dist))
    return float(dist[k]), float(thetas[k])


def test_horizon_times_matches_stepwise_accumulation():
    ts = horizon_times(0.3, 5, 0.1)
    t = 0.3
    for i in range(5):
        t = t + 0.1
        assert ts[i] == t  # bitwise: same accumulation order


def test_pure_pursuit_model():
    v = pure_pursuit_model(np.array([0.0, 0.0]), np.array([3.0, 4.0]), 1.0)
    np.testing.assert_allclose(v, [0.6, 0.8])
    assert np.linalg.norm(v) == pytest.approx(1.0)
    with pytest.raises(CoincidentPositions):
        pure_pursuit_model(np.array([1.0, 1.0]), np.array([1.0, 1.0]), 1.0)


def test_problem_validation():
    cfg = make_cfg()
    s0 = initial_state(cfg)
    v_seq = constant_seq(0.0, cfg.N, cfg.v_c)
    with pytest.raises(ValidationError):
        HorizonProblem(role=Role.PURSUER_MIN,
                       objective=ObjectiveKind.TERMINAL_DISTANCE,
                       start_state=s0, opponent_seq=v_seq,
                       obstacle_model=ObstacleModel.TRUE, cfg=cfg)
    with pytest.raises(ValidationError):
        HorizonProblem(role=Role.PURSUER_MIN,
                       objective=ObjectiveKind.DECEPTION_BLEND,
                       start_state=s0, opponent_seq=v_seq,
                       obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    with pytest.raises(ValidationError):
        HorizonProblem(role=Role.EVADER_MAX,
                       objective=ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK,
                       start_state=s0,
                       opponent_seq=constant_seq(0.0, cfg.N, cfg.u_c),
                       obstacle_model=ObstacleModel.TRUE, cfg=cfg)
    with pytest.raises(ValidationError):
        # Opponent sequence at the wrong speed for the role.
        HorizonProblem(role=Role.PURSUER_MIN,
                       objective=ObjectiveKind.TERMINAL_DISTANCE,
                       start_state=s0,
                       opponent_seq=constant_seq(0.0, cfg.N, cfg.u_c),
                       obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    with pytest.raises(ValidationError):
        HorizonProblem(role=Role.PURSUER_MIN,
                       objective=ObjectiveKind.TERMINAL_DISTANCE,
                       start_state=s0,
                       opponent_seq=constant_seq(0.0, cfg.N + 1, cfg.v_c),
                       obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    with pytest.raises(ValidationError):
        HorizonProblem(role=Role.EVADER_MAX,
                       objective=ObjectiveKind.TERMINAL_DISTANCE,
                       start_state=s0, opponent_seq=None,
                       obstacle_model=ObstacleModel.TRUE, cfg=cfg)


def test_rollout_matches_step_state_chain():
    cfg = make_cfg()
    s0 = initial_state(cfg)
    rng = np.random.default_rng(1)
    u = ControlSequence(headings=rng.uniform(-3, 3, cfg.N), speed=cfg.u_c)
    v = ControlSequence(headings=rng.uniform(-3, 3, cfg.N), speed=cfg.v_c)
    states = rollout(s0, u, v, cfg)
    assert len(states) == cfg.N + 1
    # Role resolution by speed: passing the sequences in either order
    # produces the same states.
    swapped = rollout(s0, v, u, cfg)
    for a, b in zip(states, swapped):
        np.testing.assert_array_equal(a.x_p, b.x_p)
        np.testing.assert_array_equal(a.x_e, b.x_e)
    with pytest.raises(ValidationError):
        rollout(s0, u, constant_seq(0.0, cfg.N - 1, cfg.v_c), cfg)


def test_gradient_matches_sequential_finite_differences():
    # The batched stencil evaluation must reproduce plain central
    # differences of evaluate_objective bit for bit.
    cfg = make_cfg(Q=1.0)
    s0 = initial_state(cfg)
    rng = np.random.default_rng(4)
    v = ControlSequence(headings=rng.uniform(-3, 3, cfg.N), speed=cfg.v_c)
    prob = HorizonProblem(role=Role.PURSUER_MIN,
                          objective=ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK,
                          start_state=s0, opponent_seq=v,
                          obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    u = ControlSequence(headings=rng.uniform(-3, 3, cfg.N), speed=cfg.u_c)
    grad = objective_gradient(prob, u, h=1e-6)
    manual = np.empty(cfg.N)
    for j in range(cfg.N):
        hp = u.headings.copy()
        hm = u.headings.copy()
        hp[j] += 1e-6
        hm[j] -= 1e-6
        fp = evaluate_objective(prob, ControlSequence(headings=hp, speed=cfg.u_c))
        fm = evaluate_objective(prob, ControlSequence(headings=hm, speed=cfg.u_c))
        manual[j] = (fp - fm) / 2e-6
    np.testing.assert_array_equal(grad, manual)


def test_q_zero_collapses_to_plain_objective():
    cfg = make_cfg(Q=0.0)
    s0 = initial_state(cfg)
    v = constant_seq(0.3, cfg.N, cfg.v_c)
    u = constant_seq(-0.2, cfg.N, cfg.u_c)
    probs = [
        HorizonProblem(role=Role.PURSUER_MIN, objective=obj, start_state=s0,
                       opponent_seq=v, obstacle_model=ObstacleModel.NOMINAL,
                       cfg=cfg)
        for obj in (ObjectiveKind.TERMINAL_DISTANCE,
                    ObjectiveKind.TERMINAL_DISTANCE_PLUS_RISK)
    ]
    assert evaluate_objective(probs[0], u) == evaluate_objective(probs[1], u)
    resp0 = best_response(probs[0], u)
    resp1 = best_response(probs[1], u)
    np.testing.assert_array_equal(resp0.sequence.headings, resp1.sequence.headings)
    assert resp0.objective_value == resp1.objective_value


def test_pursuer_best_response_matches_grid_oracle():
    # No obstacle nearby, evader frozen on a straight course: the optimum
    # over all sequences is a constant heading, so the 0.5-degree grid is
    # a valid oracle for the optimal value.
    cfg = make_cfg(N=5, dt=0.2, **FAR_OBSTACLE)
    s0 = initial_state(cfg)
    v = constant_seq(math.pi / 4, cfg.N, cfg.v_c)
    prob = HorizonProblem(role=Role.PURSUER_MIN,
                          objective=ObjectiveKind.TERMINAL_DISTANCE,
                          start_state=s0, opponent_seq=v,
                          obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    init = constant_seq(line_of_sight_heading(s0.x_p, s0.x_e), cfg.N, cfg.u_c)
    resp = best_response(prob, init)
    oracle_val, _ = constant_heading_oracle(prob)
    assert abs(resp.objective_value - oracle_val) <= 1e-3
    assert resp.constraint_max_violation <= FEASIBILITY_TOL
    assert resp.converged


def test_evader_flee_is_local_optimum():
    cfg = make_cfg(**FAR_OBSTACLE)
    s0 = initial_state(cfg)
    los = line_of_sight_heading(s0.x_p, s0.x_e)
    u = constant_seq(los, cfg.N, cfg.u_c)  # pursuer heads straight at evader
    prob = HorizonProblem(role=Role.EVADER_MAX,
                          objective=ObjectiveKind.TERMINAL_DISTANCE,
                          start_state=s0, opponent_seq=u,
                          obstacle_model=ObstacleModel.TRUE, cfg=cfg)
    flee = constant_seq(los, cfg.N, cfg.v_c)  # continue along the line of sight
    resp = best_response(prob, flee)
    flee_val = evaluate_objective(prob, flee)
    assert resp.objective_value >= flee_val - 1e-3
    oracle_val, _ = constant_heading_oracle(prob)
    assert resp.objective_value >= oracle_val - 1e-3


def test_deceptive_response_drags_modeled_pursuer_toward_obstacle():
    # Pure deception payoff: minimizing the modeled pursuer's terminal
    # distance to the true obstacle. The response must do at least as well
    # as plain fleeing, i.e. end the modeled pursuer at least as close.
    cfg = preset("fig7_deception_collision")
    s0 = initial_state(cfg)
    prob = HorizonProblem(role=Role.EVADER_MAX,
                          objective=ObjectiveKind.DECEPTION_BLEND,
                          start_state=s0, opponent_seq=None,
                          obstacle_model=ObstacleModel.TRUE, cfg=cfg)
    flee = constant_seq(line_of_sight_heading(s0.x_p, s0.x_e), cfg.N, cfg.v_c)
    resp = best_response(prob, flee)
    flee_val = evaluate_objective(prob, flee)
    # alpha_o=0, alpha_d=1: objective is -||modeled pursuer - true obstacle||.
    assert resp.objective_value >= flee_val - 1e-9
    assert -resp.objective_value <= -flee_val
    assert resp.constraint_max_violation <= FEASIBILITY_TOL


def test_returned_plans_are_feasible_near_obstacle():
    # Straight at the evader passes the obstacle: the accepted plan must
    # clear the nominal stream at every sample.
    cfg = preset("fig2_collision")
    s0 = initial_state(cfg)
    v = constant_seq(0.0, cfg.N, cfg.v_c)
    prob = HorizonProblem(role=Role.PURSUER_MIN,
                          objective=ObjectiveKind.TERMINAL_DISTANCE,
                          start_state=s0, opponent_seq=v,
                          obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    init = constant_seq(line_of_sight_heading(s0.x_p, s0.x_e), cfg.N, cfg.u_c)
    resp = best_response(prob, init)
    viol = constraint_violations(prob, resp.sequence)
    assert viol.shape == (cfg.N,)
    assert float(viol.max()) <= FEASIBILITY_TOL
    assert resp.constraint_max_violation <= FEASIBILITY_TOL


def test_feasible_init_never_gets_worse():
    cfg = make_cfg(**FAR_OBSTACLE)
    s0 = initial_state(cfg)
    v = constant_seq(0.0, cfg.N, cfg.v_c)
    prob = HorizonProblem(role=Role.PURSUER_MIN,
                          objective=ObjectiveKind.TERMINAL_DISTANCE,
                          start_state=s0, opponent_seq=v,
                          obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    rng = np.random.default_rng(8)
    for _ in range(5):
        init = ControlSequence(headings=rng.uniform(-math.pi, math.pi, cfg.N),
                               speed=cfg.u_c)
        init_val = evaluate_objective(prob, init)
        resp = best_response(prob, init)
        assert resp.objective_value <= init_val + 1e-12


def test_no_feasible_sequence_raises():
    # A huge nominal obstacle sweeping over the pursuer leaves every
    # candidate heading in violation at the first sample.
    cfg = make_cfg(
        evader_start=(-5.0, 0.0), obstacle_start=(3.05, 0.0), r_o=3.0,
        rho_nominal=(-30.0, 0.0), rho_true=(0.0, 0.0),
        uncertainty_spec=UncertaintySpec.BOTH_CARTESIAN, N=3, Q=0.0)
    s0 = initial_state(cfg)
    v = constant_seq(math.pi, cfg.N, cfg.v_c)
    prob = HorizonProblem(role=Role.PURSUER_MIN,
                          objective=ObjectiveKind.TERMINAL_DISTANCE,
                          start_state=s0, opponent_seq=v,
                          obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    init = constant_seq(math.pi, cfg.N, cfg.u_c)
    with pytest.raises(NoFeasibleSequence):
        best_response(prob, init)


def test_best_response_input_validation():
    cfg = make_cfg()
    s0 = initial_state(cfg)
    v = constant_seq(0.0, cfg.N, cfg.v_c)
    prob = HorizonProblem(role=Role.PURSUER_MIN,
                          objective=ObjectiveKind.TERMINAL_DISTANCE,
                          start_state=s0, opponent_seq=v,
                          obstacle_model=ObstacleModel.NOMINAL, cfg=cfg)
    with pytest.raises(ValidationError):
        best_response(prob, constant_seq(0.0, cfg.N - 1, cfg.u_c))
    with pytest.raises(ValidationError):
        best_response(prob, constant_seq(0.0, cfg.N, cfg.v_c))


def test_shift_and_hold():
    seq = ControlSequence(headings=np.array([0.1, 0.2, 0.3]), speed=1.0)
    shifted = shift_and_hold(seq)
    np.testing.assert_array_equal(shifted.headings, [0.2, 0.3, 0.3])
    assert shifted.speed == 1.0


def test_deception_needs_true_obstacle_geometry():
    # The deception payoff references the true obstacle, so flipping the
    # true velocity changes the objective value.
    cfg = preset("fig7_deception_collision")
    s0 = initial_state(cfg)
    seq = constant_seq(0.5, cfg.N, cfg.v_c)

    def value(c):
        prob = HorizonProblem(role=Role.EVADER_MAX,
                              objective=ObjectiveKind.DECEPTION_BLEND,
                              start_state=s0, opponent_seq=None,
                              obstacle_model=ObstacleModel.TRUE, cfg=c)
        return evaluate_objective(prob, seq)

    flipped = replace(cfg, rho_true=(0.35, 0.0))
    assert value(cfg) != value(flipped)
