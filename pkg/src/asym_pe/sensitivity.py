"""Constraint-sensitivity machinery for the pursuer's risk term.

The pursuer cannot observe the obstacle's true velocity, so it penalizes
plans whose obstacle clearance is sensitive to that velocity. Sensitivity
of the clearance constraint has a closed form for linear obstacle motion;
a generic sensitivity-ODE integrator is kept alongside as the oracle path.

All sensitivities are evaluated at the nominal obstacle trajectory with t
measured from game start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import (
    ControlSequence,
    ScenarioConfig,
    ValidationError,
    constraint_g,
)
from .game import UncertaintySpec as US


@dataclass(frozen=True)
class SensitivityMatrix:
    """State sensitivity w.r.t. uncertain parameters at one time sample."""

    entries: np.ndarray
    t: float

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2:
            raise ValidationError("entries must be a 2-D matrix")
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class RcsSample:
    """Relevance-weighted constraint sensitivity at one horizon sample."""

    s_g: np.ndarray
    relevance: float
    s_gamma: np.ndarray
    weighted_norm_sq: float

    def __post_init__(self):
        object.__setattr__(self, "s_g", np.asarray(self.s_g, dtype=float))
        object.__setattr__(self, "s_gamma", np.asarray(self.s_gamma, dtype=float))


def relevance(z):
    """Relevance weight gamma(z): logistic derivative, clamped above zero.

    Monotone increasing on (-inf, 0], constant 0.25 for z > 0. Accepts
    scalars or arrays; scalar in, float out.
    """
    z_arr = np.asarray(z, dtype=float)
    # e^z/(1+e^z)^2 evaluated with z <= 0 only, so the exponential never
    # overflows; underflow to 0 for very negative z is the correct limit.
    zneg = np.minimum(z_arr, 0.0)
    ez = np.exp(zneg)
    out = ez / (1.0 + ez) ** 2
    if np.isscalar(z) or z_arr.ndim == 0:
        return float(out)
    return out


def constraint_sensitivity_cartesian(x_p, x_w_nominal, t: float) -> np.ndarray:
    """Closed-form d(clearance)/d(rho) row for linear obstacle motion.

    g = r_o^2 - ||x_p - x_w||^2 with x_w = x_w0 + rho*t gives
    dg/drho = 2t*(x_p - x_w).
    """
    d = np.asarray(x_p, dtype=float) - np.asarray(x_w_nominal, dtype=float)
    return 2.0 * float(t) * d


def constraint_sensitivity_polar(x_p, x_w_nominal, t: float, rho_norm: float,
                                 psi: float, which: US) -> np.ndarray:
    """Same sensitivity expressed in obstacle-velocity polar coordinates.

    Returns a 1-element row: d g/d speed for SPEED_ONLY, d g/d heading for
    HEADING_ONLY.
    """
    d = np.asarray(x_p, dtype=float) - np.asarray(x_w_nominal, dtype=float)
    if which is US.SPEED_ONLY:
        val = 2.0 * t * (d[1] * np.sin(psi) + d[0] * np.cos(psi))
    elif which is US.HEADING_ONLY:
        val = 2.0 * rho_norm * t * (d[1] * np.cos(psi) - d[0] * np.sin(psi))
    else:
        raise ValidationError(f"polar sensitivity undefined for {which}")
    return np.array([val])


def _s_g_rows(d: np.ndarray, t, cfg: ScenarioConfig) -> np.ndarray:
    """Sensitivity rows for displacement(s) d = x_p - x_w_nominal.

    d has shape (..., 2), t broadcasts against d[..., 0]; returns
    (..., k) with k set by cfg.uncertainty_spec.
    """
    spec = cfg.uncertainty_spec
    t2 = 2.0 * np.asarray(t, dtype=float)
    if spec is US.BOTH_CARTESIAN:
        return t2[..., None] * d if np.ndim(t2) else t2 * d
    if spec is US.RHO1_ONLY:
        return (t2 * d[..., 0])[..., None]
    if spec is US.RHO2_ONLY:
        return (t2 * d[..., 1])[..., None]
    psi = cfg.nominal_heading()
    if spec is US.SPEED_ONLY:
        return (t2 * (d[..., 1] * np.sin(psi) + d[..., 0] * np.cos(psi)))[..., None]
    # HEADING_ONLY
    return (cfg.nominal_speed() * t2
            * (d[..., 1] * np.cos(psi) - d[..., 0] * np.sin(psi)))[..., None]


def weighted_terms(d: np.ndarray, t, cfg: ScenarioConfig) -> np.ndarray:
    """Vectorized ||vec(S_gamma)||^2_Q for displacements d = x_p - x_w_nominal.

    Shapes broadcast as in _s_g_rows; returns shape d.shape[:-1]. This is
    the batch workhorse behind rcs_sample and the optimizer's risk term.
    """
    g = cfg.r_o ** 2 - np.sum(np.asarray(d, dtype=float) ** 2, axis=-1)
    gam = relevance(cfg.relevance_scale * g)
    rows = np.asarray(gam)[..., None] * _s_g_rows(np.asarray(d, dtype=float), t, cfg)
    q = cfg.q_matrix()
    return np.einsum("...i,ij,...j->...", rows, q, rows)


def rcs_sample(x_p, x_w_nominal, t: float, cfg: ScenarioConfig) -> RcsSample:
    """Relevant constraint sensitivity of a pursuer position at time t."""
    x_p = np.asarray(x_p, dtype=float)
    x_w = np.asarray(x_w_nominal, dtype=float)
    g = constraint_g(x_p, x_w, cfg.r_o)
    gam = relevance(cfg.relevance_scale * g)
    s_g = _s_g_rows(x_p - x_w, float(t), cfg)
    s_gamma = gam * s_g
    q = cfg.q_matrix()
    wns = float(s_gamma @ q @ s_gamma)
    return RcsSample(s_g=s_g, relevance=gam, s_gamma=s_gamma, weighted_norm_sq=wns)


def risk_of_sequence(samples: list[RcsSample]) -> float:
    """Horizon risk: sum of weighted RCS norms (dt absorbed into Q)."""
    return float(sum(s.weighted_norm_sq for s in samples))


def integrate_sensitivity(a_fn, b_fn, n_steps: int, dt: float,
                          n_state: int, n_param: int,
                          substeps: int = 4) -> list[SensitivityMatrix]:
    """Generic RK4 integration of dS/dt = A(t) S + B(t), S(0) = 0.

    Returns n_steps+1 samples at the step boundaries. Kept general so the
    closed-form path has an independent oracle.
    """
    if n_steps < 0:
        raise ValidationError("n_steps must be nonnegative")
    s = np.zeros((n_state, n_param))
    out = [SensitivityMatrix(entries=s.copy(), t=0.0)]
    h = dt / substeps

    def deriv(t, sm):
        return a_fn(t) @ sm + b_fn(t)

    t = 0.0
    for k in range(n_steps):
        for _ in range(substeps):
            k1 = deriv(t, s)
            k2 = deriv(t + 0.5 * h, s + 0.5 * h * k1)
            k3 = deriv(t + 0.5 * h, s + 0.5 * h * k2)
            k4 = deriv(t + h, s + h * k3)
            s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out.append(SensitivityMatrix(entries=s.copy(), t=(k + 1) * dt))
    return out


# Stacked-state layout for the ODE path: (x_p, x_e, x_w), 6 dims, with the
# obstacle velocity as the 2 uncertain parameters.
_B_STACKED = np.vstack([np.zeros((4, 2)), np.eye(2)])


def propagate_sensitivity_ode(cfg: ScenarioConfig, u_seq: ControlSequence,
                              v_seq: ControlSequence) -> list[SensitivityMatrix]:
    """Sensitivity of the stacked state to the obstacle velocity, per step.

    Open-loop controls do not depend on the obstacle velocity, so A == 0
    and B is constant; the integral is exact linear stepping. The generic
    RK4 path (integrate_sensitivity) must reproduce this.
    """
    if len(u_seq) != len(v_seq):
        raise ValidationError(
            f"control sequences differ in length: {len(u_seq)} vs {len(v_seq)}")
    return [
        SensitivityMatrix(entries=(k * cfg.dt) * _B_STACKED, t=k * cfg.dt)
        for k in range(len(u_seq) + 1)
    ]


def chain_constraint_row(x_p, x_w_nominal, sm: SensitivityMatrix) -> np.ndarray:
    """Chain dg/dx through a stacked-state sensitivity matrix.

    dg/dx = (-2d, 0, 0, 2d) for d = x_p - x_w; the product reproduces the
    closed-form Cartesian row.
    """
    d = np.asarray(x_p, dtype=float) - np.asarray(x_w_nominal, dtype=float)
    dg_dx = np.concatenate([-2.0 * d, np.zeros(2), 2.0 * d])
    return dg_dx @ sm.entries


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation grid, res points per axis, endpoints included."""

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    resolution: int

    def __post_init__(self):
        object.__setattr__(self, "resolution", int(self.resolution))
        for name in ("x1_min", "x1_max", "x2_min", "x2_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.resolution < 2:
            raise ValidationError("grid resolution must be at least 2")
        if self.x1_max <= self.x1_min or self.x2_max <= self.x2_min:
            raise ValidationError("grid extents must have positive span")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.x1_min, self.x1_max, self.resolution),
                np.linspace(self.x2_min, self.x2_max, self.resolution))


def rcs_field_grid(cfg: ScenarioConfig, t: float, grid: GridSpec) -> np.ndarray:
    """||s_gamma|| over candidate pursuer positions at time t.

    Entry [i, j] is the field at (x1_i, x2_j) against the nominal obstacle
    position at t. Used for contour output.
    """
    x_w = np.asarray(cfg.obstacle_start) + np.asarray(cfg.rho_nominal) * float(t)
    a1, a2 = grid.axes()
    p = np.stack(np.meshgrid(a1, a2, indexing="ij"), axis=-1)
    d = p - x_w
    g = cfg.r_o ** 2 - np.sum(d ** 2, axis=-1)
    gam = relevance(cfg.relevance_scale * g)
    rows = gam[..., None] * _s_g_rows(d, float(t), cfg)
    return np.linalg.norm(rows, axis=-1)
