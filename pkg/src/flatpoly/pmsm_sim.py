"""Receding-horizon predictive torque control of a non-salient PMSM.

The electrical subsystem in the rotor frame,

    L di_d/dt = -R i_d + n_p w L i_q + v_d
    L di_q/dt = -n_p w L i_d - R i_q + v_q - n_p w K

is linear in (i_d, i_q) once the speed w is frozen over the short prediction
horizon; the back-EMF term enters as a constant drift.  Each sampling
instant re-linearizes at the measured speed, plans a current trajectory that
minimizes weighted torque error plus copper and iron losses subject to
current/voltage polytope constraints, applies the first input sample, and
integrates the full nonlinear machine (including the mechanical equation)
one step.  A cascaded PI controller turns the speed error into the torque
reference.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import NonFinite
from .flat import LinearConstraintSpec, LtiSystem, QuadraticCostSpec, flat_transform
from .polybasis import parameterize_outputs, parameterize_states_inputs
from .costcond import condition_cost, least_distance_transform
from .polyconstraint import compute_delta, condition_constraints
from .solver import solve_lp, solve_qp

__all__ = [
    "PmsmParams",
    "Scenario",
    "TraceRow",
    "pmsm_linearize",
    "pmsm_cost",
    "pmsm_constraints",
    "torque_constant",
    "step_plant",
    "pi_speed_controller",
    "run_closed_loop",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PmsmParams:
    """Machine constants of the non-salient PMSM under test.

    Defaults are the 3.4 kW drive of the motivating experiment: R = 0.86
    ohm, L = 6 mH, 3 pole pairs, flux constant 0.236 Vs, iron-loss
    resistance 1800 ohm, 10 A current and 330 V voltage amplitude limits.
    """

    R: float = 0.86
    L: float = 6e-3
    n_p: int = 3
    K: float = 0.236
    R_m: float = 1800.0
    I_max: float = 10.0
    V_max: float = 330.0
    rated_speed: float = 314.0
    rated_torque: float = 8.0

    def __post_init__(self):
        for name in ("R", "L", "K", "R_m", "I_max", "V_max",
                     "rated_speed", "rated_torque"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.n_p >= 1:
            raise ValueError("n_p must be a positive integer")


def torque_constant(p: PmsmParams):
    """Torque per ampere of q-current: tau = (3/2) n_p K i_q."""
    return 1.5 * p.n_p * p.K


@dataclass(frozen=True)
class Scenario:
    """Closed-loop experiment description.

    speed_setpoints and load_torque are piecewise-constant schedules given
    as ((t0, value0), (t1, value1), ...) with t0 = 0; the value holds from
    its time until the next breakpoint.

    The mechanical constants and PI gains are no part of the machine data;
    the defaults are tuned so the 0 -> 420 rad/s transient settles well
    before the 8 N.m load step at t = 0.07 s.  current_margin backs the
    planned current bounds off by a small amount so that the applied
    samples stay inside the true polytope despite the frozen-speed model
    error and the finite sample grid of the planner.
    """

    T_horizon: float = 2e-3
    dt: float = 1e-4
    duration: float = 0.12
    degree: int = 5
    q: float = 20.0
    speed_setpoints: tuple = ((0.0, 420.0),)
    load_torque: tuple = ((0.0, 0.0), (0.07, 8.0))
    J_m: float = 5e-4
    b: float = 1e-4
    k_p: float = 0.24
    k_i: float = 45.0
    tau_limit: float = 10.0
    current_margin: float = 0.05

    def __post_init__(self):
        if not 0 < self.dt <= self.T_horizon:
            raise ValueError("need 0 < dt <= T_horizon")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")
        for sched in (self.speed_setpoints, self.load_torque):
            times = [t for t, _ in sched]
            if times != sorted(times) or (times and times[0] != 0.0):
                raise ValueError("schedules must start at t=0 and be sorted")
        object.__setattr__(self, "speed_setpoints",
                           tuple((float(t), float(v)) for t, v in self.speed_setpoints))
        object.__setattr__(self, "load_torque",
                           tuple((float(t), float(v)) for t, v in self.load_torque))


def _schedule_value(schedule, t):
    value = schedule[0][1]
    for t_k, v_k in schedule:
        if t >= t_k - 1e-12:
            value = v_k
        else:
            break
    return value


@dataclass(frozen=True)
class TraceRow:
    """One sampling instant of the closed loop (applied values)."""

    t: float
    i_d: float
    i_q: float
    v_d: float
    v_q: float
    omega: float
    tau: float
    tau_ref: float
    J: float
    iterations: int
    solver: str
    status: str


def pmsm_linearize(p: PmsmParams, omega) -> LtiSystem:
    """Electrical subsystem frozen at the measured speed.

    x = (i_d, i_q), u = (v_d, v_q):

        A = [[-R/L,  n_p w], [-n_p w, -R/L]],  B = I / L,
        d = (0, -n_p w K / L).

    Valid for |omega| up to about twice rated speed; beyond that the
    frozen-speed assumption degrades faster than the horizon.
    """
    w = float(omega)
    a = p.n_p * w
    A = np.array([[-p.R / p.L, a], [-a, -p.R / p.L]])
    B = np.eye(2) / p.L
    d = np.array([0.0, -a * p.K / p.L])
    return LtiSystem(A=A, B=B, d=d)


def pmsm_cost(p: PmsmParams, q, omega, tau_star, T) -> QuadraticCostSpec:
    """Weighted torque tracking plus electrical losses over the horizon.

    The stage integrand is

        q (tau - tau*)^2 + R (i_d^2 + i_q^2)
        + (w / R_m) ((L i_d + K)^2 + i_q^2),

    with tau = (3/2) n_p K i_q, plus the terminal torque penalty
    q T (tau(T) - tau*)^2.  Completing the square per axis turns this into
    diagonal (x - x_ref)' Q (x - x_ref) weights with zero input weight; the
    trajectory-independent constant is dropped, so reported costs are the
    physical objective up to that constant.
    """
    c = torque_constant(p)
    w = float(omega)
    a_d = p.R + w * p.L**2 / p.R_m
    a_q = q * c**2 + p.R + w / p.R_m
    b_d = 2.0 * w * p.L * p.K / p.R_m
    x_ref = np.array([-b_d / (2.0 * a_d), q * c * tau_star / a_q])
    x_star = np.array([x_ref[0], tau_star / c])
    return QuadraticCostSpec(
        Q=np.diag([a_d, a_q]),
        R=np.zeros((2, 2)),
        P=np.diag([0.0, q * T * c**2]),
        x_star=x_star,
        x_ref=x_ref,
        T=T,
    )


def pmsm_constraints(p: PmsmParams, current_margin=0.0) -> LinearConstraintSpec:
    """Inscribed-polytope linearization of the current and voltage circles.

    Currents: -I_max/2 <= i_d <= 0 and |i_q| <= (sqrt(3)/2) I_max; every
    vertex such as (-I_max/2, sqrt(3)/2 I_max) lies exactly on the circle
    i_d^2 + i_q^2 = I_max^2.  Voltages analogously with V_max.  Only
    i_d <= 0 is sensible for this machine (field weakening).

    current_margin > 0 tightens all four current rows by that many amperes
    (planner back-off; the reported polytope for checking applied samples
    uses margin zero).
    """
    mu = float(current_margin)
    s3 = math.sqrt(3.0) / 2.0
    G_x = np.array([
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [0.0, 0.0],
    ])
    G_u = np.array([
        [0.0, 0.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
    ])
    g0 = np.array([
        0.0 + mu,
        -p.I_max / 2.0 + mu,
        -s3 * p.I_max + mu,
        -s3 * p.I_max + mu,
        -p.V_max / 2.0,
        -p.V_max / 2.0,
        -s3 * p.V_max,
        -s3 * p.V_max,
    ])
    return LinearConstraintSpec(G_x=G_x, G_u=G_u, g0=g0)


def _plant_rhs(state, v_d, v_q, tau_load, p: PmsmParams, J_m, b):
    i_d, i_q, w = state
    a = p.n_p * w
    did = (-p.R * i_d + p.L * a * i_q + v_d) / p.L
    diq = (-p.L * a * i_d - p.R * i_q + v_q - a * p.K) / p.L
    dw = (torque_constant(p) * i_q - tau_load - b * w) / J_m
    return np.array([did, diq, dw])


def step_plant(state, u, tau_load, p: PmsmParams, J_m, b, dt):
    """One RK4 step of the full nonlinear machine plus mechanics.

    state = (i_d, i_q, omega); u = (v_d, v_q) held constant over the step.
    """
    s = np.asarray(state, dtype=float)
    v_d, v_q = float(u[0]), float(u[1])
    k1 = _plant_rhs(s, v_d, v_q, tau_load, p, J_m, b)
    k2 = _plant_rhs(s + 0.5 * dt * k1, v_d, v_q, tau_load, p, J_m, b)
    k3 = _plant_rhs(s + 0.5 * dt * k2, v_d, v_q, tau_load, p, J_m, b)
    k4 = _plant_rhs(s + dt * k3, v_d, v_q, tau_load, p, J_m, b)
    out = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite("plant integration diverged")
    return out


def pi_speed_controller(omega_ref, omega, k_p, k_i, tau_limit, dt,
                        integrator=0.0):
    """One update of the PI speed loop with conditional anti-windup.

    Returns (tau_ref, integrator).  The integrator is frozen whenever the
    output saturates, so it cannot wind up during torque-limited ramps.
    """
    e = float(omega_ref) - float(omega)
    candidate = integrator + e * dt
    raw = k_p * e + k_i * candidate
    if raw > tau_limit:
        return tau_limit, integrator
    if raw < -tau_limit:
        return -tau_limit, integrator
    return raw, candidate


def _discretize(sys: LtiSystem, dt):
    """Exact zero-order-hold discretization of x' = A x + B u + d.

    Returns (Ad, Bd, dd) with x(dt) = Ad x0 + Bd u + dd for constant u.
    """
    n, m = sys.n, sys.m
    aug = np.zeros((2 * n + 1, 2 * n + 1))
    aug[:n, :n] = sys.A
    aug[:n, n : 2 * n] = np.eye(n)
    E = scipy.linalg.expm(aug * dt)
    Ad = E[:n, :n]
    S = E[:n, n : 2 * n]  # integral of expm(A s) ds over [0, dt]
    return Ad, S @ sys.B, S @ sys.d


def _landing_rows(sys, dt, x0, u_poly, spec_margin):
    """One-step-ahead state rows for the applied input slice.

    The first input sample is held for one sampling period, so the state
    the plant lands on is Ad x0 + Bd u(0) + dd (exact for the frozen-speed
    model).  Constraining that point with the backed-off current bounds
    keeps the applied samples inside the true polytope even when the
    planned polynomial weaves between its own sample points, which the
    vertex solutions of the LP routinely do.
    """
    Ad, Bd, dd = _discretize(sys, dt)
    u0_c0, u0_lin = u_poly.affine_eval(0.0)
    land_c0 = Ad @ np.asarray(x0, dtype=float) + Bd @ u0_c0 + dd
    land_lin = Bd @ u0_lin
    current = np.abs(spec_margin.G_x).max(axis=1) > 0
    G = spec_margin.G_x[current] @ land_lin
    h = -(spec_margin.G_x[current] @ land_c0 + spec_margin.g0[current])
    tags = tuple((int(k), -1) for k in np.flatnonzero(current))
    return G, h, tags


def _plan(p, scenario, x0, omega, tau_ref, warm_start, solver_kind):
    """Condition and solve one receding-horizon instance.

    Returns (result, u_poly).  Two receding-horizon refinements on top of
    the plain conditioning: alpha-independent rows are pruned (the t = 0
    current rows are facts about the measured state, not planner
    decisions), and one-step landing rows are appended (see _landing_rows).
    """
    sys = pmsm_linearize(p, omega)
    fm = flat_transform(sys)
    cost = pmsm_cost(p, scenario.q, omega, tau_ref, scenario.T_horizon)
    basis, y = parameterize_outputs(fm, x0, scenario.degree, scenario.T_horizon)
    x_poly, u_poly = parameterize_states_inputs(y, fm)
    pc = condition_cost(x_poly, u_poly, cost)
    spec = pmsm_constraints(p, current_margin=scenario.current_margin)
    acs = condition_constraints(
        x_poly, u_poly, spec, scenario.T_horizon, compute_delta(scenario.degree)
    )
    norms = np.linalg.norm(acs.G, axis=1)
    keep = norms > 1e-10 * max(1.0, norms.max())
    G_land, h_land, tags_land = _landing_rows(sys, scenario.dt, x0, u_poly, spec)
    acs = replace(
        acs,
        G=np.vstack([acs.G[keep], G_land]),
        h=np.concatenate([acs.h[keep], h_land]),
        tags=tuple(t for t, k in zip(acs.tags, keep) if k) + tags_land,
    )
    ldp = least_distance_transform(pc, acs)
    if solver_kind == "qp":
        result = solve_qp(ldp, warm_start=warm_start)
    else:
        result = solve_lp(ldp)
    return result, u_poly


def run_closed_loop(scenario: Scenario, solver_kind="qp",
                    params: PmsmParams = None):
    """Simulate the cascaded speed / predictive-torque control loop.

    At every sampling instant the measured state re-seeds the planner:
    linearize at the current speed, rebuild cost and constraints, solve,
    apply u(0) for one step of the nonlinear plant.  Infeasible or
    non-optimal solves fall back to the previously applied voltage and are
    flagged in the trace; the run never aborts on a solver failure.

    Parameters
    ----------
    scenario : Scenario
    solver_kind : 'qp' or 'lp'
    params : PmsmParams, optional

    Returns
    -------
    list of TraceRow
    """
    if solver_kind not in ("qp", "lp"):
        raise ValueError(f"solver_kind must be 'qp' or 'lp', got {solver_kind!r}")
    p = params if params is not None else PmsmParams()
    n_steps = int(round(scenario.duration / scenario.dt))
    state = np.zeros(3)
    integrator = 0.0
    prev_u = np.zeros(2)
    warm = None
    trace = []
    for k in range(n_steps):
        t = k * scenario.dt
        omega_ref = _schedule_value(scenario.speed_setpoints, t)
        tau_load = _schedule_value(scenario.load_torque, t)
        tau_ref, integrator = pi_speed_controller(
            omega_ref, state[2], scenario.k_p, scenario.k_i,
            scenario.tau_limit, scenario.dt, integrator,
        )
        result, u_poly = _plan(
            p, scenario, state[:2], state[2], tau_ref, warm, solver_kind
        )
        if result.status == "optimal":
            u = u_poly(result.alpha, 0.0)
            warm = result.active_rows if solver_kind == "qp" else None
            status = "optimal"
        else:
            u = prev_u
            warm = None
            status = f"fallback:{result.status}"
            log.info("step %d (t=%.4f): %s, reusing previous input",
                     k, t, result.status)
        trace.append(TraceRow(
            t=t,
            i_d=float(state[0]),
            i_q=float(state[1]),
            v_d=float(u[0]),
            v_q=float(u[1]),
            omega=float(state[2]),
            tau=float(torque_constant(p) * state[1]),
            tau_ref=float(tau_ref),
            J=float(result.quadratic_cost),
            iterations=int(result.iterations),
            solver=solver_kind,
            status=status,
        ))
        state = step_plant(state, u, tau_load, p, scenario.J_m, scenario.b,
                           scenario.dt)
        prev_u = np.asarray(u, dtype=float)
    return trace
