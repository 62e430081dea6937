"""Backward-Euler time stepping under monolithic and fixed-stress coupling.

Sign conventions: tension-positive stress, total volumetric stress
``sigma_v = K_dr * eps_v - b * p``.  The mechanics equation is
``A u - B^T p = Q_u`` and the flow equation, multiplied through by the time
step, is ``B (u - u_n) + D (p - p_n) + S (p - p_n) + dt T p = dt Q_p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .analysis import oscillation_index
from .assembly import AssembledSystem, Loads, apply_face_laplacian, eliminate_dirichlet
from .errors import ConfigError, SolverError
from .linsolve import DEFAULT_TOL, FactorCache
from .materials import StabilizationConfig

SCHEMES = ("fully_implicit", "fixed_stress")
FS_FORMS = ("stress_rate", "porosity")


@dataclass
class State:
    u: np.ndarray
    p: np.ndarray
    # porosity change from phi0, as passed between the flow and mechanics solves
    dphi: np.ndarray
    sigma_v: np.ndarray
    eps_v: np.ndarray
    time: float
    phi0: np.ndarray
    mass_residual: float = 0.0
    # total stress of the mechanics seen by the last flow solve (fixed stress only)
    sigma_flow: np.ndarray | None = None

    @property
    def phi(self):
        return self.phi0 + self.dphi


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "fully_implicit"
    fs_iterations: int = 1
    fs_form: str = "stress_rate"
    stabilization: StabilizationConfig = field(default_factory=StabilizationConfig)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.fs_form not in FS_FORMS:
            raise ConfigError(f"fs_form must be one of {FS_FORMS}, got {self.fs_form!r}")
        if int(self.fs_iterations) != self.fs_iterations or self.fs_iterations < 1:
            raise ConfigError(f"fs_iterations must be a positive integer, got {self.fs_iterations}")


class CoupledProblem:
    """Assembled operators plus displacement constraints and cached factorizations."""

    def __init__(self, system: AssembledSystem, fixed_dofs, fixed_values=None,
                 tol=DEFAULT_TOL):
        self.system = system
        n = system.A.shape[0]
        self.fixed = np.unique(np.asarray(fixed_dofs, dtype=np.int64))
        self.g = np.zeros(n)
        if fixed_values is not None:
            self.g[self.fixed] = np.broadcast_to(np.asarray(fixed_values, dtype=float),
                                                 self.fixed.shape)
        keep = np.ones(n)
        keep[self.fixed] = 0.0
        self._keep = keep
        self.A_bc = eliminate_dirichlet(system.A, self.fixed)
        self.B_bc = (system.B @ sp.diags(keep)).tocsr()
        props = system.props
        # pressure unknowns are scaled by this modulus in the monolithic solve
        self.pscale = float(np.max(props.lam + 2.0 * props.G))
        self.tol = tol
        self._mech = FactorCache(equilibrate=True)
        self._flow = FactorCache(equilibrate=True)
        self._mono = FactorCache(equilibrate=True)
        self.reference: State | None = None

    @property
    def n_u(self):
        return self.system.A.shape[0]

    @property
    def n_p(self):
        return self.system.mesh.n_cells

    def strict_undrained(self):
        props = self.system.props
        return bool(np.all(props.b == 1.0) and np.all(props.invM == 0.0)
                    and np.all(props.kappa == 0.0) and not np.any(self.system.S.data))

    # -- sub-solves ---------------------------------------------------------

    def mechanics_rhs(self, Q_u, p):
        rhs = Q_u + self.system.B.T @ p - self.system.A @ self.g
        rhs[self.fixed] = self.g[self.fixed]
        return rhs

    def solve_mechanics(self, Q_u, p):
        fac = self._mech.get("A", lambda: self.A_bc)
        return fac.solve(self.mechanics_rhs(Q_u, p), self.tol)

    def flow_matrix(self, dt):
        s = self.system
        return (sp.diags(s.D_fs) + s.S + dt * s.T).tocsr()

    def _pressure_apply(self, diag, dt):
        s = self.system
        w = s.s_face + dt * s.t_face
        return lambda x: diag * x + apply_face_laplacian(s.mesh, w, x)

    def solve_flow(self, dt, rhs):
        apply = self._pressure_apply(self.system.D_fs, dt)
        fac = self._flow.get(dt, lambda: self.flow_matrix(dt), apply)
        return fac.solve(rhs, self.tol)

    def monolithic_matrix(self, dt):
        s = self.system
        c = self.pscale
        pp = sp.diags(s.D_fim) + s.S + dt * s.T
        return sp.bmat([[self.A_bc, -c * self.B_bc.T],
                        [-c * self.B_bc, -c * c * pp]], format="csc")

    def _monolithic_apply(self, dt):
        c, n = self.pscale, self.n_u
        pp = self._pressure_apply(self.system.D_fim, dt)

        def apply(x):
            u, q = x[:n], x[n:]
            return np.concatenate([self.A_bc @ u - c * (self.B_bc.T @ q),
                                   -c * (self.B_bc @ u) - c * c * pp(q)])
        return apply

    def solve_monolithic(self, dt, rhs_u, rhs_p):
        fac = self._mono.get(dt, lambda: self.monolithic_matrix(dt), self._monolithic_apply(dt))
        c = self.pscale
        x = fac.solve(np.concatenate([rhs_u, -c * rhs_p]), self.tol)
        return x[:self.n_u], c * x[self.n_u:]

    # -- state helpers --------------------------------------------------------

    def initial_state(self, p0=0.0, u0=None, time=0.0) -> State:
        s = self.system
        u = np.zeros(self.n_u) if u0 is None else np.asarray(u0, dtype=float).copy()
        u[self.fixed] = self.g[self.fixed]
        p = np.broadcast_to(np.asarray(p0, dtype=float), (self.n_p,)).copy()
        eps = s.cell_strain(u)
        state = State(u=u, p=p, dphi=np.zeros(self.n_p), sigma_v=s.total_stress(u, p),
                      eps_v=eps, time=float(time), phi0=s.props.phi0.copy())
        self.reference = state
        return state

    def _ref(self):
        if self.reference is None:
            raise ConfigError("problem has no reference state; call initial_state first")
        return self.reference

    def _finish(self, u, p, dphi, time, mass_residual, sigma_flow=None):
        s = self.system
        return State(u=u, p=p, dphi=dphi, sigma_v=s.total_stress(u, p), eps_v=s.cell_strain(u),
                     time=time, phi0=s.props.phi0, mass_residual=mass_residual,
                     sigma_flow=sigma_flow)


def _mass_residual(problem, residual, u, u_n, p, eps, *terms):
    """Net mass imbalance relative to the gross fluxes and the pore-volume change since reference."""
    props = problem.system.props
    ref = problem._ref()
    V = problem.system.volumes
    scale = sum(np.sum(np.abs(t)) for t in terms)
    scale += np.sum(abs(problem.system.B) @ np.abs(u - u_n))
    scale += np.sum(V * (np.abs(props.b * (eps - ref.eps_v))
                         + (props.invM + props.b ** 2 / props.K_dr) * np.abs(p - ref.p)))
    total = abs(float(np.sum(residual)))
    return total / scale if scale > 0 else total


def step_fully_implicit(state: State, dt, problem: CoupledProblem, loads: Loads) -> State:
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}")
    s = problem.system
    rhs_u = loads.Q_u - s.A @ problem.g
    rhs_u[problem.fixed] = problem.g[problem.fixed]
    acc = sp.diags(s.D_fim) + s.S
    rhs_p = dt * loads.Q_p + s.B @ state.u + acc @ state.p - s.B @ problem.g
    u, p = problem.solve_monolithic(dt, rhs_u, rhs_p)
    ref = problem._ref()
    props = s.props
    eps = s.cell_strain(u)
    dphi = props.b * (eps - ref.eps_v) + props.invN * (p - ref.p)
    terms = (s.B @ (u - state.u), s.D_fim * (p - state.p), dt * (s.T @ p), dt * loads.Q_p)
    residual = terms[0] + terms[1] + s.S @ (p - state.p) + terms[2] - terms[3]
    return problem._finish(u, p, dphi, state.time + dt,
                           _mass_residual(problem, residual, u, state.u, p, eps, *terms))


def step_fixed_stress(state: State, prev_state: State | None, dt, problem: CoupledProblem,
                      loads: Loads, cfg: SchemeConfig = SchemeConfig("fixed_stress")) -> State:
    """One fixed-stress step: ``cfg.fs_iterations`` flow/mechanics passes.

    Each flow pass freezes the stress change between the latest mechanics
    solve and the mechanics seen by the previous step's last flow pass.  With
    one pass that is ``sigma^n - sigma^(n-1)``; ``prev_state`` supplies level
    n-1 when ``state`` does not record it (``None`` means level n).
    Referencing the flow-level stress keeps both forms conservative when
    iterating.
    """
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}")
    s = problem.system
    props = s.props
    V = s.volumes
    ref = problem._ref()
    if state.sigma_flow is not None:
        sig_flow = state.sigma_flow
    else:
        sig_flow = state.sigma_v if prev_state is None else prev_state.sigma_v
    storage = props.invM - props.invN
    Sdp_n = s.S @ state.p
    u_lat, p_lat, eps_lat = state.u, state.p, state.eps_v
    for _ in range(cfg.fs_iterations):
        sig_lat = props.K_dr * eps_lat - props.b * p_lat
        if cfg.fs_form == "stress_rate":
            dsig = sig_lat - sig_flow
            rhs = dt * loads.Q_p + s.D_fs * state.p + Sdp_n - props.b / props.K_dr * V * dsig
        else:
            # accumulation V * [dphi(p) - dphi_n + (1/M - 1/N)(p - p_n)], linear in p
            known = (-props.invN * ref.p + props.b * (eps_lat - ref.eps_v)
                     - props.b ** 2 / props.K_dr * p_lat - state.dphi - storage * state.p)
            rhs = dt * loads.Q_p + Sdp_n - V * known
        p = problem.solve_flow(dt, rhs)
        dphi = (props.invN * (p - ref.p) + props.b * (eps_lat - ref.eps_v)
                + props.b ** 2 / props.K_dr * (p - p_lat))
        u = problem.solve_mechanics(loads.Q_u, p)
        u_lat, p_lat, eps_lat = u, p, s.cell_strain(u)
    acc = V * (dphi - state.dphi + storage * (p - state.p))
    terms = (acc, dt * (s.T @ p), dt * loads.Q_p)
    residual = acc + s.S @ (p - state.p) + terms[1] - terms[2]
    return problem._finish(u_lat, p, dphi, state.time + dt,
                           _mass_residual(problem, residual, u_lat, state.u, p, eps_lat, *terms),
                           sig_lat)


def uzawa_reference_step(state: State, problem: CoupledProblem, loads: Loads, dt=0.0) -> State:
    """Penalty update ``p <- p - K_dr div(u_n - u_0)`` followed by a mechanics solve.

    Valid only with b = 1, 1/M = 0, zero permeability and no stabilization.
    """
    if not problem.strict_undrained():
        raise ConfigError("uzawa_reference_step requires b=1, 1/M=0, kappa=0 and S=0")
    s = problem.system
    ref = problem._ref()
    p = state.p - s.props.K_dr * (state.eps_v - ref.eps_v)
    u = problem.solve_mechanics(loads.Q_u, p)
    dphi = (state.eps_v - ref.eps_v) + (p - state.p) / s.props.K_dr
    return problem._finish(u, p, dphi, state.time + dt, 0.0)


# --- driver ----------------------------------------------------------------

@dataclass
class StepDiagnostics:
    step: int
    time_s: float
    dt_s: float
    oscillation_index_masked: float
    max_p: float
    min_p: float
    divu_norm: float
    mass_residual: float


@dataclass
class Trajectory:
    states: list
    diagnostics: list
    mesh: object = None

    def at_step(self, n):
        return self.states[n]


def state_diagnostics(state: State, step, dt, problem: CoupledProblem, regions) -> StepDiagnostics:
    s = problem.system
    mesh = s.mesh
    ref = problem._ref()
    V = s.volumes
    deps = state.eps_v - ref.eps_v
    return StepDiagnostics(
        step=step,
        time_s=state.time,
        dt_s=dt,
        oscillation_index_masked=oscillation_index(state.p, mesh, regions),
        max_p=float(np.max(state.p)),
        min_p=float(np.min(state.p)),
        divu_norm=float(np.sqrt(np.sum(V * deps ** 2) / np.sum(V))),
        mass_residual=state.mass_residual,
    )


def expand_schedule(schedule):
    """List of (dt, n_steps) pairs to a flat list of step sizes."""
    dts = []
    for dt, n in schedule:
        if not dt > 0 or int(n) != n or n < 0:
            raise ConfigError(f"bad schedule entry ({dt}, {n})")
        dts.extend([float(dt)] * int(n))
    return dts


def run_simulation(scenario, cfg: SchemeConfig, schedule, problem: CoupledProblem | None = None,
                   callback=None) -> Trajectory:
    """Advance ``scenario`` through ``schedule`` and record per-step diagnostics.

    ``callback(step, state)`` runs after every step (used for snapshots).
    """
    problem = problem or scenario.build_problem(cfg.stabilization)
    state = problem.initial_state(p0=scenario.p0)
    prev = None
    regions = scenario.index_regions
    states = [state]
    diags = [state_diagnostics(state, 0, 0.0, problem, regions)]
    if callback:
        callback(0, state)
    for n, dt in enumerate(expand_schedule(schedule), start=1):
        loads = scenario.loads(state.time + dt)
        try:
            if cfg.scheme == "fully_implicit":
                new = step_fully_implicit(state, dt, problem, loads)
            else:
                new = step_fixed_stress(state, prev, dt, problem, loads, cfg)
        except SolverError as exc:
            raise SolverError(f"step {n}: {exc}", exc.residual) from exc
        prev, state = state, new
        states.append(state)
        diags.append(state_diagnostics(state, n, dt, problem, regions))
        if callback:
            callback(n, state)
    return Trajectory(states, diags, problem.system.mesh)
