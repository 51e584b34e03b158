"""Staggered solution of the coupled displacement / phase-field problem.

One staggered iteration solves the displacement equation with the phase
field frozen (Newton), refreshes the history field, and then solves the
linear phase-field equation. The loading-step driver wraps this map with an
:class:`~pfaccel.accel.AccelController`.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import fem
from . import material as mat
from .accel import AccelController, Action, Mode, relax_increment
from .fem import State
from .linalg import solve_spd
from .material import MaterialParams
from .mesh import DofMap, Mesh

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "StepResult",
    "SimulationReport",
    "NonlinearSolverError",
    "newton_solve_displacement",
    "solve_phasefield",
    "staggered_step",
    "convergence_check",
    "run_loading_step",
    "run_simulation",
]

log = logging.getLogger(__name__)

NEWTON_MAX_ITER = 50


class NonlinearSolverError(RuntimeError):
    """Newton did not reach its tolerance within the iteration cap."""

    def __init__(self, message: str, residuals: list):
        super().__init__(f"{message}; residual history {residuals}")
        self.residuals = residuals


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and acceleration settings.

    Defaults are the single-notch values: absolute tolerances 1e-8, relative
    residual 5e-3, relative increment 1e-2, inner Newton 1e-4, 1000
    iterations per step, Anderson depth 1, relaxation 1.6 and five
    non-increasing residuals before leaving relaxation.
    """

    tol_res_abs: float = 1e-8
    tol_res_rel: float = 5e-3
    tol_inc_abs: float = 1e-8
    tol_inc_rel: float = 1e-2
    tol_inner: float = 1e-4
    max_iter: int = 1000
    depth_m: int = 1
    omega: float = 1.6
    n_switch: int = 5
    mode: str = "combined"
    aa_fields: str = "stacked"
    track_energy: bool = False
    linear_solver: str = "direct"

    def __post_init__(self):
        for name in ("tol_res_abs", "tol_res_rel", "tol_inc_abs", "tol_inc_rel", "tol_inner"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.depth_m < 0:
            raise ValueError("depth_m must be >= 0")
        if not 0.0 < self.omega < 2.0:
            raise ValueError("omega must lie in (0, 2)")
        if self.n_switch < 1:
            raise ValueError("n_switch must be >= 1")
        Mode(self.mode)
        if self.aa_fields not in ("stacked", "phi"):
            raise ValueError("aa_fields must be 'stacked' or 'phi'")

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def controller(self) -> AccelController:
        return AccelController(self.mode, self.depth_m, self.omega, self.n_switch)


@dataclass
class IterationRecord:
    load_step: int
    iter: int
    res_u_norm: float
    mode: str
    newton_iters: int
    increment_norm: float
    energy: float | None = None


@dataclass
class StepResult:
    load_step: int
    applied_displacement: float
    iterations: int
    converged: bool
    mode_counts: dict
    tau_x: float
    tau_y: float
    newton_iters: int

    @property
    def mode_summary(self) -> str:
        return " ".join(f"{k}:{v}" for k, v in sorted(self.mode_counts.items()))


@dataclass
class SimulationReport:
    case: str
    steps: list = field(default_factory=list)
    records: list = field(default_factory=list)
    final_state: State | None = None

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.steps)

    @property
    def all_converged(self) -> bool:
        return all(s.converged for s in self.steps)


# ----------------------------------------------------------------------------
def _newton_done(res: float, first_res_norm: float, cfg: SolverConfig) -> bool:
    # the absolute floor keeps Newton finite when the step produced no residual
    return res <= cfg.tol_inner * first_res_norm or res <= cfg.tol_inner * cfg.tol_res_abs


def newton_solve_displacement(mesh: Mesh, state: State, params: MaterialParams, dofmap: DofMap,
                              cfg: SolverConfig, first_res_norm: float, load_step=0, min_iters: int = 0):
    """Newton iterations on the displacement equation at fixed phase field.

    Starts from ``state.u`` (which must carry the Dirichlet values) and stops
    once ``||Res_u|| <= tol_inner * first_res_norm`` after at least
    ``min_iters`` corrections.

    Returns
    -------
    u : ndarray
    n_iters : int

    Raises
    ------
    NonlinearSolverError
        After 50 corrections without meeting the tolerance.
    """
    disc = fem.discretization(mesh)
    work = State(state.u.copy(), state.phi, state.history)
    history = []
    for j in range(NEWTON_MAX_ITER + 1):
        res_vec = disc.displacement(work, params, dofmap, load_step, with_tangent=False)[1]
        res = float(np.linalg.norm(res_vec))
        history.append(res)
        if j >= min_iters and _newton_done(res, first_res_norm, cfg):
            return work.u, j
        if j == NEWTON_MAX_ITER:
            break
        K, res_vec = disc.displacement(work, params, dofmap, load_step)
        work.u = work.u + solve_spd(K, -res_vec, method=cfg.linear_solver)
    raise NonlinearSolverError("Newton iteration cap exceeded", history)


def solve_phasefield(mesh: Mesh, state: State, params: MaterialParams, dofmap: DofMap,
                     cfg: SolverConfig | None = None) -> np.ndarray:
    system = fem.assemble_phasefield(mesh, state, params, dofmap)
    method = cfg.linear_solver if cfg is not None else "direct"
    return solve_spd(system.matrix, system.rhs, method=method)


def refresh_history(mesh: Mesh, u: np.ndarray, params: MaterialParams, history_prev: np.ndarray) -> np.ndarray:
    """``max(history_prev, drive(eps(u)))`` at every quadrature point."""
    eps = fem.element_strains(mesh, u)
    drive = mat.update_history(np.zeros(len(eps)), eps, params)
    return np.maximum(history_prev, drive[:, None])


def staggered_step(mesh: Mesh, state: State, params: MaterialParams, dofmap: DofMap, cfg: SolverConfig,
                   load_step, first_res_norm: float, history_prev: np.ndarray | None = None,
                   omega: float = 1.0):
    """One (optionally relaxed) staggered iteration.

    Solves for the displacement at the frozen phase field, relaxes it with
    ``omega``, rebuilds the history field from ``history_prev`` (the
    converged history of the previous loading step; defaults to
    ``state.history``), solves the phase-field equation and relaxes that
    too. ``omega = 1`` is the plain staggered map.

    Returns
    -------
    new_state : State
    increments : (ndarray, ndarray)
        Displacement and phase-field increments with respect to ``state``.
    newton_iters : int
    """
    if history_prev is None:
        history_prev = state.history
    u_hat, n_newton = newton_solve_displacement(mesh, state, params, dofmap, cfg, first_res_norm,
                                                load_step, min_iters=1)
    u_new = relax_increment(state.u, u_hat, omega)
    history = refresh_history(mesh, u_new, params, history_prev)
    phi_hat = solve_phasefield(mesh, State(u_new, state.phi, history), params, dofmap, cfg)
    phi_new = relax_increment(state.phi, phi_hat, omega)
    new = State(u_new, phi_new, history)
    return new, (new.u - state.u, new.phi - state.phi), n_newton


def convergence_check(mesh: Mesh, current: State, previous: State, res_u_norm: float, first_res_norm: float,
                      ref_norms: tuple, cfg: SolverConfig) -> bool:
    """All four stopping tests of the staggered iteration.

    ``ref_norms`` is ``(||u^{n,1}||_L2, ||phi^{n,0}||_L2)``. Relative tests
    whose reference is negligible are skipped: the residual test when
    ``first_res_norm <= tol_res_abs`` and the phase-field part of the
    increment test when its reference is below 1e-14.
    """
    disc = fem.discretization(mesh)
    du = disc.l2_norm_vector(current.u - previous.u)
    dphi = disc.l2_norm_scalar(current.phi - previous.phi)
    if not res_u_norm <= cfg.tol_res_abs:
        return False
    if first_res_norm > cfg.tol_res_abs and not res_u_norm / first_res_norm <= cfg.tol_res_rel:
        return False
    if not du + dphi <= cfg.tol_inc_abs:
        return False
    u_ref, phi_ref = ref_norms
    rel = 0.0
    if u_ref > 1e-14:
        rel += du / u_ref
    elif du > 0:
        rel += np.inf
    if phi_ref > 1e-14:
        rel += dphi / phi_ref
    return rel <= cfg.tol_inc_rel


def _apply_dirichlet(u: np.ndarray, dofmap: DofMap, load_step) -> np.ndarray:
    u = u.copy()
    u[dofmap.dirichlet_u] = dofmap.u_values(load_step)
    return u


def run_loading_step(mesh: Mesh, state: State, params: MaterialParams, dofmap: DofMap, cfg: SolverConfig,
                     load_step, accel: AccelController | None = None):
    """Iterate the (accelerated) staggered map for one loading step.

    ``state`` is the converged state of the previous step. Returns the
    accepted state, the per-iteration records and a convergence flag. When
    ``max_iter`` is reached the last iterate is accepted.
    """
    if accel is None:
        accel = cfg.controller()
    accel.begin_step()
    disc = fem.discretization(mesh)
    history_prev = state.history.copy()
    prev = State(_apply_dirichlet(state.u, dofmap, load_step), state.phi.copy(), history_prev.copy())
    # reference residual: previous solution under the new boundary data
    first_res = float(np.linalg.norm(fem.displacement_residual(mesh, prev, params, dofmap, load_step)))
    phi0_norm = disc.l2_norm_scalar(prev.phi)
    u1_norm = None
    records = []
    converged = False
    n_u = dofmap.n_u
    for i in range(1, cfg.max_iter + 1):
        action = accel.next_action()
        if action is Action.OR:
            new, _, n_newton = staggered_step(mesh, prev, params, dofmap, cfg, load_step, first_res,
                                              history_prev, omega=accel.omega)
        else:
            new, increments, n_newton = staggered_step(mesh, prev, params, dofmap, cfg, load_step, first_res,
                                                       history_prev)
            if action is Action.AA:
                if cfg.aa_fields == "stacked":
                    x = accel.accelerate(new.stacked(), np.concatenate(increments))
                    new = State(_apply_dirichlet(x[:n_u], dofmap, load_step), x[n_u:].copy(), new.history)
                else:
                    phi = accel.accelerate(new.phi, increments[1])
                    new = State(new.u, phi, new.history)
        res = float(np.linalg.norm(fem.displacement_residual(mesh, new, params, dofmap, load_step)))
        accel.record_residual(res)
        if i == 1:
            u1_norm = disc.l2_norm_vector(new.u)
        converged = convergence_check(mesh, new, prev, res, first_res, (u1_norm, phi0_norm), cfg)
        inc = disc.l2_norm_vector(new.u - prev.u) + disc.l2_norm_scalar(new.phi - prev.phi)
        energy = fem.total_energy(mesh, new, params, dofmap, load_step) if cfg.track_energy else None
        records.append(IterationRecord(int(load_step), i, res, action.value, n_newton, inc, energy))
        prev = new
        if converged:
            break
    if not converged:
        log.info("load step %s hit max_iter=%d", load_step, cfg.max_iter)
    prev.history = refresh_history(mesh, prev.u, params, history_prev)
    return prev, records, converged



def run_simulation(case, cfg: SolverConfig, n_steps: int | None = None, callback=None) -> SimulationReport:
    """Run loading steps ``1..n_steps`` of a benchmark case.

    ``callback(step, state, mesh)`` is invoked after every accepted step,
    e.g. to write field output.
    """
    mesh = case.build_mesh()
    dofmap = case.build_dofmap(mesh)
    params = case.params
    n_steps = case.n_steps if n_steps is None else n_steps
    report = SimulationReport(case.name)
    state = State.zeros(mesh)
    accel = cfg.controller()
    for n in range(1, n_steps + 1):
        state, records, converged = run_loading_step(mesh, state, params, dofmap, cfg, n, accel)
        counts: dict = {}
        for r in records:
            counts[r.mode] = counts.get(r.mode, 0) + 1
        tau_x, tau_y = fem.compute_traction(mesh, state, params, case.traction_tag)
        report.steps.append(StepResult(n, case.applied_displacement(n), len(records), converged, counts,
                                       tau_x, tau_y, sum(r.newton_iters for r in records)))
        report.records.extend(records)
        log.info("%s step %d: %d iterations%s", case.name, n, len(records), "" if converged else " (not converged)")
        if callback is not None:
            callback(n, state, mesh)
    report.final_state = state
    return report
