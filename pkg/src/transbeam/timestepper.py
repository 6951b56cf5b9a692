"""Implicit midpoint integration of  M Z'' + C Z' + F(Z) = load.

The Newton unknown is the end-of-step velocity; the displacement follows
from the midpoint kinematics ``Z1 = Z0 + dt/2 (V0 + V1)``.  Each step emits
a :class:`BalanceRecord` auditing the discrete energy identity.

Any object with the attributes of :class:`~transbeam.assembly.AssembledOperators`
(``M, C, C_kappa, C_gamma, K_lin, load, force, tangent, energy_parts``) can be
integrated, which is how the modal reduction reuses this module.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import State
from .errors import ConfigurationError, SolverError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepConfig:
    dt: float = 1e-3
    newton_tol: float = 1e-11
    newton_max_iter: int = 25
    t_end: float = 1.0
    snapshot_every: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigurationError("INVALID_STEP", f"dt must be positive, got {self.dt!r}")
        if not self.newton_tol > 0:
            raise ConfigurationError("INVALID_STEP", "newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ConfigurationError("INVALID_STEP", "newton_max_iter must be >= 1")
        if self.t_end < 0:
            raise ConfigurationError("INVALID_STEP", "t_end must be nonnegative")


@dataclass(frozen=True)
class BalanceRecord:
    """Energy audit at the end of one step (rates are taken at the midpoint).

    ``balance_residual`` is the per-step defect of
    ``E1 - E0 + dt*(diss_kappa + diss_gamma) - dt*work``.
    """

    t: float
    energy_total: float
    kinetic: float
    bending: float
    q1: float
    q2: float
    lyapunov: float
    phi: float
    dissipation_kappa_rate: float
    dissipation_gamma_rate: float
    work_rate: float
    balance_residual: float
    velocity_norm_W: float

    def as_row(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass
class NewtonInfo:
    iterations: int
    residual_norms: list


# ---------------------------------------------------------------------------
# energy bookkeeping shared by step() and simulate()
# ---------------------------------------------------------------------------

def _quad(A, x, y=None) -> float:
    y = x if y is None else y
    return float(x @ (A @ y))


def _energy_snapshot(ops, z, v):
    parts = np.asarray(ops.energy_parts(z), dtype=float)
    kinetic = 0.5 * _quad(ops.M, v)
    bending = 0.5 * (parts[0] + parts[1])
    total = kinetic + bending + 0.5 * (parts[2] + parts[3])
    return kinetic, bending, parts[2], parts[3], total


def initial_record(ops, state: State) -> BalanceRecord:
    kinetic, bending, q1, q2, total = _energy_snapshot(ops, state.z, state.v)
    return BalanceRecord(
        t=state.t, energy_total=total, kinetic=kinetic, bending=bending, q1=q1, q2=q2,
        lyapunov=total - float(ops.load @ state.z),
        phi=0.5 * (_quad(ops.M, state.v) + _quad(ops.K_lin, state.z)),
        dissipation_kappa_rate=0.0, dissipation_gamma_rate=0.0, work_rate=0.0,
        balance_residual=0.0, velocity_norm_W=float(np.sqrt(max(_quad(ops.M, state.v), 0.0))))


# ---------------------------------------------------------------------------
# Newton step
# ---------------------------------------------------------------------------

def _solve(J, r):
    try:
        if sp.issparse(J):
            lu = spla.splu(J.tocsc())
            x = lu.solve(r)
        else:
            x = scipy.linalg.solve(J, r, assume_a="sym")
    except (RuntimeError, scipy.linalg.LinAlgError) as exc:
        raise SolverError("LINEAR_SOLVE_SINGULAR", str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("LINEAR_SOLVE_SINGULAR", "non-finite solution")
    return x


def newton_velocity(ops, state: State, dt: float, tol: float, max_iter: int):
    """Solve the midpoint equations for V1; returns (V1, NewtonInfo)."""
    z0, v0 = state.z, state.v
    Mv0 = ops.M @ v0
    Cv0 = ops.C @ v0
    scale = (1.0 + np.linalg.norm(Mv0) / abs(dt) + np.linalg.norm(ops.force(z0))
             + np.linalg.norm(ops.load))
    v = v0.copy()
    norms = []
    for it in range(max_iter + 1):
        zm = z0 + 0.25 * dt * (v0 + v)
        r = (ops.M @ v - Mv0) / dt + 0.5 * (ops.C @ v + Cv0) + ops.force(zm) - ops.load
        rn = float(np.linalg.norm(r))
        norms.append(rn)
        if not np.isfinite(rn):
            break
        if rn <= tol * scale:
            return v, NewtonInfo(it, norms)
        if it == max_iter:
            break
        J = ops.M / dt + 0.5 * ops.C + (0.25 * dt) * ops.tangent(zm)
        dv = _solve(J, -r)
        v = v + dv
        # increments at round-off level: further iterations cannot improve r
        if np.linalg.norm(dv) <= 1e-15 * (1.0 + np.linalg.norm(v)) and it > 0:
            return v, NewtonInfo(it + 1, norms)
    raise SolverError("NEWTON_DIVERGED",
                      f"no convergence in {max_iter} iterations (|r| = {norms[-1]:.3e})",
                      residuals=norms, t=state.t)


def step(ops, state: State, cfg: StepConfig, dt: float | None = None,
         previous: BalanceRecord | None = None):
    """One implicit midpoint step; returns (new_state, BalanceRecord, NewtonInfo).

    ``dt`` overrides ``cfg.dt`` (a negative value steps backwards in time).
    """
    dt = cfg.dt if dt is None else dt
    previous = initial_record(ops, state) if previous is None else previous
    v1, info = newton_velocity(ops, state, dt, cfg.newton_tol, cfg.newton_max_iter)
    z1 = state.z + 0.5 * dt * (state.v + v1)
    vm = 0.5 * (state.v + v1)
    kinetic, bending, q1, q2, total = _energy_snapshot(ops, z1, v1)
    dk = _quad(ops.C_kappa, vm)
    dg = _quad(ops.C_gamma, vm)
    wr = float(ops.load @ vm)
    vel_sq = _quad(ops.M, v1)
    rec = BalanceRecord(
        t=state.t + dt, energy_total=total, kinetic=kinetic, bending=bending, q1=q1, q2=q2,
        lyapunov=total - float(ops.load @ z1),
        phi=0.5 * (vel_sq + _quad(ops.K_lin, z1)),
        dissipation_kappa_rate=dk, dissipation_gamma_rate=dg, work_rate=wr,
        balance_residual=total - previous.energy_total + dt * (dk + dg) - dt * wr,
        velocity_norm_W=float(np.sqrt(max(vel_sq, 0.0))))
    return State(z1, v1, state.t + dt), rec, info


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

class MemorySink:
    """Collects snapshots in memory."""

    def __init__(self):
        self.records = []
        self.snapshots = []

    def record(self, rec: BalanceRecord):
        self.records.append(rec)

    def snapshot(self, state: State):
        self.snapshots.append(state)


@dataclass
class TrajectorySummary:
    records: list
    final_state: State
    initial_energy: float
    final_energy: float
    cumulative_balance: float
    max_abs_residual: float
    sum_abs_residual: float
    steps: int
    halvings: int = 0
    newton_iterations: list = field(default_factory=list)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy_total for r in self.records])

    @property
    def lyapunov(self) -> np.ndarray:
        return np.array([r.lyapunov for r in self.records])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.balance_residual for r in self.records[1:]])


def _emit(sinks, method, payload):
    for s in sinks:
        fn = getattr(s, method, None)
        if fn is not None:
            fn(payload)


def simulate(ops, state0: State, cfg: StepConfig, sinks=()) -> TrajectorySummary:
    """Advance to ``cfg.t_end`` with single-halving step rejection.

    ``records[0]`` describes the initial state; every later record closes a
    step.  Sinks may implement ``record(rec)`` and ``snapshot(state)``.
    """
    sinks = list(sinks)
    state = state0
    rec = initial_record(ops, state)
    records = [rec]
    _emit(sinks, "record", rec)
    if cfg.snapshot_every:
        _emit(sinks, "snapshot", state)
    n_steps = int(round((cfg.t_end - state0.t) / cfg.dt))
    if n_steps < 0:
        n_steps = 0
    dissipated = worked = 0.0
    halvings = 0
    iterations = []
    for n in range(n_steps):
        try:
            new_state, new_recs, its = _advance(ops, state, cfg, rec)
        except SolverError as exc:
            exc.details.setdefault("t", state.t)
            raise
        if len(new_recs) > 1:
            halvings += 1
        iterations.extend(its)
        for r, h in zip(new_recs, _sub_dts(cfg.dt, len(new_recs))):
            dissipated += h * (r.dissipation_kappa_rate + r.dissipation_gamma_rate)
            worked += h * r.work_rate
            records.append(r)
            _emit(sinks, "record", r)
        state, rec = new_state, new_recs[-1]
        if cfg.snapshot_every and (n + 1) % cfg.snapshot_every == 0:
            _emit(sinks, "snapshot", state)
    residuals = np.array([abs(r.balance_residual) for r in records[1:]])
    return TrajectorySummary(
        records=records, final_state=state,
        initial_energy=records[0].energy_total, final_energy=records[-1].energy_total,
        cumulative_balance=records[-1].energy_total + dissipated - worked
        - records[0].energy_total,
        max_abs_residual=float(residuals.max()) if len(residuals) else 0.0,
        sum_abs_residual=float(residuals.sum()),
        steps=n_steps, halvings=halvings, newton_iterations=iterations)


def _sub_dts(dt, count):
    return [dt / count] * count


def _advance(ops, state, cfg, previous):
    try:
        new_state, rec, info = step(ops, state, cfg, previous=previous)
        return new_state, [rec], [info.iterations]
    except SolverError as exc:
        if exc.code != "NEWTON_DIVERGED":
            raise
        log.info("t=%.6g: Newton failed, retrying with dt/2", state.t)
    half = 0.5 * cfg.dt
    mid, r1, i1 = step(ops, state, cfg, dt=half, previous=previous)
    end, r2, i2 = step(ops, mid, cfg, dt=half, previous=r1)
    return end, [r1, r2], [i1.iterations, i2.iterations]
