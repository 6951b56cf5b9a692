"""Equilibria  F(Z) = load  and long-run stabilization diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .discretization import DiscreteSpace, State
from .errors import ConfigurationError, SolverError
from .functionals import state_norm_H
from .model import BeamParameters

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MAX_HALVINGS = 30
CONTINUATION_STEPS = 10


@dataclass(frozen=True)
class StationaryPoint:
    z: np.ndarray
    residual_norm: float
    newton_iters: int
    continuation: bool = False

    def as_state(self, t: float = 0.0) -> State:
        return State(self.z.copy(), np.zeros_like(self.z), t)


def _condition_estimate(J) -> float:
    if J.shape[0] > 3000:
        return float("inf")
    return float(np.linalg.cond(J.toarray()))


def _newton(ops, load, z, tol, max_iter):
    def res(x):
        return ops.force(x) - load

    r = res(z)
    rn = float(np.linalg.norm(r))
    threshold = tol * max(1.0, float(np.linalg.norm(load)))
    for it in range(max_iter + 1):
        if rn <= threshold:
            return z, rn, it
        if it == max_iter:
            break
        J = ops.tangent(z)
        try:
            d = spla.splu(J.tocsc()).solve(-r)
        except RuntimeError:
            d = None
        if d is None or not np.all(np.isfinite(d)):
            raise SolverError("SINGULAR_TANGENT", f"iteration {it}",
                              condition=_condition_estimate(J))
        if np.linalg.norm(d) <= 1e-12 * np.linalg.norm(z):
            # the residual sits at its round-off floor
            return z, rn, it
        # Armijo backtracking on 1/2 |r|^2; the Newton direction has slope -|r|^2
        alpha = 1.0
        for _ in range(MAX_HALVINGS):
            z_try = z + alpha * d
            r_try = res(z_try)
            rn_try = float(np.linalg.norm(r_try))
            if np.isfinite(rn_try) and rn_try**2 <= (1.0 - 2.0 * ARMIJO_C * alpha) * rn**2:
                break
            alpha *= 0.5
        else:
            raise SolverError("NEWTON_DIVERGED", "line search exhausted",
                              residual=rn, iterations=it)
        z, r, rn = z_try, r_try, rn_try
    raise SolverError("NEWTON_DIVERGED", f"|r| = {rn:.3e} after {max_iter} iterations",
                      residual=rn, iterations=max_iter)


def solve_stationary(ops, z_guess=None, tol: float = 1e-10, max_iter: int = 50,
                     continuation: bool = True) -> StationaryPoint:
    """Damped Newton for ``F(Z) = load``.

    ``tol`` bounds the residual norm relative to ``max(1, |load|)``.  When
    Newton started from zero fails, the load is applied in ten increments.
    """
    n = ops.M.shape[0]
    z0 = np.zeros(n) if z_guess is None else np.array(z_guess, dtype=float)
    try:
        z, rn, its = _newton(ops, ops.load, z0, tol, max_iter)
        return StationaryPoint(z, rn, its)
    except SolverError as exc:
        if exc.code != "NEWTON_DIVERGED" or not continuation or np.any(z0):
            raise
        log.info("plain Newton failed (%s); switching to load continuation", exc)
    z = z0
    total = 0
    for k in range(1, CONTINUATION_STEPS + 1):
        z, rn, its = _newton(ops, ops.load * (k / CONTINUATION_STEPS), z, tol, max_iter)
        total += its
    return StationaryPoint(z, rn, total, continuation=True)


def distance_to_stationary(space: DiscreteSpace, p: BeamParameters, state: State,
                           point: StationaryPoint) -> float:
    """H-norm distance between a state and an equilibrium at rest."""
    return state_norm_H(space, p, State(state.z - point.z, state.v, state.t))


@dataclass(frozen=True)
class GradientReport:
    final_velocity_W: float
    final_lyapunov: float
    point: StationaryPoint
    point_lyapunov: float
    distance: float


def gradient_diagnostic(summary, ops, tol: float = 1e-10,
                        max_iter: int = 50) -> GradientReport:
    """Polish the last displacement of a run into an equilibrium and compare."""
    for i in (2, 4):
        if not ops.forcing.is_zero(i):
            raise ConfigurationError("ATTRACTOR_MODE_VIOLATION",
                                     f"g{i} must vanish for the gradient diagnostic")
    final = summary.final_state
    point = solve_stationary(ops, final.z, tol=tol, max_iter=max_iter)
    point_lyap = ops.stored_energy(point.z) - float(ops.load @ point.z)
    return GradientReport(
        final_velocity_W=summary.records[-1].velocity_norm_W,
        final_lyapunov=summary.records[-1].lyapunov,
        point=point, point_lyapunov=point_lyap,
        distance=distance_to_stationary(ops.space, ops.params, final, point))
