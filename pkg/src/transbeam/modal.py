"""Eigenbases of the linear operators and reduced (modal) simulation.

Transverse modes solve ``K_bend x = lam G x`` with ``G`` the beta/mu mass
on the transverse block; longitudinal modes solve ``K_membrane y = lam R y``
with ``R`` the rho-mass.  Both are normalized in their mass, so the reduced
mass matrix is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import AssembledOperators
from .discretization import State
from .errors import ConfigurationError
from .timestepper import StepConfig, TrajectorySummary, simulate

TRANSVERSE_METRIC = "G: beta-mass + mu-gradient"
LONGITUDINAL_METRIC = "rho-mass"


def _block(A, idx):
    return A[idx][:, idx].toarray()


def _modes(K, G, count, what):
    n = K.shape[0]
    if count < 1 or count > n:
        raise ConfigurationError("COUNT_TOO_LARGE",
                                 f"{what}: requested {count} modes, {n} DOFs available")
    values, vectors = scipy.linalg.eigh(K, G, subset_by_index=[0, count - 1])
    return values, vectors


def transverse_modes(ops: AssembledOperators, count: int):
    """Lowest ``count`` bending eigenpairs, G-orthonormal, over transverse DOFs."""
    idx = np.arange(ops.space.transverse_slice().stop)
    return _modes(_block(ops.K_bend, idx), _block(ops.M, idx), count, "transverse")


def longitudinal_modes(ops: AssembledOperators, count: int):
    """Lowest ``count`` membrane eigenpairs, rho-orthonormal, over longitudinal DOFs."""
    sl = ops.space.longitudinal_slice()
    idx = np.arange(sl.start, sl.stop)
    return _modes(_block(ops.K_membrane, idx), _block(ops.M, idx), count, "longitudinal")


@dataclass(frozen=True, eq=False)
class ModalBasis:
    transverse_values: np.ndarray
    transverse_vectors: np.ndarray  # (n_transverse_free, kT)
    longitudinal_values: np.ndarray
    longitudinal_vectors: np.ndarray  # (n_longitudinal_free, kL)
    n_transverse_free: int
    transverse_metric: str = TRANSVERSE_METRIC
    longitudinal_metric: str = LONGITUDINAL_METRIC

    @property
    def transverse_pairs(self) -> list:
        return list(zip(self.transverse_values, self.transverse_vectors.T))

    @property
    def longitudinal_pairs(self) -> list:
        return list(zip(self.longitudinal_values, self.longitudinal_vectors.T))

    @property
    def size(self) -> int:
        return len(self.transverse_values) + len(self.longitudinal_values)

    @property
    def matrix(self) -> np.ndarray:
        """Free-DOF embedding P (n_free, size); transverse columns come first."""
        nt = self.n_transverse_free
        nl = self.longitudinal_vectors.shape[0]
        kt = len(self.transverse_values)
        P = np.zeros((nt + nl, self.size))
        P[:nt, :kt] = self.transverse_vectors
        P[nt:, kt:] = self.longitudinal_vectors
        return P

    def project(self, M, x) -> np.ndarray:
        """Mass-orthogonal projection coefficients of a free vector."""
        return self.matrix.T @ (M @ np.asarray(x, dtype=float))

    def reconstruct(self, q) -> np.ndarray:
        return self.matrix @ np.asarray(q, dtype=float)

    def project_state(self, M, state: State) -> State:
        return State(self.project(M, state.z), self.project(M, state.v), state.t)

    def reconstruct_state(self, state: State) -> State:
        return State(self.reconstruct(state.z), self.reconstruct(state.v), state.t)


def build_basis(ops: AssembledOperators, n_transverse: int | None = None,
                n_longitudinal: int | None = None) -> ModalBasis:
    """Modal basis; ``None`` takes every mode of that field."""
    nt = ops.space.dofs.n_transverse_free
    nl = ops.space.dofs.n_longitudinal_free
    tv, tx = transverse_modes(ops, nt if n_transverse is None else n_transverse)
    lv, lx = longitudinal_modes(ops, nl if n_longitudinal is None else n_longitudinal)
    return ModalBasis(tv, tx, lv, lx, nt)


class ReducedSystem:
    """Galerkin restriction of assembled operators to the span of a basis.

    Exposes the attributes the time stepper needs, in modal coordinates.
    """

    def __init__(self, ops: AssembledOperators, basis: ModalBasis):
        P = basis.matrix
        self.ops = ops
        self.basis = basis
        self.P = P
        self.forcing = ops.forcing

        def restrict(A):
            return P.T @ (A @ P)

        self.M = restrict(ops.M)
        self.C_kappa = restrict(ops.C_kappa)
        self.C_gamma = restrict(ops.C_gamma)
        self.C = self.C_kappa + self.C_gamma
        self.K_lin = restrict(ops.K_lin)
        self.load = P.T @ ops.load

    def force(self, q):
        return self.P.T @ self.ops.force(self.P @ q)

    def tangent(self, q):
        K = self.ops.tangent(self.P @ q)
        return self.P.T @ (K @ self.P)

    def energy_parts(self, q):
        return self.ops.energy_parts(self.P @ q)

    def stored_energy(self, q) -> float:
        return 0.5 * float(np.sum(self.energy_parts(q)))


def modal_simulate(basis: ModalBasis, ops: AssembledOperators, state0: State,
                   cfg: StepConfig, sinks=()) -> TrajectorySummary:
    """Integrate the reduced system from the projection of ``state0``.

    The returned summary holds modal coordinates; use
    ``basis.reconstruct_state(summary.final_state)`` for free-DOF vectors.
    """
    system = ReducedSystem(ops, basis)
    q0 = basis.project_state(ops.M, state0)
    return simulate(system, q0, cfg, sinks)
