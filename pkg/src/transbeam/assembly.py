"""Global operators of the variational problem over free DOFs.

Mass (W metric on velocities), damping, linear stiffness and load are built
once; the von Karman force and its tangent are evaluated through the element
kernels in :mod:`transbeam._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .discretization import DiscreteSpace
from .model import BeamParameters, Forcing


def _coef(space: DiscreteSpace, p: BeamParameters, name: str) -> np.ndarray:
    left = p.segment(0)[name]
    right = p.segment(1)[name]
    return np.where(space.mesh.segment == 0, left, right).astype(float)


class ScatterPlan:
    """Fixed CSR pattern for summing (ne, 7, 7) element blocks over free DOFs."""

    def __init__(self, space: DiscreteSpace):
        n = space.dofs.n_free
        edofs = space.dofs.full_to_free[space.dofs.element_dofs]
        rows = np.repeat(edofs, 7, axis=1).ravel()
        cols = np.tile(edofs, (1, 7)).ravel()
        self.mask = (rows >= 0) & (cols >= 0)
        keys = rows[self.mask] * n + cols[self.mask]
        unique, self.inverse = np.unique(keys, return_inverse=True)
        self.indices = (unique % n).astype(np.int32)
        counts = np.bincount(unique // n, minlength=n)
        self.indptr = np.r_[0, np.cumsum(counts)].astype(np.int32)
        self.nnz = len(unique)
        self.n = n

    def matrix(self, blocks: np.ndarray) -> sp.csr_matrix:
        vals = blocks.reshape(len(blocks), -1).ravel()[self.mask]
        data = np.bincount(self.inverse, weights=vals, minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()),
                             shape=(self.n, self.n))


def scatter_plan(space: DiscreteSpace) -> ScatterPlan:
    plan = space.__dict__.get("_scatter_plan")
    if plan is None:
        plan = ScatterPlan(space)
        space.__dict__["_scatter_plan"] = plan
    return plan


def _kernel_args(space: DiscreteSpace, p: BeamParameters):
    d = space.dofs
    return (np.ascontiguousarray(d.transverse_map), np.ascontiguousarray(d.longitudinal_map),
            space.transverse_table(1), space.transverse_table(2),
            space.longitudinal_table(1), np.ascontiguousarray(space.wq),
            _coef(space, p, "lam"))


def internal_force(space: DiscreteSpace, p: BeamParameters, z, nonlinear: bool = True):
    """Weak internal force over free DOFs (load not included)."""
    tdofs, ldofs, t1, t2, l1, wq, lam = _kernel_args(space, p)
    full = _kernels.internal_force(space.full(z), tdofs, ldofs, t1, t2, l1, wq, lam,
                                   1.0 if nonlinear else 0.0)
    return space.restrict(full)


def tangent(space: DiscreteSpace, p: BeamParameters, z, nonlinear: bool = True):
    """Consistent tangent of :func:`internal_force` as a CSR matrix."""
    tdofs, ldofs, t1, t2, l1, wq, lam = _kernel_args(space, p)
    ke = _kernels.element_tangents(space.full(z), tdofs, ldofs, t1, t2, l1, wq, lam,
                                   1.0 if nonlinear else 0.0)
    return scatter_plan(space).matrix(ke)


def energy_parts(space: DiscreteSpace, p: BeamParameters, z, nonlinear: bool = True):
    """(lambda1*int phi_xx^2, lambda2*int u_xx^2, Q1, Q2) by the kernel path."""
    tdofs, ldofs, t1, t2, l1, wq, lam = _kernel_args(space, p)
    seg = np.ascontiguousarray(space.mesh.segment.astype(np.int64))
    return _kernels.energy_parts(space.full(z), tdofs, ldofs, t1, t2, l1, wq, lam, seg,
                                 1.0 if nonlinear else 0.0)


def stored_energy(space: DiscreteSpace, p: BeamParameters, z, nonlinear: bool = True) -> float:
    """Half the bending energy plus half the membrane functionals."""
    return 0.5 * float(np.sum(energy_parts(space, p, z, nonlinear)))


@dataclass(eq=False)
class AssembledOperators:
    """Constant operators plus callbacks for the nonlinear force.

    ``C = C_kappa + C_gamma``; ``K_lin = K_bend + K_membrane`` is the tangent
    at zero displacement.
    """

    space: DiscreteSpace
    params: BeamParameters
    forcing: Forcing
    M: sp.csr_matrix
    C_kappa: sp.csr_matrix
    C_gamma: sp.csr_matrix
    K_bend: sp.csr_matrix
    K_membrane: sp.csr_matrix
    load: np.ndarray
    nonlinear: bool = True

    @cached_property
    def C(self) -> sp.csr_matrix:
        return (self.C_kappa + self.C_gamma).tocsr()

    @cached_property
    def K_lin(self) -> sp.csr_matrix:
        return (self.K_bend + self.K_membrane).tocsr()

    def force(self, z) -> np.ndarray:
        return internal_force(self.space, self.params, z, self.nonlinear)

    def residual(self, z) -> np.ndarray:
        """Internal force minus load: the gradient of the Lyapunov potential."""
        return self.force(z) - self.load

    def tangent(self, z) -> sp.csr_matrix:
        return tangent(self.space, self.params, z, self.nonlinear)

    def energy_parts(self, z) -> np.ndarray:
        return energy_parts(self.space, self.params, z, self.nonlinear)

    def stored_energy(self, z) -> float:
        return 0.5 * float(np.sum(self.energy_parts(z)))


def _element_blocks(space: DiscreteSpace, p: BeamParameters):
    wq = space.wq
    t0, t1, t2 = (space.transverse_table(k) for k in range(3))
    l0, l1 = space.longitudinal_table(0), space.longitudinal_table(1)

    def tt(weight, a, b):
        return np.einsum("eq,eqk,eql->ekl", wq * weight[:, None], a, b)

    def ll(weight, a, b):
        return np.einsum("eq,eqj,eqm->ejm", wq * weight[:, None], a, b)

    ne = space.mesh.n_elements
    blocks = {}

    def pack(tblock=None, lblock=None):
        out = np.zeros((ne, 7, 7))
        if tblock is not None:
            out[:, :4, :4] = tblock
        if lblock is not None:
            out[:, 4:, 4:] = lblock
        return out

    beta, mu, rho = (_coef(space, p, k) for k in ("beta", "mu", "rho"))
    kappa, gamma, lam = (_coef(space, p, k) for k in ("kappa", "gamma", "lam"))
    blocks["M"] = pack(tt(beta, t0, t0) + tt(mu, t1, t1), ll(rho, l0, l0))
    blocks["C_kappa"] = pack(tt(kappa, t1, t1))
    blocks["C_gamma"] = pack(lblock=ll(gamma, l0, l0))
    blocks["K_bend"] = pack(tt(lam, t2, t2))
    blocks["K_membrane"] = pack(lblock=ll(np.ones(ne), l1, l1))
    return blocks


def assemble_load(space: DiscreteSpace, f: Forcing) -> np.ndarray:
    """Load vector with pairing g1-phi, g2-omega on (0, L0) and g3-u, g4-v on (L0, L)."""
    xq, wq = space.xq, space.wq
    left = space.mesh.segment == 0
    gt = np.where(left[:, None], f.evaluate(1, xq), f.evaluate(3, xq))
    gl = np.where(left[:, None], f.evaluate(2, xq), f.evaluate(4, xq))
    ft = np.einsum("eq,eqk->ek", wq * gt, space.transverse_table(0))
    fl = np.einsum("eq,eqj->ej", wq * gl, space.longitudinal_table(0))
    full = np.zeros(space.dofs.n_full)
    np.add.at(full, space.dofs.transverse_map, ft)
    np.add.at(full, space.dofs.longitudinal_map, fl)
    return space.restrict(full)


def assemble(space: DiscreteSpace, p: BeamParameters | None = None,
             f: Forcing | None = None, nonlinear: bool = True) -> AssembledOperators:
    p = space.params if p is None else p
    f = Forcing() if f is None else f
    plan = scatter_plan(space)
    mats = {name: plan.matrix(block) for name, block in _element_blocks(space, p).items()}
    return AssembledOperators(space=space, params=p, forcing=f, load=assemble_load(space, f),
                              nonlinear=nonlinear, **mats)
