"""Scalar functionals of a discrete state, evaluated by direct quadrature.

Nothing here goes through the element kernels, so these values serve as an
independent check on the assembled operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import assemble_load
from .discretization import DiscreteSpace, State
from .errors import TransbeamError
from .model import BeamParameters, Forcing


@dataclass(frozen=True)
class EnergyBreakdown:
    """Unhalved integrals; ``total`` is half their sum."""

    kinetic_transverse: float
    kinetic_rotational: float
    kinetic_longitudinal: float
    bending: float
    q1: float
    q2: float
    total: float
    lyapunov: float

    @property
    def kinetic(self) -> float:
        return 0.5 * (self.kinetic_transverse + self.kinetic_rotational
                      + self.kinetic_longitudinal)


def _fields(space: DiscreteSpace, z):
    return dict(
        t0=space.at_quadrature(z, 0),
        t1=space.at_quadrature(z, 1),
        t2=space.at_quadrature(z, 2),
        l0=space.at_quadrature(z, 0, longitudinal=True),
        l1=space.at_quadrature(z, 1, longitudinal=True),
    )


def _weighted(space, p, name, values):
    coef = np.where(space.mesh.segment == 0, p.segment(0)[name], p.segment(1)[name])
    return float((space.wq * coef[:, None] * values).sum())


def q_functionals(space: DiscreteSpace, z, nonlinear: bool = True) -> tuple:
    """Membrane functionals (Q1 on the left segment, Q2 on the right)."""
    f = _fields(space, z)
    strain = f["l1"] + (0.5 * f["t1"] ** 2 if nonlinear else 0.0)
    return (space.integrate(strain**2, segment=0), space.integrate(strain**2, segment=1))


def work(space: DiscreteSpace, forcing: Forcing | None, z) -> float:
    if forcing is None:
        return 0.0
    return float(assemble_load(space, forcing) @ np.asarray(z))


def energy(space: DiscreteSpace, p: BeamParameters, state: State,
           nonlinear: bool = True, forcing: Forcing | None = None) -> EnergyBreakdown:
    d = _fields(space, state.z)
    r = _fields(space, state.v)
    kt = _weighted(space, p, "beta", r["t0"] ** 2)
    kr = _weighted(space, p, "mu", r["t1"] ** 2)
    kl = _weighted(space, p, "rho", r["l0"] ** 2)
    bend = _weighted(space, p, "lam", d["t2"] ** 2)
    q1, q2 = q_functionals(space, state.z, nonlinear)
    total = 0.5 * (kt + kr + kl + bend + q1 + q2)
    return EnergyBreakdown(kt, kr, kl, bend, q1, q2, total,
                           total - work(space, forcing, state.z))


def dissipation_rates(space: DiscreteSpace, p: BeamParameters, v) -> tuple:
    """(kappa * int phi_tx^2, gamma * int omega_t^2) for a velocity vector."""
    r = _fields(space, v)
    return (_weighted(space, p, "kappa", r["t1"] ** 2),
            _weighted(space, p, "gamma", r["l0"] ** 2))


def velocity_norm_W(space: DiscreteSpace, p: BeamParameters, v, squared: bool = False):
    r = _fields(space, v)
    sq = (_weighted(space, p, "beta", r["t0"] ** 2) + _weighted(space, p, "mu", r["t1"] ** 2)
          + _weighted(space, p, "rho", r["l0"] ** 2))
    return sq if squared else float(np.sqrt(max(sq, 0.0)))


def displacement_norm_V(space: DiscreteSpace, p: BeamParameters, z, squared: bool = False):
    d = _fields(space, z)
    sq = _weighted(space, p, "lam", d["t2"] ** 2) + space.integrate(d["l1"] ** 2)
    return sq if squared else float(np.sqrt(max(sq, 0.0)))


def state_norm_H(space: DiscreteSpace, p: BeamParameters, state: State,
                 squared: bool = False):
    """Phase-space norm: V-norm of displacements plus W-norm of velocities."""
    sq = (displacement_norm_V(space, p, state.z, squared=True)
          + velocity_norm_W(space, p, state.v, squared=True))
    return sq if squared else float(np.sqrt(max(sq, 0.0)))


def decay_phi(space: DiscreteSpace, p: BeamParameters, state: State) -> float:
    """Quadratic decay functional: half the squared H-norm."""
    return 0.5 * state_norm_H(space, p, state, squared=True)


def cross_term_H(space: DiscreteSpace, p: BeamParameters, a: State, b: State,
                 diff: State | None = None, convention: str = "direct") -> float:
    """Nonlinear cross term for the difference of two trajectories.

    ``convention="direct"`` sums the six integrals with a positive sign and a
    unit coefficient on the longitudinal-rate term.  ``convention="identity"``
    flips the sign and halves that coefficient; with it,
    ``dPhi/dt + dissipation = H`` holds exactly for the difference system.
    """
    if convention not in ("direct", "identity"):
        raise TransbeamError("UNKNOWN_CONVENTION", convention)
    diff = a - b if diff is None else diff
    fa, fb = _fields(space, a.z), _fields(space, b.z)
    dz, dv = _fields(space, diff.z), _fields(space, diff.v)
    pa, pb = fa["t1"], fb["t1"]
    wa, wb = fa["l1"], fb["l1"]
    px, wx = dz["t1"], dz["l1"]
    ptx, wtx = dv["t1"], dv["l1"]
    longitudinal_coef = 1.0 if convention == "direct" else 0.5
    density = (0.5 * ((wa + wb) * px + wx * (pa + pb)) * ptx
               + longitudinal_coef * (pa + pb) * px * wtx
               + 0.5 * (pa**2 + pa * pb + pb**2) * px * ptx)
    value = space.integrate(density)
    return value if convention == "direct" else -value


def compactness_ratio(space: DiscreteSpace, state_or_z) -> float:
    """||(u, v)||^2_{H^1(0,L)} / (Q + ||u||^4_{H^2(0,L)}) for the glued fields."""
    z = state_or_z.z if isinstance(state_or_z, State) else state_or_z
    f = _fields(space, z)
    numerator = space.integrate(f["t0"] ** 2 + f["t1"] ** 2 + f["l0"] ** 2 + f["l1"] ** 2)
    h2 = space.integrate(f["t0"] ** 2 + f["t1"] ** 2 + f["t2"] ** 2)
    q = sum(q_functionals(space, z))
    denominator = q + h2**2
    if denominator <= 0.0:
        raise TransbeamError("ZERO_DENOMINATOR", "Q and ||u||_H2 both vanish")
    return numerator / denominator
