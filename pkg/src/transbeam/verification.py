"""Manufactured-solution convergence studies and interface diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import assemble
from .discretization import build_space, evaluate_raw
from .model import BeamParameters, Forcing
from .stationary import solve_stationary


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors on a refinement sequence and the least-squares log-log slope."""

    sizes: tuple
    h: tuple
    errors: tuple
    rate: float
    regression_residual: float
    label: str = ""

    def as_dict(self) -> dict:
        return dict(label=self.label, sizes=list(self.sizes), h=list(self.h),
                    errors=list(self.errors), rate=self.rate,
                    regression_residual=self.regression_residual)


def fit_rate(h, errors) -> tuple:
    """Slope of log(error) against log(h) and the RMS fit residual."""
    lh, le = np.log(np.asarray(h, float)), np.log(np.asarray(errors, float))
    A = np.vstack([lh, np.ones_like(lh)]).T
    coef, *_ = np.linalg.lstsq(A, le, rcond=None)
    resid = le - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def _report(sizes, h, errors, label):
    if len(sizes) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    rate, resid = fit_rate(h, errors)
    return ConvergenceReport(tuple(sizes), tuple(h), tuple(errors), rate, resid, label)


class ManufacturedBeam:
    """Exact static solution of the linearized problem with matching loads.

    ``u = sin(k (L - x))`` on the right; on the left ``phi`` reproduces the
    value, slope and the lambda-scaled second and third derivatives of ``u``
    at L0, plus an ``s^4, s^5`` correction that clamps x = 0.  The
    longitudinal field is one smooth function vanishing at both ends.
    """

    def __init__(self, p: BeamParameters, k: float = 3.0):
        self.p = p
        self.k = k
        self.ratio = p.lambda2 / p.lambda1
        self.c1 = self.c2 = 0.0
        # fix the s^4, s^5 coefficients so that phi(0) = phi'(0) = 0
        s0 = -p.L0
        A = np.array([[s0**4, s0**5], [4 * s0**3, 5 * s0**4]])
        self.c1, self.c2 = np.linalg.solve(A, [-self.phi(0.0), -self.phi(0.0, 1)])

    def _u(self, x, d=0):
        k, L = self.k, self.p.L
        arg = k * (L - np.asarray(x, float))
        # d-th x-derivative of sin(k(L - x))
        table = [np.sin(arg), -k * np.cos(arg), -k**2 * np.sin(arg),
                 k**3 * np.cos(arg), k**4 * np.sin(arg)]
        return table[d]

    def phi(self, x, d=0):
        L0 = self.p.L0
        s = np.asarray(x, float) - L0
        u0, u1 = self._u(L0), self._u(L0, 1)
        r = self.ratio
        c1, c2 = self.c1, self.c2
        if d == 0:
            return u0 + u1 * s + r * (self._u(x) - u0 - u1 * s) + c1 * s**4 + c2 * s**5
        if d == 1:
            return u1 + r * (self._u(x, 1) - u1) + 4 * c1 * s**3 + 5 * c2 * s**4
        if d == 2:
            return r * self._u(x, 2) + 12 * c1 * s**2 + 20 * c2 * s**3
        if d == 3:
            return r * self._u(x, 3) + 24 * c1 * s + 60 * c2 * s**2
        return r * self._u(x, 4) + 24 * c1 + 120 * c2 * s

    def u(self, x, d=0):
        return self._u(x, d)

    def omega(self, x, d=0):
        L = self.p.L
        a = np.pi * np.asarray(x, float) / L
        w = np.pi / L
        if d == 0:
            return np.sin(a) + 0.5 * np.sin(2 * a)
        if d == 1:
            return w * (np.cos(a) + np.cos(2 * a))
        return -w**2 * (np.sin(a) + 2.0 * np.sin(2 * a))

    def forcing(self) -> Forcing:
        p = self.p
        return Forcing(g1=lambda x: p.lambda1 * self.phi(x, 4),
                       g2=lambda x: -self.omega(x, 2),
                       g3=lambda x: p.lambda2 * self.u(x, 4),
                       g4=lambda x: -self.omega(x, 2))


def _l2_errors(space, z, exact: ManufacturedBeam):
    xq = space.xq
    left = (space.mesh.segment == 0)[:, None]
    t_ex = np.where(left, exact.phi(xq), exact.u(xq))
    l_ex = exact.omega(xq)
    et = space.integrate((space.at_quadrature(z, 0) - t_ex) ** 2)
    el = space.integrate((space.at_quadrature(z, 0, longitudinal=True) - l_ex) ** 2)
    return np.sqrt(et), np.sqrt(el)


def manufactured_linear(p: BeamParameters | None = None, sizes=(8, 16, 32, 64),
                        k: float = 3.0) -> tuple:
    """L2 convergence of the linear static problem; returns (transverse, longitudinal).

    ``sizes`` are total element counts, split evenly between the segments.
    """
    p = BeamParameters() if p is None else p
    exact = ManufacturedBeam(p, k)
    f = exact.forcing()
    et, el, hs = [], [], []
    for n in sizes:
        space = build_space(p, n // 2, n - n // 2)
        ops = assemble(space, p, f, nonlinear=False)
        point = solve_stationary(ops, tol=1e-10)
        a, b = _l2_errors(space, point.z, exact)
        et.append(float(a))
        el.append(float(b))
        hs.append(float(space.mesh.h.max()))
    return (_report(sizes, hs, et, "transverse L2"),
            _report(sizes, hs, el, "longitudinal L2"))


def interface_defects(space, p: BeamParameters, z) -> tuple:
    """(moment defect, flux defect) at L0 from one-sided element evaluations."""
    L0 = p.L0
    moment = abs(p.lambda1 * evaluate_raw(space, z, "phi", 2, L0)
                 - p.lambda2 * evaluate_raw(space, z, "u", 2, L0))
    # cubic elements: the third derivative is the element-interior constant
    flux = abs(p.lambda1 * evaluate_raw(space, z, "phi", 3, L0)
               - p.lambda2 * evaluate_raw(space, z, "u", 3, L0))
    return moment, flux


DEFAULT_RECOVERY_LOAD = Forcing(g1=(10.0, 20.0, -15.0), g3=(10.0, 20.0, -15.0))


def transmission_recovery(p: BeamParameters | None = None, sizes=(16, 32, 64),
                          forcing: Forcing | None = None,
                          nonlinear: bool = True) -> tuple:
    """Interface defects of static solutions under refinement; returns (moment, flux)."""
    p = BeamParameters(lambda1=1.0, lambda2=2.0) if p is None else p
    f = DEFAULT_RECOVERY_LOAD if forcing is None else forcing
    moments, fluxes, hs = [], [], []
    for n in sizes:
        space = build_space(p, n // 2, n - n // 2)
        ops = assemble(space, p, f, nonlinear=nonlinear)
        point = solve_stationary(ops, tol=1e-10)
        m, fl = interface_defects(space, p, point.z)
        moments.append(float(m))
        fluxes.append(float(fl))
        hs.append(float(space.mesh.h.max()))
    if len(sizes) >= 3 and min(moments) > 0 and min(fluxes) > 0:
        return (_report(sizes, hs, moments, "moment defect"),
                _report(sizes, hs, fluxes, "flux defect"))
    return (ConvergenceReport(tuple(sizes), tuple(hs), tuple(moments), float("nan"), 0.0,
                              "moment defect"),
            ConvergenceReport(tuple(sizes), tuple(hs), tuple(fluxes), float("nan"), 0.0,
                              "flux defect"))
