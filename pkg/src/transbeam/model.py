"""Physical parameters, forcing and validation of the standing hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigurationError

COEFFICIENTS = (
    "beta1", "beta2", "rho1", "rho2", "mu1", "mu2",
    "lambda1", "lambda2", "kappa", "gamma",
)

SIMULATE = "simulate"
ATTRACTOR = "attractor"


@dataclass(frozen=True)
class BeamParameters:
    """Coefficients of the two-segment beam.

    The left segment (0, L0) carries the structural damping ``kappa`` and the
    longitudinal damping ``gamma``; the right segment (L0, L) is undamped.
    """

    beta1: float = 1.0
    beta2: float = 1.0
    rho1: float = 1.0
    rho2: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    kappa: float = 1.0
    gamma: float = 1.0
    L0: float = 0.5
    L: float = 1.0

    def replace(self, **changes) -> "BeamParameters":
        values = self.as_dict()
        values.update(changes)
        return BeamParameters(**values)

    def as_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    def segment(self, side: int) -> dict:
        """Coefficients of segment 0 (left) or 1 (right) by generic name."""
        if side == 0:
            return dict(beta=self.beta1, rho=self.rho1, mu=self.mu1,
                        lam=self.lambda1, kappa=self.kappa, gamma=self.gamma)
        return dict(beta=self.beta2, rho=self.rho2, mu=self.mu2,
                    lam=self.lambda2, kappa=0.0, gamma=0.0)


Load = Union[None, float, Sequence[float], Callable]


def _normalize_load(g):
    if g is None:
        return ()
    if callable(g):
        return g
    if np.isscalar(g):
        return (float(g),)
    coeffs = tuple(float(c) for c in g)
    # trailing zeros carry no information and would break equality checks
    while coeffs and coeffs[-1] == 0.0:
        coeffs = coeffs[:-1]
    return coeffs


@dataclass(frozen=True)
class Forcing:
    """Autonomous loads g1 (on phi), g2 (on omega), g3 (on u), g4 (on v).

    Each entry is either polynomial coefficients in ``x`` (ascending powers;
    degree <= 3 keeps load quadrature exact) or a callable ``g(x)``.
    ``time_dependent`` marks a load that the simulator must refuse.
    """

    g1: Load = None
    g2: Load = None
    g3: Load = None
    g4: Load = None
    time_dependent: bool = False

    def __post_init__(self):
        for name in ("g1", "g2", "g3", "g4"):
            object.__setattr__(self, name, _normalize_load(getattr(self, name)))

    @classmethod
    def from_samples(cls, x, values: dict) -> "Forcing":
        """Loads from nodal samples, linearly interpolated between samples."""
        x = np.asarray(x, dtype=float)
        loads = {}
        for name, y in values.items():
            y = np.asarray(y, dtype=float)
            loads[name] = (lambda xs, _y=y: np.interp(xs, x, _y))
        return cls(**loads)

    def component(self, index: int):
        return getattr(self, f"g{index}")

    def evaluate(self, index: int, x):
        g = self.component(index)
        x = np.asarray(x, dtype=float)
        if callable(g):
            return np.broadcast_to(np.asarray(g(x), dtype=float), x.shape).copy()
        if not g:
            return np.zeros_like(x)
        return np.polynomial.polynomial.polyval(x, g)

    def is_zero(self, index: int) -> bool:
        g = self.component(index)
        return (not callable(g)) and len(g) == 0

    @property
    def serializable(self) -> bool:
        return not any(callable(self.component(i)) for i in range(1, 5))

    def as_dict(self) -> dict:
        if not self.serializable:
            raise ConfigurationError("FORCING_NOT_SERIALIZABLE",
                                     "callable loads cannot be written to a config")
        return {f"g{i}": list(self.component(i)) for i in range(1, 5)}


@dataclass(frozen=True)
class Finding:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple = field(default_factory=tuple)
    warnings: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list:
        return [f.code for f in self.errors + self.warnings]

    def raise_if_errors(self):
        if self.errors:
            first = self.errors[0]
            raise ConfigurationError(
                first.code, "; ".join(f.message for f in self.errors))


def validate_parameters(p: BeamParameters, f: Forcing | None = None,
                        mode: str = SIMULATE) -> ValidationReport:
    """Check a configuration; never raises, all findings go in the report."""
    f = Forcing() if f is None else f
    errors, warnings = [], []
    for name in COEFFICIENTS:
        value = getattr(p, name)
        if not np.isfinite(value) or value <= 0:
            errors.append(Finding("NONPOSITIVE_COEFFICIENT",
                                  f"{name} must be positive, got {value!r}"))
    if not (np.isfinite(p.L0) and np.isfinite(p.L) and 0 < p.L0 < p.L):
        errors.append(Finding("DEGENERATE_GEOMETRY",
                              f"need 0 < L0 < L, got L0={p.L0!r}, L={p.L!r}"))

    # hypotheses of the asymptotic-smoothness result; exploration stays allowed
    for lhs, rhs, rel in (("beta1", "beta2", ">="), ("rho1", "rho2", ">="),
                          ("mu1", "mu2", ">="), ("lambda1", "lambda2", "<=")):
        a, b = getattr(p, lhs), getattr(p, rhs)
        held = a >= b if rel == ">=" else a <= b
        if not held:
            warnings.append(Finding("KOEF_VIOLATED",
                                    f"{lhs}{rel}{rhs} fails ({a!r} vs {b!r})"))

    if mode not in (SIMULATE, ATTRACTOR):
        errors.append(Finding("UNKNOWN_MODE", f"mode {mode!r}"))
    if f.time_dependent:
        errors.append(Finding("FORCING_NONAUTONOMOUS",
                              "only time-independent loads are supported"))
    if mode == ATTRACTOR:
        for i in (2, 4):
            if not f.is_zero(i):
                errors.append(Finding("ATTRACTOR_MODE_VIOLATION",
                                      f"g{i} must vanish identically in attractor mode"))
    return ValidationReport(tuple(errors), tuple(warnings))
