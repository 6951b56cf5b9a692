"""Conforming finite element spaces for the two-segment beam.

Transverse fields (phi on the left, u on the right) use two-node C1 Hermite
cubics with value and slope unknowns.  Because phi and u share the value and
slope at the interface node, the pair is stored as one C1 field on [0, L].
Longitudinal fields (omega, v) use C0 quadratics, likewise glued at L0.

All unknown vectors ("free" vectors) exclude the clamped/pinned end DOFs:
phi(0), phi'(0), omega(0), u(L), v(L).  Their layout is
``[transverse free | longitudinal free]``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError
from .model import BeamParameters, validate_parameters

FIELDS = ("phi", "u", "omega", "v")
TRANSVERSE = ("phi", "u")
BC_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule mapped to the unit interval (weights sum to 1)."""

    points: np.ndarray
    weights: np.ndarray
    order: int

    @classmethod
    def gauss(cls, n_points: int) -> "QuadratureRule":
        x, w = np.polynomial.legendre.leggauss(n_points)
        return cls(0.5 * (x + 1.0), 0.5 * w, 2 * n_points - 1)


@dataclass(frozen=True)
class Mesh1D:
    nodes_left: np.ndarray
    nodes_right: np.ndarray
    interface_index: int

    def __post_init__(self):
        for seg in (self.nodes_left, self.nodes_right):
            if np.any(np.diff(seg) <= 0):
                raise ConfigurationError("MESH_NOT_MONOTONE", "node coordinates must increase")
        if self.nodes_left[-1] != self.nodes_right[0]:
            raise ConfigurationError("MESH_INTERFACE", "segments must share the interface node")
        if self.interface_index != len(self.nodes_left) - 1:
            raise ConfigurationError("MESH_INTERFACE", "interface index mismatch")

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.concatenate([self.nodes_left, self.nodes_right[1:]])

    @property
    def n_left(self) -> int:
        return len(self.nodes_left) - 1

    @property
    def n_right(self) -> int:
        return len(self.nodes_right) - 1

    @property
    def n_elements(self) -> int:
        return self.n_left + self.n_right

    @cached_property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def segment(self) -> np.ndarray:
        """0 for elements in (0, L0), 1 for elements in (L0, L)."""
        return np.r_[np.zeros(self.n_left, int), np.ones(self.n_right, int)]


@dataclass(frozen=True)
class DofMap:
    """Element-to-global tables in the combined full numbering.

    Full numbering: transverse (value, slope) pairs per node first, then the
    longitudinal vertex/midpoint unknowns.  ``free`` lists the full indices
    kept in reduced vectors; ``full_to_free`` holds -1 for constrained DOFs.
    """

    transverse_map: np.ndarray
    longitudinal_map: np.ndarray
    constrained: tuple
    n_transverse_full: int
    n_full: int
    free: np.ndarray
    full_to_free: np.ndarray
    n_transverse_free: int

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def n_longitudinal_free(self) -> int:
        return self.n_free - self.n_transverse_free

    @property
    def element_dofs(self) -> np.ndarray:
        return np.hstack([self.transverse_map, self.longitudinal_map])


def _build_dofmap(mesh: Mesh1D) -> DofMap:
    ne = mesh.n_elements
    nn = ne + 1
    n_t = 2 * nn
    e = np.arange(ne)
    tmap = np.stack([2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3], axis=1)
    lmap = n_t + np.stack([2 * e, 2 * e + 1, 2 * e + 2], axis=1)
    n_full = n_t + 2 * ne + 1
    # phi(0), phi'(0), u(L) | omega(0), v(L)
    constrained = (0, 1, 2 * ne, n_t, n_t + 2 * ne)
    mask = np.ones(n_full, bool)
    mask[list(constrained)] = False
    free = np.flatnonzero(mask)
    full_to_free = -np.ones(n_full, int)
    full_to_free[free] = np.arange(len(free))
    return DofMap(tmap, lmap, constrained, n_t, n_full, free, full_to_free,
                  int(np.count_nonzero(free < n_t)))


def hermite_basis(xi, order: int) -> np.ndarray:
    """Reference Hermite functions (value, slope shapes) and their xi-derivatives."""
    xi = np.asarray(xi, dtype=float)
    one = np.ones_like(xi)
    if order == 0:
        cols = [1 - 3 * xi**2 + 2 * xi**3, xi - 2 * xi**2 + xi**3,
                3 * xi**2 - 2 * xi**3, -xi**2 + xi**3]
    elif order == 1:
        cols = [-6 * xi + 6 * xi**2, 1 - 4 * xi + 3 * xi**2,
                6 * xi - 6 * xi**2, -2 * xi + 3 * xi**2]
    elif order == 2:
        cols = [-6 + 12 * xi, -4 + 6 * xi, 6 - 12 * xi, -2 + 6 * xi]
    elif order == 3:
        cols = [12 * one, 6 * one, -12 * one, 6 * one]
    else:
        cols = [0 * one] * 4
    return np.stack(cols, axis=-1)


def lagrange2_basis(xi, order: int) -> np.ndarray:
    """Reference quadratic Lagrange functions on nodes 0, 1/2, 1."""
    xi = np.asarray(xi, dtype=float)
    one = np.ones_like(xi)
    if order == 0:
        cols = [(1 - xi) * (1 - 2 * xi), 4 * xi * (1 - xi), xi * (2 * xi - 1)]
    elif order == 1:
        cols = [-3 + 4 * xi, 4 - 8 * xi, 4 * xi - 1]
    elif order == 2:
        cols = [4 * one, -8 * one, 4 * one]
    else:
        cols = [0 * one] * 3
    return np.stack(cols, axis=-1)


def _physical_hermite(xi, h, order):
    """Hermite shapes in x for elements of length ``h`` (broadcast over h)."""
    ref = hermite_basis(xi, order)
    h = np.asarray(h, dtype=float)[..., None]
    scale = np.array([1.0, 0.0, 1.0, 0.0])
    slope = np.array([0.0, 1.0, 0.0, 1.0])
    return ref * (scale + slope * h) / h**order


@dataclass(frozen=True)
class State:
    """Free-DOF displacement ``z`` and velocity ``v`` at time ``t``."""

    z: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __add__(self, other: "State") -> "State":
        return State(self.z + other.z, self.v + other.v, self.t)

    def __sub__(self, other: "State") -> "State":
        return State(self.z - other.z, self.v - other.v, self.t)

    def scaled(self, factor: float) -> "State":
        return State(factor * self.z, factor * self.v, self.t)

    @classmethod
    def zero(cls, space: "DiscreteSpace") -> "State":
        n = space.dofs.n_free
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    params: BeamParameters
    mesh: Mesh1D
    dofs: DofMap
    quadrature: QuadratureRule = field(default_factory=lambda: QuadratureRule.gauss(5))

    # -- per-element coefficient tables -------------------------------------
    def coefficient(self, name: str) -> np.ndarray:
        left = self.params.segment(0)[name]
        right = self.params.segment(1)[name]
        return np.where(self.mesh.segment == 0, left, right).astype(float)

    # -- basis tables at quadrature points (n_el, nq, k) ----------------------
    @cached_property
    def xq(self) -> np.ndarray:
        m = self.mesh
        return m.nodes[:-1, None] + m.h[:, None] * self.quadrature.points[None, :]

    @cached_property
    def wq(self) -> np.ndarray:
        """Physical quadrature weights (n_el, nq)."""
        return self.mesh.h[:, None] * self.quadrature.weights[None, :]

    def transverse_table(self, order: int) -> np.ndarray:
        return self._tables[("T", order)]

    def longitudinal_table(self, order: int) -> np.ndarray:
        return self._tables[("L", order)]

    @cached_property
    def _tables(self) -> dict:
        xi = self.quadrature.points
        h = self.mesh.h
        out = {}
        for order in range(3):
            out[("T", order)] = np.ascontiguousarray(
                _physical_hermite(xi[None, :], h[:, None], order))
        for order in range(2):
            ref = lagrange2_basis(xi, order)
            out[("L", order)] = np.ascontiguousarray(
                ref[None, :, :] / h[:, None, None] ** order)
        return out

    # -- vector helpers --------------------------------------------------------
    def full(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros(self.dofs.n_full)
        out[self.dofs.free] = z
        return out

    def restrict(self, full_vector) -> np.ndarray:
        return np.asarray(full_vector, dtype=float)[self.dofs.free]

    def transverse_slice(self) -> slice:
        return slice(0, self.dofs.n_transverse_free)

    def longitudinal_slice(self) -> slice:
        return slice(self.dofs.n_transverse_free, self.dofs.n_free)

    def at_quadrature(self, z, order: int, longitudinal: bool = False) -> np.ndarray:
        """Field derivative of the given order at all quadrature points (n_el, nq)."""
        full = self.full(z)
        if longitudinal:
            local = full[self.dofs.longitudinal_map]
            table = self.longitudinal_table(order)
        else:
            local = full[self.dofs.transverse_map]
            table = self.transverse_table(order)
        return np.einsum("eqk,ek->eq", table, local)

    def integrate(self, values, segment: int | None = None) -> float:
        """Quadrature sum of (n_el, nq) values, optionally over one segment."""
        weighted = (self.wq * values).sum(axis=1)
        if segment is not None:
            weighted = weighted[self.mesh.segment == segment]
        return float(weighted.sum())

    @cached_property
    def version(self) -> str:
        """Hash of the mesh and DOF layout; stamped on snapshots."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.mesh.nodes).tobytes())
        digest.update(np.ascontiguousarray(self.dofs.free).tobytes())
        digest.update(str(self.dofs.n_full).encode())
        return digest.hexdigest()[:16]


def build_space(p: BeamParameters, n_left: int, n_right: int,
                quadrature_points: int = 5) -> DiscreteSpace:
    """Uniform mesh on each segment; quadrature exact to degree 2*points-1."""
    validate_parameters(p).raise_if_errors()
    if n_left < 2 or n_right < 2:
        raise ConfigurationError("MESH_TOO_COARSE",
                                 f"need at least 2 elements per segment, got {n_left}+{n_right}")
    if 2 * quadrature_points - 1 < 8:
        raise ConfigurationError("QUADRATURE_TOO_LOW", "membrane energy needs degree 8")
    left = np.linspace(0.0, p.L0, n_left + 1)
    right = np.linspace(p.L0, p.L, n_right + 1)
    left[-1] = right[0] = p.L0
    mesh = Mesh1D(left, right, n_left)
    return DiscreteSpace(p, mesh, _build_dofmap(mesh), QuadratureRule.gauss(quadrature_points))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _segment_of(field_name: str) -> int:
    return 0 if field_name in ("phi", "omega") else 1


def _locate(space: DiscreteSpace, field_name: str, x) -> np.ndarray:
    m = space.mesh
    seg = _segment_of(field_name)
    nodes = m.nodes_left if seg == 0 else m.nodes_right
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tol = 1e-14 * space.params.L
    if np.any(x < nodes[0] - tol) or np.any(x > nodes[-1] + tol):
        raise ConfigurationError("OUT_OF_SEGMENT",
                                 f"{field_name} lives on [{nodes[0]}, {nodes[-1]}]")
    # nodes resolve to the element on their left, segment starts to the first element
    local = np.clip(np.searchsorted(nodes, x, side="left") - 1, 0, len(nodes) - 2)
    return local + (0 if seg == 0 else m.n_left)


def evaluate_raw(space: DiscreteSpace, vector, field_name: str, order: int, x):
    """Evaluate a free vector's field; allows the element-wise third derivative."""
    if field_name not in FIELDS:
        raise ConfigurationError("UNKNOWN_FIELD", field_name)
    scalar = np.ndim(x) == 0
    elem = _locate(space, field_name, x)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    m = space.mesh
    h = m.h[elem]
    xi = np.clip((xs - m.nodes[elem]) / h, 0.0, 1.0)
    full = space.full(vector)
    if field_name in TRANSVERSE:
        shapes = _physical_hermite(xi, h, order)
        local = full[space.dofs.transverse_map[elem]]
    else:
        shapes = lagrange2_basis(xi, order) / h[:, None] ** order
        local = full[space.dofs.longitudinal_map[elem]]
    values = np.einsum("nk,nk->n", shapes, local)
    return float(values[0]) if scalar else values


def evaluate(space: DiscreteSpace, state: State, field_name: str, order: int, x,
             rate: bool = False):
    """Exact value of a finite element field or its x-derivative.

    ``rate=True`` evaluates the velocity field instead of the displacement.
    At an interior node the left element is used; at the interface, ``phi``
    and ``omega`` take the left limit and ``u`` and ``v`` the right limit.
    """
    limit = 2 if field_name in TRANSVERSE else 1
    if order < 0 or order > limit:
        raise ConfigurationError("ORDER_UNSUPPORTED",
                                 f"{field_name} supports derivatives up to {limit}")
    return evaluate_raw(space, state.v if rate else state.z, field_name, order, x)


# ---------------------------------------------------------------------------
# interpolation of initial data
# ---------------------------------------------------------------------------

def _with_derivative(obj, name):
    if obj is None:
        return None
    if isinstance(obj, (tuple, list)) and len(obj) == 2:
        return tuple(obj)
    if hasattr(obj, "deriv"):
        return obj, obj.deriv()
    raise ConfigurationError("DERIVATIVE_REQUIRED",
                             f"{name}: pass (f, df) or a polynomial with .deriv()")


def _call(f, x):
    return np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x)).astype(float)


def _transverse_full(space, left, right, name):
    m = space.mesh
    nodes = m.nodes
    k = m.interface_index
    values = np.zeros(len(nodes))
    slopes = np.zeros(len(nodes))
    if left is not None:
        values[:k + 1] = _call(left[0], nodes[:k + 1])
        slopes[:k + 1] = _call(left[1], nodes[:k + 1])
    right_vals = np.zeros(len(nodes) - k)
    right_slopes = np.zeros(len(nodes) - k)
    if right is not None:
        right_vals = _call(right[0], nodes[k:])
        right_slopes = _call(right[1], nodes[k:])
    problems = []
    if abs(values[k] - right_vals[0]) > BC_TOL:
        problems.append(f"{name}: value mismatch at L0")
    if abs(slopes[k] - right_slopes[0]) > BC_TOL:
        problems.append(f"{name}: slope mismatch at L0")
    if abs(values[0]) > BC_TOL or abs(slopes[0]) > BC_TOL:
        problems.append(f"{name}: clamped end x=0 violated")
    if abs(right_vals[-1]) > BC_TOL:
        problems.append(f"{name}: pinned end x=L violated")
    values[k + 1:] = right_vals[1:]
    slopes[k + 1:] = right_slopes[1:]
    full = np.empty(2 * len(nodes))
    full[0::2] = values
    full[1::2] = slopes
    return full, problems


def _longitudinal_full(space, left, right, name):
    m = space.mesh
    ne = m.n_elements
    pts = np.empty(2 * ne + 1)
    pts[0::2] = m.nodes
    pts[1::2] = 0.5 * (m.nodes[:-1] + m.nodes[1:])
    k = 2 * m.interface_index
    lv = _call(left, pts[:k + 1]) if left is not None else np.zeros(k + 1)
    rv = _call(right, pts[k:]) if right is not None else np.zeros(len(pts) - k)
    problems = []
    if abs(lv[-1] - rv[0]) > BC_TOL:
        problems.append(f"{name}: value mismatch at L0")
    if abs(lv[0]) > BC_TOL:
        problems.append(f"{name}: fixed end x=0 violated")
    if abs(rv[-1]) > BC_TOL:
        problems.append(f"{name}: fixed end x=L violated")
    return np.concatenate([lv, rv[1:]]), problems


def interpolate_vector(space: DiscreteSpace, phi=None, u=None, omega=None, v=None,
                       label: str = "field") -> np.ndarray:
    """Nodal interpolant of one displacement-like quadruple as a free vector."""
    t_full, p1 = _transverse_full(space, _with_derivative(phi, "phi"),
                                  _with_derivative(u, "u"), f"{label} (phi,u)")
    l_full, p2 = _longitudinal_full(space, omega, v, f"{label} (omega,v)")
    problems = p1 + p2
    if problems:
        raise ConfigurationError("BC_INCOMPATIBLE", "; ".join(problems))
    return space.restrict(np.concatenate([t_full, l_full]))


def interpolate_initial(space: DiscreteSpace, phi0=None, phi1=None, omega0=None,
                        omega1=None, u0=None, u1=None, v0=None, v1=None,
                        t: float = 0.0) -> State:
    """Interpolate initial displacements (``*0``) and velocities (``*1``).

    Transverse entries are ``(f, df)`` pairs or polynomial objects exposing
    ``deriv()``; longitudinal entries are plain callables.  ``None`` is zero.
    """
    z = interpolate_vector(space, phi0, u0, omega0, v0, label="displacement")
    v = interpolate_vector(space, phi1, u1, omega1, v1, label="velocity")
    return State(z, v, t)


def smooth_state(space: DiscreteSpace, rng=None, amplitude: float = 0.05,
                 velocity_amplitude: float | None = None) -> State:
    """Smooth admissible state built from a few boundary-compatible shapes.

    Without ``rng`` this is the fixed reference state used by the CLI and
    the acceptance runs; with ``rng`` the shape weights are random.
    """
    L = space.params.L
    vel = amplitude if velocity_amplitude is None else velocity_amplitude
    if rng is None:
        wt = np.array([1.0, 0.5, 0.0])
        wl = np.array([1.0, 0.0, 0.3])
        vt = np.array([0.0, 1.0, 0.5])
        vl = np.array([0.5, 1.0, 0.0])
    else:
        wt, wl, vt, vl = (rng.uniform(-1.0, 1.0, 3) for _ in range(4))

    def transverse(w):
        # s^2 (1 - s) * {1, s, s^2}: clamped at 0, pinned at L, smooth at L0
        def f(x):
            s = np.asarray(x) / L
            return s**2 * (1 - s) * (w[0] + w[1] * s + w[2] * s**2)

        def df(x):
            s = np.asarray(x) / L
            g = s**2 * (1 - s)
            dg = 2 * s - 3 * s**2
            poly = w[0] + w[1] * s + w[2] * s**2
            dpoly = w[1] + 2 * w[2] * s
            return (dg * poly + g * dpoly) / L
        return f, df

    def longitudinal(w):
        def f(x):
            s = np.asarray(x) / L
            return (w[0] * np.sin(np.pi * s) + w[1] * np.sin(2 * np.pi * s)
                    + w[2] * np.sin(3 * np.pi * s))
        return f

    z = interpolate_vector(space, transverse(wt), transverse(wt),
                           longitudinal(wl), longitudinal(wl))
    v = interpolate_vector(space, transverse(vt), transverse(vt),
                           longitudinal(vl), longitudinal(vl))
    return State(amplitude * z, vel * v)


def prolong(coarse: DiscreteSpace, fine: DiscreteSpace, vector) -> np.ndarray:
    """Inject a coarse free vector into a nested finer space (exact)."""
    def pair(name):
        return (lambda x: evaluate_raw(coarse, vector, name, 0, x),
                lambda x: evaluate_raw(coarse, vector, name, 1, x))

    def single(name):
        return lambda x: evaluate_raw(coarse, vector, name, 0, x)

    t_full, _ = _transverse_full(fine, pair("phi"), pair("u"), "prolong")
    l_full, _ = _longitudinal_full(fine, single("omega"), single("v"), "prolong")
    return fine.restrict(np.concatenate([t_full, l_full]))
