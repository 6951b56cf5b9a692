"""Auxiliary weight functions of the stabilization argument, checked on grids.

Two families are built here:

* interface multipliers ``eta, alpha, sigma`` on [0, L];
* the time weight ``varphi`` and the Carleman weight ``r`` on the right
  segment, together with the admissible parameters (T, m, sigma1, sigma2).

Every object records the worst violation of each inequality on a sampling
grid as a residual; a residual <= 0 means the inequality held on that grid.
Certified claims are grid claims.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SolverError
from .model import BeamParameters

GRID_MIN = 1000
MARGIN = 1e-12
# windows are pulled in by this relative amount so edge values clear their bound in floating point
WINDOW_SHRINK = 1e-9


def smoothstep(t):
    """Quintic 6t^5 - 15t^4 + 10t^3 clipped to [0, 1]; C2 at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def smoothstep_d(t):
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * tc**2 * (1.0 - tc) ** 2, 0.0)


def smoothstep_integral(t):
    """Integral of the smoothstep from 0 to t, for t in [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (2.5 - 3.0 * t + t**2)


def jsonable(obj):
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def to_json(cert, indent: int = 2) -> str:
    return json.dumps(jsonable(cert.as_dict()), indent=indent, sort_keys=True)


# ---------------------------------------------------------------------------
# interface multipliers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplierSet:
    """eta, alpha, sigma with their derivatives, sampled on a uniform grid.

    eta' equals -slope on the descending part, blends to zero at L0 - delta,
    rises to eta_hat by L0 - delta/2 and stays there; ``slope`` is fixed by
    eta(L) = 0.
    """

    L0: float
    L: float
    delta: float
    eta_hat: float
    eta_tilde: float
    slope: float
    x: np.ndarray
    eta: np.ndarray
    eta_d: np.ndarray
    alpha: np.ndarray
    alpha_d: np.ndarray
    sigma: np.ndarray
    sigma_d: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(v <= MARGIN for v in self.residuals.values())

    @property
    def sigma_tilde(self) -> float:
        return 2.0 * max(self.eta_hat, self.eta_tilde)

    def evaluate(self, x) -> dict:
        return _multiplier_values(self.L0, self.L, self.delta, self.eta_hat,
                                  self.slope, self.sigma_tilde, np.asarray(x, dtype=float))

    def reverify(self, n_points: int) -> dict:
        """Residuals recomputed on a fresh grid of ``n_points``."""
        x = np.linspace(0.0, self.L, n_points)
        return _multiplier_residuals(self.L0, self.L, self.delta, self.eta_hat,
                                     self.eta_tilde, x, self.evaluate(x))

    def as_dict(self) -> dict:
        return dict(kind="multipliers", L0=self.L0, L=self.L, delta=self.delta,
                    eta_hat=self.eta_hat, eta_tilde=self.eta_tilde, slope=self.slope,
                    sigma_tilde=self.sigma_tilde, grid_points=len(self.x),
                    residuals=dict(self.residuals), valid=self.valid)


def _multiplier_values(L0, L, delta, eta_hat, slope, sigma_tilde, x):
    a = L0 - delta
    b = L0 - 0.5 * delta
    w = 0.25 * a
    s, c = slope, eta_hat
    tau_down = (x - (a - w)) / w
    tau_up = (x - a) / (b - a)
    tau_sig = (x - b) / (L0 - b)

    eta_d = np.where(x <= a, -s * (1.0 - smoothstep(tau_down)), c * smoothstep(tau_up))
    eta_a = -s * (a - 0.5 * w)
    eta = np.select(
        [x <= a - w, x <= a, x <= b],
        [-s * x,
         -s * (a - w) - s * w * (np.clip(tau_down, 0, 1) - smoothstep_integral(tau_down)),
         eta_a + c * (b - a) * smoothstep_integral(tau_up)],
        # written relative to L so that eta(L) = 0 exactly
        default=c * (x - L))
    alpha = c * smoothstep(tau_up)
    alpha_d = c * smoothstep_d(tau_up) / (b - a)
    sigma = sigma_tilde * (1.0 - smoothstep(tau_sig))
    sigma_d = -sigma_tilde * smoothstep_d(tau_sig) / (L0 - b)
    return dict(eta=eta, eta_d=eta_d, alpha=alpha, alpha_d=alpha_d,
                sigma=sigma, sigma_d=sigma_d)


def _multiplier_residuals(L0, L, delta, eta_hat, eta_tilde, x, f) -> dict:
    a = L0 - delta
    b = L0 - 0.5 * delta
    sig_t = 2.0 * max(eta_hat, eta_tilde)
    left = (x > 0) & (x < a)
    rising = (x > a) & (x < L)
    plateau = (x > b) & (x < L)
    pre = (x > 0) & (x < b)
    right = (x > L0) & (x < L)
    ends = _multiplier_values(L0, L, delta, eta_hat,
                              _closure_slope(L0, L, delta, eta_hat), sig_t,
                              np.array([0.0, L, a, L0]))

    def worst(values):
        return float(np.max(values)) if np.size(values) else -np.inf

    return {
        "eta_endpoints": max(abs(ends["eta"][0]), abs(ends["eta"][1])),
        "eta_descending_lower": worst(-eta_tilde - f["eta_d"][left]),
        "eta_descending_upper": worst(f["eta_d"][left]),
        # strict positivity: a non-positive sample is a violation
        "eta_rising_positive": worst(np.where(f["eta_d"][rising] > 0, -1.0, 1.0)),
        "eta_rising_slope": worst(eta_hat - f["eta_d"][plateau]),
        "alpha_start": max(abs(ends["alpha"][2]), abs(ends["alpha_d"][2])),
        "alpha_plateau": worst(np.abs(f["alpha"][plateau] - eta_hat)),
        "alpha_zero_left": worst(np.abs(f["alpha"][left])),
        "alpha_nonnegative": worst(-f["alpha"]),
        "sigma_end": max(abs(ends["sigma"][3]), abs(ends["sigma_d"][3])),
        "sigma_plateau": worst(np.abs(f["sigma"][pre] - sig_t)),
        "sigma_zero_right": worst(np.abs(f["sigma"][right])),
        "sigma_nonnegative": worst(-f["sigma"]),
    }


def _closure_slope(L0, L, delta, eta_hat):
    a = L0 - delta
    b = L0 - 0.5 * delta
    w = 0.25 * a
    return eta_hat * ((L - b) + 0.25 * delta) / (a - 0.5 * w)


def build_multipliers(p: BeamParameters, delta: float, eta_hat: float, eta_tilde: float,
                      n_points: int = 2001) -> MultiplierSet:
    """Construct and grid-verify eta, alpha, sigma; returns only verified sets."""
    if not (0.0 < delta < p.L0):
        raise ConfigurationError("INVALID_ARGUMENT", f"need 0 < delta < L0, got {delta!r}")
    if not (eta_hat > 0 and eta_tilde > 0):
        raise ConfigurationError("INVALID_ARGUMENT", "eta_hat and eta_tilde must be positive")
    if n_points < GRID_MIN:
        raise ConfigurationError("INVALID_ARGUMENT", f"grid needs >= {GRID_MIN} points")
    slope = _closure_slope(p.L0, p.L, delta, eta_hat)
    if slope > eta_tilde:
        raise SolverError("INFEASIBLE_MULTIPLIER",
                          f"closing eta(L)=0 needs descent slope {slope:.6g} > eta_tilde",
                          required_slope=slope)
    sig_t = 2.0 * max(eta_hat, eta_tilde)
    x = np.linspace(0.0, p.L, n_points)
    f = _multiplier_values(p.L0, p.L, delta, eta_hat, slope, sig_t, x)
    res = _multiplier_residuals(p.L0, p.L, delta, eta_hat, eta_tilde, x, f)
    mset = MultiplierSet(p.L0, p.L, delta, eta_hat, eta_tilde, slope, x, residuals=res, **f)
    if not mset.valid:
        bad = {k: v for k, v in res.items() if v > MARGIN}
        raise SolverError("INFEASIBLE_MULTIPLIER", f"grid verification failed: {bad}")
    return mset


# ---------------------------------------------------------------------------
# time weight varphi
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhiWeightCertificate:
    L0: float
    L: float
    T: float
    sigma0: float
    t0: float
    t1: float
    worst_endpoint: float
    worst_point: tuple
    residuals: dict

    @property
    def valid(self) -> bool:
        scale = max(1.0, self.sigma0)
        return all(v <= MARGIN * scale for v in self.residuals.values())

    def as_dict(self) -> dict:
        return dict(kind="phi_weight", L0=self.L0, L=self.L, T=self.T, sigma0=self.sigma0,
                    t0=self.t0, t1=self.t1, worst_endpoint=self.worst_endpoint,
                    worst_point=list(self.worst_point), residuals=dict(self.residuals),
                    valid=self.valid)


def phi_weight(x, t, L0: float, L: float, T: float):
    return (L - x) * T**2 - 5.0 * (L - L0) * (t - 0.5 * T) ** 2


def phi_weight_certificate(p: BeamParameters, T: float,
                           n_grid: int = 1001) -> PhiWeightCertificate:
    """sigma0, the interior window [t0, t1] and the grid residuals for varphi."""
    if not T > 0:
        raise ConfigurationError("INVALID_ARGUMENT", f"T must be positive, got {T!r}")
    L0, L = p.L0, p.L
    sigma0 = (L - L0) * T**2 / 4.0
    x = np.linspace(L0, L, max(n_grid, GRID_MIN))
    at0 = phi_weight(x, 0.0, L0, L, T)
    atT = phi_weight(x, T, L0, L, T)
    i0, iT = int(np.argmax(at0)), int(np.argmax(atT))
    worst, point = (at0[i0], (x[i0], 0.0)) if at0[i0] >= atT[iT] else (atT[iT], (x[iT], T))
    endpoint_residual = float(worst + sigma0)
    if endpoint_residual > MARGIN * max(1.0, sigma0):
        raise SolverError("CONSTRAINT_VIOLATED", "varphi endpoint bound fails",
                          worst_point=point, value=float(worst))
    # min over x sits at x = L: -5(L-L0)(t-T/2)^2 >= -sigma0/2
    half = min(T / math.sqrt(40.0), 0.5 * T) * (1.0 - WINDOW_SHRINK)
    t0, t1 = 0.5 * T - half, 0.5 * T + half
    t = np.linspace(t0, t1, max(n_grid, GRID_MIN))
    X, Tt = np.meshgrid(x, t, indexing="ij")
    window_min = float(phi_weight(X, Tt, L0, L, T).min())
    return PhiWeightCertificate(
        L0=L0, L=L, T=T, sigma0=sigma0, t0=t0, t1=t1,
        worst_endpoint=float(worst), worst_point=tuple(float(v) for v in point),
        residuals={"endpoint": endpoint_residual,
                   "window": float(-0.5 * sigma0 - window_min),
                   "window_order": float(max(-t0, t0 - 0.5 * T, 0.5 * T - t1, t1 - T))})


# ---------------------------------------------------------------------------
# Carleman weight r
# ---------------------------------------------------------------------------

def t1_bound(rho: float, L: float, L_tilde: float) -> float:
    gap = math.sqrt(rho) * (L_tilde - L)
    return max(math.sqrt(4 * L_tilde**2 + gap), 4 * L_tilde**2 / gap + 1.0)


def m_interval(rho: float, L: float, L_tilde: float, T: float, sigma1: float) -> tuple:
    gap = math.sqrt(rho) * (L_tilde - L)
    return ((4 * L_tilde**2 + 4 * sigma1) / T**2, (gap + 4 * sigma1) / (4 * T))


def feasibility_bound(rho: float, L: float, L_tilde: float, sigma1: float) -> float:
    """Smallest T for which the m-interval is nonempty (exclusive)."""
    gap = math.sqrt(rho) * (L_tilde - L)
    return 4 * (4 * L_tilde**2 + 4 * sigma1) / (gap + 4 * sigma1)


def time_bound(p: BeamParameters) -> float:
    return 10.0 * (p.L - p.L0) * math.sqrt(p.mu2 / p.lambda2 + p.rho2)


@dataclass(frozen=True)
class CarlemanCertificate:
    rho: float
    L0: float
    L: float
    L_tilde: float
    T: float
    m: float
    sigma0: float
    sigma1: float
    sigma2: float
    t0: float
    t1: float
    mu: float
    tau: float
    residuals: dict
    binding: str = ""

    @property
    def valid(self) -> bool:
        scale = max(1.0, self.L_tilde**2, self.T)
        return all(v <= MARGIN * scale for v in self.residuals.values())

    def as_dict(self) -> dict:
        keys = ("rho", "L0", "L", "L_tilde", "T", "m", "sigma0", "sigma1", "sigma2",
                "t0", "t1", "mu", "tau", "binding")
        out = {k: getattr(self, k) for k in keys}
        out.update(kind="carleman", residuals=dict(self.residuals), valid=self.valid)
        return out


def carleman_weight(x, t, L_tilde: float, m: float, T: float):
    return (x - L_tilde) ** 2 - m * (t - 0.5 * T) ** 2


def _check_geometry(p, L_tilde, rho):
    if not L_tilde > p.L:
        raise ConfigurationError("INVALID_ARGUMENT", f"need L_tilde > L, got {L_tilde!r}")
    if not rho > 0:
        raise ConfigurationError("INVALID_ARGUMENT", "rho must be positive")


def verify_carleman(rho: float, p: BeamParameters, L_tilde: float, T: float, m: float,
                    sigma1: float, sigma2: float | None = None, mu: float = 1.0,
                    tau: float = 1.0, n_grid: int = 1001,
                    binding: str = "") -> CarlemanCertificate:
    """Evaluate every parameter constraint and grid inequality for given (T, m)."""
    _check_geometry(p, L_tilde, rho)
    L0, L = p.L0, p.L
    gap = math.sqrt(rho) * (L_tilde - L)
    sigma2 = 0.5 * (L_tilde - L) ** 2 if sigma2 is None else sigma2
    lo, hi = m_interval(rho, L, L_tilde, T, sigma1)
    n = max(n_grid, GRID_MIN)
    x = np.linspace(L0, L, n)
    endpoint = max(carleman_weight(x, 0.0, L_tilde, m, T).max(),
                   carleman_weight(x, T, L_tilde, m, T).max())
    slack = (L_tilde - L) ** 2 - sigma2
    half = math.sqrt(slack / m) * (1.0 - WINDOW_SHRINK) if (slack > 0 and m > 0) else 0.0
    half = min(half, 0.99 * 0.5 * T)
    t0, t1 = 0.5 * T - half, 0.5 * T + half
    X, Tt = np.meshgrid(x, np.linspace(t0, t1, n), indexing="ij")
    window_min = float(carleman_weight(X, Tt, L_tilde, m, T).min())
    vertex_min = float(carleman_weight(x, 0.5 * T, L_tilde, m, T).min())

    def strict(v):
        # strict inequalities: zero is a violation
        return float(v) if v < 0 else float(v) + 1.0

    residuals = {
        "sigma1_range": strict(max(-sigma1, sigma1 - gap / 4.0)),
        "T1": strict(t1_bound(rho, L, L_tilde) - T),
        "T_squared": strict(4 * L_tilde**2 + 4 * sigma1 - T**2),
        "m_lower": strict(lo - m),
        "m_upper": strict(m - hi),
        "m_unit": strict(max(-m, m - 1.0)),
        "time_condition": strict(time_bound(p) - T),
        "q1": float(endpoint + sigma1),
        "sigma2_range": strict(max(-sigma2, sigma2 - (L_tilde - L) ** 2)),
        "q2": float(sigma2 - window_min),
        "window": strict(max(-t0, t0 - 0.5 * T, 0.5 * T - t1, t1 - T)),
        "vertex": float((L - L_tilde) ** 2 - vertex_min),
    }
    return CarlemanCertificate(rho=rho, L0=L0, L=L, L_tilde=L_tilde, T=T, m=m,
                               sigma0=(L - L0) * T**2 / 4.0, sigma1=sigma1, sigma2=sigma2,
                               t0=t0, t1=t1, mu=mu, tau=tau, residuals=residuals,
                               binding=binding)


def carleman_certificate(rho: float, p: BeamParameters, L_tilde: float, budget: int = 50,
                         sigma1: float | None = None, sigma2: float | None = None,
                         mu: float = 1.0, tau: float = 1.0, growth: float = 1.05,
                         n_grid: int = 1001) -> CarlemanCertificate:
    """Search T upward from the largest lower bound; m is the interval midpoint.

    Candidates are ``T_k = T_min * growth**k`` for k = 1..budget, so a larger
    budget only appends candidates.
    """
    _check_geometry(p, L_tilde, rho)
    gap = math.sqrt(rho) * (L_tilde - p.L)
    sigma1 = 0.4 * gap / 4.0 if sigma1 is None else sigma1
    bounds = {
        "T1": t1_bound(rho, p.L, L_tilde),
        "T_squared": math.sqrt(4 * L_tilde**2 + 4 * sigma1),
        "m_interval_nonempty": feasibility_bound(rho, p.L, L_tilde, sigma1),
        "time_condition": time_bound(p),
    }
    binding = max(bounds, key=bounds.get)
    t_min = bounds[binding]
    for k in range(1, budget + 1):
        T = t_min * growth**k
        lo, hi = m_interval(rho, p.L, L_tilde, T, sigma1)
        hi = min(hi, 1.0)
        if lo >= hi:
            continue
        cert = verify_carleman(rho, p, L_tilde, T, 0.5 * (lo + hi), sigma1, sigma2,
                               mu, tau, n_grid, binding=binding)
        if cert.valid:
            return cert
    raise SolverError("SEARCH_EXHAUSTED", f"no feasible T in {budget} candidates",
                      bounds=bounds)


@dataclass(frozen=True)
class GapReport:
    """Whether a T above the first time bound alone leaves room for m."""

    T: float
    sigma1: float
    t1_bound: float
    satisfies_t1: bool
    m_lower: float
    m_upper: float
    interval_empty: bool
    required_T: float

    def as_dict(self) -> dict:
        return dict(kind="t1_gap", T=self.T, sigma1=self.sigma1, t1_bound=self.t1_bound,
                    satisfies_t1=self.satisfies_t1, m_lower=self.m_lower,
                    m_upper=self.m_upper, interval_empty=self.interval_empty,
                    required_T=self.required_T)


def t1_gap_report(rho: float, p: BeamParameters, L_tilde: float, T: float,
                  sigma1: float) -> GapReport:
    _check_geometry(p, L_tilde, rho)
    bound = t1_bound(rho, p.L, L_tilde)
    lo, hi = m_interval(rho, p.L, L_tilde, T, sigma1)
    return GapReport(T=T, sigma1=sigma1, t1_bound=bound, satisfies_t1=T > bound,
                     m_lower=lo, m_upper=hi, interval_empty=not lo < hi,
                     required_T=feasibility_bound(rho, p.L, L_tilde, sigma1))
