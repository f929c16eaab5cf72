"""Simulation of endogenous networks, covariates, errors and outcomes."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .data import Dataset, GroupData
from .errors import ConfigError, GraphError
from .graph import Graph
from .kernels import row_normalize_stack

__all__ = [
    "StructuralParams",
    "FormationConfig",
    "ErrorCoupling",
    "PHI_VARIANTS",
    "default_threshold",
    "simulate_network",
    "draw_covariates",
    "draw_errors",
    "simulate_outcomes",
    "reduced_form_check",
    "simulate_dataset",
    "group_rng",
    "simulate_arrays",
]

PHI_VARIANTS = ("zero", "linear", "exp3", "sine3")
FORMATION_KINDS = ("cooperative", "noncooperative")
PAIR_SHOCKS = ("normal", "logistic")


def default_threshold():
    """Link threshold that makes ``P(eta_i + eta_j > c) = 1/4`` for standard normal eta."""
    return -math.sqrt(2.0) * float(ndtri(0.25))


@dataclass(frozen=True)
class StructuralParams:
    alpha: float = 0.0
    delta: float = 0.5
    beta: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        if not abs(self.delta) < 1:
            raise ConfigError(f"|delta| must be below 1, got {self.delta}")

    @property
    def theta(self):
        """Parameters in regressor order ``(alpha, delta, beta, gamma)``."""
        return np.array([self.alpha, self.delta, self.beta, self.gamma])

    @property
    def mu(self):
        return self.alpha / (1.0 - self.delta)

    @property
    def lam(self):
        return self.delta * self.beta + self.gamma


@dataclass(frozen=True)
class FormationConfig:
    """Link-formation model.

    ``cooperative``: link iff ``h(eta_i, eta_j) > threshold + u_ij``, where the
    pair shock ``u_ij`` is zero unless ``pair_shock`` is given, and
    ``h(a, b) = a + b``.
    ``noncooperative``: link iff ``eta_i > threshold + u_ij`` and
    ``eta_j > threshold + u_ji`` with independent directed shocks.
    ``covariate_weight`` adds ``w * (x_i + x_j)`` to ``h``; it is zero by default.
    """

    kind: str = "cooperative"
    threshold: float | None = None
    pair_shock: str | None = None
    pair_shock_scale: float = 1.0
    covariate_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in FORMATION_KINDS:
            raise ConfigError(f"formation kind must be one of {FORMATION_KINDS}")
        if self.pair_shock is not None and self.pair_shock not in PAIR_SHOCKS:
            raise ConfigError(f"pair_shock must be one of {PAIR_SHOCKS} or None")
        if self.kind == "noncooperative" and self.pair_shock is None:
            object.__setattr__(self, "pair_shock", "logistic")
        if self.threshold is not None and math.isnan(self.threshold):
            raise ConfigError("threshold must not be NaN")

    @property
    def c(self):
        return default_threshold() if self.threshold is None else float(self.threshold)


@dataclass(frozen=True)
class ErrorCoupling:
    """``eps_i = phi(eta_i) + u_i`` with ``u_i ~ N(0, u_scale^2)``."""

    phi: str = "zero"
    u_scale: float = 1.0

    def __post_init__(self):
        if self.phi not in PHI_VARIANTS:
            raise ConfigError(f"phi must be one of {PHI_VARIANTS}, got {self.phi!r}")

    def shift(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        if self.phi == "zero":
            return np.zeros_like(eta)
        if self.phi == "linear":
            return eta.copy()
        if self.phi == "exp3":
            return np.exp(3.0 * ndtr(eta))
        return np.sin(3.0 * ndtr(eta))


def _pair_shocks(rng, shape, fc):
    if fc.pair_shock is None:
        return 0.0
    if fc.pair_shock == "normal":
        return fc.pair_shock_scale * rng.standard_normal(shape)
    return fc.pair_shock_scale * rng.logistic(size=shape)


def _form_links(eta, fc, rng, x=None):
    """Adjacency stack from heterogeneity draws ``eta`` of shape ``(G, n)``."""
    G, n = eta.shape
    c = fc.c
    h = eta
    if fc.covariate_weight and x is not None:
        h = eta + fc.covariate_weight * x
    if fc.kind == "cooperative":
        score = h[:, :, None] + h[:, None, :]
        u = _pair_shocks(rng, (G, n, n), fc)
        if not np.isscalar(u):
            u = np.triu(u, 1)
            u = u + u.transpose(0, 2, 1)
        with np.errstate(invalid="ignore"):
            A = score > c + u
    else:
        u = _pair_shocks(rng, (G, n, n), fc)
        with np.errstate(invalid="ignore"):
            wants = h[:, :, None] > c + u
        A = wants & wants.transpose(0, 2, 1)
    A = np.triu(A, 1)
    return (A | A.transpose(0, 2, 1)).astype(np.uint8)


def simulate_network(n, fc=None, rng=None):
    """Draw one network of ``n`` agents; returns ``(Graph, eta)``."""
    if n < 2:
        raise GraphError("simulate_network needs n >= 2")
    fc = fc or FormationConfig()
    rng = np.random.default_rng(rng)
    eta = rng.standard_normal(n)
    A = _form_links(eta[None], fc, rng)[0]
    return Graph(A), eta


def draw_covariates(n, rng=None):
    """``x_i ~ N(1, 1)`` i.i.d."""
    return np.random.default_rng(rng).normal(1.0, 1.0, size=n)


def draw_errors(eta, ec=None, rng=None):
    ec = ec or ErrorCoupling()
    rng = np.random.default_rng(rng)
    eta = np.asarray(eta, dtype=np.float64)
    return ec.shift(eta) + ec.u_scale * rng.standard_normal(eta.shape)


def _solve_outcomes(H, x, eps, p):
    n = x.shape[-1]
    Hx = np.matmul(H, x[..., None])[..., 0]
    rhs = p.alpha + p.beta * x + p.gamma * Hx + eps
    M = np.eye(n) - p.delta * H
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def simulate_outcomes(g, x, eps, p):
    """Solve ``(I - delta H) y = alpha + beta x + gamma H x + eps`` for ``y``."""
    if not abs(p.delta) < 1:
        raise ConfigError(f"|delta| must be below 1, got {p.delta}")
    H = row_normalize_stack(g.adjacency)
    return _solve_outcomes(H, np.asarray(x, float), np.asarray(eps, float), p)


def reduced_form_check(g, x, eps, p, truncation):
    """Max deviation between ``H y`` and its reduced-form series cut at ``truncation``.

    The series is ``mu + beta H x + lam sum_s delta^s H^{s+2} x +
    sum_s delta^s H^{s+1} eps`` over ``s = 0..truncation``; it requires every
    agent to have at least one link.
    """
    if np.any(g.degrees == 0):
        raise GraphError("reduced form needs every agent to have a link")
    if not abs(p.delta) < 1:
        raise ConfigError(f"|delta| must be below 1, got {p.delta}")
    x = np.asarray(x, float)
    eps = np.asarray(eps, float)
    H = row_normalize_stack(g.adjacency)
    Hx = H @ x
    series = p.mu + p.beta * Hx
    wx = H @ Hx
    we = H @ eps
    for s in range(int(truncation) + 1):
        series = series + p.delta**s * (p.lam * wx + we)
        wx = H @ wx
        we = H @ we
    y = _solve_outcomes(H, x, eps, p)
    return float(np.max(np.abs(H @ y - series)))


def group_rng(seed, *key):
    """Independent generator for the substream ``key`` under a root ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def simulate_arrays(G, n, params, fc, ec, rng):
    """Draw ``G`` groups of size ``n`` as stacked arrays ``(A, x, eps, y)``.

    Draw order is eta, pair shocks, x, u, each for all groups at once.
    """
    eta = rng.standard_normal((G, n))
    x_first = fc.covariate_weight != 0.0
    x = rng.normal(1.0, 1.0, size=(G, n)) if x_first else None
    A = _form_links(eta, fc, rng, x)
    if not x_first:
        x = rng.normal(1.0, 1.0, size=(G, n))
    eps = ec.shift(eta) + ec.u_scale * rng.standard_normal((G, n))
    H = row_normalize_stack(A)
    y = _solve_outcomes(H, x, eps, params)
    return A, x, eps, y


def simulate_dataset(G, n, params=None, fc=None, ec=None, seed=0):
    """Simulate a :class:`Dataset` of ``G`` groups with ``n`` agents each."""
    params = params or StructuralParams()
    fc = fc or FormationConfig()
    ec = ec or ErrorCoupling()
    rng = group_rng(seed) if isinstance(seed, (int, np.integer)) else np.random.default_rng(seed)
    A, x, _, y = simulate_arrays(G, n, params, fc, ec, rng)
    width = max(4, len(str(G - 1)))
    return Dataset(
        tuple(
            GroupData(Graph(A[g]), x[g], y[g], group_id=f"g{g:0{width}d}")
            for g in range(G)
        )
    )
