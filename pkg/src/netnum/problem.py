"""Smooth penalized objective for network rate allocation.

Minimize ``V(x) = -sum_s U(x_s) + mu * sum_e softplus(A_e x - c_e)`` over the
nonnegative orthant, where ``U`` is the shifted alpha-fair utility
``(x + xi)^(1-alpha) / (1-alpha)`` (``ln(x + xi)`` at ``alpha = 1``). The
softplus term is a smooth stand-in for the exact capacity overshoot penalty
``max(A_e x - c_e, 0)``, which is kept as a feasibility diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .topology import RoutingMatrix

__all__ = [
    "UtilityParams",
    "ProblemInstance",
    "SmoothnessCert",
    "PointEval",
    "softplus",
    "logistic",
    "utility_value",
    "utility_grad",
    "objective_value",
    "objective_grad",
    "exact_penalty_residual",
    "evaluate",
    "certify",
]


def softplus(z):
    """Numerically stable ``ln(1 + exp(z))``.

    Computed as ``max(z, 0) + log1p(exp(-|z|))`` so the exponential argument
    is never positive. Accepts scalars or arrays.
    """
    z = np.asarray(z, dtype=float)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(out) if out.ndim == 0 else out


def logistic(z):
    """Numerically stable ``1 / (1 + exp(-z))``, branching on the sign of z
    so only nonpositive exponents are ever taken."""
    z = np.asarray(z, dtype=float)
    pos = z >= 0
    ez = np.exp(np.where(pos, -z, z))
    out = np.where(pos, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class UtilityParams:
    """Shifted alpha-fair utility parameters.

    ``alpha`` selects the fairness criterion (0 throughput, 1 proportional
    fairness, 2 potential delay). The shift ``xi`` must be positive whenever
    ``alpha > 0`` so the gradient stays bounded at zero rates; ``alpha = 0``
    is linear and tolerates ``xi = 0``.
    """

    alpha: float = 1.0
    xi: float = 0.5

    def __post_init__(self):
        if not (self.alpha >= 0):
            raise ValueError("alpha must be >= 0")
        if self.alpha > 0 and not (self.xi > 0):
            raise ValueError("xi must be > 0 when alpha > 0")
        if self.alpha == 0 and self.xi < 0:
            raise ValueError("xi must be >= 0")


def utility_value(p: UtilityParams, x: np.ndarray) -> float:
    """Network utility ``sum_s U(x_s)`` at rate vector x >= 0."""
    shifted = np.asarray(x, dtype=float) + p.xi
    if p.alpha == 1:
        if np.any(shifted <= 0):
            raise ValueError("log utility undefined at x + xi = 0")
        return float(np.log(shifted).sum())
    return float((shifted ** (1.0 - p.alpha)).sum() / (1.0 - p.alpha))


def utility_grad(p: UtilityParams, x: np.ndarray) -> np.ndarray:
    """Componentwise utility derivative ``(x_s + xi)^(-alpha)``."""
    x = np.asarray(x, dtype=float)
    if p.alpha == 0:
        return np.ones_like(x)
    return (x + p.xi) ** (-p.alpha)


@dataclass(frozen=True)
class SmoothnessCert:
    """Certified constants: ``beta_v`` is the gradient Lipschitz constant of
    the objective, ``m_bound`` bounds every partial derivative magnitude."""

    beta_v: float
    m_bound: float


class PointEval(NamedTuple):
    objective: float
    utility: float
    residual: float


class ProblemInstance:
    """Immutable problem data: routing matrix, capacities, utility parameters
    and penalty weight. Derived smoothness constants are computed once."""

    def __init__(
        self,
        routing: RoutingMatrix,
        capacities,
        utility: UtilityParams | None = None,
        mu: float = 2.0,
    ):
        self.routing = routing
        self.capacities = np.asarray(capacities, dtype=float).copy()
        self.capacities.flags.writeable = False
        self.utility = utility if utility is not None else UtilityParams()
        self.mu = float(mu)
        if self.capacities.ndim != 1 or len(self.capacities) != routing.num_links:
            raise ValueError("capacity vector length must equal the link count")
        if np.any(~np.isfinite(self.capacities)) or np.any(self.capacities < 0):
            raise ValueError("capacities must be finite and nonnegative")
        if not (self.mu > 0):
            raise ValueError("mu must be positive")
        self._cert: SmoothnessCert | None = None

    @property
    def num_flows(self) -> int:
        return self.routing.num_flows

    @property
    def num_links(self) -> int:
        return self.routing.num_links

    @property
    def cert(self) -> SmoothnessCert:
        if self._cert is None:
            self._cert = certify(self)
        return self._cert


def certify(inst: ProblemInstance) -> SmoothnessCert:
    """Smoothness constant and gradient bound of the objective.

    ``beta_v = alpha / xi^(alpha+1) + (mu / 4) * sum_e ||A_e||^2`` where the
    row norms come from the routing matrix cache, and
    ``m_bound = max(xi^(-alpha), mu * max_s sum_e A_es)``. For ``alpha = 0``
    the utility contributes 0 to ``beta_v`` and 1 to the gradient bound.
    """
    alpha, xi = inst.utility.alpha, inst.utility.xi
    if alpha > 0:
        if xi <= 0:
            raise ValueError("xi must be > 0 when alpha > 0")
        util_curv = alpha / xi ** (alpha + 1.0)
        util_slope = xi ** (-alpha)
    else:
        util_curv = 0.0
        util_slope = 1.0
    beta_v = util_curv + 0.25 * inst.mu * float(inst.routing.row_sqnorms.sum())
    max_col = float(inst.routing.col_sums.max()) if inst.num_flows else 0.0
    m_bound = max(util_slope, inst.mu * max_col)
    return SmoothnessCert(beta_v=beta_v, m_bound=m_bound)


def _check_dim(inst: ProblemInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.num_flows,):
        raise ValueError(f"rate vector must have shape ({inst.num_flows},), got {x.shape}")
    return x


def objective_value(inst: ProblemInstance, x) -> float:
    """Penalized objective ``-sum_s U(x_s) + mu * sum_e softplus(A_e x - c_e)``;
    one sparse product per call."""
    x = _check_dim(inst, x)
    load = inst.routing.dot(x)
    penalty = softplus(load - inst.capacities).sum() if inst.num_links else 0.0
    return -utility_value(inst.utility, x) + inst.mu * float(penalty)


def objective_grad(inst: ProblemInstance, x) -> np.ndarray:
    """Objective gradient ``-(x_s + xi)^(-alpha) + mu * A.T logistic(A x - c)``;
    one forward and one adjoint sparse product."""
    x = _check_dim(inst, x)
    grad = -utility_grad(inst.utility, x)
    if inst.num_links:
        load = inst.routing.dot(x)
        grad = grad + inst.mu * inst.routing.tdot(logistic(load - inst.capacities))
    return grad


def exact_penalty_residual(inst: ProblemInstance, x) -> float:
    """Total capacity overshoot ``sum_e max(A_e x - c_e, 0)``; zero exactly
    when x is feasible for the hard capacity constraints."""
    x = _check_dim(inst, x)
    if inst.num_links == 0:
        return 0.0
    over = inst.routing.dot(x) - inst.capacities
    return float(np.maximum(over, 0.0).sum())


def evaluate(inst: ProblemInstance, x) -> PointEval:
    """Objective, utility and overshoot residual sharing one sparse product."""
    x = _check_dim(inst, x)
    util = utility_value(inst.utility, x)
    if inst.num_links:
        over = inst.routing.dot(x) - inst.capacities
        objective = -util + inst.mu * float(softplus(over).sum())
        residual = float(np.maximum(over, 0.0).sum())
    else:
        objective, residual = -util, 0.0
    return PointEval(objective=objective, utility=util, residual=residual)
