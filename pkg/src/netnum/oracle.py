"""Independent ground-truth generators for small instances.

Everything in here deliberately avoids the production gradient code: values
are recomputed from scratch (``np.logaddexp`` for the penalty, dense algebra,
explicit utility formulas) so that solver and gradient tests have a second,
uncorrelated route to the right answer.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .problem import ProblemInstance, objective_value

__all__ = [
    "OracleResult",
    "finite_diff_grad",
    "analytic_single_link",
    "vertex_lp_optimum",
    "grid_refine_optimum",
]

VERTEX_GUARD = 8
GRID_GUARD = 3


@dataclass(frozen=True)
class OracleResult:
    x: np.ndarray
    value: float
    tolerance: float
    method: str


def finite_diff_grad(inst: ProblemInstance, x, h=None, return_modes: bool = False):
    """Finite-difference gradient estimate of the objective.

    Central differences with per-coordinate step ``h`` (default
    ``1e-5 * (1 + |x_s|)``); the left evaluation point is clamped at zero so
    the objective is never probed outside the nonnegative orthant, degrading
    to a one-sided difference there. With ``return_modes=True`` also returns
    the per-coordinate scheme ("central" or "clamped").
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + np.abs(x))
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    if np.any(h <= 0):
        raise ValueError("finite-difference steps must be positive")
    grad = np.empty_like(x)
    modes = []
    for s in range(len(x)):
        right = x.copy()
        left = x.copy()
        right[s] = x[s] + h[s]
        left[s] = max(x[s] - h[s], 0.0)
        modes.append("central" if left[s] == x[s] - h[s] else "clamped")
        grad[s] = (objective_value(inst, right) - objective_value(inst, left)) / (
            right[s] - left[s]
        )
    if return_modes:
        return grad, modes
    return grad


def _softplus_exact(z):
    return np.logaddexp(0.0, z)


def analytic_single_link(
    c: float, mu: float, n_flows: int = 1, alpha: float = 0.0
) -> OracleResult:
    """Closed-form optimum when every one of ``n_flows`` linear-utility flows
    crosses one link of capacity ``c``.

    The objective depends on the total rate ``z`` only:
    ``g(z) = -z + mu * softplus(z - c)``, stationary at
    ``z = c - ln(mu - 1)`` (clamped at 0 when that is negative). The returned
    point splits the total evenly; any nonnegative split is equally optimal.
    """
    if alpha != 0:
        raise ValueError("closed form requires the linear utility (alpha = 0)")
    if not (mu > 1):
        raise ValueError("mu must exceed 1; otherwise the objective is unbounded below")
    if n_flows < 1:
        raise ValueError("n_flows must be >= 1")
    if not (c >= 0) or not np.isfinite(c):
        raise ValueError("capacity must be finite and nonnegative")
    total = max(c - math.log(mu - 1.0), 0.0)
    value = -total + mu * float(_softplus_exact(total - c))
    x = np.full(n_flows, total / n_flows)
    return OracleResult(x=x, value=value, tolerance=0.0, method="analytic")


def vertex_lp_optimum(inst: ProblemInstance) -> OracleResult:
    """Exact optimum of ``max sum x  s.t.  A x <= c, x >= 0`` by enumerating
    basic solutions.

    Every vertex of the polytope activates d of the ``|E| + d`` inequalities,
    so trying all d-subsets, solving the square systems and keeping feasible
    points finds the exact maximizer. Guarded to d <= 8 and |E| <= 8; ties on
    the objective resolve to the lexicographically smallest point.
    """
    if inst.utility.alpha != 0:
        raise ValueError("the vertex oracle applies to the linear utility (alpha = 0)")
    d, ne = inst.num_flows, inst.num_links
    if d > VERTEX_GUARD or ne > VERTEX_GUARD:
        raise ValueError(f"guard d <= {VERTEX_GUARD} and |E| <= {VERTEX_GUARD} exceeded")
    if d == 0:
        return OracleResult(x=np.zeros(0), value=0.0, tolerance=0.0, method="vertex_lp")
    a = inst.routing.toarray()
    if np.any(inst.routing.col_sums == 0):
        raise ValueError("unbounded: some flow traverses no link")
    rows = np.vstack([a, -np.eye(d)])
    rhs = np.concatenate([inst.capacities, np.zeros(d)])
    feas_tol = 1e-9 * (1.0 + float(np.abs(rhs).max()))

    best_x: np.ndarray | None = None
    best_obj = -np.inf
    for combo in itertools.combinations(range(ne + d), d):
        m = rows[list(combo)]
        b = rhs[list(combo)]
        try:
            x = np.linalg.solve(m, b)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        if np.abs(m @ x - b).max() > 1e-7:  # near-singular system
            continue
        if np.any(rows @ x > rhs + feas_tol):
            continue
        x = np.where((x < 0) & (x >= -feas_tol), 0.0, x)
        obj = float(x.sum())
        if best_x is None:
            best_x, best_obj = x, obj
            continue
        tie = 1e-9 * (1.0 + abs(best_obj))
        if obj > best_obj + tie:
            best_x, best_obj = x, obj
        elif obj > best_obj - tie and tuple(x) < tuple(best_x):
            best_x = x
    if best_x is None:
        raise ValueError("no feasible basic solution found")
    return OracleResult(x=best_x, value=best_obj, tolerance=0.0, method="vertex_lp")


def _objective_direct(inst: ProblemInstance, points: np.ndarray) -> np.ndarray:
    """Batch objective evaluated from the raw formulas (dense, logaddexp)."""
    alpha, xi = inst.utility.alpha, inst.utility.xi
    shifted = points + xi
    if alpha == 1:
        util = np.log(shifted).sum(axis=1)
    else:
        util = (shifted ** (1.0 - alpha)).sum(axis=1) / (1.0 - alpha)
    if inst.num_links:
        load = points @ inst.routing.toarray().T
        penalty = _softplus_exact(load - inst.capacities).sum(axis=1)
    else:
        penalty = 0.0
    return -util + inst.mu * penalty


def grid_refine_optimum(
    inst: ProblemInstance, box=None, tol: float = 1e-6
) -> OracleResult:
    """Brute-force minimizer for d <= 3 by nested uniform grid refinement.

    Each round evaluates a 21-point-per-axis mesh over the current box and
    shrinks the box to one mesh cell around the best point, until the box
    diameter drops below ``tol``. The value tolerance ``beta_v * tol^2 / 2``
    follows from smoothness of the objective around the located minimizer.
    """
    d = inst.num_flows
    if d > GRID_GUARD:
        raise ValueError(f"guard d <= {GRID_GUARD} exceeded")
    if not (tol > 0):
        raise ValueError("tol must be positive")
    if d == 0:
        x = np.zeros(0)
        return OracleResult(
            x=x, value=objective_value(inst, x), tolerance=0.0, method="grid"
        )
    if box is None:
        top = float(inst.capacities.max()) if inst.num_links else 0.0
        box = np.full(d, top + 10.0)
    else:
        box = np.broadcast_to(np.asarray(box, dtype=float), (d,)).copy()
    if np.any(box <= 0):
        raise ValueError("box upper bounds must be positive")

    npts = 21
    lo = np.zeros(d)
    hi = box.copy()
    axes_idx = np.array(list(itertools.product(range(npts), repeat=d)))
    best_x = lo.copy()
    while True:
        axes = [np.linspace(lo[i], hi[i], npts) for i in range(d)]
        mesh = np.column_stack([axes[i][axes_idx[:, i]] for i in range(d)])
        values = _objective_direct(inst, mesh)
        best = int(np.argmin(values))
        best_x = mesh[best]
        if float((hi - lo).max()) < tol:
            break
        step = (hi - lo) / (npts - 1)
        lo = np.maximum(best_x - step, 0.0)
        hi = np.minimum(best_x + step, box)
    value = float(_objective_direct(inst, best_x[None, :])[0])
    return OracleResult(
        x=best_x,
        value=value,
        tolerance=0.5 * inst.cert.beta_v * tol**2,
        method="grid",
    )
