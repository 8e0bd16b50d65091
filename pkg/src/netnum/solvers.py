"""First-order solvers for the smooth penalized rate-allocation objective.

Four methods over the nonnegative orthant:

* projected gradient descent, with either the Lipschitz step rule (averaged
  answer) or the smoothness step ``1/beta_v`` (last iterate);
* exponentiated gradient descent over ``{x > 0, sum x <= C}`` (averaged
  answer), the multiplicative-update baseline;
* the accelerated gradient method with momentum weights
  ``a_{t+1} = (1 + sqrt(4 a_t^2 + 1)) / 2``;
* accelerated gradient with function or gradient restart.

Each run records a per-iteration trace (objective, utility, overshoot
residual, wall time) at a configurable stride.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .problem import (
    ProblemInstance,
    evaluate,
    objective_grad,
    objective_value,
)

__all__ = [
    "KINDS",
    "NonFiniteError",
    "SolverConfig",
    "IterateTrace",
    "Solution",
    "project_nonneg",
    "default_step",
    "momentum_coeff",
    "restart_check",
    "expnum_step",
    "run_pgd",
    "run_expnum",
    "run_agm",
    "run_agm_restart",
    "solve",
    "expnum_crossover",
]

KINDS = (
    "pgd_lipschitz",
    "pgd_smooth",
    "expnum",
    "agm",
    "agm_function_restart",
    "agm_gradient_restart",
)

EXP_CLAMP = 700.0  # |exponent| above this would overflow float64


class NonFiniteError(RuntimeError):
    """A solver produced a non-finite objective (divergent step)."""


@dataclass
class SolverConfig:
    """Algorithm choice plus run parameters.

    ``step_size=None`` picks the method's default rule, ``init=None`` the
    method's default starting point (zeros; the simplex barycenter ``C/(d+1)``
    for expnum). ``trace_stride=None`` disables per-iteration recording.
    ``reset_momentum_to_zero`` switches the restart variants to resetting the
    momentum coefficient to 0 instead of 1 (which makes the first post-restart
    momentum weight -1, i.e. a backwards step; kept for comparison only).
    """

    kind: str
    iterations: int
    step_size: float | None = None
    c_bound: float | None = None
    init: str | np.ndarray | None = None
    trace_stride: int | None = 1
    radius: float | None = None
    reset_momentum_to_zero: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown solver kind {self.kind!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.step_size is not None and not (
            np.isfinite(self.step_size) and self.step_size >= 0
        ):
            raise ValueError("explicit step_size must be finite and >= 0")
        if self.c_bound is not None and not (self.c_bound > 0):
            raise ValueError("c_bound must be positive")
        if self.trace_stride is not None and self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")
        if self.radius is not None and not (self.radius > 0):
            raise ValueError("radius must be positive")


class IterateTrace:
    """Per-iteration diagnostics: strictly increasing iteration indices with
    objective, utility, overshoot residual and cumulative wall time, plus the
    lists of restart and exponent-clamp events."""

    def __init__(self):
        self.iterations: list[int] = []
        self.objective: list[float] = []
        self.utility: list[float] = []
        self.exact_penalty: list[float] = []
        self.elapsed: list[float] = []
        self.restart_iterations: list[int] = []
        self.clamp_iterations: list[int] = []

    def append(self, t, objective, utility, exact_penalty, elapsed):
        self.iterations.append(t)
        self.objective.append(objective)
        self.utility.append(utility)
        self.exact_penalty.append(exact_penalty)
        self.elapsed.append(elapsed)

    def __len__(self) -> int:
        return len(self.iterations)


@dataclass
class Solution:
    """Result of one solver run: the method's designated answer, the last
    iterate, the running average when the method defines one, and the trace."""

    answer: np.ndarray
    x_final: np.ndarray
    x_avg: np.ndarray | None
    trace: IterateTrace
    meta: dict = field(default_factory=dict)


def project_nonneg(x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the nonnegative orthant."""
    return np.maximum(x, 0.0)


def momentum_coeff(a: float) -> float:
    """Next momentum coefficient ``(1 + sqrt(4 a^2 + 1)) / 2``."""
    return 0.5 * (1.0 + math.sqrt(4.0 * a * a + 1.0))


def restart_check(kind: str, v_prev: float, v_next: float, grad_y, dx) -> bool:
    """Restart trigger: objective increased (``function``) or the step moved
    against the gradient direction (``gradient``). Strict inequalities."""
    if kind == "function":
        return v_next > v_prev
    if kind == "gradient":
        return float(np.dot(grad_y, dx)) > 0
    raise ValueError(f"unknown restart kind {kind!r}")


def _capacity_point(inst: ProblemInstance) -> np.ndarray:
    """Per-flow bottleneck rates: the largest rate each flow could carry if it
    had its most constraining link to itself. Used as a radius estimate."""
    d = inst.num_flows
    fallback = float(inst.capacities.max()) if inst.num_links else 1.0
    x = np.empty(d)
    for s in range(d):
        links, values = inst.routing.column_entries(s)
        x[s] = (inst.capacities[links] / values).min() if len(links) else fallback
    return x


def resolve_c_bound(inst: ProblemInstance, cfg: SolverConfig) -> float:
    """Total-rate bound C for expnum; defaults to the capacity sum, which
    leaves the optimum unchanged."""
    if cfg.c_bound is not None:
        return float(cfg.c_bound)
    total = float(inst.capacities.sum())
    if total <= 0:
        raise ValueError("cannot infer c_bound from zero total capacity; set it explicitly")
    return total


def default_step(
    inst: ProblemInstance,
    kind: str,
    iterations: int,
    x0: np.ndarray | None = None,
    c_bound: float | None = None,
    radius: float | None = None,
) -> float:
    """Method step-size rules.

    Smooth methods use ``1/beta_v``. The Lipschitz PGD rule is
    ``R / (M sqrt(d T))`` with R a radius estimate (default: distance from the
    start to the per-flow bottleneck-capacity point, standing in for the
    unknowable distance to the optimum). expnum uses
    ``sqrt(2 C ln(d+1) / T) / M``, the simplex-diameter bound on the Bregman
    divergence from the barycenter start.
    """
    cert = inst.cert
    d = inst.num_flows
    if kind in ("pgd_smooth", "agm", "agm_function_restart", "agm_gradient_restart"):
        if cert.beta_v == 0:
            raise ValueError(
                "beta_v is 0 (linear unconstrained objective); no finite smooth step"
            )
        return 1.0 / cert.beta_v
    if kind == "pgd_lipschitz":
        if radius is None:
            origin = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
            radius = float(np.linalg.norm(_capacity_point(inst) - origin))
        if radius <= 0:
            radius = 1.0
        return radius / (cert.m_bound * math.sqrt(d * iterations))
    if kind == "expnum":
        if c_bound is None or c_bound <= 0:
            raise ValueError("expnum step rule needs c_bound > 0")
        bregman_bound = c_bound * math.log(d + 1)
        return math.sqrt(2.0 * bregman_bound / iterations) / cert.m_bound
    raise ValueError(f"unknown solver kind {kind!r}")


def _resolve_init(inst: ProblemInstance, cfg: SolverConfig, c_bound: float | None) -> np.ndarray:
    d = inst.num_flows
    init = cfg.init
    if init is None:
        init = "expnum_barycenter" if cfg.kind == "expnum" else "zeros"
    if isinstance(init, str):
        if init == "zeros":
            x0 = np.zeros(d)
        elif init in ("expnum_barycenter", "barycenter"):
            if c_bound is None:
                c_bound = resolve_c_bound(inst, cfg)
            x0 = np.full(d, c_bound / (d + 1))
        else:
            raise ValueError(f"unknown init {init!r}")
    else:
        x0 = np.asarray(init, dtype=float).copy()
        if x0.shape != (d,):
            raise ValueError(f"init vector must have shape ({d},)")
        if np.any(x0 < 0) or not np.all(np.isfinite(x0)):
            raise ValueError("init vector must be finite and nonnegative")
    return x0


class _Recorder:
    """Appends trace rows at the configured stride (always at the final
    iteration) and rejects non-finite objectives."""

    def __init__(self, inst, trace, stride, total):
        self.inst = inst
        self.trace = trace
        self.stride = stride
        self.total = total
        self.t0 = time.perf_counter()

    def record(self, t, x):
        if self.stride is None or (t % self.stride and t != self.total):
            return
        stats = evaluate(self.inst, x)
        if not math.isfinite(stats.objective):
            raise NonFiniteError(f"objective became non-finite at iteration {t}")
        self.trace.append(
            t, stats.objective, stats.utility, stats.residual,
            time.perf_counter() - self.t0,
        )


def _finish(inst, cfg, x_final, x_avg, answer, trace, meta) -> Solution:
    final_stats = evaluate(inst, x_final)
    if not math.isfinite(final_stats.objective):
        raise NonFiniteError("final objective is non-finite")
    meta = dict(meta)
    meta.update(
        kind=cfg.kind,
        iterations=cfg.iterations,
        final_objective=final_stats.objective,
        final_utility=final_stats.utility,
        final_exact_penalty=final_stats.residual,
        restarts=len(trace.restart_iterations),
        clamps=len(trace.clamp_iterations),
    )
    return Solution(answer=answer, x_final=x_final, x_avg=x_avg, trace=trace, meta=meta)


def run_pgd(inst: ProblemInstance, cfg: SolverConfig) -> Solution:
    """Projected gradient descent: ``x <- [x - gamma grad(x)]_+``.

    The Lipschitz variant answers with the average of the T iterates, the
    smooth variant with the last iterate; both points are always computed.
    """
    if cfg.kind not in ("pgd_lipschitz", "pgd_smooth"):
        raise ValueError(f"run_pgd cannot run kind {cfg.kind!r}")
    x = _resolve_init(inst, cfg, None)
    gamma = cfg.step_size
    if gamma is None:
        gamma = default_step(inst, cfg.kind, cfg.iterations, x0=x, radius=cfg.radius)
    trace = IterateTrace()
    rec = _Recorder(inst, trace, cfg.trace_stride, cfg.iterations)
    acc = np.zeros_like(x)
    for t in range(1, cfg.iterations + 1):
        x = project_nonneg(x - gamma * objective_grad(inst, x))
        acc += x
        rec.record(t, x)
    x_avg = acc / cfg.iterations
    answer = x_avg if cfg.kind == "pgd_lipschitz" else x
    return _finish(inst, cfg, x, x_avg, answer, trace, {"gamma": gamma})


def expnum_step(x: np.ndarray, v: np.ndarray, gamma: float, c_bound: float):
    """One multiplicative update
    ``x <- C * (x * exp(-gamma v)) / (C + sum_s x_s (exp(-gamma v_s) - 1))``.

    Exponent arguments are clamped to +-700 to avoid overflow; returns the new
    point and whether clamping occurred. Preserves ``x > 0`` and
    ``sum x <= C``.
    """
    z = -gamma * v
    clamped = bool(np.any(np.abs(z) > EXP_CLAMP))
    if clamped:
        z = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
    scaled = x * np.exp(z)
    x_new = c_bound * scaled / (c_bound + scaled.sum() - x.sum())
    return x_new, clamped


def run_expnum(inst: ProblemInstance, cfg: SolverConfig) -> Solution:
    """Exponentiated gradient descent over ``{x > 0, sum x <= C}``; the answer
    is the average of the T iterates."""
    if cfg.kind != "expnum":
        raise ValueError(f"run_expnum cannot run kind {cfg.kind!r}")
    c_bound = resolve_c_bound(inst, cfg)
    x = _resolve_init(inst, cfg, c_bound)
    if np.any(x <= 0):
        raise ValueError(
            "expnum needs a strictly positive start (multiplicative updates cannot leave 0)"
        )
    if x.sum() > c_bound:
        raise ValueError("initial point violates sum(x) <= c_bound")
    gamma = cfg.step_size
    if gamma is None:
        gamma = default_step(inst, cfg.kind, cfg.iterations, c_bound=c_bound)
    trace = IterateTrace()
    rec = _Recorder(inst, trace, cfg.trace_stride, cfg.iterations)
    acc = np.zeros_like(x)
    for t in range(1, cfg.iterations + 1):
        v = objective_grad(inst, x)
        x, clamped = expnum_step(x, v, gamma, c_bound)
        if clamped:
            trace.clamp_iterations.append(t)
        acc += x
        rec.record(t, x)
    x_avg = acc / cfg.iterations
    return _finish(
        inst, cfg, x, x_avg, x_avg, trace, {"gamma": gamma, "c_bound": c_bound}
    )


def run_agm(inst: ProblemInstance, cfg: SolverConfig) -> Solution:
    """Accelerated gradient method; the answer is the last iterate.

    The descent step is taken at the extrapolated point y, then y is moved
    past the new iterate by the momentum weight ``(a_t - 1) / a_{t+1}``.
    """
    if cfg.kind != "agm":
        raise ValueError(f"run_agm cannot run kind {cfg.kind!r}")
    return _agm_loop(inst, cfg, restart=None)


def run_agm_restart(inst: ProblemInstance, cfg: SolverConfig) -> Solution:
    """Accelerated gradient with adaptive restart: when the trigger fires, y
    snaps back to the current iterate and the momentum coefficient resets."""
    if cfg.kind not in ("agm_function_restart", "agm_gradient_restart"):
        raise ValueError(f"run_agm_restart cannot run kind {cfg.kind!r}")
    restart = "function" if cfg.kind == "agm_function_restart" else "gradient"
    return _agm_loop(inst, cfg, restart=restart)


def _agm_loop(inst: ProblemInstance, cfg: SolverConfig, restart: str | None) -> Solution:
    x = _resolve_init(inst, cfg, None)
    gamma = cfg.step_size
    if gamma is None:
        gamma = default_step(inst, cfg.kind, cfg.iterations, x0=x)
    y = x.copy()
    a = 1.0
    reset_value = 0.0 if cfg.reset_momentum_to_zero else 1.0
    v_prev = objective_value(inst, x) if restart == "function" else None
    trace = IterateTrace()
    rec = _Recorder(inst, trace, cfg.trace_stride, cfg.iterations)
    for t in range(1, cfg.iterations + 1):
        g = objective_grad(inst, y)
        x_new = project_nonneg(y - gamma * g)
        a_new = momentum_coeff(a)
        y = x_new + ((a - 1.0) / a_new) * (x_new - x)
        if restart is not None:
            if restart == "function":
                v_next = objective_value(inst, x_new)
                triggered = restart_check(restart, v_prev, v_next, None, None)
                v_prev = v_next
            else:
                triggered = restart_check(restart, None, None, g, x_new - x)
            if triggered:
                y = x_new.copy()
                a_new = reset_value
                trace.restart_iterations.append(t)
        x, a = x_new, a_new
        rec.record(t, x)
    return _finish(inst, cfg, x, None, x, trace, {"gamma": gamma})


_RUNNERS = {
    "pgd_lipschitz": run_pgd,
    "pgd_smooth": run_pgd,
    "expnum": run_expnum,
    "agm": run_agm,
    "agm_function_restart": run_agm_restart,
    "agm_gradient_restart": run_agm_restart,
}


def solve(inst: ProblemInstance, cfg: SolverConfig) -> Solution:
    """Dispatch to the runner for ``cfg.kind``."""
    return _RUNNERS[cfg.kind](inst, cfg)


def expnum_crossover(
    beta_v: float, radius_sq: float, m_bound: float, c_bound: float, d: float
) -> int:
    """Iteration count past which the accelerated method's worst-case error
    bound beats expnum's:
    ``ceil((2 beta_v^2 radius_sq^2 / (m_bound^2 C D))^(1/3) - 1)`` with
    ``D = C ln(d+1)``, clamped at 0.
    """
    if beta_v <= 0 or m_bound <= 0 or c_bound <= 0 or d <= 0:
        raise ValueError("all crossover arguments must be positive")
    if radius_sq < 0:
        raise ValueError("radius_sq must be nonnegative")
    bregman = c_bound * math.log(d + 1)
    ratio = 2.0 * beta_v**2 * radius_sq**2 / (m_bound**2 * c_bound * bregman)
    return max(0, math.ceil(ratio ** (1.0 / 3.0) - 1.0))
