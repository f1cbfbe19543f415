"""Fake-time gradient ascent on dual objectives.

Each iteration moves the packed dual fields along an ascent direction
(the gradient itself, or a Polak-Ribiere conjugate direction) with a
backtracking line search that only accepts steps that increase the
objective. A one-shot quadratic interpolation refines accepted steps, which
makes the line search exact on quadratic objectives.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AscentAborted, ContractError, DualvarError

logger = logging.getLogger(__name__)

ARMIJO = 1e-4


@dataclass
class AscentConfig:
    step0: float = 1.0
    max_iter: int = 1000
    grad_tol: float = 1e-8
    backtrack_factor: float = 0.5
    max_backtracks: int = 60
    method: str = "steepest"
    residual_every: int = 1

    def __post_init__(self):
        if self.method not in ("steepest", "cg"):
            raise ContractError(f"unknown method {self.method!r}")
        if not (self.step0 > 0 and self.max_iter >= 0 and self.grad_tol > 0
                and self.max_backtracks > 0 and self.residual_every >= 0):
            raise ContractError("ascent parameters must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ContractError("backtrack_factor must lie in (0, 1)")


@dataclass
class SolveReport:
    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    grad_norm_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    converged: bool = False
    message: str = ""
    x: np.ndarray = None
    final_fields: dict = None


def _safe_eval(fun, x):
    try:
        S, g = fun(x)
    except (DualvarError, np.linalg.LinAlgError) as exc:
        return -np.inf, None, str(exc)
    if not np.isfinite(S):
        return -np.inf, None, "objective is not finite"
    return S, g, ""


def ascend(fun, x0, config=None, project=None, residual=None, callback=None):
    """Maximise ``fun`` starting from ``x0``.

    Parameters
    ----------
    fun : callable
        ``x -> (S, g)`` with ``g`` the gradient of ``S`` (already zero on
        constrained entries).
    x0 : ndarray
        Initial packed fields; projected with ``project`` first.
    project : callable, optional
        Re-imposes constraints (zeroes constrained entries) after every step.
    residual : callable, optional
        ``x -> float`` primal residual recorded in the trace.
    callback : callable, optional
        Called as ``callback(iteration, x)`` after every accepted step.

    Raises
    ------
    AscentAborted
        When the objective cannot be evaluated at the start, or when every
        trial step of a line search fails with a solver error.
    """
    cfg = config or AscentConfig()
    project = project or (lambda v: v)
    report = SolveReport()
    x = project(np.array(x0, dtype=float))
    S, g, err = _safe_eval(fun, x)
    if g is None:
        raise AscentAborted(f"objective failed at the initial state: {err}", report)
    g = project(g)

    def record(x, S, g, it):
        report.objective_trace.append(float(S))
        report.grad_norm_trace.append(float(np.max(np.abs(g))) if g.size else 0.0)
        every = cfg.residual_every
        if residual is not None and every and it % every == 0:
            report.residual_trace.append(float(residual(x)))
        else:
            report.residual_trace.append(float("nan"))

    record(x, S, g, 0)
    d = g.copy()
    alpha = cfg.step0
    prev_slope = None
    it = 0
    while True:
        if report.grad_norm_trace[-1] <= cfg.grad_tol:
            report.converged = True
            report.message = "gradient tolerance reached"
            break
        if it >= cfg.max_iter:
            report.message = "iteration budget exhausted"
            break
        slope = float(g @ d)
        if slope <= 0:
            d = g.copy()
            slope = float(g @ g)
        if prev_slope is not None:
            alpha = alpha * min(prev_slope / slope, 1e3) if slope > 0 else cfg.step0
        step = _line_search(fun, project, x, S, d, slope, alpha, cfg)
        if step is None:
            report.message = "line search stalled"
            break
        if isinstance(step, str):
            report.x = x
            report.iterations = it
            raise AscentAborted(f"line search failed at iteration {it}: {step}", report)
        alpha, x_new, S_new, g_new = step
        g_new = project(g_new)
        if cfg.method == "cg":
            beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
            d = g_new + beta * d
        else:
            d = g_new.copy()
        prev_slope = slope
        x, S, g = x_new, S_new, g_new
        it += 1
        record(x, S, g, it)
        if callback is not None:
            callback(it, x)
    if residual is not None and np.isnan(report.residual_trace[-1]):
        report.residual_trace[-1] = float(residual(x))
    report.iterations = it
    report.x = x
    logger.info("ascent finished after %d iterations: %s", it, report.message)
    return report


def _line_search(fun, project, x, S0, d, slope, alpha, cfg):
    """Backtracking with Armijo acceptance and one quadratic refinement.

    Returns ``(alpha, x, S, g)``, ``None`` if no increase was found, or the
    solver error message if every trial raised.
    """
    last_err = ""
    any_finite = False
    for _ in range(cfg.max_backtracks):
        xt = project(x + alpha * d)
        St, gt, err = _safe_eval(fun, xt)
        if gt is None:
            last_err = err
            alpha *= cfg.backtrack_factor
            continue
        any_finite = True
        curv = (St - S0 - slope * alpha) / alpha**2
        if St >= S0 + ARMIJO * alpha * slope and St > S0:
            if curv < 0:
                a_star = -slope / (2 * curv)
                if abs(a_star - alpha) > 1e-3 * alpha:
                    a_star = min(a_star, 10 * alpha)
                    xs = project(x + a_star * d)
                    Ss, gs, _ = _safe_eval(fun, xs)
                    if gs is not None and Ss > St:
                        return a_star, xs, Ss, gs
            return alpha, xt, St, gt
        if curv < 0:
            a_star = -slope / (2 * curv)
            alpha = min(max(a_star, 0.1 * alpha), cfg.backtrack_factor * alpha)
        else:
            alpha *= cfg.backtrack_factor
    if not any_finite and last_err:
        return last_err
    return None


def solve(problem, config=None, init=None, callback=None):
    """Run :func:`ascend` on a :class:`~dualvar.problems.DualProblem`.

    ``init`` is a packed vector (default zeros). The returned report has
    ``final_fields`` filled with the unpacked dual fields.
    """
    x0 = problem.zero_state() if init is None else init
    report = ascend(problem.flat_objective, x0, config, project=problem.project,
                    residual=problem.primal_residual, callback=callback)
    report.final_fields = problem.unpack(report.x)
    return report
