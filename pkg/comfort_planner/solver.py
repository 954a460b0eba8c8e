"""
Box-constrained limited-memory quasi-Newton solve (scipy L-BFGS-B)
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import ComfortPlannerError, SolverError
from .models import SolverParams

logger = logging.getLogger(__name__)

ValueAndGradient = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class InnerResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    message: str = ""


def inner_solve(objective_fn: ValueAndGradient, x0: np.ndarray,
                bounds: Tuple[np.ndarray, np.ndarray], params: SolverParams) -> InnerResult:
    """Minimise objective_fn over the box lower <= x <= upper starting from x0"""
    lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    if np.any(lower > upper):
        raise SolverError(f"infeasible bounds at index {int(np.argmax(lower > upper))}")
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)

    if np.all(lower == upper):
        try:
            pinned_cost = float(objective_fn(x0)[0])
        except ComfortPlannerError as e:
            raise SolverError(f"objective not evaluable at the pinned point: {str(e)}") from e
        return InnerResult(x=x0, cost=pinned_cost, iterations=0, converged=True,
                           message="all variables fixed")

    try:
        initial_cost = float(objective_fn(x0)[0])
    except ComfortPlannerError as e:
        raise SolverError(f"objective not evaluable at the initial point: {str(e)}") from e

    previous = {"x": x0.copy()}
    small_step = {"hit": False}

    def callback(xk: np.ndarray) -> None:
        step = float(np.max(np.abs(xk - previous["x"])))
        previous["x"] = xk.copy()
        if step <= params.step_tolerance:
            small_step["hit"] = True
            raise StopIteration

    try:
        result = minimize(
            objective_fn,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(lower, upper)),
            callback=callback,
            options={
                "maxiter": params.max_iterations,
                "gtol": params.gradient_tolerance,
                "ftol": params.function_tolerance,
                "maxcor": params.history,
            },
        )
    except ComfortPlannerError as e:
        logger.error(f"Error in inner solve: {str(e)}")
        raise SolverError(f"objective evaluation failed: {str(e)}") from e

    x = np.clip(result.x, lower, upper)
    final_cost = float(objective_fn(x)[0])
    converged = bool(result.success) or small_step["hit"]
    if final_cost > initial_cost:
        logger.debug("Solve ended above the initial cost, keeping the initial point")
        x, final_cost = x0, initial_cost

    if not converged:
        logger.debug(f"Inner solve stopped without convergence: {result.message}")
    return InnerResult(
        x=x,
        cost=final_cost,
        iterations=int(result.get("nit", 0)),
        converged=converged,
        message=str(result.message),
    )
