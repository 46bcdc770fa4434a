"""Smooth constrained-program contract shared by all optimization models.

A problem supplies callbacks for objective, gradient, constraints,
Jacobian, and the Hessian of the Lagrangian
``obj_weight * f + sum(multipliers * c)``. Sparsity patterns of the
Jacobian and Hessian must stay fixed across calls; general constraints
carry two-sided bounds, with equality expressed as ``lo == hi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
import scipy.sparse as sp


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass
class NlpProblem:
    n_vars: int
    var_lo: np.ndarray
    var_hi: np.ndarray
    n_cons: int
    con_lo: np.ndarray
    con_hi: np.ndarray
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], sp.spmatrix]
    hessian: Callable[[np.ndarray, float, np.ndarray], sp.spmatrix]
    x0: np.ndarray

    def __post_init__(self) -> None:
        for name in ("var_lo", "var_hi", "con_lo", "con_hi", "x0"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.var_lo.shape != (self.n_vars,) or self.var_hi.shape != (self.n_vars,):
            raise ValueError("variable bound arrays must match n_vars")
        if self.con_lo.shape != (self.n_cons,) or self.con_hi.shape != (self.n_cons,):
            raise ValueError("constraint bound arrays must match n_cons")
        if self.x0.shape != (self.n_vars,):
            raise ValueError("x0 must match n_vars")


@dataclass
class NlpResult:
    status: SolveStatus
    x: np.ndarray
    obj: float
    kkt_residual: float
    iterations: int
    constraint_violation: float = 0.0
    multipliers: np.ndarray | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


def check_derivatives(problem: NlpProblem, x: np.ndarray, h: float = 1e-6) -> float:
    """Max relative error of gradient and Jacobian vs central differences.

    ``x`` should be strictly inside the variable bounds so both offsets
    stay evaluable. Relative error uses ``max(1, |analytic|)`` as the
    denominator, elementwise.
    """
    x = np.asarray(x, dtype=float)
    n = problem.n_vars
    grad = np.asarray(problem.gradient(x), dtype=float)
    jac = sp.csr_matrix(problem.jacobian(x))
    worst = 0.0
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        df = (problem.objective(x + e) - problem.objective(x - e)) / (2 * h)
        worst = max(worst, abs(df - grad[j]) / max(1.0, abs(grad[j])))
        if problem.n_cons:
            dc = (problem.constraints(x + e) - problem.constraints(x - e)) / (2 * h)
            col = jac[:, j].toarray().ravel()
            err = np.abs(dc - col) / np.maximum(1.0, np.abs(col))
            worst = max(worst, float(err.max()))
    return worst


def check_hessian(problem: NlpProblem, x: np.ndarray, obj_weight: float,
                  multipliers: np.ndarray, h: float = 1e-6) -> float:
    """Max relative error of the Lagrangian Hessian vs differenced gradients."""
    x = np.asarray(x, dtype=float)
    n = problem.n_vars
    hess = sp.csr_matrix(problem.hessian(x, obj_weight, multipliers)).toarray()

    def lag_grad(pt: np.ndarray) -> np.ndarray:
        g = obj_weight * np.asarray(problem.gradient(pt), dtype=float)
        if problem.n_cons:
            g = g + sp.csr_matrix(problem.jacobian(pt)).T @ multipliers
        return g

    worst = 0.0
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        col = (lag_grad(x + e) - lag_grad(x - e)) / (2 * h)
        err = np.abs(col - hess[:, j]) / np.maximum(1.0, np.abs(hess[:, j]))
        worst = max(worst, float(err.max()))
    return worst
