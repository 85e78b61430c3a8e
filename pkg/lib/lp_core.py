"""Dense linear algebra and a bounded-variable two-phase simplex solver.

Every LP in this package is expressed in equality form with variable bounds::

    min c^T x  s.t.  G x = h,  lower <= x <= upper

Infinite bounds use ``numpy.inf`` (``-INF`` for an absent lower bound,
``INF`` for an absent upper bound).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

INF = np.inf

# Basic values are recomputed from the original columns this often.
REFACTOR_EVERY = 200


class LPError(Exception):
    """Base error for linear programming and linear algebra failures."""


class LPInputError(LPError, ValueError):
    """Raised for malformed, inconsistent or non-finite problem data."""


class IterationLimitError(LPError):
    """Raised when the simplex method exceeds its iteration budget."""


class SingularMatrixError(LPError):
    """Raised when a pivot falls below the pivot tolerance."""


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Return ``values`` as a finite 2-D float array (a DenseMatrix)."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 2:
        raise LPInputError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LPInputError(f"{name} contains non-finite entries")
    return arr


def as_vector(values, name: str = "vector", *, allow_inf: bool = False) -> np.ndarray:
    """Return ``values`` as a 1-D float array (a RealVector)."""
    arr = np.atleast_1d(np.array(values, dtype=float))
    if arr.ndim != 1:
        raise LPInputError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if np.any(np.isnan(arr)):
        raise LPInputError(f"{name} contains NaN")
    if not allow_inf and not np.all(np.isfinite(arr)):
        raise LPInputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SolverSettings:
    feas_tol: float = 1e-9
    pivot_tol: float = 1e-10
    max_iterations: Optional[int] = None

    def __post_init__(self) -> None:
        if not (self.feas_tol > 0 and self.pivot_tol > 0):
            raise LPInputError("solver tolerances must be strictly positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise LPInputError("max_iterations must be a positive integer")

    def iteration_limit(self, nv: int, p: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return 50 * (nv + p)


@dataclass
class LpProblem:
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.objective = as_vector(self.objective, "objective")
        nv = self.objective.size
        matrix = np.array(self.eq_matrix, dtype=float)
        if matrix.size == 0:
            matrix = matrix.reshape(0, nv)
        self.eq_matrix = as_matrix(matrix, "eq_matrix")
        self.eq_rhs = as_vector(self.eq_rhs, "eq_rhs") if np.size(self.eq_rhs) else np.zeros(0)
        self.lower = as_vector(self.lower, "lower", allow_inf=True)
        self.upper = as_vector(self.upper, "upper", allow_inf=True)

        p, cols = self.eq_matrix.shape
        if cols != nv:
            raise LPInputError(f"eq_matrix has {cols} columns but objective has {nv} entries")
        if self.eq_rhs.size != p:
            raise LPInputError(f"eq_rhs has {self.eq_rhs.size} entries but eq_matrix has {p} rows")
        if self.lower.size != nv or self.upper.size != nv:
            raise LPInputError("lower and upper must have one entry per variable")
        if np.any(self.lower == INF) or np.any(self.upper == -INF):
            raise LPInputError("lower bounds may be -inf and upper bounds +inf only")
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise LPInputError(f"lower[{bad}] > upper[{bad}]")

    @property
    def nv(self) -> int:
        return self.objective.size

    @property
    def p(self) -> int:
        return self.eq_matrix.shape[0]

    def feasibility_scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.eq_rhs)))) if self.p else 1.0


@dataclass
class LpOutcome:
    status: LpStatus
    solution: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    infeasibility_certificate: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def farkas_gap(problem: LpProblem, y, zero_tol: float = 1e-9) -> float:
    """Return ``y^T h - sup{(y^T G) x : lower <= x <= upper}``.

    A strictly positive gap proves ``G x = h`` has no solution inside the
    bounds. Weights ``(y^T G)_j`` below ``zero_tol * max(1, |y|_inf)`` in
    magnitude count as zero. An unbounded supremum gives ``-inf``.
    """
    y = as_vector(y, "certificate")
    if y.size != problem.p:
        raise LPInputError("certificate length must equal the number of equality rows")
    weights = y @ problem.eq_matrix
    weights[np.abs(weights) <= zero_tol * max(1.0, float(np.max(np.abs(y), initial=0.0)))] = 0.0
    bound = np.where(weights > 0, problem.upper, np.where(weights < 0, problem.lower, 0.0))
    terms = np.where(weights != 0, weights * bound, 0.0)
    if np.any(np.isinf(terms)):
        return -INF
    return float(y @ problem.eq_rhs - terms.sum())


def check_outcome(problem: LpProblem, outcome: LpOutcome, settings: Optional[SolverSettings] = None) -> None:
    """Re-validate ``outcome`` against ``problem`` without trusting the solver."""
    settings = settings or SolverSettings()
    tol = settings.feas_tol * problem.feasibility_scale()

    if outcome.status is LpStatus.OPTIMAL:
        x = outcome.solution
        if x is None or x.size != problem.nv:
            raise LPError("optimal outcome without a full-length solution")
        residual = np.max(np.abs(problem.eq_matrix @ x - problem.eq_rhs)) if problem.p else 0.0
        if residual > tol:
            raise LPError(f"equality residual {residual:.3e} exceeds {tol:.3e}")
        if np.any(x < problem.lower - tol) or np.any(x > problem.upper + tol):
            raise LPError("solution violates its bounds")
    elif outcome.status is LpStatus.INFEASIBLE:
        if outcome.infeasibility_certificate is None:
            raise LPError("infeasible outcome without a certificate")
        gap = farkas_gap(problem, outcome.infeasibility_certificate)
        if not gap > 0:
            raise LPError(f"Farkas certificate does not prove infeasibility (gap {gap:.3e})")


class _BoundedSimplex:
    """Tableau simplex over ``[G | D] (x, a) = h`` with artificials ``a``."""

    def __init__(self, problem: LpProblem, settings: SolverSettings) -> None:
        self.problem = problem
        self.settings = settings
        nv, p = problem.nv, problem.p
        self.nv, self.p = nv, p
        self.limit = settings.iteration_limit(nv, p)
        self.iterations = 0
        self.feas = settings.feas_tol * problem.feasibility_scale()

        lower, upper = problem.lower, problem.upper
        start = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        residual = problem.eq_rhs - problem.eq_matrix @ start if p else np.zeros(0)
        sign = np.where(residual >= 0, 1.0, -1.0)

        self.columns = np.hstack([problem.eq_matrix, np.diag(sign)]) if p else np.zeros((0, nv))
        self.lo = np.concatenate([lower, np.zeros(p)])
        self.up = np.concatenate([upper, np.full(p, INF)])
        self.x = np.concatenate([start, np.abs(residual)])
        self.basis = np.arange(nv, nv + p)
        self.is_basic = np.zeros(nv + p, dtype=bool)
        self.is_basic[self.basis] = True
        self.tableau = sign[:, None] * self.columns

    def _refactor(self) -> None:
        """Recompute the tableau and basic values from the original columns."""
        if not self.p:
            return
        basis_matrix = self.columns[:, self.basis]
        nonbasic = ~self.is_basic
        rhs = self.problem.eq_rhs - self.columns[:, nonbasic] @ self.x[nonbasic]
        try:
            self.x[self.basis] = np.linalg.solve(basis_matrix, rhs)
            self.tableau = np.linalg.solve(basis_matrix, self.columns)
        except np.linalg.LinAlgError:
            logger.debug("basis matrix singular during refactor; keeping tableau values")

    def _duals(self, cost: np.ndarray) -> np.ndarray:
        basis_matrix = self.columns[:, self.basis]
        return np.linalg.solve(basis_matrix.T, cost[self.basis])

    def _run_phase(self, cost: np.ndarray, label: str) -> bool:
        """Iterate to optimality; return False if an unbounded ray is found."""
        opt_tol = self.settings.feas_tol
        pivot_tol = self.settings.pivot_tol
        stall_limit = 10 * (self.nv + self.p)
        best = float(cost @ self.x)
        stall = 0
        bland = False

        while True:
            if self.iterations >= self.limit:
                raise IterationLimitError(
                    f"simplex exceeded {self.limit} iterations in {label} "
                    f"(nv={self.nv}, p={self.p})"
                )
            if self.iterations and self.iterations % REFACTOR_EVERY == 0:
                self._refactor()

            reduced = cost - cost[self.basis] @ self.tableau if self.p else cost.copy()
            free_to_move = ~self.is_basic & (self.lo < self.up)
            can_increase = free_to_move & (reduced < -opt_tol) & (self.x < self.up)
            can_decrease = free_to_move & (reduced > opt_tol) & (self.x > self.lo)
            eligible = can_increase | can_decrease
            if not eligible.any():
                return True

            if bland:
                entering = int(np.flatnonzero(eligible)[0])
            else:
                entering = int(np.argmax(np.where(eligible, np.abs(reduced), -1.0)))
            direction = 1.0 if can_increase[entering] else -1.0

            alpha = direction * self.tableau[:, entering] if self.p else np.zeros(0)
            x_basic = self.x[self.basis]
            lo_basic = self.lo[self.basis]
            up_basic = self.up[self.basis]
            ratios = np.full(self.p, INF)
            falling = alpha > pivot_tol
            rising = alpha < -pivot_tol
            ratios[falling] = (x_basic[falling] - lo_basic[falling]) / alpha[falling]
            ratios[rising] = (up_basic[rising] - x_basic[rising]) / -alpha[rising]
            ratios = np.maximum(ratios, 0.0)

            step_row = float(ratios.min()) if self.p else INF
            step_flip = self.up[entering] - self.lo[entering]
            if not np.isfinite(step_row) and not np.isfinite(step_flip):
                logger.debug("%s: unbounded ray along variable %d", label, entering)
                return False

            if step_flip <= step_row:
                step = step_flip
                self.x[entering] = self.up[entering] if direction > 0 else self.lo[entering]
                if self.p:
                    self.x[self.basis] = x_basic - step * alpha
            else:
                step = step_row
                tied = np.flatnonzero(ratios <= step_row + pivot_tol)
                if bland:
                    leaving_row = int(tied[np.argmin(self.basis[tied])])
                else:
                    # Largest pivot among ties, then lowest basic index.
                    magnitude = np.abs(alpha[tied])
                    top = tied[magnitude >= magnitude.max() * (1 - 1e-12)]
                    leaving_row = int(top[np.argmin(self.basis[top])])
                leaving = int(self.basis[leaving_row])

                self.x[self.basis] = x_basic - step * alpha
                self.x[entering] += direction * step
                self.x[leaving] = lo_basic[leaving_row] if alpha[leaving_row] > 0 else up_basic[leaving_row]

                pivot_row = self.tableau[leaving_row] / self.tableau[leaving_row, entering]
                factors = self.tableau[:, entering].copy()
                factors[leaving_row] = 0.0
                self.tableau -= np.outer(factors, pivot_row)
                self.tableau[leaving_row] = pivot_row
                self.basis[leaving_row] = entering
                self.is_basic[leaving] = False
                self.is_basic[entering] = True

            self.iterations += 1
            value = float(cost @ self.x)
            if value < best - opt_tol * max(1.0, abs(best)):
                best = value
                stall = 0
            else:
                stall += 1
                if not bland and stall > stall_limit:
                    logger.debug("%s: no progress in %d iterations, switching to Bland's rule", label, stall)
                    bland = True

    def run(self) -> LpOutcome:
        nv, p = self.nv, self.p
        phase_one = np.concatenate([np.zeros(nv), np.ones(p)])
        if p:
            self._run_phase(phase_one, "phase 1")
            self._refactor()
            infeasibility = float(self.x[nv:].sum())
            logger.debug("phase 1 finished after %d iterations, residual %.3e", self.iterations, infeasibility)
            if infeasibility > self.feas:
                certificate = self._duals(phase_one)
                return LpOutcome(
                    status=LpStatus.INFEASIBLE,
                    infeasibility_certificate=certificate,
                    iterations=self.iterations,
                )
            self.up[nv:] = 0.0

        phase_two = np.concatenate([self.problem.objective, np.zeros(p)])
        bounded = self._run_phase(phase_two, "phase 2")
        if not bounded:
            return LpOutcome(status=LpStatus.UNBOUNDED, iterations=self.iterations)

        self._refactor()
        solution = self.x[:nv].copy()
        return LpOutcome(
            status=LpStatus.OPTIMAL,
            solution=solution,
            objective_value=float(self.problem.objective @ solution),
            iterations=self.iterations,
        )


def solve_lp(problem: LpProblem, settings: Optional[SolverSettings] = None) -> LpOutcome:
    """Solve ``problem`` with the two-phase bounded-variable simplex method.

    Returns a vertex solution when optimal. Infeasible outcomes carry a dual
    vector ``y`` with ``farkas_gap(problem, y) > 0``.

    Raises:
        IterationLimitError: When the iteration budget is exhausted.
    """
    settings = settings or SolverSettings()
    return _BoundedSimplex(problem, settings).run()


def lu_factor(A, pivot_tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Doolittle LU factorisation with partial pivoting.

    Returns ``(lu, perm)`` where ``A[perm] = L U``, with the unit lower factor
    stored below the diagonal of ``lu``.
    """
    lu = as_matrix(A, "A").copy()
    n, cols = lu.shape
    if n != cols:
        raise LPInputError(f"LU factorisation needs a square matrix, got {n}x{cols}")

    threshold = pivot_tol * max(1.0, float(np.max(np.abs(lu))) if lu.size else 1.0)
    perm = np.arange(n)
    for k in range(n):
        pivot = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[pivot, k]) <= threshold:
            raise SingularMatrixError(f"matrix is numerically singular at column {k}")
        if pivot != k:
            lu[[k, pivot]] = lu[[pivot, k]]
            perm[[k, pivot]] = perm[[pivot, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def _lu_substitute(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    y = b[perm].copy()
    for i in range(1, n):
        y[i] -= lu[i, :i] @ y[:i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def lu_solve(
    A,
    b,
    settings: Optional[SolverSettings] = None,
    factor: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    """Solve the square system ``A x = b`` by LU with partial pivoting.

    One step of iterative refinement is applied to the solution.

    Raises:
        SingularMatrixError: When a pivot is below ``settings.pivot_tol``.
    """
    settings = settings or SolverSettings()
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != b.size:
        raise LPInputError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    lu, perm = factor if factor is not None else lu_factor(A, settings.pivot_tol)

    x = _lu_substitute(lu, perm, b)
    x += _lu_substitute(lu, perm, b - A @ x)
    return x
