"""Certify whether a binary k-sparse solution is the unique optimum of the l1 box LP.

The main test is geometric: ``x_bar`` is the unique optimum of
``min e^T x s.t. A x = b, 0 <= x <= 1`` exactly when the columns outside
the support (together with the origin) and the columns on the support have
disjoint convex hulls. Disjointness is decided by a feasibility LP; its
solution is an intersection witness, its Farkas certificate gives a strictly
separating hyperplane. Both are re-validated by direct evaluation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import FrozenSet, Optional, Union

import numpy as np

from lib.lp_core import (
    INF,
    LpProblem,
    LpStatus,
    SolverSettings,
    as_matrix,
    as_vector,
    solve_lp,
)
from src.recovery import SparseBinarySignal, l1_box_lp_data, recover_l1_box

logger = logging.getLogger(__name__)

FACE_TOL = 1e-7


class CertificateError(RuntimeError):
    """Raised when a solver verdict cannot be turned into a valid proof object."""


class InfeasiblePointError(ValueError):
    """Raised when the candidate solution violates the LP constraints."""


@dataclass(frozen=True)
class Partition:
    J0: FrozenSet[int]
    J1: FrozenSet[int]

    @classmethod
    def from_signal(cls, truth: SparseBinarySignal) -> "Partition":
        return cls(frozenset(range(truth.n)) - truth.support, truth.support)


@dataclass(frozen=True)
class SeparationCertificate:
    """Hyperplane ``{p : normal . p = offset}`` with side-0 points below, side-1 above."""

    normal: np.ndarray
    offset: float
    margin: float

    def validate(self, side0: np.ndarray, side1: np.ndarray, include_origin: bool = True) -> None:
        low = side0 @ self.normal if side0.size else np.zeros(0)
        if include_origin:
            low = np.append(low, 0.0)
        high = side1 @ self.normal
        if not self.margin > 0:
            raise CertificateError(f"separation margin {self.margin!r} is not positive")
        slack = 1e-12 * max(1.0, abs(self.offset))
        if low.size and np.max(low) > self.offset - self.margin + slack:
            raise CertificateError("a side-0 point lies above the separating band")
        if np.min(high) < self.offset + self.margin - slack:
            raise CertificateError("a side-1 point lies below the separating band")


@dataclass(frozen=True)
class IntersectionWitness:
    """Convex weights on both sides whose combinations coincide.

    ``alpha0`` covers the side-0 points, followed by the origin when it is
    part of side 0.
    """

    alpha0: np.ndarray
    alpha1: np.ndarray

    def validate(self, side0: np.ndarray, side1: np.ndarray, include_origin: bool = True, tol: float = 1e-9) -> None:
        points0 = np.vstack([side0, np.zeros((1, side1.shape[1]))]) if include_origin else side0
        if self.alpha0.size != points0.shape[0] or self.alpha1.size != side1.shape[0]:
            raise CertificateError("witness weights do not match the point sets")
        if np.any(self.alpha0 < 0) or np.any(self.alpha1 < 0):
            raise CertificateError("witness weights must be non-negative")
        if abs(self.alpha0.sum() - 1) > tol or abs(self.alpha1.sum() - 1) > tol:
            raise CertificateError("witness weights must sum to one on each side")
        scale = max(1.0, float(np.max(np.abs(side1))), float(np.max(np.abs(points0), initial=0.0)))
        gap = np.max(np.abs(self.alpha0 @ points0 - self.alpha1 @ side1))
        if gap > tol * scale:
            raise CertificateError(f"witness combinations differ by {gap:.3e}")


@dataclass(frozen=True)
class Unique:
    certificate: SeparationCertificate
    is_unique = True


@dataclass(frozen=True)
class NotUnique:
    witness: IntersectionWitness
    is_unique = False


Verdict = Union[Unique, NotUnique]


def separate_hulls(
    side0,
    side1,
    include_origin: bool = True,
    settings: Optional[SolverSettings] = None,
) -> Union[SeparationCertificate, IntersectionWitness]:
    """Decide whether conv(side0 [+ origin]) and conv(side1) intersect.

    ``side0`` and ``side1`` hold one point per row.
    """
    settings = settings or SolverSettings()
    side1 = as_matrix(side1, "side1")
    dim = side1.shape[1]
    side0 = np.asarray(side0, dtype=float).reshape(-1, dim)
    if side1.shape[0] == 0:
        raise ValueError("side 1 must contain at least one point")
    if side0.shape[0] == 0 and not include_origin:
        raise ValueError("side 0 must contain a point or the origin")

    points0 = np.vstack([side0, np.zeros((1, dim))]) if include_origin else side0
    n0, n1 = points0.shape[0], side1.shape[0]
    nv = n0 + n1
    G = np.zeros((dim + 2, nv))
    G[:dim, :n0] = points0.T
    G[:dim, n0:] = -side1.T
    G[dim, :n0] = 1.0
    G[dim + 1, n0:] = 1.0
    h = np.concatenate([np.zeros(dim), [1.0, 1.0]])
    problem = LpProblem(np.zeros(nv), G, h, np.zeros(nv), np.full(nv, INF))
    outcome = solve_lp(problem, settings)

    if outcome.status is LpStatus.OPTIMAL:
        alpha = np.clip(outcome.solution, 0.0, None)
        alpha0, alpha1 = alpha[:n0], alpha[n0:]
        witness = IntersectionWitness(alpha0 / alpha0.sum(), alpha1 / alpha1.sum())
        witness.validate(side0, side1, include_origin, tol=settings.feas_tol * 10)
        return witness

    if outcome.status is not LpStatus.INFEASIBLE:
        raise CertificateError(f"hull intersection LP returned {outcome.status.value}")

    normal = outcome.infeasibility_certificate[:dim].copy()
    size = float(np.max(np.abs(normal), initial=0.0))
    if size == 0:
        raise CertificateError("Farkas certificate has a zero hyperplane normal")
    normal /= size
    low = float(np.max(points0 @ normal)) if n0 else -INF
    high = float(np.min(side1 @ normal))
    if not high > low:
        raise CertificateError(f"extracted hyperplane does not separate (gap {high - low:.3e})")
    certificate = SeparationCertificate(normal=normal, offset=(low + high) / 2.0, margin=(high - low) / 2.0)
    certificate.validate(side0, side1, include_origin)
    return certificate


def is_unique_solution(A, truth: SparseBinarySignal, settings: Optional[SolverSettings] = None) -> Verdict:
    """Decide whether ``truth`` is the unique optimum of the l1 box LP for ``b = A truth``."""
    A = as_matrix(A, "A")
    if truth.n != A.shape[1]:
        raise ValueError(f"truth has length {truth.n} but A has {A.shape[1]} columns")
    if not (1 <= truth.k <= truth.n):
        raise ValueError(f"sparsity must satisfy 1 <= k <= n, got k={truth.k}")

    partition = Partition.from_signal(truth)
    columns = A.T
    side0 = columns[sorted(partition.J0)]
    side1 = columns[sorted(partition.J1)]
    proof = separate_hulls(side0, side1, include_origin=True, settings=settings)
    if isinstance(proof, SeparationCertificate):
        return Unique(proof)
    return NotUnique(proof)


def interval_oracle(A, truth: SparseBinarySignal) -> bool:
    """Closed-form uniqueness test for a single measurement row (m = 1)."""
    row = as_matrix(A, "A")
    if row.shape[0] != 1:
        raise ValueError("the interval test applies to 1 x n matrices only")
    values = row[0]
    partition = Partition.from_signal(truth)
    low = np.append(values[sorted(partition.J0)], 0.0)
    high = values[sorted(partition.J1)]
    return bool(low.max() < high.min() or high.max() < low.min())


def mangasarian_unique(G, h, P, q, c, x_bar, settings: Optional[SolverSettings] = None) -> bool:
    """Uniqueness of ``x_bar`` for ``min c^T x s.t. G x = h, P x >= q``.

    ``x_bar`` is unique iff no ``z != 0`` has ``G z = 0``, ``P_eq z >= 0`` and
    ``c^T z <= 0``, where ``P_eq`` holds the rows tight at ``x_bar``. Each
    coordinate is tested with ``max z_j`` (``z_j <= 1``) and ``min z_j``
    (``z_j >= -1``) over that cone.
    """
    settings = settings or SolverSettings()
    x_bar = as_vector(x_bar, "x_bar")
    nv = x_bar.size
    c = as_vector(c, "c")
    G = np.asarray(G, dtype=float).reshape(-1, nv)
    h = np.asarray(h, dtype=float).reshape(-1)
    P = np.asarray(P, dtype=float).reshape(-1, nv)
    q = np.asarray(q, dtype=float).reshape(-1)
    if c.size != nv or G.shape[0] != h.size or P.shape[0] != q.size:
        raise ValueError("inconsistent dimensions in the LP data")

    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)), float(np.max(np.abs(q), initial=0.0)))
    tol = settings.feas_tol * scale
    if G.shape[0] and np.max(np.abs(G @ x_bar - h)) > tol:
        raise InfeasiblePointError("x_bar violates G x = h")
    slack = P @ x_bar - q
    if np.any(slack < -tol):
        raise InfeasiblePointError("x_bar violates P x >= q")
    tight = P[np.abs(slack) <= tol]

    r, t = G.shape[0], tight.shape[0]
    width = nv + t + 1
    system = np.zeros((r + t + 1, width))
    system[:r, :nv] = G
    system[r:r + t, :nv] = tight
    system[r:r + t, nv:nv + t] = -np.eye(t)
    system[r + t, :nv] = c
    system[r + t, width - 1] = 1.0
    rhs = np.zeros(r + t + 1)

    for j in range(nv):
        for sense in (1.0, -1.0):
            lower = np.concatenate([np.full(nv, -INF), np.zeros(t + 1)])
            upper = np.full(width, INF)
            if sense > 0:
                upper[j] = 1.0
            else:
                lower[j] = -1.0
            objective = np.zeros(width)
            objective[j] = -sense
            outcome = solve_lp(LpProblem(objective, system, rhs, lower, upper), settings)
            if outcome.status is not LpStatus.OPTIMAL:
                raise CertificateError(f"direction test for z_{j} returned {outcome.status.value}")
            if -outcome.objective_value > settings.feas_tol:
                logger.debug("nonzero direction found along z_%d (sense %+d)", j, int(sense))
                return False
    return True


def mangasarian_unique_l1_box(A, truth: SparseBinarySignal, settings: Optional[SolverSettings] = None) -> bool:
    """Direction test instantiated with the l1 box LP data for ``b = A truth``."""
    A = as_matrix(A, "A")
    x_bar = truth.binary_vector()
    G, h, P, q, c = l1_box_lp_data(A, A @ x_bar)
    return mangasarian_unique(G, h, P, q, c, x_bar, settings)


def optimal_face_unique(A, b, settings: Optional[SolverSettings] = None, x_bar=None) -> bool:
    """True iff every coordinate is constant on the optimal face of the l1 box LP.

    With ``x_bar`` the answer is about that point: it must be feasible, and the
    face must be the single point ``x_bar``.
    """
    settings = settings or SolverSettings()
    result = recover_l1_box(A, b, settings)
    if not result.solved:
        raise ValueError(f"l1 box LP is {result.status.value}; the optimal face is undefined")
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    n = A.shape[1]
    if x_bar is not None:
        x_bar = as_vector(x_bar, "x_bar")
        if x_bar.size != n:
            raise ValueError(f"x_bar has length {x_bar.size} but A has {n} columns")
        tol = settings.feas_tol * max(1.0, float(np.max(np.abs(b), initial=0.0)))
        if np.max(np.abs(A @ x_bar - b)) > tol or np.any(x_bar < -tol) or np.any(x_bar > 1 + tol):
            raise InfeasiblePointError("x_bar is not feasible for the l1 box LP")
        if x_bar.sum() > result.objective + settings.feas_tol * max(1.0, float(n)):
            logger.debug("x_bar has value %.6g above the optimum %.6g", x_bar.sum(), result.objective)
            return False
    G = np.vstack([A, np.ones((1, n))])
    h = np.append(b, result.objective)
    for j in range(n):
        values = []
        for sense in (1.0, -1.0):
            objective = np.zeros(n)
            objective[j] = -sense
            outcome = solve_lp(LpProblem(objective, G, h, np.zeros(n), np.ones(n)), settings)
            if outcome.status is not LpStatus.OPTIMAL:
                raise CertificateError(f"optimal-face check for x_{j} returned {outcome.status.value}")
            values.append(outcome.solution[j])
        if values[0] - values[1] > FACE_TOL:
            return False
    return True
