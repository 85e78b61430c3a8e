"""LP relaxations for recovering binary k-sparse solutions of ``A x = b``."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Iterable, Optional, Tuple, Union

import numpy as np

from lib.lp_core import (
    INF,
    LpProblem,
    LpStatus,
    SolverSettings,
    as_matrix,
    as_vector,
    lu_solve,
    solve_lp,
)
from lib.randgen import SamplingError, SeedSpec, sample_support

logger = logging.getLogger(__name__)


class RecoveryError(ValueError):
    """Raised for inconsistent recovery inputs."""


class Formulation(str, Enum):
    LINF = "LinfL2"
    L1_BOX = "L1Box"
    BOX_FEAS = "BoxFeas"
    NONNEG = "NonnegL1"
    SQUARE = "SquareInverse"


# Command-line names for each formulation.
FORMULATION_ALIASES = {
    "linf": Formulation.LINF,
    "l1box": Formulation.L1_BOX,
    "boxfeas": Formulation.BOX_FEAS,
    "nonneg": Formulation.NONNEG,
    "square": Formulation.SQUARE,
}


def parse_formulation(name) -> Formulation:
    if isinstance(name, Formulation):
        return name
    text = str(name).strip()
    if text.lower() in FORMULATION_ALIASES:
        return FORMULATION_ALIASES[text.lower()]
    try:
        return Formulation(text)
    except ValueError:
        choices = ", ".join([f.value for f in Formulation] + sorted(FORMULATION_ALIASES))
        raise RecoveryError(f"unknown formulation {name!r}; expected one of {choices}")


@dataclass(frozen=True)
class SparseBinarySignal:
    """A vector of length ``n`` that is 1 on ``support`` and 0 elsewhere.

    With ``alphabet='pm_one'`` the vector form is +1 on the support and -1
    elsewhere.
    """

    n: int
    support: FrozenSet[int]
    alphabet: str = "binary"

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", frozenset(int(j) for j in self.support))
        if self.n < 1:
            raise RecoveryError(f"signal length must be positive, got {self.n}")
        if any(j < 0 or j >= self.n for j in self.support):
            raise RecoveryError(f"support indices must lie in [0, {self.n})")
        if self.alphabet not in ("binary", "pm_one"):
            raise RecoveryError(f"unknown alphabet {self.alphabet!r}")

    @property
    def k(self) -> int:
        return len(self.support)

    @classmethod
    def from_vector(cls, values) -> "SparseBinarySignal":
        vec = as_vector(values, "truth")
        if not np.all((vec == 0) | (vec == 1)):
            raise RecoveryError("truth vector must contain only 0 and 1")
        return cls(vec.size, frozenset(np.flatnonzero(vec).tolist()))

    def binary_vector(self) -> np.ndarray:
        vec = np.zeros(self.n)
        vec[sorted(self.support)] = 1.0
        return vec

    def to_vector(self) -> np.ndarray:
        if self.alphabet == "pm_one":
            return 2.0 * self.binary_vector() - 1.0
        return self.binary_vector()

    def complement(self) -> "SparseBinarySignal":
        return SparseBinarySignal(self.n, frozenset(range(self.n)) - self.support, self.alphabet)


def binary_from_pm_one(y) -> SparseBinarySignal:
    """Map a +-1 vector ``y`` to the binary signal ``x = (e - y) / 2``."""
    vec = as_vector(y, "y")
    if not np.all(np.abs(vec) == 1):
        raise RecoveryError("expected a vector with entries in {-1, +1}")
    return SparseBinarySignal(vec.size, frozenset(np.flatnonzero(vec < 0).tolist()))


@dataclass
class RecoveryInstance:
    A: np.ndarray
    b: np.ndarray
    truth: Optional[SparseBinarySignal] = None

    def __post_init__(self) -> None:
        self.A, self.b = _check_system(self.A, self.b)
        if self.truth is not None:
            if self.truth.n != self.A.shape[1]:
                raise RecoveryError("truth length does not match the number of columns")
            scale = 1.0 + float(np.max(np.abs(self.b)))
            residual = float(np.max(np.abs(self.A @ self.truth.binary_vector() - self.b)))
            if residual > 1e-12 * scale:
                raise RecoveryError(f"b is not A @ truth (residual {residual:.3e})")

    @classmethod
    def from_truth(cls, A, truth: SparseBinarySignal) -> "RecoveryInstance":
        A = as_matrix(A, "A")
        return cls(A, A @ truth.binary_vector(), truth)


@dataclass
class RecoveryResult:
    formulation: Formulation
    x_hat: Optional[np.ndarray]
    status: LpStatus
    auxiliary: Optional[float] = None
    objective: Optional[float] = None
    y_hat: Optional[np.ndarray] = None

    @property
    def solved(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _check_system(A, b) -> Tuple[np.ndarray, np.ndarray]:
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != b.size:
        raise RecoveryError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    return A, b


def _from_outcome(formulation: Formulation, outcome) -> RecoveryResult:
    return RecoveryResult(
        formulation=formulation,
        x_hat=outcome.solution,
        status=outcome.status,
        objective=outcome.objective_value,
    )


def recover_l1_box(A, b, settings: Optional[SolverSettings] = None) -> RecoveryResult:
    """Minimise ``e^T x`` subject to ``A x = b, 0 <= x <= 1``."""
    A, b = _check_system(A, b)
    n = A.shape[1]
    problem = LpProblem(np.ones(n), A, b, np.zeros(n), np.ones(n))
    return _from_outcome(Formulation.L1_BOX, solve_lp(problem, settings))


def feasibility_box(A, b, settings: Optional[SolverSettings] = None) -> RecoveryResult:
    """Any vertex of ``{A x = b, 0 <= x <= 1}``."""
    A, b = _check_system(A, b)
    n = A.shape[1]
    problem = LpProblem(np.zeros(n), A, b, np.zeros(n), np.ones(n))
    return _from_outcome(Formulation.BOX_FEAS, solve_lp(problem, settings))


def recover_nonneg(A, b, settings: Optional[SolverSettings] = None) -> RecoveryResult:
    """Minimise ``e^T x`` subject to ``A x = b, x >= 0``."""
    A, b = _check_system(A, b)
    n = A.shape[1]
    problem = LpProblem(np.ones(n), A, b, np.zeros(n), np.full(n, INF))
    return _from_outcome(Formulation.NONNEG, solve_lp(problem, settings))


def linf_problem(A, d) -> LpProblem:
    """Equality form of ``min delta s.t. A y = d, -delta e <= y <= delta e``.

    Variables are ``(y, delta, s, t)`` with ``y`` free, ``delta, s, t >= 0``
    and rows ``y_j - delta + s_j = 0``, ``-y_j - delta + t_j = 0``.
    """
    m, n = A.shape
    eye = np.eye(n)
    ones = np.ones((n, 1))
    zeros = np.zeros((n, n))
    G = np.vstack(
        [
            np.hstack([A, np.zeros((m, 1)), np.zeros((m, n)), np.zeros((m, n))]),
            np.hstack([eye, -ones, eye, zeros]),
            np.hstack([-eye, -ones, zeros, eye]),
        ]
    )
    h = np.concatenate([d, np.zeros(2 * n)])
    c = np.zeros(3 * n + 1)
    c[n] = 1.0
    lower = np.concatenate([np.full(n, -INF), np.zeros(2 * n + 1)])
    upper = np.full(3 * n + 1, INF)
    return LpProblem(c, G, h, lower, upper)


def recover_linf_pm(A, d, settings: Optional[SolverSettings] = None) -> RecoveryResult:
    """Solve the l-infinity LP in the +-1 variables ``y`` from ``d = A y``."""
    A, d = _check_system(A, d)
    n = A.shape[1]
    outcome = solve_lp(linf_problem(A, d), settings)
    result = RecoveryResult(formulation=Formulation.LINF, x_hat=None, status=outcome.status)
    if outcome.is_optimal:
        y_hat = outcome.solution[:n].copy()
        radius = max(0.0, float(outcome.solution[n]))
        result.y_hat = y_hat
        result.x_hat = (1.0 - y_hat) / 2.0
        result.auxiliary = radius
        result.objective = radius
    return result


def recover_linf(A, b, settings: Optional[SolverSettings] = None) -> RecoveryResult:
    """Recover ``x`` through ``y = e - 2x``: solve the l-infinity LP on ``d = A e - 2 b``."""
    A, b = _check_system(A, b)
    d = A.sum(axis=1) - 2.0 * b
    return recover_linf_pm(A, d, settings)


def recover_square(A, b, settings: Optional[SolverSettings] = None) -> RecoveryResult:
    """``x = A^{-1} b`` for a square system."""
    A, b = _check_system(A, b)
    m, n = A.shape
    if m != n:
        raise RecoveryError(f"square recovery needs m == n, got {m}x{n}")
    x_hat = lu_solve(A, b, settings)
    return RecoveryResult(formulation=Formulation.SQUARE, x_hat=x_hat, status=LpStatus.OPTIMAL)


_DISPATCH = {
    Formulation.LINF: recover_linf,
    Formulation.L1_BOX: recover_l1_box,
    Formulation.BOX_FEAS: feasibility_box,
    Formulation.NONNEG: recover_nonneg,
    Formulation.SQUARE: recover_square,
}


def recover(formulation, A, b, settings: Optional[SolverSettings] = None) -> RecoveryResult:
    return _DISPATCH[parse_formulation(formulation)](A, b, settings)


def check_success(x_hat, truth: SparseBinarySignal, tol: float = 1e-9, pm_one: bool = False) -> bool:
    """True iff ``|x_hat - ref|_inf / max(1, |ref|_inf) <= tol``.

    ``ref`` is the 0/1 vector of ``truth``, or ``e - 2 * truth`` when
    ``pm_one`` is set.
    """
    if x_hat is None:
        return False
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.size != truth.n:
        raise RecoveryError(f"x_hat has {x_hat.size} entries but truth has length {truth.n}")
    reference = truth.binary_vector()
    if pm_one:
        reference = 1.0 - 2.0 * reference
    scale = max(1.0, float(np.max(np.abs(reference))))
    return bool(np.max(np.abs(x_hat - reference)) / scale <= tol)


def l1_box_lp_data(A, b) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """LP (e^T x, A x = b, 0 <= x <= 1) as ``(G, h, P, q, c)`` with ``P x >= q``."""
    A, b = _check_system(A, b)
    n = A.shape[1]
    P = np.vstack([np.eye(n), -np.eye(n)])
    q = np.concatenate([np.zeros(n), -np.ones(n)])
    return A, b, P, q, np.ones(n)


def support_signal(n: int, support: Iterable[int]) -> SparseBinarySignal:
    return SparseBinarySignal(n, frozenset(support))


def sample_signal(n: int, k: int, seed: Union[int, SeedSpec], alphabet: str = "binary") -> SparseBinarySignal:
    """Draw a random k-sparse signal over ``alphabet`` (binary or pm_one)."""
    if alphabet not in ("binary", "pm_one"):
        raise SamplingError(f"alphabet must be 'binary' or 'pm_one', got {alphabet!r}")
    return SparseBinarySignal(n, frozenset(sample_support(n, k, seed)), alphabet=alphabet)
