"""Brute-force k-set counting and Monte Carlo checks of recovery probability.

A k-set of a finite point cloud is a size-k subset that a hyperplane strictly
separates from the remaining points. For matrices with exchangeable columns
the probability that a fixed k-subset of columns is recoverable equals the
expected number of k-sets divided by C(n, k); :func:`compare_kset_estimators`
compares the two estimators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, List, Optional, Tuple

import numpy as np

from lib.lp_core import SolverSettings, as_matrix
from lib.randgen import DistributionSpec, SeedSpec, derive_seed, sample_matrix
from src.recovery import SparseBinarySignal
from src.uniqueness import SeparationCertificate, is_unique_solution, separate_hulls

logger = logging.getLogger(__name__)

DEFAULT_CAP = 10 ** 6


class KsetSizeError(ValueError):
    """Raised when exhaustive enumeration would exceed the subset cap."""


@dataclass
class PointCloud:
    """Points in R^dim, one per row of ``points``."""

    points: np.ndarray

    def __post_init__(self) -> None:
        self.points = as_matrix(self.points, "points")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_matrix(cls, A) -> "PointCloud":
        """The cloud of columns of ``A``."""
        return cls(as_matrix(A, "A").T.copy())


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float

    @classmethod
    def from_samples(cls, samples) -> "Estimate":
        values = np.asarray(samples, dtype=float)
        stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        return cls(float(values.mean()), stderr)


@dataclass
class KsetReport:
    n: int
    k: int
    count: Optional[int] = None
    ratio: Optional[float] = None
    estimate: Optional[Estimate] = None
    ratio_estimate: Optional[Estimate] = None
    subsets: List[Tuple[int, ...]] = field(default_factory=list)


@dataclass
class KsetIdentityReport:
    m: int
    n: int
    k: int
    trials: int
    recovery: Estimate
    augmented: Estimate
    literal: Estimate

    @staticmethod
    def _pooled(a: Estimate, b: Estimate) -> float:
        return math.sqrt(a.stderr ** 2 + b.stderr ** 2)

    @property
    def augmented_gap(self) -> float:
        return abs(self.recovery.mean - self.augmented.mean)

    @property
    def augmented_stderr(self) -> float:
        return self._pooled(self.recovery, self.augmented)

    @property
    def literal_gap(self) -> float:
        return abs(self.recovery.mean - self.literal.mean)

    @property
    def literal_stderr(self) -> float:
        return self._pooled(self.recovery, self.literal)


def _check_cap(n: int, k: int, cap: int) -> int:
    total = math.comb(n, k)
    if total > cap:
        raise KsetSizeError(f"C({n}, {k}) = {total} subsets exceeds the cap of {cap}")
    return total


def is_separable(
    cloud: PointCloud,
    subset: Iterable[int],
    augment_origin: bool = False,
    settings: Optional[SolverSettings] = None,
    certificate: bool = False,
):
    """True iff conv(subset) misses conv(rest [+ origin]).

    With ``certificate=True`` the separating certificate (or None) is
    returned instead of a boolean.
    """
    chosen = sorted(set(int(j) for j in subset))
    if not chosen:
        raise ValueError("subset must be nonempty")
    if len(chosen) >= cloud.n:
        raise ValueError("subset must be a proper subset of the cloud")
    if chosen[0] < 0 or chosen[-1] >= cloud.n:
        raise ValueError(f"subset indices must lie in [0, {cloud.n})")
    mask = np.zeros(cloud.n, dtype=bool)
    mask[chosen] = True
    proof = separate_hulls(cloud.points[~mask], cloud.points[mask], include_origin=augment_origin, settings=settings)
    separable = isinstance(proof, SeparationCertificate)
    if certificate:
        return proof if separable else None
    return separable


def count_ksets(
    cloud: PointCloud,
    k: int,
    augment_origin: bool = False,
    cap: int = DEFAULT_CAP,
    settings: Optional[SolverSettings] = None,
    collect: bool = False,
) -> KsetReport:
    """Count the k-subsets of ``cloud`` separable from the remaining points."""
    n = cloud.n
    if not (1 <= k <= n):
        raise ValueError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    total = _check_cap(n, k, cap)
    report = KsetReport(n=n, k=k)

    if k == n:
        # Separation from the empty complement; with the origin it is a real test.
        if augment_origin:
            proof = separate_hulls(np.zeros((0, cloud.dim)), cloud.points, include_origin=True, settings=settings)
            report.count = int(isinstance(proof, SeparationCertificate))
        else:
            report.count = 1
        report.ratio = float(report.count)
        if collect and report.count:
            report.subsets.append(tuple(range(n)))
        return report

    count = 0
    for subset in combinations(range(n), k):
        if is_separable(cloud, subset, augment_origin, settings):
            count += 1
            if collect:
                report.subsets.append(subset)
    report.count = count
    report.ratio = count / total
    logger.debug("counted %d %d-sets among %d points", count, k, n)
    return report


def convex_polygon(n: int, radius: float = 1.0, center: Tuple[float, float] = (0.0, 0.0)) -> PointCloud:
    """``n`` points in convex position on a circle."""
    angles = 2.0 * np.pi * np.arange(n) / n
    points = np.column_stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)])
    return PointCloud(points)


def estimate_recovery_prob(
    dist,
    m: int,
    n: int,
    k: int,
    trials: int,
    seed: int,
    settings: Optional[SolverSettings] = None,
) -> Estimate:
    """Fraction of random matrices for which the first k columns are a unique support."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    dist = DistributionSpec.parse(dist)
    truth = SparseBinarySignal(n, frozenset(range(k)))
    hits = []
    for trial in range(trials):
        A = sample_matrix(dist, m, n, SeedSpec(seed, (trial,)))
        hits.append(float(is_unique_solution(A, truth, settings).is_unique))
    return Estimate.from_samples(hits)


def estimate_expected_ksets(
    dist,
    m: int,
    n: int,
    k: int,
    trials: int,
    seed: int,
    augment_origin: bool = False,
    cap: int = DEFAULT_CAP,
    settings: Optional[SolverSettings] = None,
) -> KsetReport:
    """Average k-set count (and count / C(n, k)) over ``trials`` random column clouds."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    total = _check_cap(n, k, cap)
    dist = DistributionSpec.parse(dist)
    counts = []
    for trial in range(trials):
        A = sample_matrix(dist, m, n, SeedSpec(seed, (trial,)))
        counts.append(count_ksets(PointCloud.from_matrix(A), k, augment_origin, cap, settings).count)
    counts = np.asarray(counts, dtype=float)
    return KsetReport(
        n=n,
        k=k,
        count=int(counts[0]) if trials == 1 else None,
        ratio=float(counts.mean() / total),
        estimate=Estimate.from_samples(counts),
        ratio_estimate=Estimate.from_samples(counts / total),
    )


def compare_kset_estimators(
    dist,
    m: int,
    n: int,
    k: int,
    trials: int,
    seed: int,
    settings: Optional[SolverSettings] = None,
) -> KsetIdentityReport:
    """Compare the recovery probability with E[X] / C(n, k) on independent streams.

    Both the origin-augmented k-set count (the separation condition that
    governs uniqueness) and the literal columns-only count are reported.
    """
    recovery = estimate_recovery_prob(dist, m, n, k, trials, derive_seed(seed, 0), settings)
    augmented = estimate_expected_ksets(dist, m, n, k, trials, derive_seed(seed, 1), True, settings=settings)
    literal = estimate_expected_ksets(dist, m, n, k, trials, derive_seed(seed, 2), False, settings=settings)
    report = KsetIdentityReport(
        m=m,
        n=n,
        k=k,
        trials=trials,
        recovery=recovery,
        augmented=augmented.ratio_estimate,
        literal=literal.ratio_estimate,
    )
    logger.info(
        "P=%.4f augmented=%.4f literal=%.4f (gaps %.4f / %.4f)",
        recovery.mean,
        report.augmented.mean,
        report.literal.mean,
        report.augmented_gap,
        report.literal_gap,
    )
    return report
