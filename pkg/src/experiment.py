"""Monte Carlo phase-transition sweeps and their level-set analysis."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from lib.lp_core import LPError, SolverSettings
from lib.randgen import (
    DistributionSpec,
    SeedSpec,
    check_unique_seeds,
    sample_matrix,
)
from src.recovery import (
    Formulation,
    binary_from_pm_one,
    check_success,
    parse_formulation,
    recover,
    recover_linf_pm,
    sample_signal,
)

logger = logging.getLogger(__name__)

SWEEP_FORMULATIONS = (Formulation.LINF, Formulation.L1_BOX, Formulation.NONNEG, Formulation.BOX_FEAS)
K_RULES = ("quarter_m", "step4")


class SweepError(ValueError):
    """Raised for invalid sweep configurations or result slices."""


class SweepMode(str, Enum):
    RHO_DELTA = "RhoDelta"
    ETA_DELTA = "EtaDelta"


@dataclass(frozen=True)
class SweepConfig:
    mode: SweepMode
    n: int
    formulations: Tuple[Formulation, ...]
    distributions: Tuple[DistributionSpec, ...]
    trials_per_cell: int = 200
    base_seed: int = 0
    tolerance: float = 1e-9
    m_values: Optional[Tuple[int, ...]] = None
    k_values: Optional[Tuple[int, ...]] = None
    k_rule: str = "quarter_m"
    couple_signals: bool = False
    linf_negative_support: bool = False

    def __post_init__(self) -> None:
        if self.trials_per_cell < 1:
            raise SweepError("trials_per_cell must be at least 1")
        if self.n < 10:
            raise SweepError("n must be at least 10")
        if not self.formulations:
            raise SweepError("at least one formulation is required")
        if not self.distributions:
            raise SweepError("at least one distribution is required")
        for formulation in self.formulations:
            if formulation not in SWEEP_FORMULATIONS:
                raise SweepError(f"formulation {formulation.value} cannot be swept")
        if self.k_rule not in K_RULES:
            raise SweepError(f"k_rule must be one of {', '.join(K_RULES)}")
        if not self.tolerance > 0:
            raise SweepError("tolerance must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "n": self.n,
            "formulations": [f.value for f in self.formulations],
            "distributions": [d.name for d in self.distributions],
            "trials_per_cell": self.trials_per_cell,
            "base_seed": self.base_seed,
            "tolerance": self.tolerance,
            "m_values": list(self.m_values) if self.m_values is not None else None,
            "k_values": list(self.k_values) if self.k_values is not None else None,
            "k_rule": self.k_rule,
            "couple_signals": self.couple_signals,
            "linf_negative_support": self.linf_negative_support,
        }


@dataclass
class CellResult:
    distribution: str
    formulation: str
    n: int
    m: int
    k: int
    trials: int
    successes: Optional[int]
    error: Optional[str] = None

    @property
    def rate(self) -> Optional[float]:
        return None if self.successes is None else self.successes / self.trials

    @property
    def delta(self) -> float:
        return self.m / self.n

    @property
    def rho(self) -> float:
        return self.k / self.m

    @property
    def eta(self) -> float:
        return self.k / self.n

    @property
    def stderr(self) -> Optional[float]:
        rate = self.rate
        return None if rate is None else math.sqrt(rate * (1.0 - rate) / self.trials)

    def sort_key(self) -> Tuple[str, str, int, int]:
        return (self.distribution, self.formulation, self.k, self.m)


@dataclass
class LevelSet:
    target_rate: float
    points: List[Tuple[float, float]] = field(default_factory=list)
    non_monotone: List[float] = field(default_factory=list)
    notice: Optional[str] = None


@dataclass
class FitRow:
    eta: float
    delta_star: Optional[float]
    conjecture: float

    @property
    def deviation(self) -> Optional[float]:
        return None if self.delta_star is None else self.delta_star - self.conjecture


@dataclass
class FitReport:
    rows: List[FitRow]
    max_abs_deviation: Optional[float]
    mean_abs_deviation: Optional[float]
    gaps: int


def _spaced(low: float, high: float, count: int) -> List[int]:
    """``count`` equally spaced values rounded to integers, endpoints kept, duplicates dropped."""
    low_i, high_i = int(math.floor(low + 0.5)), int(math.floor(high + 0.5))
    if count < 2 or low_i == high_i:
        return sorted({low_i, high_i})
    values = np.floor(np.linspace(low, high, count) + 0.5).astype(int)
    return sorted(set(values.tolist()) | {low_i, high_i})


def k_grid(m: int, rule: str = "quarter_m") -> List[int]:
    """Sparsity values for one m in the RhoDelta geometry (1 <= k <= m)."""
    if rule == "step4":
        return sorted(set(range(1, m + 1, 4)) | {m})
    return _spaced(1, m, math.ceil(m / 4))


def grid_cells(config: SweepConfig) -> List[Tuple[int, int]]:
    """Ordered ``(m, k)`` cells of the sweep."""
    n = config.n
    cells = []
    if config.mode is SweepMode.RHO_DELTA:
        m_values = config.m_values or _spaced(n / 10, 9 * n / 10, 17)
        for m in m_values:
            ks = [k for k in config.k_values if k <= m] if config.k_values else k_grid(m, config.k_rule)
            cells.extend((m, k) for k in ks if 1 <= k <= m)
    else:
        k_values = config.k_values or _spaced(n / 10, 9 * n / 10, 17)
        m_values = config.m_values or sorted({max(1, m) for m in _spaced(0.02 * n, 0.98 * n, 25)})
        cells.extend((m, k) for k in k_values for m in m_values)

    for m, k in cells:
        if not (1 <= m and 1 <= k <= n):
            raise SweepError(f"grid cell m={m}, k={k} is outside 1 <= k <= n={n}")
    return cells


def _rep_seed(config: SweepConfig, dist_index: int, m: int, k: int, rep: int) -> SeedSpec:
    return SeedSpec(config.base_seed, (dist_index, m, k, rep))


def _run_cell(task: Tuple[SweepConfig, int, int, int]) -> List[CellResult]:
    """All repetitions of one (distribution, m, k) cell, for every formulation."""
    config, dist_index, m, k = task
    dist = config.distributions[dist_index]
    n = config.n
    settings = SolverSettings(feas_tol=config.tolerance)
    successes = {f: 0 for f in config.formulations}
    errors: Dict[Formulation, str] = {}

    for rep in range(config.trials_per_cell):
        seed = _rep_seed(config, dist_index, m, k, rep)
        A = sample_matrix(dist, m, n, seed.child(0))
        x_signal = sample_signal(n, k, seed.child(1))
        if config.couple_signals:
            y_signal = sample_signal(n, k, seed.child(1), alphabet="pm_one")
        else:
            y_signal = sample_signal(n, k, seed.child(2), alphabet="pm_one")
        y_bar = y_signal.to_vector()
        if config.linf_negative_support:
            y_bar = -y_bar
        b = A @ x_signal.binary_vector()
        d = A @ y_bar

        for formulation in config.formulations:
            if formulation in errors:
                continue
            try:
                if formulation is Formulation.LINF:
                    result = recover_linf_pm(A, d, settings)
                    ok = check_success(result.y_hat, binary_from_pm_one(y_bar), config.tolerance, pm_one=True)
                else:
                    result = recover(formulation, A, b, settings)
                    ok = check_success(result.x_hat, x_signal, config.tolerance)
            except LPError as exc:
                errors[formulation] = f"{type(exc).__name__}: {exc}"
                logger.warning("cell %s m=%d k=%d %s aborted: %s", dist.name, m, k, formulation.value, exc)
                continue
            successes[formulation] += int(ok)

    results = []
    for formulation in config.formulations:
        failed = errors.get(formulation)
        results.append(
            CellResult(
                distribution=dist.name,
                formulation=formulation.value,
                n=n,
                m=m,
                k=k,
                trials=config.trials_per_cell,
                successes=None if failed else successes[formulation],
                error=failed,
            )
        )
    logger.info(
        "cell %s m=%d k=%d: %s",
        dist.name,
        m,
        k,
        ", ".join(f"{r.formulation}={r.rate if r.rate is not None else 'error'}" for r in results),
    )
    return results


def run_sweep(config: SweepConfig, jobs: int = 1) -> List[CellResult]:
    """Run every (distribution, cell) of ``config``; output order is independent of ``jobs``."""
    cells = grid_cells(config)
    check_unique_seeds(
        _rep_seed(config, d, m, k, rep).value
        for d in range(len(config.distributions))
        for m, k in cells
        for rep in range(config.trials_per_cell)
    )
    tasks = [(config, d, m, k) for d in range(len(config.distributions)) for m, k in cells]
    logger.info("running %d cells x %d trials with %d job(s)", len(tasks), config.trials_per_cell, jobs)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_cell, tasks))
    else:
        batches = [_run_cell(task) for task in tasks]

    results = [cell for batch in batches for cell in batch]
    results.sort(key=CellResult.sort_key)
    return results


def _axes(cell: CellResult, mode: SweepMode) -> Tuple[float, float]:
    """(abscissa, ordinate) of a cell in the mode's plane."""
    if mode is SweepMode.RHO_DELTA:
        return cell.delta, cell.rho
    return cell.eta, cell.delta


def _check_slice(cells: Sequence[CellResult]) -> None:
    keys = {(c.formulation, c.distribution) for c in cells}
    if len(keys) > 1:
        raise SweepError(f"level sets need one (formulation, distribution) slice, got {sorted(keys)}")


def _is_monotone(rates: Sequence[float]) -> bool:
    steps = np.diff(rates)
    return bool(np.all(steps >= 0) or np.all(steps <= 0))


def level_set(cells: Sequence[CellResult], target_rate: float, mode=SweepMode.ETA_DELTA) -> LevelSet:
    """Interpolated ordinate where the success rate crosses ``target_rate`` on each gridline."""
    mode = SweepMode(mode)
    if not (0 < target_rate < 1):
        raise SweepError("target_rate must lie in (0, 1)")
    _check_slice(cells)
    result = LevelSet(target_rate=target_rate)

    columns: Dict[float, List[Tuple[float, float]]] = {}
    for cell in cells:
        if cell.rate is None:
            continue
        abscissa, ordinate = _axes(cell, mode)
        columns.setdefault(abscissa, []).append((ordinate, cell.rate))

    if len(columns) < 2:
        result.notice = f"fewer than two gridlines ({len(columns)}); level set {target_rate} is empty"
        logger.warning(result.notice)
        return result

    for abscissa in sorted(columns):
        column = sorted(columns[abscissa])
        ordinates = [o for o, _ in column]
        rates = [r for _, r in column]
        crossing = None
        for i, rate in enumerate(rates):
            if rate == target_rate:
                crossing = ordinates[i]
                break
            if i + 1 < len(rates) and (rate - target_rate) * (rates[i + 1] - target_rate) < 0:
                fraction = (target_rate - rate) / (rates[i + 1] - rate)
                crossing = ordinates[i] + fraction * (ordinates[i + 1] - ordinates[i])
                break
        if crossing is None:
            continue
        if not _is_monotone(rates):
            result.non_monotone.append(abscissa)
            logger.warning("rates along gridline %.4f are not monotone; first crossing used", abscissa)
        result.points.append((abscissa, crossing))
    return result


def transition_points(cells: Sequence[CellResult]) -> List[Tuple[float, float]]:
    """``(eta, delta_star)`` where the success rate crosses 0.5 (EtaDelta geometry)."""
    return level_set(cells, 0.5, SweepMode.ETA_DELTA).points


def transition_width(cells: Sequence[CellResult], mode=SweepMode.ETA_DELTA) -> List[Tuple[float, float]]:
    """Distance between the 0.1 and 0.9 level sets on each gridline both cross."""
    low = dict(level_set(cells, 0.1, mode).points)
    high = dict(level_set(cells, 0.9, mode).points)
    return [(x, abs(high[x] - low[x])) for x in sorted(set(low) & set(high))]


def binary_entropy(x):
    """``H(x) = -x log2 x - (1 - x) log2 (1 - x)`` with ``H(0) = H(1) = 0``."""
    values = np.asarray(x, dtype=float)
    if np.any(np.isnan(values)) or np.any(values < 0) or np.any(values > 1):
        raise ValueError(f"binary entropy is defined on [0, 1], got {x!r}")
    inner = (values > 0) & (values < 1)
    safe = np.where(inner, values, 0.5)
    entropy = np.where(inner, -safe * np.log2(safe) - (1 - safe) * np.log2(1 - safe), 0.0)
    return float(entropy) if entropy.ndim == 0 else entropy


def conjecture_curve(eta):
    """Conjectured transition ``delta = H(eta) / 2``."""
    return binary_entropy(eta) / 2


def cs_lower_bound_curve(n: int, k: int) -> float:
    """Measurement count ``k log2(n / k)`` needed for general k-sparse signals."""
    if not (1 <= k <= n):
        raise ValueError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    return k * math.log2(n / k)


def fit_report(cells: Sequence[CellResult]) -> FitReport:
    """Compare each gridline's transition point with ``H(eta) / 2``."""
    _check_slice(cells)
    etas = sorted({c.eta for c in cells})
    found = dict(transition_points(cells))
    rows = [FitRow(eta=eta, delta_star=found.get(eta), conjecture=conjecture_curve(eta)) for eta in etas]
    deviations = [abs(r.deviation) for r in rows if r.deviation is not None]
    gaps = sum(1 for r in rows if r.delta_star is None)
    if gaps:
        logger.warning("%d gridline(s) without a 0.5 crossing excluded from the fit summary", gaps)
    return FitReport(
        rows=rows,
        max_abs_deviation=max(deviations) if deviations else None,
        mean_abs_deviation=float(np.mean(deviations)) if deviations else None,
        gaps=gaps,
    )


def slices(cells: Iterable[CellResult]) -> Dict[Tuple[str, str], List[CellResult]]:
    """Group cells by (formulation, distribution)."""
    grouped: Dict[Tuple[str, str], List[CellResult]] = {}
    for cell in cells:
        grouped.setdefault((cell.formulation, cell.distribution), []).append(cell)
    return grouped


def build_config(
    mode,
    n: int,
    formulations: Sequence,
    distributions: Sequence,
    **options: Any,
) -> SweepConfig:
    return SweepConfig(
        mode=SweepMode(mode),
        n=int(n),
        formulations=tuple(parse_formulation(f) for f in formulations),
        distributions=tuple(DistributionSpec.parse(d) for d in distributions),
        **options,
    )
