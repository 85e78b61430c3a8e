"""Level-set charts of sweep results as SVG documents."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.experiment import CellResult, SweepMode, conjecture_curve, level_set, slices  # noqa: E402

logger = logging.getLogger(__name__)

CURVE_SAMPLES = 256
CURVE_RANGE = (0.01, 0.99)


class PlotError(ValueError):
    """Raised when a chart cannot be drawn from the given table."""


@dataclass
class PlotSpec:
    mode: SweepMode
    levels: Tuple[float, ...] = (0.1, 0.5, 0.9)
    conjecture: bool = False
    cs_bound: bool = False
    formulations: Optional[Tuple[str, ...]] = None
    distributions: Optional[Tuple[str, ...]] = None
    title: str = "Recovery success level sets"
    size: Tuple[float, float] = field(default=(6.4, 4.8))


def _axis_labels(mode: SweepMode) -> Tuple[str, str]:
    if mode is SweepMode.RHO_DELTA:
        return "delta = m/n", "rho = k/m"
    return "eta = k/n", "delta = m/n"


def reference_curves(spec: PlotSpec) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Sampled reference curves requested by ``spec`` (EtaDelta plane only)."""
    if not (spec.conjecture or spec.cs_bound):
        return {}
    if spec.mode is not SweepMode.ETA_DELTA:
        logger.warning("reference curves are drawn in the (eta, delta) plane only; skipped")
        return {}
    eta = np.linspace(CURVE_RANGE[0], CURVE_RANGE[1], CURVE_SAMPLES)
    curves = {}
    if spec.conjecture:
        curves["conjecture"] = (eta, conjecture_curve(eta))
    if spec.cs_bound:
        # k log2(n/k) / n written in eta
        curves["cs-bound"] = (eta, eta * np.log2(1.0 / eta))
    return curves


def render_plot(cells: Sequence[CellResult], spec: PlotSpec, path: str) -> Path:
    """Draw level sets (and optional reference curves) and save an SVG to ``path``.

    Each level-set line carries the SVG id ``level-<rate>-<formulation>-<distribution>``;
    the reference curves use ``conjecture`` and ``cs-bound``.
    """
    chosen = [
        c
        for c in cells
        if (spec.formulations is None or c.formulation in spec.formulations)
        and (spec.distributions is None or c.distribution in spec.distributions)
    ]
    if not chosen:
        raise PlotError("no cells to plot")

    matplotlib.rcParams["svg.hashsalt"] = "binlp"
    matplotlib.rcParams["svg.fonttype"] = "none"
    fig, ax = plt.subplots(figsize=spec.size)
    try:
        for (formulation, distribution), group in sorted(slices(chosen).items()):
            for target in spec.levels:
                levels = level_set(group, target, spec.mode)
                if not levels.points:
                    continue
                xs, ys = zip(*levels.points)
                (line,) = ax.plot(xs, ys, marker=".", linewidth=1.2, label=f"{formulation} {distribution} {target:g}")
                line.set_gid(f"level-{target:g}-{formulation}-{distribution}")

        styles = {"conjecture": ("black", "--", "H(eta)/2"), "cs-bound": ("gray", ":", "k log2(n/k) / n")}
        for name, (xs, ys) in reference_curves(spec).items():
            color, style, label = styles[name]
            (line,) = ax.plot(xs, ys, color=color, linestyle=style, label=label)
            line.set_gid(name)

        xlabel, ylabel = _axis_labels(spec.mode)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.0)
        ax.set_title(spec.title)
        ax.grid(True, linestyle="--", alpha=0.5)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="best", fontsize=7)

        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return out
