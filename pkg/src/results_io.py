"""Sweep configuration, results tables and the small text formats used by the CLI."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from lib.randgen import DistributionSpec, SamplingError
from src import __version__
from src.experiment import (
    CellResult,
    FitReport,
    LevelSet,
    SweepConfig,
    SweepError,
    SweepMode,
    build_config,
)
from src.recovery import RecoveryError

logger = logging.getLogger(__name__)

TABLE_COLUMNS = (
    "distribution",
    "formulation",
    "n",
    "m",
    "k",
    "delta",
    "rho",
    "eta",
    "trials",
    "successes",
    "rate",
    "error",
)

CONFIG_KEYS = (
    "mode",
    "n",
    "formulations",
    "distributions",
    "trials_per_cell",
    "base_seed",
    "tolerance",
    "m_values",
    "k_values",
    "k_rule",
    "couple_signals",
    "linf_negative_support",
)


class ConfigError(ValueError):
    """Raised for invalid sweep configuration documents."""


class TableFormatError(ValueError):
    """Raised for malformed matrix, vector or results files."""


def _require_int(name: str, value: Any, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"sweep.{name}: must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"sweep.{name}: must be an integer >= {minimum}, got {value}")
    return value


def _require_bool(name: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"sweep.{name}: must be true or false, got {value!r}")
    return value


def _require_list(name: str, value: Any) -> List[Any]:
    if isinstance(value, str):
        value = [item.strip() for item in value.split(",") if item.strip()]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"sweep.{name}: must be a nonempty list")
    return value


def parse_sweep_config(data: Dict[str, Any]) -> SweepConfig:
    """Validate a ``{'sweep': {...}}`` mapping and build the SweepConfig."""
    if not isinstance(data, dict) or not isinstance(data.get("sweep"), dict):
        raise ConfigError("sweep: missing top-level 'sweep' mapping")
    section = data["sweep"]
    unknown = sorted(set(section) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"sweep.{unknown[0]}: unknown key")
    for required in ("mode", "n", "formulations", "distributions"):
        if section.get(required) is None:
            raise ConfigError(f"sweep.{required}: required")

    try:
        mode = SweepMode(str(section["mode"]))
    except ValueError:
        raise ConfigError(f"sweep.mode: must be RhoDelta or EtaDelta, got {section['mode']!r}")
    n = _require_int("n", section["n"], 10)
    formulations = _require_list("formulations", section["formulations"])
    distributions = _require_list("distributions", section["distributions"])
    try:
        [DistributionSpec.parse(d) for d in distributions]
    except SamplingError as exc:
        raise ConfigError(f"sweep.distributions: {exc}")

    options: Dict[str, Any] = {}
    if section.get("trials_per_cell") is not None:
        options["trials_per_cell"] = _require_int("trials_per_cell", section["trials_per_cell"], 1)
    if section.get("base_seed") is not None:
        options["base_seed"] = _require_int("base_seed", section["base_seed"], 0)
    if section.get("tolerance") is not None:
        tolerance = section["tolerance"]
        if isinstance(tolerance, str):
            try:
                tolerance = float(tolerance)
            except ValueError:
                pass
        if isinstance(tolerance, bool) or not isinstance(tolerance, (int, float)) or not tolerance > 0:
            raise ConfigError(f"sweep.tolerance: must be a positive number, got {section['tolerance']!r}")
        options["tolerance"] = float(tolerance)
    for name in ("m_values", "k_values"):
        if section.get(name) is not None:
            values = _require_list(name, section[name])
            options[name] = tuple(_require_int(name, v, 1) for v in values)
    if section.get("k_rule") is not None:
        options["k_rule"] = str(section["k_rule"])
    for name in ("couple_signals", "linf_negative_support"):
        if section.get(name) is not None:
            options[name] = _require_bool(name, section[name])

    try:
        return build_config(mode, n, formulations, distributions, **options)
    except RecoveryError as exc:
        raise ConfigError(f"sweep.formulations: {exc}")
    except SweepError as exc:
        raise ConfigError(f"sweep: {exc}")


def load_sweep_config(path: str) -> SweepConfig:
    p = Path(path)
    try:
        with p.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}")
    return parse_sweep_config(data)


def canonical_config(config: SweepConfig) -> str:
    return json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))


def config_hash(config: SweepConfig) -> str:
    return hashlib.sha256(canonical_config(config).encode("utf-8")).hexdigest()


def _number(value: float) -> str:
    return repr(float(value))


def write_results_table(path: str, config: SweepConfig, cells: Sequence[CellResult]) -> Path:
    """Write cells in canonical order with a metadata header."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(cells, key=CellResult.sort_key)
    with out.open("w", encoding="utf-8", newline="") as f:
        f.write("# binlp results table\n")
        f.write(f"# tool_version={__version__}\n")
        f.write(f"# config_hash={config_hash(config)}\n")
        f.write(f"# base_seed={config.base_seed}\n")
        f.write(f"# config={canonical_config(config)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for cell in ordered:
            writer.writerow(
                [
                    cell.distribution,
                    cell.formulation,
                    cell.n,
                    cell.m,
                    cell.k,
                    _number(cell.delta),
                    _number(cell.rho),
                    _number(cell.eta),
                    cell.trials,
                    "" if cell.successes is None else cell.successes,
                    "" if cell.rate is None else _number(cell.rate),
                    cell.error or "",
                ]
            )
    return out


def read_results_table(path: str) -> Tuple[Dict[str, str], SweepConfig, List[CellResult]]:
    """Return ``(metadata, config, cells)``; the config hash is re-checked."""
    p = Path(path)
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise TableFormatError(f"cannot read table {path}: {exc}")

    meta: Dict[str, str] = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value
        elif line.strip():
            body.append(line)
    if "config" not in meta:
        raise TableFormatError(f"{path}: missing '# config=' header line")
    try:
        config = parse_sweep_config({"sweep": json.loads(meta["config"])})
    except (json.JSONDecodeError, ConfigError) as exc:
        raise TableFormatError(f"{path}: embedded config is invalid: {exc}")
    if meta.get("config_hash") != config_hash(config):
        raise TableFormatError(f"{path}: config hash does not match the embedded config")

    reader = csv.reader(body)
    header = next(reader, None)
    if header is None or tuple(header) != TABLE_COLUMNS:
        raise TableFormatError(f"{path}: expected columns {','.join(TABLE_COLUMNS)}")

    cells = []
    for lineno, row in enumerate(reader, start=2):
        try:
            record = dict(zip(TABLE_COLUMNS, row))
            cell = CellResult(
                distribution=record["distribution"],
                formulation=record["formulation"],
                n=int(record["n"]),
                m=int(record["m"]),
                k=int(record["k"]),
                trials=int(record["trials"]),
                successes=int(record["successes"]) if record["successes"] else None,
                error=record["error"] or None,
            )
        except (KeyError, ValueError) as exc:
            raise TableFormatError(f"{path}: bad row {lineno}: {exc}")
        if record["rate"] and float(record["rate"]) != cell.rate:
            raise TableFormatError(f"{path}: row {lineno} rate does not equal successes/trials")
        cells.append(cell)
    return meta, config, cells


def write_run_manifest(path: str, config: SweepConfig, wall_time: float, jobs: int, errored: int) -> Path:
    out = Path(path)
    manifest = {
        "tool_version": __version__,
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "base_seed": config.base_seed,
        "wall_time_seconds": round(wall_time, 3),
        "jobs": jobs,
        "errored_cells": errored,
    }
    out.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return out


def read_matrix(path: str) -> np.ndarray:
    """Comma-separated matrix with a one-line header."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise TableFormatError(f"cannot parse matrix file {path}: {exc}")
    if data.size == 0:
        raise TableFormatError(f"matrix file {path} has no rows")
    return data


def read_vector(path: str) -> np.ndarray:
    """Comma-separated vector (one value per line or one row) with a one-line header."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=1)
    except (OSError, ValueError) as exc:
        raise TableFormatError(f"cannot parse vector file {path}: {exc}")
    if data.size == 0:
        raise TableFormatError(f"vector file {path} is empty")
    return data.reshape(-1)


def write_matrix(path: str, A) -> Path:
    out = Path(path)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines = [",".join(f"a{j}" for j in range(A.shape[1]))]
    lines.extend(",".join(_number(v) for v in row) for row in A)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def write_vector(path: str, values, name: str = "value") -> Path:
    out = Path(path)
    lines = [name] + [_number(v) for v in np.asarray(values, dtype=float).reshape(-1)]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def write_level_sets(path: str, entries: Iterable[Tuple[str, str, LevelSet]]) -> Path:
    out = Path(path)
    with out.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["formulation", "distribution", "target_rate", "abscissa", "ordinate", "non_monotone"])
        for formulation, distribution, levels in entries:
            flagged = set(levels.non_monotone)
            for abscissa, ordinate in levels.points:
                writer.writerow(
                    [
                        formulation,
                        distribution,
                        _number(levels.target_rate),
                        _number(abscissa),
                        _number(ordinate),
                        int(abscissa in flagged),
                    ]
                )
    return out


def write_pairs(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    out = Path(path)
    with out.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_number(v) if isinstance(v, float) else v for v in row])
    return out


def write_fit_report(directory: str, entries: Sequence[Tuple[str, str, FitReport]]) -> Tuple[Path, Path]:
    """Per-eta fit table plus a JSON summary, one block per (formulation, distribution)."""
    base = Path(directory)
    table = write_pairs(
        str(base / "fit_report.csv"),
        ["formulation", "distribution", "eta", "delta_star", "conjecture", "deviation"],
        (
            [
                formulation,
                distribution,
                row.eta,
                "" if row.delta_star is None else row.delta_star,
                row.conjecture,
                "" if row.deviation is None else row.deviation,
            ]
            for formulation, distribution, report in entries
            for row in report.rows
        ),
    )
    summary = base / "fit_summary.json"
    summary.write_text(
        json.dumps(
            [
                {
                    "formulation": formulation,
                    "distribution": distribution,
                    "max_abs_deviation": report.max_abs_deviation,
                    "mean_abs_deviation": report.mean_abs_deviation,
                    "gaps": report.gaps,
                }
                for formulation, distribution, report in entries
            ],
            indent=2,
        ),
        encoding="utf-8",
    )
    return table, summary
