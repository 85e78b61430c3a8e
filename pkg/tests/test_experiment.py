import math

import pytest

import src.experiment as experiment
from src.experiment import (
    CellResult,
    SweepError,
    SweepMode,
    binary_entropy,
    build_config,
    conjecture_curve,
    cs_lower_bound_curve,
    fit_report,
    grid_cells,
    k_grid,
    level_set,
    run_sweep,
    slices,
    transition_points,
    transition_width,
)


def _cell(m, k, successes, trials=10, n=100, formulation="L1Box", distribution="D1"):
    return CellResult(
        distribution=distribution,
        formulation=formulation,
        n=n,
        m=m,
        k=k,
        trials=trials,
        successes=successes,
    )


def _tiny(m, k, formulations=("L1Box",), trials=50, **options):
    return build_config("EtaDelta", 20, formulations, ["D1"], trials_per_cell=trials, m_values=[m], k_values=[k], **options)


class TestGrids:
    def test_eta_delta_default_grid(self):
        config = build_config("EtaDelta", 50, ["L1Box"], ["D1"])
        cells = grid_cells(config)
        ks = sorted({k for _, k in cells})
        ms = sorted({m for m, _ in cells})
        assert ks == [5, 8, 10, 13, 15, 18, 20, 23, 25, 28, 30, 33, 35, 38, 40, 43, 45]
        assert ms == list(range(1, 50, 2))
        assert len(cells) == 17 * 25

    def test_rho_delta_grid_keeps_k_within_m(self):
        config = build_config("RhoDelta", 20, ["L1Box"], ["D1"])
        cells = grid_cells(config)
        assert sorted({m for m, _ in cells}) == list(range(2, 19))
        assert all(1 <= k <= m for m, k in cells)

    def test_k_rules(self):
        assert k_grid(16) == [1, 6, 11, 16]
        assert k_grid(16, "step4") == [1, 5, 9, 13, 16]
        assert k_grid(2) == [1, 2]

    def test_explicit_values_win(self):
        config = build_config("EtaDelta", 40, ["L1Box"], ["D1"], m_values=(10, 20), k_values=(4,))
        assert grid_cells(config) == [(10, 4), (20, 4)]

    def test_cells_outside_the_plane_are_rejected(self):
        with pytest.raises(SweepError, match="outside"):
            grid_cells(build_config("EtaDelta", 20, ["L1Box"], ["D1"], k_values=(25,)))


class TestSweepConfig:
    def test_square_inverse_cannot_be_swept(self):
        with pytest.raises(SweepError, match="cannot be swept"):
            build_config("EtaDelta", 20, ["square"], ["D1"])

    def test_bad_k_rule(self):
        with pytest.raises(SweepError, match="k_rule"):
            build_config("RhoDelta", 20, ["L1Box"], ["D1"], k_rule="halves")

    def test_to_dict_echoes_normalised_names(self):
        data = build_config("EtaDelta", 20, ["linf", "l1box"], ["d2"]).to_dict()
        assert data["formulations"] == ["LinfL2", "L1Box"]
        assert data["distributions"] == ["D2"]
        assert data["mode"] == "EtaDelta"


def test_cell_coordinates_are_ratios():
    cell = _cell(m=40, k=10, successes=3, n=200)
    assert cell.delta * cell.n == pytest.approx(cell.m)
    assert cell.rho * cell.m == pytest.approx(cell.k)
    assert cell.eta * cell.n == pytest.approx(cell.k)
    assert cell.rate == pytest.approx(0.3)
    assert cell.stderr == pytest.approx(math.sqrt(0.3 * 0.7 / 10))


def test_errored_cell_has_no_rate():
    cell = CellResult("D1", "L1Box", 20, 5, 2, 10, None, error="IterationLimitError: too long")
    assert cell.rate is None
    assert cell.stderr is None


class TestRunSweep:
    def test_square_cell_always_recovers(self):
        (cell,) = run_sweep(_tiny(20, 5))
        assert (cell.m, cell.k, cell.trials) == (20, 5, 50)
        assert cell.rate == 1.0

    def test_far_above_the_transition_never_recovers(self):
        (cell,) = run_sweep(_tiny(2, 10))
        assert cell.rate == 0.0

    def test_every_formulation_recovers_square_systems(self):
        cells = run_sweep(_tiny(20, 7, formulations=("LinfL2", "L1Box", "NonnegL1", "BoxFeas"), trials=10))
        assert {c.formulation: c.rate for c in cells} == {"BoxFeas": 1.0, "L1Box": 1.0, "LinfL2": 1.0, "NonnegL1": 1.0}

    def test_signal_options_keep_square_systems_exact(self):
        for options in ({"couple_signals": True}, {"linf_negative_support": True}):
            (cell,) = run_sweep(_tiny(20, 6, formulations=("LinfL2",), trials=5, **options))
            assert cell.rate == 1.0

    def test_repeat_runs_are_identical(self):
        config = build_config("EtaDelta", 20, ["LinfL2", "L1Box"], ["D1", "D3"], trials_per_cell=4, m_values=[6, 12], k_values=[3, 8])
        first = run_sweep(config)
        assert first == run_sweep(config)
        assert first == run_sweep(config, jobs=2)
        assert [c.sort_key() for c in first] == sorted(c.sort_key() for c in first)

    def test_solver_failures_become_error_cells(self, monkeypatch):
        from lib.lp_core import IterationLimitError

        def exploding(formulation, A, b, settings=None):
            raise IterationLimitError("budget exhausted")

        monkeypatch.setattr(experiment, "recover", exploding)
        cells = run_sweep(_tiny(10, 3, formulations=("LinfL2", "L1Box"), trials=3))
        by_name = {c.formulation: c for c in cells}
        assert by_name["L1Box"].successes is None
        assert "budget exhausted" in by_name["L1Box"].error
        assert by_name["LinfL2"].error is None


class TestLevelSet:
    def test_step_data_gives_a_flat_line(self):
        cells = [_cell(m, k, 0 if m < 50 else 10) for k in (10, 20, 30) for m in range(30, 71, 5)]
        levels = level_set(cells, 0.5)
        assert [x for x, _ in levels.points] == [0.1, 0.2, 0.3]
        for _, y in levels.points:
            assert y == pytest.approx(0.475)

    def test_linear_interpolation(self):
        cells = [_cell(40, k, 2) for k in (10, 20)] + [_cell(60, k, 8) for k in (10, 20)]
        levels = level_set(cells, 0.5)
        assert levels.points == [(0.1, pytest.approx(0.5)), (0.2, pytest.approx(0.5))]
        assert levels.non_monotone == []

    def test_first_crossing_of_noisy_data(self):
        cells = [_cell(m, k, s) for k in (10, 20) for m, s in ((40, 6), (50, 4), (60, 9))]
        levels = level_set(cells, 0.5)
        assert levels.points[0] == (0.1, pytest.approx(0.45))
        assert levels.non_monotone == [0.1, 0.2]

    def test_rho_delta_axes(self):
        cells = [_cell(m, k, s) for m in (20, 40) for k, s in ((2, 10), (10, 0))]
        levels = level_set(cells, 0.5, SweepMode.RHO_DELTA)
        assert [x for x, _ in levels.points] == [0.2, 0.4]

    def test_single_gridline_gives_a_notice(self):
        levels = level_set([_cell(40, 10, 2), _cell(60, 10, 8)], 0.5)
        assert levels.points == []
        assert "fewer than two gridlines" in levels.notice

    def test_gridlines_without_a_crossing_are_skipped(self):
        cells = [_cell(40, 10, 10), _cell(60, 10, 10), _cell(40, 20, 2), _cell(60, 20, 8)]
        assert [x for x, _ in level_set(cells, 0.5).points] == [0.2]

    def test_errored_cells_are_ignored(self):
        cells = [_cell(40, k, 2) for k in (10, 20)] + [_cell(60, k, 8) for k in (10, 20)]
        cells.append(CellResult("D1", "L1Box", 100, 50, 10, 10, None, error="boom"))
        assert len(level_set(cells, 0.5).points) == 2

    def test_mixed_slices_are_rejected(self):
        with pytest.raises(SweepError, match="slice"):
            level_set([_cell(40, 10, 2), _cell(60, 10, 8, formulation="NonnegL1")], 0.5)

    def test_target_must_be_a_probability(self):
        with pytest.raises(SweepError):
            level_set([_cell(40, 10, 2)], 1.0)


def test_transition_points_and_width():
    cells = [_cell(m, k, s) for k in (10, 20) for m, s in ((30, 0), (40, 2), (60, 8), (70, 10))]
    assert transition_points(cells) == [(0.1, pytest.approx(0.5)), (0.2, pytest.approx(0.5))]
    assert transition_width(cells) == [(0.1, pytest.approx(0.3)), (0.2, pytest.approx(0.3))]


def test_slices_group_by_formulation_and_distribution():
    cells = [_cell(40, 10, 1), _cell(40, 10, 1, distribution="D2"), _cell(50, 10, 1)]
    grouped = slices(cells)
    assert sorted(grouped) == [("L1Box", "D1"), ("L1Box", "D2")]
    assert len(grouped[("L1Box", "D1")]) == 2


class TestCurves:
    def test_binary_entropy_values(self):
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.1) == pytest.approx(0.4689955935892812)

    def test_binary_entropy_on_arrays(self):
        values = binary_entropy([0.0, 0.25, 0.75])
        assert values[1] == pytest.approx(values[2])
        assert values[0] == 0.0

    def test_binary_entropy_domain(self):
        with pytest.raises(ValueError):
            binary_entropy(1.5)
        with pytest.raises(ValueError):
            binary_entropy(-0.1)

    def test_conjecture_curve(self):
        assert conjecture_curve(0.5) == pytest.approx(0.5)
        assert conjecture_curve(0.0) == 0.0
        assert conjecture_curve(0.1) == pytest.approx(0.2344977967946406)

    def test_measurement_lower_bound(self):
        assert cs_lower_bound_curve(8, 8) == 0.0
        assert cs_lower_bound_curve(8, 2) == pytest.approx(4.0)
        assert cs_lower_bound_curve(500, 50) == pytest.approx(166.09640474436813)
        with pytest.raises(ValueError):
            cs_lower_bound_curve(8, 0)


def _cells_crossing_at(n, k, delta_star, trials=10 ** 6):
    """Two cells on gridline k whose interpolated 0.5-crossing is delta_star."""
    m_low = math.floor(delta_star * n)
    m_high = m_low + 2
    fraction = (delta_star - m_low / n) / ((m_high - m_low) / n)
    rate_low = (0.5 - fraction) / (1.0 - fraction)
    return [_cell(m_low, k, round(rate_low * trials), trials=trials, n=n), _cell(m_high, k, trials, trials=trials, n=n)]


class TestFitReport:
    def test_exact_crossings_have_zero_deviation(self):
        cells = []
        for k in (10, 30, 50):
            cells.extend(_cells_crossing_at(100, k, conjecture_curve(k / 100)))
        report = fit_report(cells)
        assert [row.eta for row in report.rows] == [0.1, 0.3, 0.5]
        assert report.gaps == 0
        assert report.max_abs_deviation == pytest.approx(0.0, abs=1e-6)
        assert report.mean_abs_deviation == pytest.approx(0.0, abs=1e-6)

    def test_missing_crossings_are_counted_as_gaps(self):
        cells = [_cell(m, k, 10) for k in (10, 20) for m in (40, 60)]
        report = fit_report(cells)
        assert report.gaps == 2
        assert report.max_abs_deviation is None
        assert all(row.deviation is None for row in report.rows)


@pytest.mark.slow
def test_linf_transition_near_half_the_columns():
    config = build_config("EtaDelta", 200, ["LinfL2"], ["D1"], trials_per_cell=200, m_values=[70, 130], k_values=[60])
    rates = {c.m: c.rate for c in run_sweep(config, jobs=4)}
    assert rates[130] >= 0.9
    assert rates[70] <= 0.1


@pytest.mark.slow
def test_box_formulation_dominates_nonnegative_at_half_sampling():
    config = build_config("EtaDelta", 200, ["L1Box", "NonnegL1"], ["D1"], trials_per_cell=200, m_values=[100], k_values=[100])
    rates = {c.formulation: c.rate for c in run_sweep(config, jobs=4)}
    assert rates["L1Box"] >= 0.5
    assert rates["NonnegL1"] <= 0.05


@pytest.mark.slow
def test_box_transition_tracks_half_the_entropy():
    n = 200
    cells = []
    for eta in (0.1, 0.3, 0.5):
        center = conjecture_curve(eta)
        m_values = sorted({min(n, max(1, round((center + step * 0.04) * n))) for step in range(-4, 5)})
        config = build_config("EtaDelta", n, ["L1Box"], ["D1"], trials_per_cell=200, m_values=m_values, k_values=[round(eta * n)])
        cells.extend(run_sweep(config, jobs=4))
    report = fit_report(cells)
    assert report.gaps == 0
    assert report.max_abs_deviation <= 0.08


@pytest.mark.slow
def test_desk_sweep_is_byte_identical_across_job_counts():
    config = build_config("EtaDelta", 50, ["L1Box"], ["D1"], trials_per_cell=20, k_values=[5, 15, 25])
    assert run_sweep(config, jobs=1) == run_sweep(config, jobs=8)
