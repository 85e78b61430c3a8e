from pathlib import Path

import numpy as np
import pytest

from lib.lp_core import LpStatus, SingularMatrixError
from lib.randgen import SamplingError, SeedSpec, sample_matrix, sample_support
from src.recovery import (
    Formulation,
    RecoveryError,
    RecoveryInstance,
    SparseBinarySignal,
    binary_from_pm_one,
    check_success,
    feasibility_box,
    l1_box_lp_data,
    linf_problem,
    parse_formulation,
    recover,
    recover_l1_box,
    recover_linf,
    recover_linf_pm,
    recover_nonneg,
    recover_square,
    sample_signal,
)


def _truth(n, *support):
    return SparseBinarySignal(n, frozenset(support))


class TestL1Box:
    def test_picks_the_cheapest_vertex(self):
        result = recover_l1_box([[1.0, 2.0, 4.0]], [4.0])
        assert result.solved
        np.testing.assert_allclose(result.x_hat, [0.0, 0.0, 1.0], atol=1e-12)
        assert result.objective == pytest.approx(1.0)

    def test_identity(self):
        result = recover_l1_box(np.eye(3), [1.0, 0.0, 1.0])
        np.testing.assert_allclose(result.x_hat, [1.0, 0.0, 1.0], atol=1e-12)

    def test_tied_optimum_returns_an_endpoint(self):
        result = recover_l1_box([[1.0, 1.0]], [1.0])
        assert result.objective == pytest.approx(1.0)
        assert sorted(np.round(result.x_hat, 12).tolist()) == [0.0, 1.0]


class TestLinf:
    def test_square_system_forces_y(self):
        A = np.eye(2)
        b = A @ np.array([1.0, 0.0])
        result = recover_linf(A, b)
        np.testing.assert_allclose(result.y_hat, [-1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(result.x_hat, [1.0, 0.0], atol=1e-12)
        assert result.auxiliary == pytest.approx(1.0)

    def test_single_row_fails_to_recover(self):
        result = recover_linf([[1.0, 2.0]], [2.0])
        np.testing.assert_allclose(result.y_hat, [-1 / 3, -1 / 3], atol=1e-12)
        assert result.auxiliary == pytest.approx(1 / 3)
        np.testing.assert_allclose(result.x_hat, [2 / 3, 2 / 3], atol=1e-12)
        assert not check_success(result.x_hat, _truth(2, 1))

    def test_overdetermined_consistent_system(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        result = recover_linf(A, A @ np.array([1.0, 0.0]))
        np.testing.assert_allclose(result.y_hat, [-1.0, 1.0], atol=1e-12)
        assert check_success(result.x_hat, _truth(2, 0))

    def test_pm_one_entry_point_works_in_y_space(self):
        A = np.eye(3)
        y_bar = np.array([1.0, -1.0, -1.0])
        result = recover_linf_pm(A, A @ y_bar)
        assert check_success(result.y_hat, binary_from_pm_one(y_bar), pm_one=True)

    def test_lp_layout(self):
        problem = linf_problem(np.ones((2, 3)), np.zeros(2))
        assert problem.nv == 3 * 3 + 1
        assert problem.p == 2 + 2 * 3
        assert problem.objective[3] == 1.0


class TestNonneg:
    def test_cheapest_vertex(self):
        result = recover_nonneg([[1.0, 2.0, 4.0]], [4.0])
        np.testing.assert_allclose(result.x_hat, [0.0, 0.0, 1.0], atol=1e-12)
        assert result.objective == pytest.approx(1.0)

    def test_identity(self):
        result = recover_nonneg(np.eye(2), [0.0, 1.0])
        np.testing.assert_allclose(result.x_hat, [0.0, 1.0], atol=1e-12)

    def test_cheaper_fractional_point_beats_the_truth(self):
        result = recover_nonneg([[1.0, 3.0]], [1.0])
        np.testing.assert_allclose(result.x_hat, [0.0, 1 / 3], atol=1e-12)
        assert result.objective == pytest.approx(1 / 3)
        assert not check_success(result.x_hat, _truth(2, 0))


class TestFeasibilityBox:
    def test_returns_a_feasible_vertex(self):
        result = feasibility_box([[1.0, 1.0]], [1.0])
        assert result.x_hat.sum() == pytest.approx(1.0)
        assert np.all((result.x_hat >= 0) & (result.x_hat <= 1))

    def test_infeasible(self):
        result = feasibility_box([[1.0]], [2.0])
        assert result.status is LpStatus.INFEASIBLE
        assert result.x_hat is None
        assert not check_success(result.x_hat, _truth(1, 0))

    def test_identity(self):
        np.testing.assert_allclose(feasibility_box(np.eye(2), [1.0, 1.0]).x_hat, [1.0, 1.0])


class TestSquare:
    @pytest.mark.parametrize(
        "A, b, expected",
        [
            (np.eye(3), [1.0, 0.0, 1.0], [1.0, 0.0, 1.0]),
            ([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0], [1.0, 2.0]),
            ([[1.0, 1.0], [1.0, -1.0]], [3.0, 1.0], [2.0, 1.0]),
        ],
    )
    def test_inverts(self, A, b, expected):
        np.testing.assert_allclose(recover_square(A, b).x_hat, expected, atol=1e-12)

    def test_rejects_rectangular_systems(self):
        with pytest.raises(RecoveryError, match="m == n"):
            recover_square(np.ones((2, 3)), [1.0, 1.0])

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            recover_square([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0])


class TestCheckSuccess:
    def test_exact(self):
        assert check_success([0.0, 0.0, 1.0], _truth(3, 2))

    def test_threshold(self):
        assert not check_success([0.0, 1e-8, 1.0], _truth(3, 2))
        assert check_success([0.0, 1e-10, 1.0], _truth(3, 2))

    def test_fractional(self):
        assert not check_success([2 / 3, 2 / 3], _truth(2, 1))

    def test_pm_one_reference(self):
        assert check_success([-1.0, 1.0, 1.0], _truth(3, 0), pm_one=True)

    def test_length_mismatch(self):
        with pytest.raises(RecoveryError):
            check_success([0.0, 1.0], _truth(3, 2))


class TestSignals:
    def test_from_vector_and_back(self):
        signal = SparseBinarySignal.from_vector([0, 1, 0, 1])
        assert signal.support == frozenset({1, 3})
        np.testing.assert_array_equal(signal.binary_vector(), [0, 1, 0, 1])

    def test_rejects_non_binary_vector(self):
        with pytest.raises(RecoveryError):
            SparseBinarySignal.from_vector([0, 0.5])

    def test_rejects_out_of_range_support(self):
        with pytest.raises(RecoveryError):
            SparseBinarySignal(3, frozenset({3}))

    def test_pm_one_round_trip(self):
        y = np.array([1.0, -1.0, 1.0, -1.0])
        assert binary_from_pm_one(y).support == frozenset({1, 3})
        with pytest.raises(RecoveryError):
            binary_from_pm_one([1.0, 0.0])

    def test_complement(self):
        assert _truth(4, 0, 2).complement().support == frozenset({1, 3})

    def test_instance_checks_the_measurements(self):
        A = np.array([[1.0, 2.0, 4.0]])
        instance = RecoveryInstance.from_truth(A, _truth(3, 2))
        np.testing.assert_allclose(instance.b, [4.0])
        with pytest.raises(RecoveryError, match="not A @ truth"):
            RecoveryInstance(A, [3.0], _truth(3, 2))


class TestSampleSignal:
    def test_full_support(self):
        assert sample_signal(5, 5, 1).support == frozenset(range(5))

    def test_zero_sparsity_is_rejected(self):
        with pytest.raises(SamplingError):
            sample_signal(5, 0, 1)

    def test_unknown_alphabet(self):
        with pytest.raises(SamplingError, match="alphabet"):
            sample_signal(5, 2, 1, alphabet="ternary")

    def test_pm_one_marks_support_positive(self):
        signal = sample_signal(6, 2, 4, alphabet="pm_one")
        vector = signal.to_vector()
        assert sorted(np.flatnonzero(vector > 0).tolist()) == sorted(signal.support)
        assert np.all(np.abs(vector) == 1)

    def test_support_comes_from_the_seeded_sampler(self):
        assert sample_signal(9, 4, SeedSpec(3, (1,))).support == frozenset(sample_support(9, 4, SeedSpec(3, (1,))))


def test_lib_does_not_import_src():
    lib_dir = Path(__file__).resolve().parents[1] / "lib"
    for path in lib_dir.glob("*.py"):
        text = path.read_text(encoding="utf-8")
        assert "from src" not in text and "import src" not in text, path.name


def test_formulation_names():
    assert parse_formulation("l1box") is Formulation.L1_BOX
    assert parse_formulation("LinfL2") is Formulation.LINF
    assert parse_formulation(Formulation.SQUARE) is Formulation.SQUARE
    with pytest.raises(RecoveryError, match="unknown formulation"):
        parse_formulation("l2")


def test_dispatcher_runs_each_formulation():
    A = np.eye(2)
    for name in ("linf", "l1box", "boxfeas", "nonneg", "square"):
        result = recover(name, A, [1.0, 0.0])
        assert check_success(result.x_hat, _truth(2, 0))


def test_dimension_mismatch():
    with pytest.raises(RecoveryError, match="rows"):
        recover_l1_box(np.ones((2, 3)), [1.0])


def test_l1_box_lp_data_shapes():
    G, h, P, q, c = l1_box_lp_data(np.ones((2, 3)), [1.0, 1.0])
    assert G.shape == (2, 3)
    assert P.shape == (6, 3)
    np.testing.assert_array_equal(q, [0, 0, 0, -1, -1, -1])
    np.testing.assert_array_equal(c, [1, 1, 1])


def test_square_random_systems_recover_exactly():
    for seed in range(10):
        n = 10
        A = sample_matrix("D1", n, n, seed)
        truth = sample_signal(n, 1 + seed % n, seed + 100)
        b = A @ truth.binary_vector()
        for recover_fn in (recover_square, recover_l1_box, recover_linf, recover_nonneg):
            assert check_success(recover_fn(A, b).x_hat, truth), recover_fn.__name__


def test_nonneg_value_never_exceeds_box_value():
    for seed in range(15):
        A = sample_matrix("D1", 3, 8, seed)
        truth = sample_signal(8, 3, seed + 50)
        b = A @ truth.binary_vector()
        box = recover_l1_box(A, b)
        nonneg = recover_nonneg(A, b)
        assert box.solved and nonneg.solved
        assert nonneg.objective <= box.objective + 1e-9


def test_box_solutions_satisfy_their_constraints():
    for seed in range(10):
        A = sample_matrix("D3", 4, 9, seed)
        b = A @ sample_signal(9, 4, seed).binary_vector()
        x_hat = recover_l1_box(A, b).x_hat
        assert np.max(np.abs(A @ x_hat - b)) <= 1e-9 * max(1.0, np.max(np.abs(b)))
        assert np.all(x_hat >= -1e-9) and np.all(x_hat <= 1 + 1e-9)


@pytest.mark.slow
def test_square_systems_at_acceptance_scale():
    n = 50
    for seed in range(200):
        A = sample_matrix("D1", n, n, seed)
        truth = sample_signal(n, 1 + seed % n, seed + 1000)
        b = A @ truth.binary_vector()
        for recover_fn in (recover_square, recover_l1_box, recover_linf, recover_nonneg):
            assert check_success(recover_fn(A, b).x_hat, truth), (seed, recover_fn.__name__)
