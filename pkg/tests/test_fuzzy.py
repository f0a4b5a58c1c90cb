import math

import numpy as np
import pytest

from seqcast.errors import (
    AllZeroPossibility,
    InvalidRange,
    OutOfDomain,
    UnfittedModel,
)
from seqcast.fuzzy import (
    FuzzyPartition,
    FuzzyTransitionModel,
    compute_moments,
    fit_fuzzy_transitions,
    fuzzy_transition_matrix,
    partition_for_range,
    possibility_vector,
    predict_fc,
    probability_vector,
    read_fuzzy_csv,
    write_fuzzy_csv,
)
from seqcast.markov import StateSpace, TransitionModel, fit_transitions, predict_expectation
from seqcast.trajectory import Trajectory


def traj(samples):
    return Trajectory(vehicle_id=0, sample_period=0.1, samples=samples)


class TestPartition:
    def test_centers(self):
        part = FuzzyPartition(set_count=3)
        assert part.centers.tolist() == [1.25, 3.75, 6.25]

    def test_default_domain_margin(self):
        part = FuzzyPartition(set_count=2, sigma=1.0)
        assert part.domain == (1.25 - 6.0, 3.75 + 6.0)

    def test_domain_must_cover_centers(self):
        with pytest.raises(InvalidRange):
            FuzzyPartition(set_count=2, sigma=1.0, domain=(0.0, 8.0))

    def test_partition_for_range_reaches_vmax(self):
        part = partition_for_range(15.0)
        assert part.centers[-1] >= 15.0 - 1.25
        assert part.contains(0.0) and part.contains(15.0)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidRange):
            FuzzyPartition(set_count=1)
        with pytest.raises(InvalidRange):
            FuzzyPartition(set_count=3, sigma=0.0)
        with pytest.raises(InvalidRange):
            FuzzyPartition(set_count=3, quad_step=-0.1)


class TestPossibility:
    def test_values_at_first_center(self):
        part = FuzzyPartition(set_count=3, sigma=1.0)
        mu = possibility_vector(part, 1.25)
        assert mu[0] == 1.0
        assert mu[1] == pytest.approx(math.exp(-3.125), rel=1e-12)
        assert mu[2] == pytest.approx(math.exp(-12.5), rel=1e-12)

    def test_every_center_peaks_at_one(self):
        part = FuzzyPartition(set_count=5)
        for i, c in enumerate(part.centers):
            assert possibility_vector(part, float(c))[i] == 1.0

    def test_midpoint_symmetry(self):
        part = FuzzyPartition(set_count=2)
        mu = possibility_vector(part, 2.5)
        assert mu[0] == mu[1]

    def test_out_of_domain_strict_and_clamped(self):
        part = FuzzyPartition(set_count=2, sigma=1.0)
        low = part.domain[0]
        with pytest.raises(OutOfDomain):
            possibility_vector(part, low - 1.0)
        clamped = possibility_vector(part, low - 1.0, clamp=True)
        assert np.array_equal(clamped, possibility_vector(part, low))


class TestProbabilityVector:
    def test_already_uniform(self):
        assert probability_vector(np.array([0.5, 0.5])).tolist() == [0.5, 0.5]

    def test_one_hot_preserved(self):
        assert probability_vector(np.array([1.0, 0.0, 0.0])).tolist() == [1.0, 0.0, 0.0]

    def test_normalizes(self):
        assert probability_vector(np.array([0.2, 0.6])).tolist() == pytest.approx([0.25, 0.75])

    def test_all_zero_raises(self):
        with pytest.raises(AllZeroPossibility):
            probability_vector(np.zeros(3))

    def test_unit_sum_across_domain(self):
        part = FuzzyPartition(set_count=6)
        a, b = part.domain
        for y in np.linspace(a, b, 97):
            theta = probability_vector(possibility_vector(part, float(y)))
            assert abs(theta.sum() - 1.0) <= 1e-12


class TestMoments:
    def test_area_matches_gaussian_integral(self):
        part = FuzzyPartition(set_count=3, sigma=1.0, quad_step=0.01)
        areas, _ = compute_moments(part)
        assert areas == pytest.approx(math.sqrt(2.0 * math.pi), abs=1e-6)

    def test_centroid_is_the_center(self):
        part = FuzzyPartition(set_count=3, sigma=1.0)
        areas, firsts = compute_moments(part)
        assert firsts / areas == pytest.approx(part.centers, abs=1e-6)

    def test_quadrature_converged(self):
        coarse = FuzzyPartition(set_count=3, quad_step=0.01)
        fine = FuzzyPartition(set_count=3, quad_step=0.005)
        a0, _ = compute_moments(coarse)
        a1, _ = compute_moments(fine)
        assert np.max(np.abs(a0 - a1)) < 1e-8


class TestFitting:
    def test_near_crisp_memberships_count_like_nn(self):
        part = FuzzyPartition(set_count=2, sigma=0.05)
        model = FuzzyTransitionModel(partition=part)
        fit_fuzzy_transitions(model, traj([1.25, 3.75]))
        assert model.counts.tolist() == [[0.0, 1.0], [0.0, 0.0]]

    def test_midpoint_spreads_quarter_everywhere(self):
        part = FuzzyPartition(set_count=2, sigma=1.0)
        model = FuzzyTransitionModel(partition=part)
        fit_fuzzy_transitions(model, traj([2.5, 2.5]))
        assert model.counts == pytest.approx(np.full((2, 2), 0.25))

    def test_each_transition_adds_unit_mass(self):
        part = partition_for_range(12.0)
        model = FuzzyTransitionModel(partition=part)
        samples = np.linspace(0.3, 11.2, 40)
        fit_fuzzy_transitions(model, traj(samples))
        assert model.counts.sum() == pytest.approx(len(samples) - 1, abs=1e-9)

    def test_out_of_domain_sample_rejected(self):
        part = FuzzyPartition(set_count=2, sigma=1.0)
        model = FuzzyTransitionModel(partition=part)
        with pytest.raises(OutOfDomain):
            fit_fuzzy_transitions(model, traj([1.0, 50.0]))


class TestFuzzyMatrix:
    def test_row_normalization(self):
        part = FuzzyPartition(set_count=2)
        model = FuzzyTransitionModel(partition=part, counts=np.array([[1.0, 1.0], [0.0, 2.0]]))
        assert fuzzy_transition_matrix(model).tolist() == [[0.5, 0.5], [0.0, 1.0]]

    def test_rows_sum_to_one_after_fit(self):
        rng = np.random.default_rng(2)
        part = partition_for_range(15.0)
        model = FuzzyTransitionModel(partition=part)
        fit_fuzzy_transitions(model, traj(rng.uniform(0.0, 15.0, size=80)))
        sums = fuzzy_transition_matrix(model).sum(axis=1)
        positive = model.counts.sum(axis=1) > 0
        assert np.all(np.abs(sums[positive] - 1.0) <= 1e-12)

    def test_unfitted_raises(self):
        model = FuzzyTransitionModel(partition=FuzzyPartition(set_count=2))
        with pytest.raises(UnfittedModel):
            fuzzy_transition_matrix(model)
        with pytest.raises(UnfittedModel):
            predict_fc(model, 2.0)


class TestPredictFc:
    def test_identity_transitions_predict_theta_centroid(self):
        part = FuzzyPartition(set_count=2, sigma=1.0)
        model = FuzzyTransitionModel(partition=part, counts=np.eye(2))
        for y in [1.25, 3.75]:
            theta = probability_vector(possibility_vector(part, y))
            expected = float(theta @ part.centers)
            assert predict_fc(model, y) == pytest.approx(expected, abs=1e-6)

    def test_one_hot_column_flows_to_that_set(self):
        part = FuzzyPartition(set_count=3, sigma=1.0)
        counts = np.zeros((3, 3))
        counts[:, 1] = 1.0
        model = FuzzyTransitionModel(partition=part, counts=counts)
        for y in [1.25, 2.0, 5.5]:
            assert predict_fc(model, y) == pytest.approx(part.centers[1], abs=1e-6)

    def test_invariant_to_count_scaling(self):
        part = FuzzyPartition(set_count=3)
        rng = np.random.default_rng(7)
        counts = rng.uniform(0.1, 2.0, size=(3, 3))
        a = FuzzyTransitionModel(partition=part, counts=counts)
        b = FuzzyTransitionModel(partition=part, counts=counts * 37.5)
        for y in [1.4, 3.0, 6.0]:
            assert predict_fc(a, y) == pytest.approx(predict_fc(b, y), rel=1e-12)

    def test_prediction_stays_in_domain(self):
        rng = np.random.default_rng(13)
        part = partition_for_range(20.0)
        model = FuzzyTransitionModel(partition=part)
        fit_fuzzy_transitions(model, traj(rng.uniform(0.0, 20.0, size=100)))
        a, b = part.domain
        for y in rng.uniform(a, b, size=50):
            assert a <= predict_fc(model, float(y)) <= b

    def test_crisp_limit_agrees_with_expectation(self):
        # near-crisp memberships, on-center data, center-aligned grids
        part = FuzzyPartition(set_count=4, sigma=0.05)
        centers = part.centers
        rng = np.random.default_rng(21)
        samples = centers[rng.integers(0, 4, size=120)]
        fc = FuzzyTransitionModel(partition=part)
        fit_fuzzy_transitions(fc, traj(samples))
        nn = TransitionModel(state_space=StateSpace(grid=centers.copy()))
        fit_transitions(nn, traj(samples))
        for y in centers:
            assert predict_fc(fc, float(y)) == pytest.approx(
                predict_expectation(nn, float(y)), abs=1e-3
            )

    def test_quadrature_stability(self, short_trace):
        samples = short_trace.samples
        v_max = float(samples.max())
        fine = FuzzyTransitionModel(partition=partition_for_range(v_max, quad_step=0.005))
        coarse = FuzzyTransitionModel(partition=partition_for_range(v_max, quad_step=0.01))
        fit_fuzzy_transitions(fine, short_trace)
        fit_fuzzy_transitions(coarse, short_trace)
        for y in samples[::20]:
            assert abs(predict_fc(fine, float(y)) - predict_fc(coarse, float(y))) < 1e-6

    def test_prediction_is_smooth(self, short_trace):
        model = FuzzyTransitionModel(
            partition=partition_for_range(float(short_trace.samples.max()))
        )
        fit_fuzzy_transitions(model, short_trace)
        for y in short_trace.samples[::20]:
            delta = abs(predict_fc(model, float(y) + 1e-6) - predict_fc(model, float(y)))
            assert delta <= 1e-3


class TestPersistence:
    def test_csv_round_trip(self, tmp_path):
        part = FuzzyPartition(set_count=3, sigma=0.8, quad_step=0.02)
        model = FuzzyTransitionModel(partition=part)
        fit_fuzzy_transitions(model, traj([1.0, 2.0, 4.0, 6.5, 3.2]))
        path = tmp_path / "fc.csv"
        write_fuzzy_csv(model, path)
        assert path.read_text().startswith("# M=3\n")
        back = read_fuzzy_csv(path)
        assert back.partition == part
        assert back.counts == pytest.approx(model.counts, rel=1e-11)
        for y in [1.2, 3.3, 5.0]:
            assert predict_fc(back, y) == pytest.approx(predict_fc(model, y), rel=1e-9)
