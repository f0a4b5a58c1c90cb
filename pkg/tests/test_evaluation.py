import numpy as np
import pytest

from seqcast.errors import EmptyInput, InsufficientData, InvalidHorizon, LengthMismatch
from seqcast.evaluation import (
    PredictorConfig,
    compare_methods,
    fc_model_for,
    lstm_data_sensitivity,
    nn_model_for,
    rmse,
    run_horizon,
    run_rounds,
    trajectory_sha256,
)
from seqcast.lstm import TrainConfig
from seqcast.trajectory import Trajectory


def traj(samples):
    return Trajectory(vehicle_id=0, sample_period=0.1, samples=samples)


def tiny_train_config(**overrides):
    defaults = dict(epochs=5, hidden_size=6, seed=0)
    defaults.update(overrides)
    return TrainConfig(**defaults)


class TestRmse:
    def test_identical_series(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_hand_value(self):
        assert rmse([1.0, 2.0], [1.0, 4.0]) == pytest.approx(np.sqrt(2.0))

    def test_symmetric(self):
        a, b = [0.0, 5.0, 2.0], [1.0, 4.5, 2.5]
        assert rmse(a, b) == rmse(b, a)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=20), rng.normal(size=20)
        order = rng.permutation(20)
        assert rmse(a, b) == pytest.approx(rmse(a[order], b[order]), rel=1e-12)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(EmptyInput):
            rmse([], [])


class TestRunRounds:
    def test_round_one_is_all_zero_predictions(self, short_trace):
        model = nn_model_for(short_trace, PredictorConfig())
        report = run_rounds(model, short_trace, 1)
        (round1,) = report.methods["nn"].rounds
        assert all(r.predicted == 0.0 for r in round1.records)
        quadratic_mean = float(np.sqrt(np.mean(short_trace.samples[1:] ** 2)))
        assert round1.rmse == pytest.approx(quadratic_mean, rel=1e-12)

    def test_second_round_improves(self, sample_trace):
        model = nn_model_for(sample_trace, PredictorConfig())
        report = run_rounds(model, sample_trace, 2)
        rounds = report.methods["nn"].rounds
        assert rounds[1].rmse < rounds[0].rmse

    def test_single_round_single_row(self, short_trace):
        model = nn_model_for(short_trace, PredictorConfig())
        report = run_rounds(model, short_trace, 1)
        assert len(report.methods["nn"].rounds) == 1

    def test_fc_round_one_mirrors_zero_initialization(self, short_trace):
        model = fc_model_for(short_trace, PredictorConfig())
        report = run_rounds(model, short_trace, 2)
        rounds = report.methods["fc"].rounds
        assert all(r.predicted == 0.0 for r in rounds[0].records)
        assert rounds[1].rmse < rounds[0].rmse

    def test_records_observe_the_trajectory_exactly(self, short_trace):
        model = nn_model_for(short_trace, PredictorConfig())
        report = run_rounds(model, short_trace, 2)
        for rnd in report.methods["nn"].rounds:
            for rec in rnd.records:
                assert rec.observed == short_trace.samples[rec.origin_index + rec.horizon_step]

    def test_rounds_must_be_positive(self, short_trace):
        model = nn_model_for(short_trace, PredictorConfig())
        with pytest.raises(ValueError):
            run_rounds(model, short_trace, 0)


class TestRunHorizon:
    def test_horizon_one_reproduces_run_rounds(self, short_trace):
        config = PredictorConfig()
        rounds_report = run_rounds(nn_model_for(short_trace, config), short_trace, 2)
        horizon_report = run_horizon(nn_model_for(short_trace, config), short_trace, 1, 2)
        for a, b in zip(
            rounds_report.methods["nn"].rounds, horizon_report.methods["nn"].rounds
        ):
            assert a.rmse == b.rmse

    def test_second_round_improves_and_error_accumulates(self, sample_trace):
        report = run_horizon(
            nn_model_for(sample_trace, PredictorConfig()), sample_trace, 10, 2
        )
        rounds = report.methods["nn"].rounds
        assert rounds[1].rmse <= rounds[0].rmse
        round2 = rounds[1].per_step_rmse
        assert round2[9] >= round2[0]

    def test_truncation_near_the_end(self):
        t = traj([1.0, 2.0, 3.0, 4.0])
        report = run_horizon(nn_model_for(t, PredictorConfig()), t, 10, 1)
        records = report.methods["nn"].rounds[0].records
        # origins 0,1,2 contribute 3+2+1 truncated predictions
        assert len(records) == 6
        assert max(r.horizon_step for r in records) == 3
        for rec in records:
            assert rec.origin_index + rec.horizon_step <= 3

    def test_invalid_horizon(self, short_trace):
        model = nn_model_for(short_trace, PredictorConfig())
        with pytest.raises(InvalidHorizon):
            run_horizon(model, short_trace, 0, 1)

    def test_fuzzy_model_rejected(self, short_trace):
        model = fc_model_for(short_trace, PredictorConfig())
        with pytest.raises(TypeError):
            run_horizon(model, short_trace, 5, 1)


class TestCompareMethods:
    def test_fc_beats_nn_on_first_contact(self, sample_trace):
        report = compare_methods(sample_trace, ["nn", "fc"])
        assert report.methods["fc"].rounds[0].rmse < report.methods["nn"].rounds[0].rmse

    def test_nn_runs_faster_than_fc(self, sample_trace):
        report = compare_methods(sample_trace, ["nn", "fc"])
        assert report.methods["nn"].seconds < report.methods["fc"].seconds

    def test_single_method_single_row(self, short_trace):
        report = compare_methods(short_trace, ["nn"])
        assert list(report.methods) == ["nn"]

    def test_protocol_fairness_hashes(self, short_trace):
        report = compare_methods(short_trace, ["nn", "fc"])
        hashes = {m.input_sha256 for m in report.methods.values()}
        assert hashes == {trajectory_sha256(short_trace)}

    def test_lstm_leg_runs_open_loop(self, short_trace):
        config = PredictorConfig(train=tiny_train_config())
        report = compare_methods(short_trace, ["lstm"], config)
        records = report.methods["lstm"].rounds[0].records
        assert len(records) == len(short_trace) - 1
        assert "lstm" in report.models

    def test_unknown_method_rejected(self, short_trace):
        with pytest.raises(ValueError):
            compare_methods(short_trace, ["nn", "svm"])
        with pytest.raises(EmptyInput):
            compare_methods(short_trace, [])

    def test_models_are_exported_for_inspection(self, short_trace):
        report = compare_methods(short_trace, ["nn", "fc"])
        nn = report.models["nn"]
        fc = report.models["fc"]
        assert nn.counts.sum() == len(short_trace) - 1
        assert fc.counts.sum() == pytest.approx(len(short_trace) - 1)


class TestSensitivity:
    def test_single_training_set_degenerates_to_one_pair(self, short_trace):
        report = lstm_data_sensitivity([short_trace], short_trace, tiny_train_config(), horizon=10)
        (result,) = report.methods.values()
        opened, closed = result.rounds
        assert opened.label == "open-loop" and closed.label == "closed-loop"
        assert len(closed.records) == 10
        assert len(closed.per_step_rmse) == 10

    def test_closed_loop_observations_match_tail(self, short_trace):
        report = lstm_data_sensitivity([short_trace], short_trace, tiny_train_config(), horizon=5)
        (result,) = report.methods.values()
        closed = result.rounds[1]
        tail = short_trace.samples[-5:]
        assert [r.observed for r in closed.records] == tail.tolist()

    def test_requires_training_sets_and_room_for_horizon(self, short_trace):
        with pytest.raises(InsufficientData):
            lstm_data_sensitivity([], short_trace, tiny_train_config())
        with pytest.raises(InvalidHorizon):
            lstm_data_sensitivity([short_trace], traj([1.0, 2.0, 3.0]), tiny_train_config(), horizon=10)


class TestReportExport:
    def test_json_shape_and_determinism(self, short_trace):
        config = PredictorConfig()
        a = compare_methods(short_trace, ["nn", "fc"], config)
        b = compare_methods(short_trace, ["nn", "fc"], config)
        assert a.to_json() == b.to_json()
        text = a.to_json()
        assert '"schema": "seqcast-report v1"' in text
        assert '"seconds": null' in text

    def test_timing_is_opt_in(self, short_trace):
        report = compare_methods(short_trace, ["nn"])
        assert '"seconds": null' in report.to_json()
        timed = report.to_json(include_timing=True)
        assert '"seconds": null' not in timed

    def test_records_csv_layout(self, short_trace):
        report = run_rounds(nn_model_for(short_trace, PredictorConfig()), short_trace, 1)
        lines = report.records_csv().splitlines()
        assert lines[0] == "method,round,origin,step,predicted,observed"
        assert lines[1].startswith("nn,1,0,1,")
        assert len(lines) == 1 + len(short_trace) - 1

    def test_deterministic_given_fixed_seed(self, short_trace):
        config = PredictorConfig(train=tiny_train_config(seed=3))
        a = compare_methods(short_trace, ["lstm"], config)
        b = compare_methods(short_trace, ["lstm"], config)
        assert a.to_json() == b.to_json()
        assert a.records_csv() == b.records_csv()
