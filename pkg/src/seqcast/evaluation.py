"""Experiment harness: RMSE scoring, round studies, method comparison.

Two evaluation protocols appear here, matching how the predictors are
used online:

* ``run_rounds`` / ``run_horizon`` treat a round as one pass of
  predictions over the whole trajectory with the model as it stood at
  the start of the round; the trajectory is fitted into the model only
  after the pass. Round 1 therefore runs on the zero-initialized counts.

* ``compare_methods`` evaluates the transition predictors the way they
  run in deployment: within its single round, each observed transition
  is predicted first and then counted immediately. This is what lets the
  fuzzy predictor pull ahead of the crisp one on first contact with a
  trace: one observed transition updates its whole count matrix, while
  the crisp predictor only ever updates one row at a time.

All experiments are deterministic given fixed seeds; wall-clock timings
are measured per method but excluded from the canonical JSON export
unless explicitly requested. Methods may be evaluated concurrently as
long as each model instance keeps a single writer.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, InsufficientData, InvalidHorizon, LengthMismatch
from .fuzzy import (
    FuzzyTransitionModel,
    fit_fuzzy_transitions,
    partition_for_range,
    predict_fc,
    record_fuzzy_transition,
)
from .lstm import (
    TrainConfig,
    predict_closed_loop,
    predict_open_loop,
    train,
)
from .markov import (
    Fallback,
    TransitionModel,
    build_state_space,
    fit_transitions,
    predict_expectation,
    predict_multistep,
    record_transition,
)
from .trajectory import Trajectory

REPORT_SCHEMA = "seqcast-report v1"
RECORDS_CSV_HEADER = "method,round,origin,step,predicted,observed"

#: Closed-loop span used by the training-data sensitivity study.
DEFAULT_CLOSED_LOOP_HORIZON = 40


@dataclass(frozen=True)
class PredictionRecord:
    """One prediction: made at origin_index for horizon_step samples ahead."""

    origin_index: int
    horizon_step: int
    predicted: float
    observed: float


@dataclass
class RoundResult:
    label: str
    round_index: int
    rmse: float
    per_step_rmse: list[float]
    records: list[PredictionRecord]


@dataclass
class MethodResult:
    method: str
    rounds: list[RoundResult]
    seconds: float
    input_sha256: str


@dataclass
class ExperimentReport:
    """Results per method plus the configuration that produced them.

    ``models`` keeps the fitted/trained model objects for inspection and
    export; it is intentionally not part of the serialized report.
    """

    methods: dict[str, MethodResult]
    config: dict
    models: dict = field(default_factory=dict, repr=False)

    def to_json(self, include_timing: bool = False) -> str:
        """Canonical JSON (schema in the README); timings are opt-in
        because they would break byte-for-byte reproducibility."""
        obj = {
            "schema": REPORT_SCHEMA,
            "config": self.config,
            "methods": {
                label: {
                    "seconds": result.seconds if include_timing else None,
                    "input_sha256": result.input_sha256,
                    "rounds": [
                        {
                            "label": r.label,
                            "round": r.round_index,
                            "rmse": r.rmse,
                            "per_step_rmse": list(r.per_step_rmse),
                            "n_records": len(r.records),
                        }
                        for r in result.rounds
                    ],
                }
                for label, result in self.methods.items()
            },
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"

    def records_csv(self) -> str:
        """Flat CSV of every prediction record."""
        lines = [RECORDS_CSV_HEADER]
        for label, result in self.methods.items():
            for rnd in result.rounds:
                for rec in rnd.records:
                    lines.append(
                        f"{label},{rnd.round_index},{rec.origin_index},"
                        f"{rec.horizon_step},{rec.predicted:.6f},{rec.observed:.6f}"
                    )
        return "\n".join(lines) + "\n"


@dataclass
class PredictorConfig:
    """Model-construction settings shared by the experiment runners."""

    grid_spacing: float = 2.5
    nn_fallback: Fallback = Fallback.ZERO_ROW
    sigma: float = 1.0
    quad_step: float = 0.01
    train: TrainConfig = field(default_factory=TrainConfig)

    def snapshot(self) -> dict:
        return {
            "grid_spacing": self.grid_spacing,
            "nn_fallback": self.nn_fallback.value,
            "sigma": self.sigma,
            "quad_step": self.quad_step,
            "train": {
                "epochs": self.train.epochs,
                "hidden_size": self.train.hidden_size,
                "learning_rate": self.train.learning_rate,
                "grad_clip_norm": self.train.grad_clip_norm,
                "adam_beta1": self.train.adam_beta1,
                "adam_beta2": self.train.adam_beta2,
                "adam_epsilon": self.train.adam_epsilon,
                "seed": self.train.seed,
                "standardize": self.train.standardize,
            },
        }


def rmse(predicted, observed) -> float:
    """Root mean square error between two equal-length series."""
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape:
        raise LengthMismatch(f"{predicted.shape} vs {observed.shape}")
    if predicted.size == 0:
        raise EmptyInput("rmse of empty series")
    diff = predicted - observed
    return float(np.sqrt(np.mean(diff * diff)))


def trajectory_sha256(trajectory: Trajectory) -> str:
    """Hash of the exact evaluation input, for protocol-fairness checks."""
    digest = hashlib.sha256()
    digest.update(np.float64(trajectory.sample_period).tobytes())
    digest.update(trajectory.samples.tobytes())
    return digest.hexdigest()


def nn_model_for(trajectory: Trajectory, config: PredictorConfig) -> TransitionModel:
    """Zero-count crisp model whose default grid covers the trace from 0."""
    v_max = max(float(trajectory.samples.max()), config.grid_spacing)
    return TransitionModel(
        state_space=build_state_space(0.0, v_max, config.grid_spacing),
        fallback=config.nn_fallback,
    )


def fc_model_for(trajectory: Trajectory, config: PredictorConfig) -> FuzzyTransitionModel:
    """Zero-count fuzzy model whose default partition covers the trace."""
    v_max = max(float(trajectory.samples.max()), 1.25)
    return FuzzyTransitionModel(
        partition=partition_for_range(v_max, sigma=config.sigma, quad_step=config.quad_step)
    )


def _method_label(model) -> str:
    return "nn" if isinstance(model, TransitionModel) else "fc"


def _predict_one(model, y: float) -> float:
    if isinstance(model, TransitionModel):
        return predict_expectation(model, y)
    # a fuzzy model with no mass yet mirrors the crisp zero-row prediction
    return predict_fc(model, y) if model.fitted else 0.0


def _fit(model, trajectory: Trajectory) -> None:
    if isinstance(model, TransitionModel):
        fit_transitions(model, trajectory)
    else:
        fit_fuzzy_transitions(model, trajectory)


def _one_step_round(model, samples: np.ndarray) -> RoundResult:
    records = [
        PredictionRecord(t, 1, _predict_one(model, samples[t]), float(samples[t + 1]))
        for t in range(len(samples) - 1)
    ]
    score = rmse([r.predicted for r in records], [r.observed for r in records])
    return RoundResult(label="", round_index=0, rmse=score, per_step_rmse=[score], records=records)


def run_rounds(
    model: TransitionModel | FuzzyTransitionModel,
    trajectory: Trajectory,
    rounds: int,
    config: PredictorConfig | None = None,
) -> ExperimentReport:
    """Repeated predict-then-fit passes over one trajectory.

    Each round one-step-predicts the whole trajectory with the model as
    of the start of the round, records the RMSE, and only then fits the
    trajectory into the model. Start from zero counts to study online
    maturation: round 1 then runs on the initialized-to-zero matrix.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    label = _method_label(model)
    samples = trajectory.samples
    results: list[RoundResult] = []
    started = time.perf_counter()
    for index in range(1, rounds + 1):
        result = _one_step_round(model, samples)
        result.label = f"round {index}"
        result.round_index = index
        results.append(result)
        _fit(model, trajectory)
    seconds = time.perf_counter() - started
    snapshot = (config or PredictorConfig()).snapshot()
    snapshot["rounds"] = rounds
    return ExperimentReport(
        methods={
            label: MethodResult(
                method=label,
                rounds=results,
                seconds=seconds,
                input_sha256=trajectory_sha256(trajectory),
            )
        },
        config=snapshot,
        models={label: model},
    )


def run_horizon(
    model: TransitionModel,
    trajectory: Trajectory,
    horizon: int,
    rounds: int,
    config: PredictorConfig | None = None,
) -> ExperimentReport:
    """Multi-step rounds study for the crisp predictor.

    At every origin the model forecasts 1..horizon steps ahead
    (truncated near the end of the trace); per-step RMSE is taken over
    the origins where that step exists. Fitting happens between rounds,
    exactly as in run_rounds.
    """
    if horizon < 1:
        raise InvalidHorizon(f"horizon must be >= 1, got {horizon}")
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if not isinstance(model, TransitionModel):
        raise TypeError("multi-step rounds require the crisp transition model")
    samples = trajectory.samples
    last = len(samples) - 1
    results: list[RoundResult] = []
    started = time.perf_counter()
    for index in range(1, rounds + 1):
        records: list[PredictionRecord] = []
        for t in range(last):
            steps = min(horizon, last - t)
            predictions = predict_multistep(model, samples[t], steps)
            records.extend(
                PredictionRecord(t, s, float(predictions[s - 1]), float(samples[t + s]))
                for s in range(1, steps + 1)
            )
        # steps the trace can realize at all; each is scored over the
        # origins that reach it
        per_step = [
            rmse(
                [r.predicted for r in records if r.horizon_step == s],
                [r.observed for r in records if r.horizon_step == s],
            )
            for s in range(1, min(horizon, last) + 1)
        ]
        aggregate = rmse([r.predicted for r in records], [r.observed for r in records])
        results.append(
            RoundResult(
                label=f"round {index}",
                round_index=index,
                rmse=aggregate,
                per_step_rmse=per_step,
                records=records,
            )
        )
        fit_transitions(model, trajectory)
    seconds = time.perf_counter() - started
    snapshot = (config or PredictorConfig()).snapshot()
    snapshot.update(rounds=rounds, horizon=horizon)
    return ExperimentReport(
        methods={
            "nn": MethodResult(
                method="nn",
                rounds=results,
                seconds=seconds,
                input_sha256=trajectory_sha256(trajectory),
            )
        },
        config=snapshot,
        models={"nn": model},
    )


def _online_first_round(model, samples: np.ndarray) -> RoundResult:
    """Predict each transition before counting it, starting from zero."""
    records: list[PredictionRecord] = []
    for t in range(len(samples) - 1):
        records.append(
            PredictionRecord(t, 1, _predict_one(model, samples[t]), float(samples[t + 1]))
        )
        if isinstance(model, TransitionModel):
            record_transition(model, samples[t], samples[t + 1])
        else:
            record_fuzzy_transition(model, samples[t], samples[t + 1])
    score = rmse([r.predicted for r in records], [r.observed for r in records])
    return RoundResult(
        label="round 1", round_index=1, rmse=score, per_step_rmse=[score], records=records
    )


def compare_methods(
    trajectory: Trajectory,
    methods,
    config: PredictorConfig | None = None,
) -> ExperimentReport:
    """First-contact comparison of the requested methods on one trace.

    The transition predictors start from zero counts and run the online
    protocol (predict each transition, then count it). The LSTM is
    trained on the trace and then evaluated open-loop over it. Every
    method sees the byte-identical input sequence; wall-clock seconds
    are measured around each method's full pass.
    """
    config = config or PredictorConfig()
    requested = {str(m).lower() for m in methods}
    known = {"nn", "fc", "lstm"}
    if not requested:
        raise EmptyInput("no methods requested")
    if not requested <= known:
        raise ValueError(f"unknown methods: {sorted(requested - known)}")

    samples = trajectory.samples
    if len(samples) < 2:
        raise InsufficientData("comparison needs at least two samples")
    results: dict[str, MethodResult] = {}
    models: dict = {}
    for label in ("nn", "fc", "lstm"):
        if label not in requested:
            continue
        input_hash = trajectory_sha256(trajectory)
        started = time.perf_counter()
        if label == "lstm":
            params, _, standardization = train(trajectory, config.train)
            predictions = predict_open_loop(params, standardization, trajectory)
            records = [
                PredictionRecord(t, 1, float(predictions[t]), float(samples[t + 1]))
                for t in range(len(samples) - 1)
            ]
            score = rmse([r.predicted for r in records], [r.observed for r in records])
            round_result = RoundResult(
                label="round 1", round_index=1, rmse=score,
                per_step_rmse=[score], records=records,
            )
            models[label] = (params, standardization, config.train)
        else:
            model = nn_model_for(trajectory, config) if label == "nn" else fc_model_for(
                trajectory, config
            )
            round_result = _online_first_round(model, samples)
            models[label] = model
        seconds = time.perf_counter() - started
        results[label] = MethodResult(
            method=label,
            rounds=[round_result],
            seconds=seconds,
            input_sha256=input_hash,
        )

    hashes = {r.input_sha256 for r in results.values()}
    assert len(hashes) == 1, "methods saw different evaluation inputs"
    return ExperimentReport(methods=results, config=config.snapshot(), models=models)


def lstm_data_sensitivity(
    train_sets: list[Trajectory],
    eval_trace: Trajectory,
    config: TrainConfig,
    horizon: int = DEFAULT_CLOSED_LOOP_HORIZON,
) -> ExperimentReport:
    """Train one model per training set; score each on the same trace.

    Every model is evaluated open-loop over the whole evaluation trace
    and closed-loop over its final ``horizon`` samples (warm-up on
    everything before them).
    """
    if not train_sets:
        raise InsufficientData("at least one training set is required")
    if horizon < 1:
        raise InvalidHorizon(f"horizon must be >= 1, got {horizon}")
    samples = eval_trace.samples
    if len(samples) <= horizon:
        raise InvalidHorizon(
            f"evaluation trace ({len(samples)} samples) must be longer than the "
            f"closed-loop horizon ({horizon})"
        )
    results: dict[str, MethodResult] = {}
    models: dict = {}
    for k, train_set in enumerate(train_sets):
        label = f"lstm-train{k}"
        started = time.perf_counter()
        params, _, standardization = train(train_set, config)

        open_predictions = predict_open_loop(params, standardization, eval_trace)
        open_records = [
            PredictionRecord(t, 1, float(open_predictions[t]), float(samples[t + 1]))
            for t in range(len(samples) - 1)
        ]
        open_rmse = rmse(
            [r.predicted for r in open_records], [r.observed for r in open_records]
        )

        split = len(samples) - horizon
        seed_history = Trajectory(
            vehicle_id=eval_trace.vehicle_id,
            sample_period=eval_trace.sample_period,
            samples=samples[:split],
        )
        closed_predictions = predict_closed_loop(params, standardization, seed_history, horizon)
        closed_records = [
            PredictionRecord(split - 1, s, float(closed_predictions[s - 1]), float(samples[split - 1 + s]))
            for s in range(1, horizon + 1)
        ]
        closed_rmse = rmse(
            [r.predicted for r in closed_records], [r.observed for r in closed_records]
        )
        seconds = time.perf_counter() - started
        results[label] = MethodResult(
            method=label,
            rounds=[
                RoundResult(
                    label="open-loop", round_index=1, rmse=open_rmse,
                    per_step_rmse=[open_rmse], records=open_records,
                ),
                RoundResult(
                    label="closed-loop", round_index=2, rmse=closed_rmse,
                    per_step_rmse=[
                        abs(r.predicted - r.observed) for r in closed_records
                    ],
                    records=closed_records,
                ),
            ],
            seconds=seconds,
            input_sha256=trajectory_sha256(eval_trace),
        )
        models[label] = (params, standardization, config)
    snapshot = {
        "train": PredictorConfig(train=config).snapshot()["train"],
        "closed_loop_horizon": horizon,
        "n_train_sets": len(train_sets),
    }
    return ExperimentReport(methods=results, config=snapshot, models=models)
