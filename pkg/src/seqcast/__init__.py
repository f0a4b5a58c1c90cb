"""Velocity time-sequence forecasting toolkit.

Three predictors over uniformly sampled velocity series — a quantized
Markov-chain nearest-neighborhood model, a fuzzy-coding model with
Gaussian membership sets, and a from-scratch LSTM — plus an experiment
harness for online-learning rounds, multi-step horizons and head-to-head
comparisons.
"""

from .errors import SeqcastError
from .evaluation import (
    ExperimentReport,
    PredictionRecord,
    PredictorConfig,
    compare_methods,
    lstm_data_sensitivity,
    rmse,
    run_horizon,
    run_rounds,
)
from .fuzzy import (
    FuzzyPartition,
    FuzzyTransitionModel,
    compute_moments,
    fit_fuzzy_transitions,
    fuzzy_transition_matrix,
    partition_for_range,
    possibility_vector,
    predict_fc,
    probability_vector,
)
from .lstm import (
    Activation,
    LstmParams,
    LstmState,
    Standardization,
    TrainConfig,
    TrainingCurve,
    activation,
    cell_forward,
    clip_gradients,
    forward_sequence,
    load_model,
    loss_and_gradients,
    predict_closed_loop,
    predict_open_loop,
    save_model,
    train,
)
from .markov import (
    Fallback,
    StateSpace,
    TransitionModel,
    build_state_space,
    fit_transitions,
    predict_argmax,
    predict_expectation,
    predict_multistep,
    quantize,
    transition_matrix,
)
from .svgplot import plot_series
from .trajectory import (
    IngestConfig,
    Trajectory,
    TrajectoryRecord,
    extract_trajectory,
    parse_records,
    resample_uniform,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "ExperimentReport",
    "Fallback",
    "FuzzyPartition",
    "FuzzyTransitionModel",
    "IngestConfig",
    "LstmParams",
    "LstmState",
    "PredictionRecord",
    "PredictorConfig",
    "SeqcastError",
    "Standardization",
    "StateSpace",
    "TrainConfig",
    "TrainingCurve",
    "Trajectory",
    "TrajectoryRecord",
    "TransitionModel",
    "activation",
    "build_state_space",
    "cell_forward",
    "clip_gradients",
    "compare_methods",
    "compute_moments",
    "extract_trajectory",
    "fit_fuzzy_transitions",
    "fit_transitions",
    "forward_sequence",
    "fuzzy_transition_matrix",
    "load_model",
    "loss_and_gradients",
    "lstm_data_sensitivity",
    "parse_records",
    "partition_for_range",
    "plot_series",
    "possibility_vector",
    "predict_argmax",
    "predict_closed_loop",
    "predict_expectation",
    "predict_fc",
    "predict_multistep",
    "predict_open_loop",
    "probability_vector",
    "quantize",
    "resample_uniform",
    "rmse",
    "run_horizon",
    "run_rounds",
    "save_model",
    "train",
    "transition_matrix",
]
