"""Single-layer LSTM with a linear output head, built from scratch.

The cell follows the standard gating scheme: forget, input and output
gates squash affine combinations of the current input and previous hidden
state through a sigmoid, the candidate through tanh; the memory state
blends old memory and candidate, and the hidden state is the gated tanh
of the new memory. Because the hidden state is bounded, a linear head
maps it back to raw velocity. Biases are included on every gate and the
head; velocity data has a strongly nonzero mean and fitting it without
biases is needlessly hard.

Training is full-sequence backpropagation through time with adaptive-
moment updates and global-norm gradient clipping, all in double
precision so finite-difference checks are meaningful. Fixed seed plus
fixed data gives bit-identical results. Trained parameters are immutable
by convention and may be shared across threads; each caller holds its own
state.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DivergedTraining,
    InsufficientData,
    InvalidHorizon,
    ModelFormatError,
    UnfittedModel,
)
from .trajectory import Trajectory

MODEL_FORMAT_HEADER = "seqcast-lstm v1"


class Activation(enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    RELU = "relu"


def activation(kind: Activation, b: float) -> float:
    """Squash a scalar neuron input."""
    if kind is Activation.SIGMOID:
        if b >= 0:
            return 1.0 / (1.0 + math.exp(-b))
        e = math.exp(b)
        return e / (1.0 + e)
    if kind is Activation.TANH:
        return math.tanh(b)
    return max(0.0, b)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so neither branch exponentiates a large positive value
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class LstmParams:
    """Gate weights, gate biases and the linear output head.

    ``x_to_*`` matrices act on the input, ``h_to_*`` on the previous
    hidden state; each gate also carries a bias vector. Field order is
    the canonical parameter order used for initialization, optimizer
    state and persistence.
    """

    x_to_forget: np.ndarray
    h_to_forget: np.ndarray
    forget_bias: np.ndarray
    x_to_cand: np.ndarray
    h_to_cand: np.ndarray
    cand_bias: np.ndarray
    x_to_ingate: np.ndarray
    h_to_ingate: np.ndarray
    ingate_bias: np.ndarray
    x_to_outgate: np.ndarray
    h_to_outgate: np.ndarray
    outgate_bias: np.ndarray
    head_weight: np.ndarray
    head_bias: np.ndarray

    @property
    def input_size(self) -> int:
        return int(self.x_to_forget.shape[1])

    @property
    def hidden_size(self) -> int:
        return int(self.x_to_forget.shape[0])

    @property
    def output_size(self) -> int:
        return int(self.head_weight.shape[0])

    def arrays(self) -> dict[str, np.ndarray]:
        """Parameter arrays keyed by field name, in canonical order."""
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def zeros_like(self) -> "LstmParams":
        return LstmParams(**{k: np.zeros_like(v) for k, v in self.arrays().items()})

    def validate(self) -> None:
        n, h, o = self.input_size, self.hidden_size, self.output_size
        expected = {
            "x_to": (h, n), "h_to": (h, h), "bias": (h,),
            "head_weight": (o, h), "head_bias": (o,),
        }
        for name, arr in self.arrays().items():
            if name.startswith("x_to"):
                want = expected["x_to"]
            elif name.startswith("h_to"):
                want = expected["h_to"]
            elif name.startswith("head"):
                want = expected[name]
            else:
                want = expected["bias"]
            if arr.shape != want:
                raise DimensionMismatch(f"{name}: expected shape {want}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatch(f"{name}: non-finite entries")

    @classmethod
    def initialize(
        cls, input_size: int, hidden_size: int, output_size: int, seed: int
    ) -> "LstmParams":
        """Seeded uniform init in +/- sqrt(6 / (fan_in + fan_out)); zero biases."""
        rng = np.random.default_rng(seed)

        def matrix(rows: int, cols: int) -> np.ndarray:
            limit = math.sqrt(6.0 / (rows + cols))
            return rng.uniform(-limit, limit, size=(rows, cols))

        def gate() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            return (
                matrix(hidden_size, input_size),
                matrix(hidden_size, hidden_size),
                np.zeros(hidden_size),
            )

        return cls(
            *gate(), *gate(), *gate(), *gate(),
            head_weight=matrix(output_size, hidden_size),
            head_bias=np.zeros(output_size),
        )


@dataclass
class LstmState:
    """Hidden and memory vectors carried between time steps."""

    hidden: np.ndarray
    memory: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(hidden=np.zeros(hidden_size), memory=np.zeros(hidden_size))


@dataclass
class TrainConfig:
    """Training hyperparameters (defaults follow the evaluation setup)."""

    epochs: int = 150
    hidden_size: int = 100
    learning_rate: float = 0.005
    grad_clip_norm: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.hidden_size < 1:
            raise InsufficientData("epochs and hidden_size must be >= 1")
        if not self.learning_rate > 0 or not self.grad_clip_norm > 0:
            raise InsufficientData("learning_rate and grad_clip_norm must be > 0")


@dataclass
class TrainingCurve:
    """Per-iteration loss (standardized units) and RMSE (velocity units)."""

    loss: list[float] = field(default_factory=list)
    rmse: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class Standardization:
    """Affine map applied to velocities before they enter the network."""

    mean: float
    scale: float

    @classmethod
    def fit(cls, values: np.ndarray) -> "Standardization":
        scale = float(np.std(values))
        return cls(mean=float(np.mean(values)), scale=scale if scale > 0 else 1.0)

    @classmethod
    def identity(cls) -> "Standardization":
        return cls(mean=0.0, scale=1.0)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.scale

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.scale + self.mean


# Per-step intermediates retained for backpropagation through time:
# (x, h_prev, m_prev, forget, cand, ingate, outgate, memory, tanh_memory, hidden)
_CellCache = tuple


def cell_forward(
    params: LstmParams, x_t: np.ndarray, state: LstmState
) -> tuple[LstmState, np.ndarray]:
    """One time step: gate the input, update memory/hidden, emit the head output."""
    new_state, out, _ = _cell_forward_cached(params, x_t, state)
    return new_state, out


def _cell_forward_cached(
    params: LstmParams, x_t: np.ndarray, state: LstmState
) -> tuple[LstmState, np.ndarray, _CellCache]:
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (params.input_size,):
        raise DimensionMismatch(
            f"input shape {x_t.shape}, expected ({params.input_size},)"
        )
    if state.hidden.shape != (params.hidden_size,) or state.memory.shape != (
        params.hidden_size,
    ):
        raise DimensionMismatch("state vectors do not match hidden_size")
    h, m = state.hidden, state.memory
    forget = _sigmoid(params.x_to_forget @ x_t + params.h_to_forget @ h + params.forget_bias)
    cand = np.tanh(params.x_to_cand @ x_t + params.h_to_cand @ h + params.cand_bias)
    ingate = _sigmoid(params.x_to_ingate @ x_t + params.h_to_ingate @ h + params.ingate_bias)
    outgate = _sigmoid(
        params.x_to_outgate @ x_t + params.h_to_outgate @ h + params.outgate_bias
    )
    memory = forget * m + ingate * cand
    tanh_memory = np.tanh(memory)
    hidden = outgate * tanh_memory
    out = params.head_weight @ hidden + params.head_bias
    cache = (x_t, h, m, forget, cand, ingate, outgate, memory, tanh_memory, hidden)
    return LstmState(hidden=hidden, memory=memory), out, cache


def forward_sequence(
    params: LstmParams, inputs: list[np.ndarray], initial: LstmState
) -> tuple[list[np.ndarray], LstmState, list[_CellCache]]:
    """Run the cell over a sequence, keeping intermediates for BPTT."""
    if not inputs:
        raise DimensionMismatch("forward_sequence needs at least one input")
    outputs: list[np.ndarray] = []
    caches: list[_CellCache] = []
    state = initial
    for x_t in inputs:
        state, out, cache = _cell_forward_cached(params, x_t, state)
        outputs.append(out)
        caches.append(cache)
    return outputs, state, caches


def loss_and_gradients(
    params: LstmParams, inputs: list[np.ndarray], targets: list[np.ndarray]
) -> tuple[float, LstmParams]:
    """Mean squared-error loss and its full BPTT gradient.

    Loss is the time average of half the squared output error. The
    backward pass walks the cached intermediates in reverse, carrying two
    running gradients: one into the previous hidden state (through all
    four gates) and one into the previous memory (through the forget
    gate).
    """
    if len(inputs) != len(targets):
        raise DimensionMismatch(
            f"{len(inputs)} inputs vs {len(targets)} targets"
        )
    steps = len(inputs)
    outputs, _, caches = forward_sequence(
        params, inputs, LstmState.zeros(params.hidden_size)
    )
    grads = params.zeros_like()
    loss = 0.0
    dh_next = np.zeros(params.hidden_size)
    dm_next = np.zeros(params.hidden_size)
    for t in reversed(range(steps)):
        x_t, h_prev, m_prev, forget, cand, ingate, outgate, _, tanh_memory, hidden = caches[t]
        err = outputs[t] - np.asarray(targets[t], dtype=np.float64)
        loss += 0.5 * float(err @ err)
        dout = err / steps
        grads.head_weight += np.outer(dout, hidden)
        grads.head_bias += dout
        dh = params.head_weight.T @ dout + dh_next
        doutgate = dh * tanh_memory
        # d tanh(m) = 1 - tanh(m)^2
        dm = dh * outgate * (1.0 - tanh_memory * tanh_memory) + dm_next
        dforget = dm * m_prev
        dingate = dm * cand
        dcand = dm * ingate
        dm_next = dm * forget
        # back through the activations: sigmoid' = s(1-s), tanh' = 1-g^2
        dz_forget = dforget * forget * (1.0 - forget)
        dz_cand = dcand * (1.0 - cand * cand)
        dz_ingate = dingate * ingate * (1.0 - ingate)
        dz_outgate = doutgate * outgate * (1.0 - outgate)
        dh_next = (
            params.h_to_forget.T @ dz_forget
            + params.h_to_cand.T @ dz_cand
            + params.h_to_ingate.T @ dz_ingate
            + params.h_to_outgate.T @ dz_outgate
        )
        grads.x_to_forget += np.outer(dz_forget, x_t)
        grads.h_to_forget += np.outer(dz_forget, h_prev)
        grads.forget_bias += dz_forget
        grads.x_to_cand += np.outer(dz_cand, x_t)
        grads.h_to_cand += np.outer(dz_cand, h_prev)
        grads.cand_bias += dz_cand
        grads.x_to_ingate += np.outer(dz_ingate, x_t)
        grads.h_to_ingate += np.outer(dz_ingate, h_prev)
        grads.ingate_bias += dz_ingate
        grads.x_to_outgate += np.outer(dz_outgate, x_t)
        grads.h_to_outgate += np.outer(dz_outgate, h_prev)
        grads.outgate_bias += dz_outgate
    return loss / steps, grads


def clip_gradients(gradients: LstmParams, threshold: float) -> LstmParams:
    """Scale all gradients so their global L2 norm is at most threshold."""
    total = math.sqrt(
        sum(float(np.sum(g * g)) for g in gradients.arrays().values())
    )
    if total > threshold:
        factor = threshold / total
        for g in gradients.arrays().values():
            g *= factor
    return gradients


def train(
    sequences: Trajectory | list[Trajectory], config: TrainConfig
) -> tuple[LstmParams, TrainingCurve, Standardization]:
    """Fit the network to next-step supervision over the given trajectories.

    Inputs are samples[0..T-2], targets samples[1..T-1]. Each iteration
    runs full-sequence BPTT on one trajectory, clips the gradient and
    applies an adaptive-moment step; the curve records loss and RMSE per
    iteration. Raises DivergedTraining if the loss leaves the finite
    range.
    """
    if isinstance(sequences, Trajectory):
        sequences = [sequences]
    if not sequences:
        raise InsufficientData("no training trajectories")
    for seq in sequences:
        if len(seq) < 2:
            raise InsufficientData("each training trajectory needs >= 2 samples")

    pooled = np.concatenate([seq.samples for seq in sequences])
    standardization = (
        Standardization.fit(pooled) if config.standardize else Standardization.identity()
    )
    pairs = []
    for seq in sequences:
        scaled = standardization.apply(seq.samples)
        xs = [scaled[t : t + 1] for t in range(len(scaled) - 1)]
        ts = [scaled[t : t + 1] for t in range(1, len(scaled))]
        pairs.append((xs, ts))

    params = LstmParams.initialize(1, config.hidden_size, 1, config.seed)
    first_moment = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    second_moment = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    curve = TrainingCurve()
    step = 0
    for _ in range(config.epochs):
        for xs, ts in pairs:
            # overflow to inf/nan is caught by the finite check below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_gradients(params, xs, ts)
            if not math.isfinite(loss):
                raise DivergedTraining(f"loss became {loss} at iteration {step + 1}")
            curve.loss.append(loss)
            # loss is the time mean of 0.5*err^2, so RMSE = sqrt(2*loss)
            curve.rmse.append(math.sqrt(2.0 * loss) * standardization.scale)
            clip_gradients(grads, config.grad_clip_norm)
            step += 1
            correction1 = 1.0 - config.adam_beta1**step
            correction2 = 1.0 - config.adam_beta2**step
            grad_arrays = grads.arrays()
            for name, value in params.arrays().items():
                g = grad_arrays[name]
                first_moment[name] = (
                    config.adam_beta1 * first_moment[name] + (1 - config.adam_beta1) * g
                )
                second_moment[name] = (
                    config.adam_beta2 * second_moment[name]
                    + (1 - config.adam_beta2) * g * g
                )
                value -= config.learning_rate * (
                    first_moment[name] / correction1
                ) / (np.sqrt(second_moment[name] / correction2) + config.adam_epsilon)
    return params, curve, standardization


def predict_open_loop(
    params: LstmParams, standardization: Standardization, trajectory: Trajectory
) -> np.ndarray:
    """One-step predictions: each step conditions on the observed sample.

    Returns one prediction per t >= 1 (length = input length - 1), in
    velocity units.
    """
    if params is None or standardization is None:
        raise UnfittedModel("no trained parameters supplied")
    scaled = standardization.apply(trajectory.samples)
    state = LstmState.zeros(params.hidden_size)
    preds = np.empty(len(scaled) - 1)
    for t in range(len(scaled) - 1):
        state, out = cell_forward(params, scaled[t : t + 1], state)
        preds[t] = out[0]
    return standardization.invert(preds)


def predict_closed_loop(
    params: LstmParams,
    standardization: Standardization,
    seed_history: Trajectory,
    horizon: int,
) -> np.ndarray:
    """Multi-step forecast: warm up on the history, then feed outputs back.

    The state runs over every history sample; the final output is the
    first prediction, and each prediction becomes the next input for
    ``horizon`` steps in total.
    """
    if params is None or standardization is None:
        raise UnfittedModel("no trained parameters supplied")
    if horizon < 1:
        raise InvalidHorizon(f"horizon must be >= 1, got {horizon}")
    scaled = standardization.apply(seed_history.samples)
    state = LstmState.zeros(params.hidden_size)
    out = np.zeros(params.output_size)
    for t in range(len(scaled)):
        state, out = cell_forward(params, scaled[t : t + 1], state)
    preds = np.empty(horizon)
    for k in range(horizon):
        preds[k] = out[0]
        if k + 1 < horizon:
            state, out = cell_forward(params, out, state)
    return standardization.invert(preds)


def save_model(
    params: LstmParams,
    standardization: Standardization,
    config: TrainConfig,
    path,
) -> None:
    """Write a self-describing text model file (12 significant digits)."""
    lines = [
        MODEL_FORMAT_HEADER,
        f"input_size={params.input_size}",
        f"hidden_size={params.hidden_size}",
        f"output_size={params.output_size}",
        f"mean={standardization.mean:.12g}",
        f"scale={standardization.scale:.12g}",
        f"epochs={config.epochs}",
        f"learning_rate={config.learning_rate:.12g}",
        f"grad_clip_norm={config.grad_clip_norm:.12g}",
        f"adam_beta1={config.adam_beta1:.12g}",
        f"adam_beta2={config.adam_beta2:.12g}",
        f"adam_epsilon={config.adam_epsilon:.12g}",
        f"seed={config.seed}",
        f"standardize={'true' if config.standardize else 'false'}",
    ]
    for name, arr in params.arrays().items():
        mat = np.atleast_2d(arr)
        lines.append(f"array {name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(",".join(f"{v:.12g}" for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> tuple[LstmParams, Standardization, TrainConfig]:
    """Read a model file written by save_model."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_FORMAT_HEADER:
        raise ModelFormatError(f"{path}: missing '{MODEL_FORMAT_HEADER}' header")
    scalars: dict[str, str] = {}
    arrays: dict[str, np.ndarray] = {}
    i = 1
    try:
        while i < len(lines) and not lines[i].startswith("array "):
            key, _, value = lines[i].partition("=")
            scalars[key] = value
            i += 1
        while i < len(lines):
            _, name, rows, cols = lines[i].split()
            rows, cols = int(rows), int(cols)
            block = [
                [float(v) for v in lines[i + 1 + r].split(",")] for r in range(rows)
            ]
            arr = np.array(block)
            if cols != arr.shape[1]:
                raise ModelFormatError(f"{path}: array {name} has ragged rows")
            arrays[name] = arr
            i += 1 + rows
        field_names = [f.name for f in dataclasses.fields(LstmParams)]
        if set(arrays) != set(field_names):
            raise ModelFormatError(f"{path}: wrong parameter set")
        for name in field_names:
            if name.endswith("bias"):
                arrays[name] = arrays[name].ravel()
        params = LstmParams(**arrays)
        params.validate()
        standardization = Standardization(
            mean=float(scalars["mean"]), scale=float(scalars["scale"])
        )
        config = TrainConfig(
            epochs=int(scalars["epochs"]),
            hidden_size=params.hidden_size,
            learning_rate=float(scalars["learning_rate"]),
            grad_clip_norm=float(scalars["grad_clip_norm"]),
            adam_beta1=float(scalars["adam_beta1"]),
            adam_beta2=float(scalars["adam_beta2"]),
            adam_epsilon=float(scalars["adam_epsilon"]),
            seed=int(scalars["seed"]),
            standardize=scalars["standardize"] == "true",
        )
    except ModelFormatError:
        raise
    except (KeyError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
    return params, standardization, config
