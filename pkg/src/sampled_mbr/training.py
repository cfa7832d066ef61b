"""Desk-scale gradient-descent training on synthetic lattice tasks.

A linear model maps per-frame feature vectors to symbol scores; each step
builds the utterance lattice from the current scores, estimates the
expected-loss gradient by path sampling, and applies one SGD update.
Exact enumeration of the (small) dev lattices provides noise-free
training curves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .compose import build_score_fst, compose, path_occupancy
from .errors import (
    DimensionMismatchError,
    FstParseError,
    NonFiniteGradientError,
)
from .estimators import (
    MbrEstimate,
    expected_loss_exact,
    expected_loss_gradient_exact,
    sampled_estimate,
)
from .fst import EPSILON, Edge, Wfst, enumerate_paths
from .losses import FrameErrorLoss, WordEditLoss
from .sampling import SampleStream

# Word-edit training tolerates (and needs) a larger step size than
# frame-error training; the frame-error default is a fifth of this.
DEFAULT_EMBR_LEARNING_RATE = 1.0
LEARNING_RATE_RATIO = 5.0


@dataclass
class LinearModel:
    """Per-frame linear scorer: scores_t = weights.T @ x_t + bias."""

    weights: np.ndarray  # (feature_dim, num_symbols)
    bias: np.ndarray  # (num_symbols,)

    @property
    def num_symbols(self) -> int:
        return self.weights.shape[1]


def init_model(feature_dim: int, num_symbols: int) -> LinearModel:
    return LinearModel(
        np.zeros((feature_dim, num_symbols)), np.zeros(num_symbols)
    )


@dataclass
class Utterance:
    """One training example: features plus decoder graph and references."""

    features: np.ndarray  # (num_frames, feature_dim)
    decoder_graph: Wfst
    reference: tuple[int, ...]
    alignment: tuple[int, ...] | None = None


@dataclass
class TrainConfig:
    steps: int = 200
    learning_rate: float | None = None  # resolved per loss kind when None
    samples_per_step: int = 100
    seed: int = 0
    loss: str = "word-edit"
    variance_reduction: bool = True
    eval_interval: int = 20
    exact_gradients: bool = False

    def effective_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        if self.loss == "frame-error":
            return DEFAULT_EMBR_LEARNING_RATE / LEARNING_RATE_RATIO
        return DEFAULT_EMBR_LEARNING_RATE


@dataclass
class TaskConfig:
    vocab_size: int = 3
    frames: int = 6
    clusters: int = 4
    feature_dim: int = 8
    num_utterances: int = 200
    noise: float = 0.3
    task_seed: int | None = None  # defaults to the training seed


@dataclass
class CurveRecord:
    step: int
    exact_expected_loss: float
    sampled_expected_loss: float
    wall_ms: float


def forward(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """Per-frame scores: one matrix product plus bias broadcast."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.weights.shape[0]:
        raise DimensionMismatchError(
            f"features have shape {x.shape}, model expects "
            f"(*, {model.weights.shape[0]})"
        )
    return x @ model.weights + model.bias


def make_loss(kind: str, utterance: Utterance):
    if kind == "word-edit":
        return WordEditLoss(utterance.reference)
    if kind == "frame-error":
        if utterance.alignment is None:
            raise ValueError("frame-error loss needs an utterance alignment")
        return FrameErrorLoss(utterance.alignment)
    raise ValueError(f"unknown loss kind {kind!r}")


def utterance_lattice(model: LinearModel, utterance: Utterance) -> Wfst:
    """Compose the current scores with the utterance's decoder graph."""
    return compose(
        build_score_fst(forward(model, utterance.features)),
        utterance.decoder_graph,
    )


def train_step(
    model: LinearModel,
    utterance: Utterance,
    config: TrainConfig,
    stream: SampleStream | int,
    start_index: int = 0,
) -> tuple[LinearModel, MbrEstimate]:
    """One SGD update from a fresh lattice built at the current parameters.

    The expected-loss gradient w.r.t. the scores chain-rules to the model:
    the weight gradient is features.T @ G and the bias gradient is the
    column sum of G.  ``start_index`` selects the block of sample-stream
    indices this step consumes, keeping multi-step runs schedule-free.
    """
    if isinstance(stream, int):
        stream = SampleStream(stream)
    z = forward(model, utterance.features)
    num_frames, num_symbols = z.shape
    lattice = utterance_lattice(model, utterance)
    loss = make_loss(config.loss, utterance)
    if config.exact_gradients:
        value = expected_loss_exact(lattice, loss)
        gradient = expected_loss_gradient_exact(
            lattice, loss, num_frames, num_symbols
        )
        estimate = MbrEstimate(
            expected_loss=value,
            gradient=gradient,
            num_samples=0,
            per_sample_losses=np.array([]),
            loss_mean=value,
            loss_variance=0.0,
            seed=stream.seed,
        )
    else:
        estimate = sampled_estimate(
            lattice,
            loss,
            num_frames,
            num_symbols,
            config.samples_per_step,
            stream,
            start_index,
            config.variance_reduction,
        )
    if not np.isfinite(estimate.gradient).all():
        raise NonFiniteGradientError(
            "score gradient contains non-finite entries; step aborted"
        )
    grad_weights = utterance.features.T @ estimate.gradient
    grad_bias = estimate.gradient.sum(axis=0)
    rate = config.effective_learning_rate()
    updated = LinearModel(
        model.weights - rate * grad_weights,
        model.bias - rate * grad_bias,
    )
    return updated, estimate


def make_synthetic_task(
    vocab_size: int,
    num_frames: int,
    num_symbols: int,
    feature_dim: int,
    num_utterances: int,
    seed: int,
    noise: float = 0.3,
) -> list[Utterance]:
    """Deterministic learnable dataset of lattice-decoding utterances.

    Each utterance draws a true symbol sequence, emits features as
    Gaussian noise around per-symbol centroids, and keeps as reference
    transcript the words the decoder assigns to that sequence.  The shared
    decoder graph is a frame-synchronous chain accepting every length-T
    symbol sequence; symbols above ``vocab_size`` output no word (they act
    as fillers), the rest output themselves.
    """
    if min(vocab_size, num_frames, num_symbols, feature_dim) < 1:
        raise ValueError("task dimensions must be positive")
    if vocab_size > num_symbols:
        raise ValueError("vocab_size cannot exceed the symbol count")
    decoder = chain_decoder_graph(num_frames, num_symbols, vocab_size)
    rng = np.random.default_rng(seed)
    centroids = rng.normal(size=(num_symbols, feature_dim))
    utterances = []
    for _ in range(num_utterances):
        true_seq = rng.integers(1, num_symbols + 1, size=num_frames)
        features = centroids[true_seq - 1] + noise * rng.normal(
            size=(num_frames, feature_dim)
        )
        reference = tuple(int(q) for q in true_seq if q <= vocab_size)
        utterances.append(
            Utterance(
                features=features,
                decoder_graph=decoder,
                reference=reference,
                alignment=tuple(int(q) for q in true_seq),
            )
        )
    return utterances


def chain_decoder_graph(
    num_frames: int, num_symbols: int, vocab_size: int
) -> Wfst:
    """Unweighted chain accepting all length-T symbol sequences.

    Symbol q outputs word q when q <= vocab_size and epsilon otherwise.
    """
    edges = [
        Edge(t, t + 1, q, q if q <= vocab_size else EPSILON, 0.0)
        for t in range(num_frames)
        for q in range(1, num_symbols + 1)
    ]
    return Wfst(num_frames + 1, edges, final=num_frames)


class EnumeratedObjective:
    """Reusable exact expected loss for one utterance.

    Lattice topology does not depend on the scores, so paths are
    enumerated once; re-evaluating at new scores is a vectorized softmax
    over cached per-path symbol sequences.
    """

    def __init__(
        self,
        utterance: Utterance,
        loss_kind: str,
        num_symbols: int,
        max_paths: int = 100_000,
    ):
        num_frames = utterance.features.shape[0]
        z0 = np.zeros((num_frames, num_symbols))
        lattice = compose(build_score_fst(z0), utterance.decoder_graph)
        paths = enumerate_paths(lattice, max_paths)
        loss = make_loss(loss_kind, utterance)
        self.losses = np.array([loss(lattice, p) for p in paths])
        rows = []
        for p in paths:
            occ = path_occupancy(lattice, p, num_frames, num_symbols)
            rows.append(occ.argmax(axis=1))
        self.symbols = np.array(rows, dtype=np.intp)  # (num_paths, T)
        # Per-path decoder contribution: total weight minus the (zero)
        # score part at z0.
        self.offsets = np.array([p.log_weight for p in paths])
        self._frames = np.arange(num_frames)

    def expected_loss(self, z: np.ndarray) -> float:
        log_w = self.offsets + z[self._frames, self.symbols].sum(axis=1)
        m = log_w.max()
        probs = np.exp(log_w - m)
        probs /= probs.sum()
        return float(probs @ self.losses)


def split_train_dev(
    dataset: Sequence[Utterance],
) -> tuple[list[Utterance], list[Utterance]]:
    """Deterministic 90/10 split by index (last tenth is dev)."""
    if not dataset:
        raise ValueError("dataset is empty")
    num_dev = max(1, len(dataset) // 10)
    cut = len(dataset) - num_dev
    if cut == 0:
        cut = len(dataset)  # single-utterance corner: dev = train
    return list(dataset[:cut]), list(dataset[cut:]) or list(dataset)


def run_experiment(
    dataset: Sequence[Utterance],
    config: TrainConfig,
    num_symbols: int | None = None,
) -> tuple[list[CurveRecord], LinearModel]:
    """Train on the 90% split, recording dev losses at a fixed interval.

    Steps cycle through the training utterances in order, one utterance
    per step.  Each record holds the exact (enumerated) dev expected loss,
    a sampled dev estimate, and elapsed wall time.  With identical inputs
    the records are bit-identical except for wall time.
    """
    train, dev = split_train_dev(dataset)
    feature_dim = dataset[0].features.shape[1]
    if num_symbols is None:
        num_symbols = max(e.ilabel for u in dataset for e in u.decoder_graph.edges)
    model = init_model(feature_dim, num_symbols)
    objectives = [
        EnumeratedObjective(u, config.loss, num_symbols) for u in dev
    ]
    step_stream = SampleStream(config.seed)
    # Dev-set sampling diagnostics draw from a disjoint key space so they
    # can never collide with training-sample indices.
    dev_stream = SampleStream(config.seed + 1 if config.seed + 1 < 2**64 else 0)
    started = time.perf_counter()
    records: list[CurveRecord] = []
    dev_evals = 0

    def record(step: int):
        nonlocal dev_evals
        exact = float(
            np.mean([obj.expected_loss(forward(model, u.features))
                     for obj, u in zip(objectives, dev)])
        )
        sampled = []
        for d, utt in enumerate(dev):
            z = forward(model, utt.features)
            lattice = compose(build_score_fst(z), utt.decoder_graph)
            est = sampled_estimate(
                lattice,
                make_loss(config.loss, utt),
                z.shape[0],
                z.shape[1],
                config.samples_per_step,
                dev_stream,
                start_index=(dev_evals * len(dev) + d)
                * config.samples_per_step,
            )
            sampled.append(est.expected_loss)
        dev_evals += 1
        wall_ms = (time.perf_counter() - started) * 1000.0
        records.append(
            CurveRecord(step, exact, float(np.mean(sampled)), wall_ms)
        )

    record(0)
    for step in range(config.steps):
        utterance = train[step % len(train)]
        start_index = step * 2 * config.samples_per_step
        model, _ = train_step(
            model, utterance, config, step_stream, start_index
        )
        done = step + 1
        if done % config.eval_interval == 0 or done == config.steps:
            record(done)
    return records, model


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def format_curve_csv(records: Sequence[CurveRecord]) -> str:
    lines = ["step,exact_expected_loss,sampled_expected_loss,wall_ms"]
    for r in records:
        lines.append(
            f"{r.step},{r.exact_expected_loss!r},"
            f"{r.sampled_expected_loss!r},{r.wall_ms!r}"
        )
    return "\n".join(lines) + "\n"


def zero_wall_times(records: Sequence[CurveRecord]) -> list[CurveRecord]:
    """Copies with wall_ms = 0, for byte-reproducible curve files."""
    return [replace(r, wall_ms=0.0) for r in records]


def format_model_text(model: LinearModel) -> str:
    """Flat text: dims line, one row of weights per feature, then the bias."""
    feature_dim, num_symbols = model.weights.shape
    lines = [f"{feature_dim} {num_symbols}"]
    for row in model.weights:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(" ".join(repr(float(v)) for v in model.bias))
    return "\n".join(lines) + "\n"


def parse_model_text(text: str) -> LinearModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FstParseError("empty model file")
    try:
        feature_dim, num_symbols = map(int, lines[0].split())
    except ValueError:
        raise FstParseError("malformed model dims line", 1) from None
    if len(lines) != feature_dim + 2:
        raise FstParseError(
            f"expected {feature_dim + 2} lines, found {len(lines)}"
        )
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        try:
            row = [float(v) for v in line.split()]
        except ValueError:
            raise FstParseError("malformed parameter row", lineno) from None
        if len(row) != num_symbols:
            raise FstParseError(
                f"expected {num_symbols} values per row", lineno
            )
        rows.append(row)
    return LinearModel(np.array(rows[:-1]), np.array(rows[-1]))


_CONFIG_FIELDS = {
    "steps": int,
    "learning_rate": float,
    "samples_per_step": int,
    "seed": int,
    "loss": str,
    "variance_reduction": bool,
    "eval_interval": int,
    "exact_gradients": bool,
    "vocab_size": int,
    "frames": int,
    "clusters": int,
    "feature_dim": int,
    "num_utterances": int,
    "noise": float,
    "task_seed": int,
}


def parse_config(text: str) -> tuple[TrainConfig, TaskConfig]:
    """Flat key=value config covering training and task-generation fields.

    Blank lines and lines starting with '#' are ignored.  Unknown keys and
    malformed values are parse errors.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FstParseError("expected key=value", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_FIELDS:
            raise FstParseError(f"unknown config key {key!r}", lineno)
        if key in values:
            raise FstParseError(f"duplicate config key {key!r}", lineno)
        kind = _CONFIG_FIELDS[key]
        try:
            if kind is bool:
                if value not in ("true", "false"):
                    raise ValueError
                values[key] = value == "true"
            else:
                values[key] = kind(value)
        except ValueError:
            raise FstParseError(
                f"malformed value for {key!r}: {value!r}", lineno
            ) from None
    if values.get("loss", "word-edit") not in ("word-edit", "frame-error"):
        raise FstParseError(f"unknown loss kind {values['loss']!r}")
    train_keys = {
        "steps", "learning_rate", "samples_per_step", "seed", "loss",
        "variance_reduction", "eval_interval", "exact_gradients",
    }
    train_config = TrainConfig(
        **{k: v for k, v in values.items() if k in train_keys}
    )
    task_config = TaskConfig(
        **{k: v for k, v in values.items() if k not in train_keys}
    )
    _validate_configs(train_config, task_config)
    return train_config, task_config


def _validate_configs(train_config: TrainConfig, task_config: TaskConfig):
    if train_config.steps < 0:
        raise FstParseError("steps must be nonnegative")
    if train_config.samples_per_step < 1:
        raise FstParseError("samples_per_step must be positive")
    if train_config.eval_interval < 1:
        raise FstParseError("eval_interval must be positive")
    if (
        train_config.learning_rate is not None
        and train_config.learning_rate < 0
    ):
        raise FstParseError("learning_rate must be nonnegative")
    if task_config.vocab_size > task_config.clusters:
        raise FstParseError("vocab_size cannot exceed clusters")
    for name in ("vocab_size", "frames", "clusters", "feature_dim"):
        if getattr(task_config, name) < 1:
            raise FstParseError(f"{name} must be positive")
    if task_config.num_utterances < 1:
        raise FstParseError("num_utterances must be positive")


def build_task(train_config: TrainConfig, task_config: TaskConfig):
    seed = (
        task_config.task_seed
        if task_config.task_seed is not None
        else train_config.seed
    )
    return make_synthetic_task(
        task_config.vocab_size,
        task_config.frames,
        task_config.clusters,
        task_config.feature_dim,
        task_config.num_utterances,
        seed,
        task_config.noise,
    )
