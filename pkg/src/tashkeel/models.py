"""Model families, their training loops, and the prediction path.

Two families are built here. The context-window family classifies each
character independently from a 100-character window, encoded as scaled ids,
expanded one-hot vectors, or learned embeddings. The recurrent family reads
the whole sentence through stacked bidirectional LSTM layers and labels every
position, with either a per-position softmax head or a CRF head decoded by
Viterbi. Training is deterministic for a fixed seed on one thread.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from . import nn
from .codec import (
    DiacriticClass,
    LabeledText,
    Vocabulary,
    apply_diacritics,
    is_arabic_letter,
    remove_diacritics,
    strip_diacritics,
)
from .corpus import (
    NUM_CLASSES,
    NUM_LABELS_WITH_SPECIALS,
    Batch,
    BatchSpec,
    Corpus,
    wrap_and_pad,
)
from .metrics import EvalOptions, score_corpus
from .windows import eligible_positions, one_hot_expand, window_matrix

FFNN_FAMILIES = ("ffnn-basic", "ffnn-100hot", "ffnn-embed")
RNN_FAMILY = "rnn"

FFNN_BASIC_HIDDEN = (200, 500, 500, 450, 400, 400, 350, 300, 300, 250, 200, 200, 150, 100, 100, 50, 25)
FFNN_SMALL_HIDDEN = (250, 200, 150, 100, 50)


class ConfigError(ValueError):
    pass


class NumericError(RuntimeError):
    """Training produced a non-finite loss."""


class NotEnoughCheckpointsError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture plus training hyperparameters for one model family."""

    family: str
    # window-family options
    hidden_sizes: tuple[int, ...] = FFNN_SMALL_HIDDEN
    one_hot_width: int = 74
    embedding_rows: int = 83
    embedding_dim: int = 25
    dropout_rate: float = 0.0
    dropout_between_hidden: bool = False
    scale_ids: bool = True
    # recurrent-family options
    rnn_layers: int = 2
    rnn_hidden: int = 256
    dense_sizes: tuple[int, ...] = (512, 512)
    output_head: str = "softmax"  # "softmax" | "crf"
    bng: bool = False
    # optimization
    optimizer: str = "adam"  # "adam" | "adagrad"
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    epochs: int = 50
    batch_size: int = 256
    avg_window: int = 1
    clip_norm: float | None = None
    max_line_length: int = 500

    def __post_init__(self) -> None:
        if self.family not in (*FFNN_FAMILIES, RNN_FAMILY):
            raise ConfigError(f"unknown model family {self.family!r}")
        if self.output_head not in ("softmax", "crf"):
            raise ConfigError(f"unknown output head {self.output_head!r}")
        if self.optimizer not in ("adam", "adagrad"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout rate must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1 or self.avg_window < 1:
            raise ConfigError("epochs, batch size and averaging window must be positive")


def ffnn_basic_config(**overrides) -> ModelConfig:
    base = ModelConfig(
        family="ffnn-basic",
        hidden_sizes=FFNN_BASIC_HIDDEN,
        optimizer="adagrad",
        learning_rate=0.01,
        epochs=300,
        batch_size=512,
    )
    return replace(base, **overrides)


def ffnn_100hot_config(**overrides) -> ModelConfig:
    base = ModelConfig(
        family="ffnn-100hot",
        hidden_sizes=FFNN_SMALL_HIDDEN,
        one_hot_width=74,
        dropout_rate=0.025,
        dropout_between_hidden=True,
        epochs=50,
        batch_size=512,
    )
    return replace(base, **overrides)


def ffnn_embed_config(**overrides) -> ModelConfig:
    base = ModelConfig(
        family="ffnn-embed",
        hidden_sizes=FFNN_SMALL_HIDDEN,
        embedding_rows=83,
        embedding_dim=25,
        dropout_rate=0.10,
        dropout_between_hidden=False,
        epochs=50,
        batch_size=512,
    )
    return replace(base, **overrides)


def rnn_config(**overrides) -> ModelConfig:
    base = ModelConfig(
        family=RNN_FAMILY,
        embedding_dim=25,
        rnn_layers=2,
        rnn_hidden=256,
        dense_sizes=(512, 512),
        epochs=50,
        batch_size=256,
    )
    return replace(base, **overrides)


def default_config(family: str, **overrides) -> ModelConfig:
    builders = {
        "ffnn-basic": ffnn_basic_config,
        "ffnn-100hot": ffnn_100hot_config,
        "ffnn-embed": ffnn_embed_config,
        RNN_FAMILY: rnn_config,
    }
    if family not in builders:
        raise ConfigError(f"unknown model family {family!r}")
    return builders[family](**overrides)


@dataclass
class Model:
    config: ModelConfig
    vocab: Vocabulary
    params: nn.ParameterSet

    @property
    def num_parameters(self) -> int:
        return self.params.num_parameters()

    def crf_params(self) -> nn.CrfParams:
        return nn.CrfParams(
            transitions=self.params["crf/transitions"],
            start=self.params["crf/start"],
            end=self.params["crf/end"],
        )


def _dense_stack(params: nn.ParameterSet, rng: np.random.Generator, input_dim: int,
                 sizes: Sequence[int], output_dim: int, prefix: str = "", dtype=np.float32) -> None:
    widths = [input_dim, *sizes, output_dim]
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        name = f"{prefix}hidden{i + 1}" if i < len(sizes) else f"{prefix}output"
        params.add(f"{name}/W", nn.uniform_init(rng, (n_in, n_out), n_in, dtype))
        params.add(f"{name}/b", np.zeros(n_out, dtype=dtype))


def build_ffnn(config: ModelConfig, vocab: Vocabulary, seed: int = 0, dtype=np.float32) -> Model:
    if config.family not in FFNN_FAMILIES:
        raise ConfigError(f"build_ffnn cannot build family {config.family!r}")
    if vocab.with_sentence_marks:
        raise ConfigError("window models use a vocabulary without SOS/EOS marks")
    rng = np.random.default_rng(seed)
    params = nn.ParameterSet()
    if config.family == "ffnn-basic":
        input_dim = 100
    elif config.family == "ffnn-100hot":
        if config.one_hot_width < len(vocab) - 1:  # PAD has no one-hot slot
            raise ConfigError(
                f"one-hot width {config.one_hot_width} cannot represent a "
                f"vocabulary of {len(vocab)} ids"
            )
        input_dim = 100 * config.one_hot_width
    else:
        if config.embedding_rows < len(vocab):
            raise ConfigError(
                f"embedding table of {config.embedding_rows} rows cannot cover "
                f"a vocabulary of {len(vocab)} ids"
            )
        params.add("embedding/W",
                   nn.embedding_init(rng, config.embedding_rows, config.embedding_dim, dtype))
        input_dim = 100 * config.embedding_dim
    _dense_stack(params, rng, input_dim, config.hidden_sizes, NUM_CLASSES, dtype=dtype)
    return Model(config=config, vocab=vocab, params=params)


def build_rnn(config: ModelConfig, vocab: Vocabulary, seed: int = 0, dtype=np.float32) -> Model:
    if config.family != RNN_FAMILY:
        raise ConfigError(f"build_rnn cannot build family {config.family!r}")
    if not vocab.with_sentence_marks:
        raise ConfigError("recurrent models need a vocabulary with SOS/EOS marks")
    rng = np.random.default_rng(seed)
    params = nn.ParameterSet()
    params.add("embedding/W", nn.embedding_init(rng, len(vocab), config.embedding_dim, dtype))
    input_dim = config.embedding_dim
    for layer in range(1, config.rnn_layers + 1):
        for direction in ("fwd", "bwd"):
            wx, wh, b = nn.init_lstm_direction(rng, input_dim, config.rnn_hidden, dtype)
            params.add(f"lstm{layer}/{direction}/Wx", wx)
            params.add(f"lstm{layer}/{direction}/Wh", wh)
            params.add(f"lstm{layer}/{direction}/b", b)
        input_dim = 2 * config.rnn_hidden
    _dense_stack(params, rng, input_dim, config.dense_sizes, NUM_LABELS_WITH_SPECIALS, dtype=dtype)
    if config.output_head == "crf":
        trans, start, end = nn.init_crf(rng, NUM_LABELS_WITH_SPECIALS, dtype)
        params.add("crf/transitions", trans)
        params.add("crf/start", start)
        params.add("crf/end", end)
    return Model(config=config, vocab=vocab, params=params)


def build_model(config: ModelConfig, vocab: Vocabulary, seed: int = 0, dtype=np.float32) -> Model:
    if config.family == RNN_FAMILY:
        return build_rnn(config, vocab, seed, dtype)
    return build_ffnn(config, vocab, seed, dtype)


def _ffnn_logits(model: Model, windows: np.ndarray, train: bool,
                 rng: np.random.Generator | None) -> nn.Tensor:
    config = model.config
    params = model.params
    dtype = params["output/W"].data.dtype
    if config.family == "ffnn-basic":
        values = windows.astype(dtype)
        if config.scale_ids:
            values = values / len(model.vocab)
        x = nn.Tensor(values)
    elif config.family == "ffnn-100hot":
        x = nn.Tensor(one_hot_expand(windows, config.one_hot_width, model.vocab).astype(dtype))
    else:
        flat = nn.embedding(params["embedding/W"], windows)
        x = nn.reshape(flat, (windows.shape[0], windows.shape[1] * config.embedding_dim))
    use_dropout = train and config.dropout_rate > 0.0
    if use_dropout:
        x = nn.dropout(x, config.dropout_rate, train, rng)
    n_hidden = len(config.hidden_sizes)
    for i in range(1, n_hidden + 1):
        x = nn.relu(nn.dense_forward(x, params[f"hidden{i}/W"], params[f"hidden{i}/b"]))
        if use_dropout and config.dropout_between_hidden:
            x = nn.dropout(x, config.dropout_rate, train, rng)
    return nn.dense_forward(x, params["output/W"], params["output/b"])


def _rnn_logits(model: Model, ids: np.ndarray) -> nn.Tensor:
    """Per-position logits for a wrapped id matrix, shaped (width, lines, labels)."""
    config = model.config
    params = model.params
    n, width = ids.shape
    emb = nn.embedding(params["embedding/W"], ids)  # (lines, width, dim)
    xs = [emb[:, t, :] for t in range(width)]
    for layer in range(1, config.rnn_layers + 1):
        fwd = nn.LstmDirectionParams(
            params[f"lstm{layer}/fwd/Wx"], params[f"lstm{layer}/fwd/Wh"], params[f"lstm{layer}/fwd/b"]
        )
        bwd = nn.LstmDirectionParams(
            params[f"lstm{layer}/bwd/Wx"], params[f"lstm{layer}/bwd/Wh"], params[f"lstm{layer}/bwd/b"]
        )
        xs = nn.bilstm_forward(xs, fwd, bwd)
    h = nn.concat(xs, axis=0)  # (width*lines, 2*hidden), time-major
    for i in range(1, len(config.dense_sizes) + 1):
        h = nn.relu(nn.dense_forward(h, params[f"hidden{i}/W"], params[f"hidden{i}/b"]))
    logits = nn.dense_forward(h, params["output/W"], params["output/b"])
    return nn.reshape(logits, (width, n, NUM_LABELS_WITH_SPECIALS))


def _rnn_batch_loss(model: Model, batch: Batch) -> tuple[nn.Tensor, np.ndarray, int]:
    """Loss tensor, flat head scores, and scored-position count for a batch."""
    logits3 = _rnn_logits(model, batch.ids)
    width, n = batch.ids.shape[1], batch.ids.shape[0]
    if model.config.output_head == "softmax":
        flat_logits = nn.reshape(logits3, (width * n, NUM_LABELS_WITH_SPECIALS))
        flat_labels = batch.labels.T.reshape(-1)
        flat_mask = batch.mask.T.reshape(-1)
        loss, probs = nn.softmax_cross_entropy(flat_logits, flat_labels, flat_mask)
        return loss, probs, int(flat_mask.sum())
    crf = model.crf_params()
    total = None
    positions = 0
    for row in range(n):
        t = int(batch.lengths[row]) + 2  # SOS, characters, EOS
        emissions = logits3[0:t, row, :]
        nll = nn.crf_log_likelihood(emissions, batch.labels[row, :t], crf)
        total = nll if total is None else nn.add(total, nll)
        positions += t
    loss = nn.mul(total, 1.0 / positions)
    with nn.no_grad():
        scores = logits3.data.reshape(width * n, NUM_LABELS_WITH_SPECIALS)
    return loss, scores, int(batch.mask.sum())


def _batch_accuracy(scores: np.ndarray, batch: Batch) -> tuple[int, int]:
    width, n = batch.ids.shape[1], batch.ids.shape[0]
    predicted = scores.argmax(axis=1).reshape(width, n).T
    correct = int(((predicted == batch.labels) & batch.mask).sum())
    return correct, int(batch.mask.sum())


@dataclass
class TrainLogEntry:
    epoch: int
    train_loss: float
    train_accuracy: float
    valid_loss: float | None = None
    valid_accuracy: float | None = None
    valid_der: float | None = None
    checkpoint: str | None = None

    def as_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=True, sort_keys=True)


@dataclass
class TrainResult:
    log: list[TrainLogEntry]
    checkpoints: list[tuple[int, nn.ParameterSet]]
    model: Model

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for entry in self.log:
                fh.write(entry.as_json() + "\n")


CHECKPOINT_TAIL = 20  # covers every published averaging window


def _make_optimizer(config: ModelConfig):
    if config.optimizer == "adagrad":
        return nn.AdaGrad(lr=config.learning_rate, eps=config.epsilon)
    return nn.Adam(lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2,
                   eps=config.epsilon)


def _check_finite(loss_value: float, epoch: int) -> None:
    if not np.isfinite(loss_value):
        raise NumericError(
            f"non-finite loss ({loss_value}) at epoch {epoch}; lower the learning "
            "rate or enable gradient clipping"
        )


def _apply_gradient_transforms(config: ModelConfig, grads):
    if config.bng:
        grads = nn.bng_normalize(grads)
    if config.clip_norm is not None:
        grads = nn.clip_gradients(grads, config.clip_norm)
    return grads


def train_model(
    model: Model,
    train_corpus: Corpus | Sequence[LabeledText],
    valid_corpus: Corpus | Sequence[LabeledText] | None,
    seed: int = 0,
    der_every: int = 5,
) -> TrainResult:
    """Run the configured training loop; deterministic for a fixed seed.

    Gradients pass through block normalization and optional clipping before
    the optimizer step. A parameter snapshot is kept for each epoch in the
    tail window so checkpoint averaging can run afterwards. Validation DER is
    measured through the real prediction path every ``der_every`` epochs.
    """
    train_lines = train_corpus.decode() if isinstance(train_corpus, Corpus) else list(train_corpus)
    valid_lines = None
    if valid_corpus is not None:
        valid_lines = valid_corpus.decode() if isinstance(valid_corpus, Corpus) else list(valid_corpus)
    if model.config.family == RNN_FAMILY:
        return _train_rnn(model, train_lines, valid_lines, seed, der_every)
    return _train_ffnn(model, train_lines, valid_lines, seed, der_every)


def _train_ffnn(model: Model, train_lines, valid_lines, seed: int, der_every: int) -> TrainResult:
    config = model.config
    rng = np.random.default_rng(seed)
    windows, labels = _window_dataset(model, train_lines)
    valid_set = _window_dataset(model, valid_lines) if valid_lines is not None else None
    optimizer = _make_optimizer(config)
    log: list[TrainLogEntry] = []
    checkpoints: list[tuple[int, nn.ParameterSet]] = []
    tail = max(config.avg_window, CHECKPOINT_TAIL)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(labels))
        loss_sum = 0.0
        correct = 0
        for start in range(0, len(order), config.batch_size):
            pick = order[start : start + config.batch_size]
            logits = _ffnn_logits(model, windows[pick], train=True, rng=rng)
            loss, probs = nn.softmax_cross_entropy(logits, labels[pick])
            loss_value = loss.item()
            _check_finite(loss_value, epoch)
            model.params.zero_grad()
            loss.backward()
            grads = _apply_gradient_transforms(config, model.params.gradients())
            optimizer.step(model.params, grads)
            loss_sum += loss_value * len(pick)
            correct += int((probs.argmax(axis=1) == labels[pick]).sum())
        entry = TrainLogEntry(
            epoch=epoch,
            train_loss=loss_sum / max(len(labels), 1),
            train_accuracy=correct / max(len(labels), 1),
            checkpoint=f"epoch-{epoch:03d}",
        )
        if valid_set is not None:
            entry.valid_loss, entry.valid_accuracy = _ffnn_eval(model, *valid_set)
        if valid_lines is not None and epoch % der_every == 0:
            entry.valid_der = _corpus_der(model, valid_lines)
        log.append(entry)
        checkpoints.append((epoch, model.params.copy()))
        if len(checkpoints) > tail:
            checkpoints.pop(0)
    return TrainResult(log=log, checkpoints=checkpoints, model=model)


def _window_dataset(model: Model, lines) -> tuple[np.ndarray, np.ndarray]:
    all_windows = []
    all_labels = []
    for lt in lines:
        positions = eligible_positions(lt)
        if not positions:
            continue
        all_windows.append(window_matrix(lt, positions, model.vocab))
        all_labels.extend(int(lt.labels[i]) for i in positions)
    if not all_windows:
        return np.zeros((0, 100), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(all_windows), np.asarray(all_labels, dtype=np.int64)


def _ffnn_eval(model: Model, windows: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    if len(labels) == 0:
        return 0.0, 0.0
    with nn.no_grad():
        logits = _ffnn_logits(model, windows, train=False, rng=None)
        loss, probs = nn.softmax_cross_entropy(logits, labels)
    return loss.item(), float((probs.argmax(axis=1) == labels).mean())


def _train_rnn(model: Model, train_lines, valid_lines, seed: int, der_every: int) -> TrainResult:
    config = model.config
    rng = np.random.default_rng(seed)
    # Training enforces the configured cap; over-long lines mean the corpus
    # skipped preprocessing. Validation and prediction accept any length.
    spec = BatchSpec(max_len=config.max_line_length, batch_size=config.batch_size)
    optimizer = _make_optimizer(config)
    log: list[TrainLogEntry] = []
    checkpoints: list[tuple[int, nn.ParameterSet]] = []
    tail = max(config.avg_window, CHECKPOINT_TAIL)
    indices = np.arange(len(train_lines))
    lengths = np.array([len(l) for l in train_lines])
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(indices)
        # Stable sort by length keeps padding rare without breaking determinism.
        order = order[np.argsort(lengths[order], kind="stable")]
        loss_sum = 0.0
        weight_sum = 0
        correct = 0
        mask_total = 0
        for start in range(0, len(order), config.batch_size):
            pick = [train_lines[i] for i in order[start : start + config.batch_size]]
            batch = wrap_and_pad(pick, spec, model.vocab)
            loss, scores, n_scored = _rnn_batch_loss(model, batch)
            loss_value = loss.item()
            _check_finite(loss_value, epoch)
            model.params.zero_grad()
            loss.backward()
            grads = _apply_gradient_transforms(config, model.params.gradients())
            optimizer.step(model.params, grads)
            loss_sum += loss_value * n_scored
            weight_sum += n_scored
            c, m = _batch_accuracy(scores, batch)
            correct += c
            mask_total += m
        entry = TrainLogEntry(
            epoch=epoch,
            train_loss=loss_sum / max(weight_sum, 1),
            train_accuracy=correct / max(mask_total, 1),
            checkpoint=f"epoch-{epoch:03d}",
        )
        if valid_lines is not None:
            entry.valid_loss, entry.valid_accuracy = _rnn_eval(model, valid_lines, spec)
            if epoch % der_every == 0:
                entry.valid_der = _corpus_der(model, valid_lines)
        log.append(entry)
        checkpoints.append((epoch, model.params.copy()))
        if len(checkpoints) > tail:
            checkpoints.pop(0)
    return TrainResult(log=log, checkpoints=checkpoints, model=model)


def _rnn_eval(model: Model, lines, spec: BatchSpec) -> tuple[float, float]:
    longest = max((len(l) for l in lines), default=1)
    spec = BatchSpec(max_len=max(spec.max_len, longest), batch_size=spec.batch_size)
    loss_sum = 0.0
    weight = 0
    correct = 0
    total = 0
    for start in range(0, len(lines), spec.batch_size):
        batch = wrap_and_pad(lines[start : start + spec.batch_size], spec, model.vocab)
        with nn.no_grad():
            loss, scores, n_scored = _rnn_batch_loss(model, batch)
        loss_sum += loss.item() * n_scored
        weight += n_scored
        c, m = _batch_accuracy(scores, batch)
        correct += c
        total += m
    if weight == 0:
        return 0.0, 0.0
    return loss_sum / weight, correct / max(total, 1)


def _corpus_der(model: Model, gold_lines) -> float:
    predictions = [strip_diacritics(p) for p in predict_lines(model, [apply_diacritics(l) for l in gold_lines])]
    return score_corpus(gold_lines, predictions, EvalOptions()).der


def finalize(checkpoints: Sequence[tuple[int, nn.ParameterSet]], k: int) -> nn.ParameterSet:
    """Average the last k epoch snapshots into one parameter set."""
    if k < 1:
        raise ValueError("averaging window must be >= 1")
    if len(checkpoints) < k:
        raise NotEnoughCheckpointsError(
            f"need {k} checkpoints to average, have {len(checkpoints)}"
        )
    tail = [params for _, params in checkpoints[-k:]]
    return nn.average_checkpoints(tail)


def finalize_model(model: Model, result: TrainResult, k: int | None = None) -> Model:
    k = model.config.avg_window if k is None else k
    model.params.load_values(finalize(result.checkpoints, k))
    return model


class EmptyVocabularyError(ValueError):
    pass


def predict_line(model: Model, text: str) -> str:
    """Diacritize one line; any marks already present are stripped first."""
    return predict_lines(model, [text])[0]


def predict_lines(model: Model, texts: Sequence[str]) -> list[str]:
    """Diacritize many lines.

    Lines are grouped by length so the recurrent pass runs without padding;
    the output is positionally identical to line-at-a-time prediction. No
    length cap applies here: prediction accepts arbitrarily long lines.
    """
    if len(model.vocab.chars) == 0:
        raise EmptyVocabularyError("the model vocabulary has no characters")
    bases = [remove_diacritics(t) for t in texts]
    results: list[str | None] = [None] * len(texts)
    if model.config.family == RNN_FAMILY:
        groups: dict[int, list[int]] = {}
        for i, base in enumerate(bases):
            groups.setdefault(len(base), []).append(i)
        for length, members in sorted(groups.items()):
            if length == 0:
                for i in members:
                    results[i] = ""
                continue
            for start in range(0, len(members), model.config.batch_size):
                chunk = members[start : start + model.config.batch_size]
                labels = _predict_rnn_chunk(model, [bases[i] for i in chunk])
                for i, row in zip(chunk, labels):
                    results[i] = _render(bases[i], row)
    else:
        for i, base in enumerate(bases):
            results[i] = _render(base, _predict_ffnn_line(model, base))
    return results  # type: ignore[return-value]


def _render(base: str, labels: Sequence[DiacriticClass]) -> str:
    return apply_diacritics(LabeledText(base=base, labels=tuple(labels)))


def _predict_ffnn_line(model: Model, base: str) -> list[DiacriticClass]:
    labels = [DiacriticClass.NO_DIACRITIC] * len(base)
    lt = LabeledText(base=base, labels=tuple(labels))
    positions = eligible_positions(lt)
    if not positions:
        return labels
    windows = window_matrix(lt, positions, model.vocab)
    with nn.no_grad():
        logits = _ffnn_logits(model, windows, train=False, rng=None)
    picks = logits.data[:, :NUM_CLASSES].argmax(axis=1)
    for pos, cls in zip(positions, picks):
        labels[pos] = DiacriticClass(int(cls))
    return labels


def _predict_rnn_chunk(model: Model, bases: Sequence[str]) -> list[list[DiacriticClass]]:
    """Label a group of equal-length lines in one padded-free batch."""
    length = len(bases[0])
    ids = np.empty((len(bases), length + 2), dtype=np.int32)
    for r, base in enumerate(bases):
        ids[r, 0] = model.vocab.sos_id
        ids[r, 1 : 1 + length] = model.vocab.encode(base)
        ids[r, 1 + length] = model.vocab.eos_id
    with nn.no_grad():
        logits3 = _rnn_logits(model, ids)  # (length+2, lines, labels)
    out: list[list[DiacriticClass]] = []
    if model.config.output_head == "softmax":
        picks = logits3.data[1 : 1 + length, :, :NUM_CLASSES].argmax(axis=2)
        for r, base in enumerate(bases):
            out.append(_classes_for(base, picks[:, r]))
        return out
    crf = model.crf_params()
    for r, base in enumerate(bases):
        emissions = logits3.data[:, r, :].astype(np.float64).copy()
        # Real positions must decode to real classes; push specials far down.
        emissions[1 : 1 + length, NUM_CLASSES:] = -1e30
        path = nn.crf_viterbi(emissions, crf)
        out.append(_classes_for(base, path[1 : 1 + length]))
    return out


def _classes_for(base: str, picks: Sequence[int]) -> list[DiacriticClass]:
    labels = []
    for ch, pick in zip(base, picks):
        if is_arabic_letter(ch) and int(pick) < NUM_CLASSES:
            labels.append(DiacriticClass(int(pick)))
        else:
            labels.append(DiacriticClass.NO_DIACRITIC)
    return labels


_MODEL_MAGIC = b"TKMD1\n"


def save_model(model: Model, path) -> None:
    """Model container: JSON header (family, widths, vocabulary and its hash)
    followed by the parameter checkpoint."""
    header = {
        "format": 1,
        "config": asdict(model.config),
        "vocab": model.vocab.serialize(),
        "vocab_hash": model.vocab.content_hash(),
    }
    blob = json.dumps(header, ensure_ascii=True, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(nn.checkpoint_bytes(model.params))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        if fh.read(len(_MODEL_MAGIC)) != _MODEL_MAGIC:
            raise ValueError("not a model file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        params = nn.checkpoint_from_bytes(fh.read())
    if header.get("format") != 1:
        raise ValueError("unsupported model format")
    raw = dict(header["config"])
    raw["hidden_sizes"] = tuple(raw["hidden_sizes"])
    raw["dense_sizes"] = tuple(raw["dense_sizes"])
    config = ModelConfig(**raw)
    vocab = Vocabulary.deserialize(header["vocab"])
    if vocab.content_hash() != header["vocab_hash"]:
        raise ValueError("vocabulary hash does not match the stored vocabulary")
    model = build_model(config, vocab, seed=0, dtype=params[params.names()[0]].data.dtype)
    model.params.load_values(params)
    return model
