"""Pseudo language model: predict each word from its encoded surroundings.

Training builds a vocabulary over the unlabelled corpus, turns every
sentence position into one example (target word, encoded bidirectional
context), and minimizes mean softmax cross-entropy of target prediction.
After training, the activation of the second-last layer (the held-out
layer) for a target occurrence is its context embedding; the output layer
plays no further role.

Checkpoint format (binary, little-endian): magic ``FOFE``, format version
u32, alpha f64, order u32, layer dims as a u32 count plus u32 values,
vocabulary as a u32 token count plus length-prefixed UTF-8 tokens in id
order, then the parameter tensors (embedding, then each layer's weight and
bias) as f32 row-major arrays each preceded by u32 dims, and a trailing
u64 checksum (byte sum of everything before it, mod 2**64).
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import fofe, nn
from ._binio import Reader, checksum, write_str, write_tensor
from .corpus import Vocabulary, build_vocabulary, tokenize_line
from .errors import DataError, NumericalError

CHECKPOINT_MAGIC = b"FOFE"
CHECKPOINT_VERSION = 1

# Production-scale reference values: embed_dim 512, hidden (4096, 4096, 4096),
# max_vocab 100_000. The defaults below are desk-scale so the full pipeline
# runs in seconds on one CPU.


@dataclass(frozen=True)
class LmConfig:
    """Architecture plus training settings for the pseudo language model."""

    fofe: fofe.FofeConfig = field(default_factory=lambda: fofe.FofeConfig(alpha=0.7, order=3))
    embed_dim: int = 32
    hidden_dims: tuple[int, ...] = (64, 64)
    max_vocab: int = 100_000
    window_cap: int = 0  # max context tokens per side; 0 = whole sentence
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.embed_dim < 1 or any(d < 1 for d in self.hidden_dims):
            raise ValueError("all dimensions must be >= 1")
        if self.max_vocab < 2:
            raise ValueError("max_vocab must be at least 2")
        if self.window_cap < 0:
            raise ValueError("window_cap must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    @property
    def input_dim(self) -> int:
        return 2 * self.fofe.order * self.embed_dim

    def layer_dims(self, vocab_size: int) -> list[int]:
        return [self.input_dim, *self.hidden_dims, vocab_size]


@dataclass
class LmModel:
    vocab: Vocabulary
    config: LmConfig
    params: nn.NetworkParams


def _clip_window(ids: Sequence[int], target_index: int, cap: int) -> tuple[Sequence[int], int]:
    if cap <= 0:
        return ids, target_index
    lo = max(0, target_index - cap)
    hi = min(len(ids), target_index + cap + 1)
    return ids[lo:hi], target_index - lo


def make_training_examples(
    sentence: Sequence[int], config: LmConfig
) -> list[tuple[Sequence[int], int]]:
    """One (window, target position) example per sentence position."""
    return [_clip_window(sentence, t, config.window_cap) for t in range(len(sentence))]


def context_embedding(model: LmModel, tokens: Sequence[str], target_index: int) -> np.ndarray:
    """Held-out-layer activation for the word at ``target_index``.

    Unknown words map to the unknown id; the target word itself is excluded
    from the context. The output layer is never evaluated further than the
    trace requires.
    """
    if not 0 <= target_index < len(tokens):
        raise ValueError(f"target index {target_index} out of range for {len(tokens)} tokens")
    ids = model.vocab.encode(tokens)
    window, t = _clip_window(ids, target_index, model.config.window_cap)
    x = fofe.context_code(window, t, model.config.fofe, model.params.embedding)
    return nn.forward(model.params, x).held_out


def _shard_bounds(n: int, shards: int) -> list[tuple[int, int]]:
    step = (n + shards - 1) // shards
    return [(lo, min(lo + step, n)) for lo in range(0, n, step)]


def _train_step(
    model: LmModel,
    batch: list[tuple[Sequence[int], int]],
    state: nn.OptimizerState,
    pool: ThreadPoolExecutor | None,
    workers: int,
) -> float:
    params = model.params
    cfg = model.config.fofe
    n = len(batch)
    x = np.empty((n, model.config.input_dim))

    def encode_rows(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            ids, t = batch[i]
            x[i] = fofe.context_code(ids, t, cfg, params.embedding)

    if pool is None:
        encode_rows(0, n)
    else:
        bounds = _shard_bounds(n, workers)
        list(pool.map(lambda b: encode_rows(*b), bounds))

    targets = np.fromiter((ids[t] for ids, t in batch), dtype=np.intp, count=n)
    trace = nn.forward(params, x)
    loss = nn.loss_softmax_xent(trace.logits, targets)
    grads = nn.backward(params, trace, targets)

    def scatter_rows(lo: int, hi: int, out: np.ndarray) -> None:
        for i in range(lo, hi):
            ids, t = batch[i]
            fofe.context_backward(ids, t, cfg, grads.input[i], out)

    if pool is None:
        scatter_rows(0, n, grads.embedding)
    else:
        bounds = _shard_bounds(n, workers)
        buffers = [np.zeros_like(grads.embedding) for _ in bounds]
        list(pool.map(lambda ib: scatter_rows(ib[1][0], ib[1][1], buffers[ib[0]]), enumerate(bounds)))
        for buf in buffers:  # fixed shard order keeps the sum deterministic
            grads.embedding += buf

    nn.apply_update(params, grads, state)
    return loss


def train_lm(
    corpus: Iterable[str],
    config: LmConfig,
    *,
    model: LmModel | None = None,
    progress: Callable[[int, float], None] | None = None,
    workers: int = 1,
) -> LmModel:
    """Train on unlabelled sentences (one per line), deterministically per seed.

    Pass an existing ``model`` to continue training it (its vocabulary and
    architecture are kept; optimizer moments restart). ``progress`` receives
    (epoch number, mean training loss) once per epoch. With ``workers`` > 1,
    example encoding and gradient scatter shard across threads; results stay
    deterministic for a fixed worker count, and bit-identical to the serial
    path at 1.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    lines = corpus if isinstance(corpus, list) else list(corpus)
    init_seed, shuffle_seed = np.random.SeedSequence(config.seed).spawn(2)
    if model is None:
        vocab = build_vocabulary(lines, config.max_vocab)
        params = nn.init_network(
            config.layer_dims(len(vocab)), init_seed, embed_shape=(len(vocab), config.embed_dim)
        )
        model = LmModel(vocab=vocab, config=config, params=params)
    else:
        # Continue training: architecture comes from the model, run settings
        # (optimizer, rates, epochs, window cap) from the new config.
        effective = replace(
            config,
            fofe=model.config.fofe,
            embed_dim=model.config.embed_dim,
            hidden_dims=model.config.hidden_dims,
            max_vocab=model.config.max_vocab,
        )
        model = LmModel(vocab=model.vocab, config=effective, params=model.params)

    sentences = [model.vocab.encode(tokenize_line(line)) for line in lines]
    examples: list[tuple[Sequence[int], int]] = []
    for sentence in sentences:
        examples.extend(make_training_examples(sentence, model.config))
    if not examples:
        raise DataError("empty corpus")

    state = nn.OptimizerState(rule=config.optimizer, learning_rate=config.learning_rate)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(len(examples))
            epoch_loss = 0.0
            for start in range(0, len(examples), config.batch_size):
                batch = [examples[i] for i in order[start : start + config.batch_size]]
                loss = _train_step(model, batch, state, pool, workers)
                if not np.isfinite(loss):
                    raise NumericalError(
                        f"non-finite training loss ({loss}) at epoch {epoch}, "
                        f"batch starting at example {start}; try a smaller learning rate"
                    )
                epoch_loss += loss * len(batch)
            if progress is not None:
                progress(epoch, epoch_loss / len(examples))
    finally:
        if pool is not None:
            pool.shutdown()
    return model


# ---------------------------------------------------------------------------
# Checkpoint serialization
# ---------------------------------------------------------------------------


def save_checkpoint(model: LmModel, path: str | Path) -> None:
    """Write the model to ``path``; parameters narrow to f32 on disk."""
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += struct.pack("<I", CHECKPOINT_VERSION)
    out += struct.pack("<d", model.config.fofe.alpha)
    out += struct.pack("<I", model.config.fofe.order)
    dims = model.config.layer_dims(len(model.vocab))
    out += struct.pack("<I", len(dims))
    out += struct.pack(f"<{len(dims)}I", *dims)
    out += struct.pack("<I", len(model.vocab))
    for token in model.vocab.tokens:
        write_str(out, token)
    write_tensor(out, model.params.embedding)
    for w, b in model.params.layers:
        write_tensor(out, w)
        write_tensor(out, b)
    out += struct.pack("<Q", checksum(out))
    Path(path).write_bytes(out)


def load_checkpoint(path: str | Path) -> LmModel:
    """Read a checkpoint; the file is self-describing (vocab and dims included)."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    rd = Reader(buf, "checkpoint")
    if rd.take(4) != CHECKPOINT_MAGIC:
        raise DataError(f"incompatible checkpoint: {path} (bad magic)")
    version = rd.u32()
    if version != CHECKPOINT_VERSION:
        raise DataError(f"incompatible checkpoint: {path} (version {version})")
    alpha = rd.f64()
    order = rd.u32()
    ndims = rd.u32()
    dims = [rd.u32() for _ in range(ndims)]
    n_tokens = rd.u32()
    tokens = [rd.text() for _ in range(n_tokens)]

    if ndims < 2:
        raise DataError(f"corrupt checkpoint: {path} (needs at least two layer dims)")
    if order < 1 or not 0.0 < alpha < 1.0:
        raise DataError(f"corrupt checkpoint: {path} (alpha {alpha}, order {order})")
    if dims[0] % (2 * order) != 0:
        raise DataError(f"corrupt checkpoint: {path} (input dim {dims[0]} vs order {order})")
    embed_dim = dims[0] // (2 * order)
    if dims[-1] != n_tokens:
        raise DataError(
            f"corrupt checkpoint: {path} (output dim {dims[-1]} vs {n_tokens} vocabulary tokens)"
        )

    embedding = rd.tensor()
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rd.tensor()
        b = rd.tensor()
        if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise DataError(f"corrupt checkpoint: {path} (layer tensor shape mismatch)")
        layers.append((w, b))
    if embedding.shape != (n_tokens, embed_dim):
        raise DataError(f"corrupt checkpoint: {path} (embedding shape {embedding.shape})")

    summed_region = buf[: rd.pos]
    stored_sum = rd.u64()
    if rd.pos != len(buf):
        raise DataError(f"corrupt checkpoint: {path} (trailing bytes)")
    if checksum(summed_region) != stored_sum:
        raise DataError(f"corrupt checkpoint: {path} (checksum mismatch)")

    try:
        config = LmConfig(
            fofe=fofe.FofeConfig(alpha=alpha, order=order),
            embed_dim=embed_dim,
            hidden_dims=tuple(dims[1:-1]),
            max_vocab=max(n_tokens, 2),
        )
        vocab = Vocabulary.from_tokens(tokens)
    except ValueError as exc:
        raise DataError(f"corrupt checkpoint: {path} ({exc})") from exc
    return LmModel(vocab=vocab, config=config, params=nn.NetworkParams(embedding=embedding, layers=layers))
