"""Fixed-size ordinally forgetting encodings of token sequences.

A sequence of ids w_1..w_T over a vocabulary of size V is folded into a
fixed-dimension vector by the recursion

    z_0 = 0,   z_t = alpha * z_{t-1} + e_t      (1 <= t <= T)

where e_t is the one-hot vector of w_t and 0 < alpha < 1 is the forgetting
factor. Higher orders stack the trailing partial codes
[z_{T-order+1}, ..., z_T]. The same recursion run over embedding rows
instead of one-hot vectors yields the dense code actually fed to the
network; the two agree through the embedding matrix because the code is
linear in the e_t.

For alpha < 0.5 a code is exactly invertible: the residual mass of all
older positions is bounded by alpha/(1-alpha) < 1, so the latest token is
always the unique dominant component. ``decode`` exploits this as a
verification oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

_DIRECTIONS = ("left", "right")


@dataclass(frozen=True)
class FofeConfig:
    """Forgetting factor and order of the encoding."""

    alpha: float
    order: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")


def _check_ids(ids: Sequence[int], vocab_size: int) -> None:
    for i in ids:
        if not 0 <= i < vocab_size:
            raise ValueError(f"token id {i} out of range for vocabulary of size {vocab_size}")


def _check_direction(direction: str) -> None:
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")


def encode_left(ids: Sequence[int], alpha: float, vocab_size: int) -> np.ndarray:
    """Vocab-space code of the sequence read left to right."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    _check_ids(ids, vocab_size)
    z = np.zeros(vocab_size)
    for i in ids:
        z *= alpha
        z[i] += 1.0
    return z


def encode_right(ids: Sequence[int], alpha: float, vocab_size: int) -> np.ndarray:
    """Vocab-space code of the sequence read right to left."""
    return encode_left(list(ids)[::-1], alpha, vocab_size)


def encode_order(
    ids: Sequence[int], cfg: FofeConfig, vocab_size: int, direction: str = "left"
) -> np.ndarray:
    """Stacked trailing codes [z_{T-order+1}, ..., z_T], zero-padded for short T.

    Dimension is ``order * vocab_size`` regardless of sequence length.
    """
    _check_direction(direction)
    _check_ids(ids, vocab_size)
    seq = list(ids) if direction == "left" else list(ids)[::-1]
    history: list[np.ndarray] = []
    z = np.zeros(vocab_size)
    for i in seq:
        z = cfg.alpha * z
        z[i] += 1.0
        history.append(z)
    slabs = []
    for j in range(cfg.order):
        t = len(seq) - cfg.order + 1 + j  # 1-based position of this slab
        slabs.append(history[t - 1] if t >= 1 else np.zeros(vocab_size))
    return np.concatenate(slabs)


def encode_embedded(
    ids: Sequence[int], cfg: FofeConfig, direction: str, embeddings: np.ndarray
) -> np.ndarray:
    """Run the recursion over embedding rows; returns ``order * d`` values.

    Equals ``encode_order(...) @ block_diag(embeddings)`` slab by slab, up to
    float accumulation order.
    """
    _check_direction(direction)
    vocab_size, dim = embeddings.shape
    _check_ids(ids, vocab_size)
    seq = list(ids) if direction == "left" else list(ids)[::-1]
    history: list[np.ndarray] = []
    z = np.zeros(dim)
    for i in seq:
        z = cfg.alpha * z + embeddings[i]
        history.append(z)
    slabs = []
    for j in range(cfg.order):
        t = len(seq) - cfg.order + 1 + j
        slabs.append(history[t - 1] if t >= 1 else np.zeros(dim))
    return np.concatenate(slabs)


def embedded_backward(
    ids: Sequence[int],
    cfg: FofeConfig,
    direction: str,
    grad: np.ndarray,
    embed_grad: np.ndarray,
) -> None:
    """Accumulate d(loss)/d(embeddings) for one ``encode_embedded`` call.

    ``grad`` is the loss gradient w.r.t. the ``order * d`` output. The code is
    linear in the embedding rows, so each row receives the slab gradients
    scaled by that occurrence's forgetting coefficient; the accumulation runs
    the recursion's adjoint: lam_t = alpha * lam_{t+1} + g_t, then row(w_t)
    += lam_t.
    """
    _check_direction(direction)
    dim = embed_grad.shape[1]
    if grad.shape != (cfg.order * dim,):
        raise ValueError(f"gradient has shape {grad.shape}, expected ({cfg.order * dim},)")
    seq = list(ids) if direction == "left" else list(ids)[::-1]
    T = len(seq)
    slab_of_t = {T - cfg.order + 1 + j: j for j in range(cfg.order)}
    lam = np.zeros(dim)
    for t in range(T, 0, -1):
        lam = cfg.alpha * lam
        j = slab_of_t.get(t)
        if j is not None:
            lam = lam + grad[j * dim : (j + 1) * dim]
        embed_grad[seq[t - 1]] += lam


def context_code(
    ids: Sequence[int], target_index: int, cfg: FofeConfig, embeddings: np.ndarray
) -> np.ndarray:
    """Bidirectional context code for the word at ``target_index``.

    Concatenates the left code of the prefix and the right code of the
    suffix; the target word itself is excluded. Dimension ``2 * order * d``.
    """
    if not 0 <= target_index < len(ids):
        raise ValueError(f"target index {target_index} out of range for {len(ids)} tokens")
    left = encode_embedded(ids[:target_index], cfg, "left", embeddings)
    right = encode_embedded(ids[target_index + 1 :], cfg, "right", embeddings)
    return np.concatenate([left, right])


def context_backward(
    ids: Sequence[int],
    target_index: int,
    cfg: FofeConfig,
    grad: np.ndarray,
    embed_grad: np.ndarray,
) -> None:
    """Accumulate embedding gradients for one ``context_code`` call."""
    half = cfg.order * embed_grad.shape[1]
    if grad.shape != (2 * half,):
        raise ValueError(f"gradient has shape {grad.shape}, expected ({2 * half},)")
    embedded_backward(ids[:target_index], cfg, "left", grad[:half], embed_grad)
    embedded_backward(ids[target_index + 1 :], cfg, "right", grad[half:], embed_grad)


def decode(code: np.ndarray, alpha: float, max_len: int, tol: float = 1e-9) -> list[int]:
    """Recover the exact sequence from a left vocab-space code (alpha < 0.5).

    Walks the code back to front: at step k the latest remaining token is the
    unique component near alpha**k (everything older sums to below
    alpha**(k+1) / (1 - alpha)); emit it, subtract its contribution, continue.
    Thresholds are kept relative to the current scale alpha**k instead of
    rescaling the residual, which would amplify float noise by alpha**-k.
    Stops when the residual is within ``tol`` of zero at the current scale.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"decoding requires 0 < alpha < 0.5, got {alpha}")
    r = np.array(code, dtype=np.float64, copy=True)
    if r.ndim != 1 or not np.all(np.isfinite(r)):
        raise ValueError("not a valid FOFE code")
    # Absolute noise floor: adding 1.0 into a component quantizes older
    # contributions at machine epsilon, so signals below ~64 eps are gone.
    floor = 64.0 * np.finfo(np.float64).eps
    # Pivot cutoff midway between the dominant component (>= scale) and the
    # largest possible non-dominant mass (scale * alpha / (1 - alpha)).
    pivot_frac = 0.5 * (1.0 + alpha / (1.0 - alpha))
    out: list[int] = []
    scale = 1.0
    for _ in range(max_len + 1):
        if np.max(np.abs(r), initial=0.0) <= max(tol * scale, floor):
            return out[::-1]
        if len(out) == max_len:
            raise ValueError(f"code does not terminate within max_len={max_len} tokens")
        pivots = np.flatnonzero(r >= scale * pivot_frac)
        if len(pivots) != 1:
            raise ValueError("not a valid FOFE code")
        token = int(pivots[0])
        out.append(token)
        r[token] -= scale
        scale *= alpha
    raise AssertionError("unreachable")
