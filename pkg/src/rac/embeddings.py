"""Skip-gram token embedding pretraining with negative sampling.

Trains on the training-split notes only; the resulting table initializes
both the reader's token embedding and the coder's title embedding. Single
threaded and fully deterministic under a seed. Negatives are drawn from the
unigram distribution raised to 3/4; the learning rate decays linearly from
its start value to ``min_lr`` over all (epoch, pair) steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import PAD, Vocabulary
from .numerics import Rng, load_arrays, save_arrays


class EmbeddingsError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    vectors: np.ndarray
    epochs_trained: int
    vocab_fingerprint: str
    context_vectors: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def save(self, path) -> None:
        arrays = {"vectors": self.vectors}
        if self.context_vectors is not None:
            arrays["context_vectors"] = self.context_vectors
        save_arrays(
            path,
            arrays,
            meta={
                "epochs_trained": self.epochs_trained,
                "vocab_fingerprint": self.vocab_fingerprint,
            },
        )

    @classmethod
    def load(cls, path, vocab: Vocabulary | None = None) -> "EmbeddingTable":
        arrays, meta = load_arrays(path)
        table = cls(
            vectors=arrays["vectors"],
            epochs_trained=int(meta.get("epochs_trained", 0)),
            vocab_fingerprint=meta.get("vocab_fingerprint", ""),
            context_vectors=arrays.get("context_vectors"),
        )
        if vocab is not None and vocab.fingerprint() != table.vocab_fingerprint:
            raise EmbeddingsError(
                "embedding table was trained against a different vocabulary "
                f"(fingerprint {table.vocab_fingerprint[:12]}... != {vocab.fingerprint()[:12]}...)"
            )
        return table


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def _count_pairs(sequences: list[list[int]], window: int) -> int:
    total = 0
    for seq in sequences:
        n = len(seq)
        for i in range(n):
            total += min(i + window, n - 1) - max(i - window, 0)
    return total


def train_skipgram(
    sequences: list[list[int]],
    vocab: Vocabulary,
    d: int,
    window: int = 5,
    epochs: int = 5,
    negatives: int = 5,
    lr: float = 0.025,
    min_lr: float = 0.0001,
    rng: Rng | None = None,
) -> EmbeddingTable:
    """Train skip-gram vectors on encoded token-id sequences.

    Every (center, context) pair within the symmetric window is used once
    per epoch, in corpus order. The PAD row is never sampled (padding is not
    part of the raw sequences) and stays exactly zero.
    """
    if not sequences or all(len(s) == 0 for s in sequences):
        raise EmbeddingsError("cannot train embeddings on an empty corpus")
    if rng is None:
        rng = Rng(0)
    vocab_size = len(vocab)

    counts = np.zeros(vocab_size, dtype=np.float64)
    for seq in sequences:
        for token_id in seq:
            if not 0 <= token_id < vocab_size:
                raise EmbeddingsError(f"token id {token_id} out of range for vocabulary of {vocab_size}")
            counts[token_id] += 1
    if counts[PAD] != 0:
        raise EmbeddingsError("sequences must not contain PAD ids")

    noise = counts ** 0.75
    total_noise = noise.sum()
    if total_noise == 0:
        raise EmbeddingsError("cannot train embeddings on an empty corpus")
    cumulative = np.cumsum(noise / total_noise)

    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(vocab_size, d))
    w_in[PAD] = 0.0
    w_out = np.zeros((vocab_size, d))

    total_steps = max(1, epochs * _count_pairs(sequences, window))
    step = 0
    for _ in range(epochs):
        for seq in sequences:
            n = len(seq)
            for i, center in enumerate(seq):
                lo = max(i - window, 0)
                hi = min(i + window, n - 1)
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    context = seq[j]
                    rate = max(min_lr, lr * (1.0 - step / total_steps))
                    step += 1
                    draws = np.searchsorted(cumulative, rng.uniform(size=negatives))
                    rows = [context] + [int(neg) for neg in draws if int(neg) != context]
                    labels = np.zeros(len(rows))
                    labels[0] = 1.0
                    outs = w_out[rows]
                    center_vec = w_in[center]
                    g = (labels - _sigmoid(outs @ center_vec)) * rate
                    w_in[center] = center_vec + g @ outs
                    w_out[rows] += np.outer(g, center_vec)

    return EmbeddingTable(
        vectors=w_in,
        epochs_trained=epochs,
        vocab_fingerprint=vocab.fingerprint(),
        context_vectors=w_out,
    )


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))
