"""Loss, sentence-permutation augmentation, Adam, weight averaging and the
epoch loop with early stopping on validation Precision@8.

The training set is augmented once up front (originals plus fold-1 shuffled
copies of each note, labels unchanged) and reshuffled every epoch. Validation
uses the raw weights; the running weight average is a separate model returned
alongside the best-epoch one.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import numerics as N
from .corpus import PAD, Document, EncodedExample, TitleMatrix
from .metrics import precision_at_n
from .model import RacModel, Activations, predict_from_embedding, convolved_embedding, queries, score_documents
from .numerics import Rng, Tensor


class TrainingError(ValueError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 8e-5
    batch_size: int = 16
    patience: int = 3
    swa_interval_epochs: int = 5
    augment_fold: int = 3
    max_epochs: int = 50
    seed: int = 0
    val_precision_n: int = 8
    swa_from_first_epoch: bool = True   # False snapshots at epochs 5, 10, ...

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "patience", "swa_interval_epochs", "augment_fold"):
            if getattr(self, name) <= 0:
                raise TrainingError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_epochs < 0:
            raise TrainingError(f"max_epochs must be >= 0, got {self.max_epochs}")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# loss


def bce_loss(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy over codes, evaluated from pre-sigmoid logits."""
    return N.bce_with_logits(logits, np.asarray(targets, dtype=np.float64))


# ---------------------------------------------------------------------------
# sentence permutation

_SENTENCE_RE = re.compile(r"[^.!?\n]*[.!?]|[^.!?\n]+")


def split_sentences(text: str) -> list[str]:
    """Cut after terminal punctuation or at newlines; keep the punctuation."""
    pieces = [p.strip() for p in _SENTENCE_RE.findall(text)]
    return [p for p in pieces if p]


def sentence_permute(doc: Document, rng: Rng) -> Document:
    """Shuffle sentence order; labels (and single-sentence notes) unchanged."""
    sentences = split_sentences(doc.text)
    if len(sentences) < 2:
        return doc
    rng.shuffle(sentences)
    return Document(id=doc.id, text=" ".join(sentences), codes=doc.codes)


def augment(documents: list[Document], fold: int = 3, rng: Rng | None = None) -> list[Document]:
    """Originals plus (fold - 1) independently permuted copies of each note."""
    if fold < 1:
        raise TrainingError(f"fold must be >= 1, got {fold}")
    if fold == 1:
        return list(documents)
    if rng is None:
        rng = Rng(0)
    out = list(documents)
    for copy in range(1, fold):
        for doc in documents:
            permuted = sentence_permute(doc, rng)
            out.append(Document(id=f"{doc.id}~perm{copy}", text=permuted.text, codes=doc.codes))
    return out


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: dict[str, Tensor], lr: float = 8e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self) -> None:
        self.t += 1
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


# ---------------------------------------------------------------------------
# stochastic weight averaging


class SwaState:
    """Exact running mean of parameter snapshots (incremental update)."""

    def __init__(self):
        self.average: dict[str, np.ndarray] | None = None
        self.snapshot_count = 0

    def update(self, arrays: dict[str, np.ndarray]) -> None:
        self.snapshot_count += 1
        if self.average is None:
            self.average = {name: arr.astype(np.float64).copy() for name, arr in arrays.items()}
            return
        n = self.snapshot_count
        for name, arr in arrays.items():
            self.average[name] += (arr - self.average[name]) / n

    @staticmethod
    def is_snapshot_epoch(epoch: int, interval: int, from_first: bool = True) -> bool:
        """Snapshot at epochs 1, 1+interval, ... (or interval, 2*interval, ...)."""
        if epoch < 1:
            return False
        if from_first:
            return (epoch - 1) % interval == 0
        return epoch % interval == 0


# ---------------------------------------------------------------------------
# early stopping


class EarlyStopper:
    """Stop after `patience` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record an epoch's metric; True means training should stop now."""
        if value > self.best:
            self.best = value
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


# ---------------------------------------------------------------------------
# the loop


@dataclass
class EpochLog:
    epoch: int
    loss: float
    val_precision: float
    swa_snapshot: bool
    seconds: float


@dataclass
class TrainLog:
    epochs: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def signature(self) -> dict:
        """Deterministic view (wall time excluded) for run comparisons."""
        return {
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "epochs": [
                {"epoch": e.epoch, "loss": e.loss, "val_precision": e.val_precision,
                 "swa_snapshot": e.swa_snapshot}
                for e in self.epochs
            ],
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(asdict(e), sort_keys=True) for e in self.epochs]
        lines.append(json.dumps({"best_epoch": self.best_epoch, "stopped_epoch": self.stopped_epoch},
                                sort_keys=True))
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    best_model: RacModel
    swa_model: RacModel
    log: TrainLog


def batch_loss(model: RacModel, batch: list[EncodedExample], e_t: Tensor,
               rng: Rng | None, train: bool = True) -> Tensor:
    """Mean BCE over a batch; the code-title pass is shared by every example."""
    total = None
    for ex in batch:
        token_ids = np.asarray(ex.token_ids)
        pad_mask = (token_ids == PAD) if model.config.mask_pad else None
        e_x = convolved_embedding(token_ids, model.reader, model.config, rng, train)
        acts: Activations = predict_from_embedding(e_x, model, e_t, rng, train, pad_mask)
        loss = bce_loss(acts.logits, ex.label_vector)
        total = loss if total is None else N.add(total, loss)
    return N.scale(total, 1.0 / len(batch))


def train(model: RacModel, train_examples: list[EncodedExample],
          val_examples: list[EncodedExample], title_matrix: TitleMatrix | np.ndarray,
          config: TrainConfig) -> TrainResult:
    """Minibatch Adam with per-epoch validation Precision@n and early stopping.

    Returns the best-validation-epoch weights and the snapshot average as two
    separate models. Examples with no positive labels are excluded.
    """
    train_examples = [ex for ex in train_examples if ex.label_vector.sum() > 0]
    if not train_examples:
        raise TrainingError("training set is empty (or has no labeled examples)")

    rng = Rng(config.seed)
    shuffle_rng = rng.child("shuffle")
    dropout_rng = rng.child("dropout")

    params = model.named_parameters()
    optimizer = Adam(params, lr=config.learning_rate)
    stopper = EarlyStopper(config.patience)
    swa = SwaState()
    log = TrainLog()
    best_state = model.state_arrays()
    val_n = min(config.val_precision_n, model.config.n_y)
    val_labels = np.stack([ex.label_vector for ex in val_examples]) if val_examples else None

    for epoch in range(1, config.max_epochs + 1):
        started = time.monotonic()
        order = list(range(len(train_examples)))
        shuffle_rng.shuffle(order)
        batch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_examples[i] for i in order[start:start + config.batch_size]]
            optimizer.zero_grad()
            e_t = queries(model, title_matrix)
            loss = batch_loss(model, batch, e_t, dropout_rng, train=True)
            N.backward(loss)
            optimizer.step()
            batch_losses.append(loss.item())
        epoch_loss = float(np.mean(batch_losses))

        if val_examples:
            scores = score_documents(model, val_examples, title_matrix)
            val_precision = precision_at_n(scores, val_labels, val_n)
        else:
            val_precision = 0.0

        snapshot = SwaState.is_snapshot_epoch(epoch, config.swa_interval_epochs,
                                              config.swa_from_first_epoch)
        if snapshot:
            swa.update(model.state_arrays())

        improved = val_precision > stopper.best
        stop = stopper.update(epoch, val_precision)
        if improved:
            best_state = model.state_arrays()
        log.epochs.append(EpochLog(epoch=epoch, loss=epoch_loss, val_precision=val_precision,
                                   swa_snapshot=snapshot, seconds=time.monotonic() - started))
        log.stopped_epoch = epoch
        if stop:
            break

    log.best_epoch = stopper.best_epoch

    best_model = model.copy()
    best_model.load_state(best_state)
    swa_model = model.copy()
    if swa.average is not None:
        swa_model.load_state(swa.average)
    return TrainResult(best_model=best_model, swa_model=swa_model, log=log)
