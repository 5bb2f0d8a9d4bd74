"""Scikit-learn style facade over the full pipeline.

``CodePredictor`` is a multi-label classifier: ``fit`` takes raw note texts
and a binary indicator matrix, builds the vocabulary, optionally pretrains
skip-gram embeddings, and trains the attention model; ``predict_proba``
returns per-code probabilities. Constructor arguments mirror the
architecture and training knobs so ``get_params``/``set_params``/``clone``
compose with the usual tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import CodeTitle, CodeTitleTable, Document, Vocabulary, build_title_matrix, encode_document, tokenize
from .embeddings import train_skipgram
from .metrics import f1
from .model import RacConfig, RacModel
from .numerics import Rng
from .training import TrainConfig, augment, train
from .validation import check_label_matrix, check_texts


class CodePredictor(BaseEstimator):
    """Multi-label code classifier with title-guided attention.

    Parameters follow the full-scale defaults; scale d/n_x/d_ff/sam_layers
    down for small corpora. ``code_table`` is a list of (code, long_title,
    short_title) triples whose order defines the label columns of y.
    """

    def __init__(
        self,
        code_table=None,
        d: int = 300,
        n_x: int = 4096,
        n_t: int = 36,
        d_ff: int = 1024,
        sam_layers: int = 4,
        conv_kernel: int = 10,
        dropout: float = 0.1,
        use_code_titles: bool = True,
        min_count: int = 10,
        pretrain_epochs: int = 5,
        pretrain_window: int = 5,
        pretrain_negatives: int = 5,
        learning_rate: float = 8e-5,
        batch_size: int = 16,
        max_epochs: int = 50,
        patience: int = 3,
        swa_interval_epochs: int = 5,
        augment_fold: int = 3,
        validation_fraction: float = 0.1,
        threshold: float = 0.5,
        use_swa_weights: bool = False,
        seed: int = 0,
    ):
        self.code_table = code_table
        self.d = d
        self.n_x = n_x
        self.n_t = n_t
        self.d_ff = d_ff
        self.sam_layers = sam_layers
        self.conv_kernel = conv_kernel
        self.dropout = dropout
        self.use_code_titles = use_code_titles
        self.min_count = min_count
        self.pretrain_epochs = pretrain_epochs
        self.pretrain_window = pretrain_window
        self.pretrain_negatives = pretrain_negatives
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.swa_interval_epochs = swa_interval_epochs
        self.augment_fold = augment_fold
        self.validation_fraction = validation_fraction
        self.threshold = threshold
        self.use_swa_weights = use_swa_weights
        self.seed = seed

    # -- helpers -------------------------------------------------------------

    def _resolve_code_table(self, n_labels: int) -> CodeTitleTable:
        if self.code_table is None:
            raise ValueError("code_table is required (list of (code, long_title, short_title))")
        if isinstance(self.code_table, CodeTitleTable):
            table = self.code_table
        else:
            table = CodeTitleTable([CodeTitle(*entry) for entry in self.code_table])
        if len(table) != n_labels:
            raise ValueError(f"y has {n_labels} columns but the code table has {len(table)} codes")
        return table

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this CodePredictor instance is not fitted yet")

    # -- estimator api ---------------------------------------------------------

    def fit(self, X, y):
        texts = check_texts(X)
        y = check_label_matrix(y, n_samples=len(texts))
        table = self._resolve_code_table(y.shape[1])

        docs = []
        for i, text in enumerate(texts):
            codes = [table.entries[j].code for j in np.flatnonzero(y[i])]
            docs.append(Document.make(f"doc{i:06d}", text, codes))

        rng = Rng(self.seed)
        n_val = int(round(self.validation_fraction * len(docs)))
        order = [int(i) for i in rng.permutation(len(docs))]
        val_docs = [docs[i] for i in order[:n_val]]
        train_docs = [docs[i] for i in order[n_val:]]
        if not train_docs:
            raise ValueError("no training documents left after the validation split")

        vocab = Vocabulary.build(train_docs, min_count=self.min_count)
        pretrained = None
        if self.pretrain_epochs > 0:
            sequences = [vocab.encode(tokenize(d.text)) for d in train_docs]
            sequences = [s for s in sequences if s]
            if sequences:
                pretrained = train_skipgram(
                    sequences, vocab, d=self.d,
                    window=self.pretrain_window, epochs=self.pretrain_epochs,
                    negatives=self.pretrain_negatives, rng=rng.child("skipgram"),
                )

        config = RacConfig(
            n_y=len(table), d=self.d, n_x=self.n_x, n_t=self.n_t, d_ff=self.d_ff,
            sam_layers=self.sam_layers, conv_kernel=self.conv_kernel,
            dropout=self.dropout, use_code_titles=self.use_code_titles,
        )
        model = RacModel.init(
            config, len(vocab), rng.child("init"), pretrained=pretrained,
            fingerprints={"vocabulary": vocab.fingerprint(), "code_table": table.fingerprint()},
        )

        train_docs = augment(train_docs, fold=self.augment_fold, rng=rng.child("augment"))
        title_matrix = build_title_matrix(table, vocab, n_t=self.n_t)
        train_examples = [encode_document(d, vocab, table, self.n_x) for d in train_docs]
        val_examples = [encode_document(d, vocab, table, self.n_x) for d in val_docs]

        train_config = TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            patience=self.patience, swa_interval_epochs=self.swa_interval_epochs,
            augment_fold=1,  # already applied above
            max_epochs=self.max_epochs, seed=self.seed,
        )
        result = train(model, train_examples, val_examples, title_matrix, train_config)

        self.vocabulary_ = vocab
        self.code_table_ = table
        self.title_matrix_ = title_matrix
        self.classes_ = table.codes
        self.model_ = result.swa_model if self.use_swa_weights else result.best_model
        self.swa_model_ = result.swa_model
        self.train_log_ = result.log
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        texts = check_texts(X)
        from .model import score_documents

        examples = [
            encode_document(Document.make(f"q{i}", t, []), self.vocabulary_, self.code_table_, self.n_x)
            for i, t in enumerate(texts)
        ]
        return score_documents(self.model_, examples, self.title_matrix_)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= self.threshold).astype(np.int64)

    def score(self, X, y) -> float:
        """Micro-F1 at the configured threshold."""
        y = check_label_matrix(y)
        _, micro = f1(self.predict_proba(X), y, threshold=self.threshold)
        return micro
