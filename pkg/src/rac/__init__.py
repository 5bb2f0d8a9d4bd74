"""Medical code prediction from clinical notes.

A reader/coder attention network over free-text notes: convolved token
embeddings feed a self-attention stack, and each output code attends over
the encoded note with a query built from its own title text. Includes
skip-gram embedding pretraining, sentence-permutation augmentation, weight
averaging, ranking/agreement metrics, an annotation server, and a
scikit-learn style estimator facade.
"""

from .corpus import (
    CodeTitle,
    CodeTitleTable,
    CorpusError,
    Document,
    EncodedExample,
    TitleMatrix,
    Vocabulary,
    build_title_matrix,
    encode_document,
    generate_synthetic,
    load_dataset,
    split_dataset,
    tokenize,
)
from .embeddings import EmbeddingTable, EmbeddingsError, train_skipgram
from .estimator import CodePredictor
from .metrics import MetricsError, MetricsReport, auc, f1, full_report, precision_at_n, set_agreement
from .model import Activations, ModelError, RacConfig, RacModel, predict, score_documents
from .numerics import Rng, Tensor, grad_check, no_grad
from .training import (
    Adam,
    SwaState,
    TrainConfig,
    TrainingError,
    TrainResult,
    augment,
    bce_loss,
    sentence_permute,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Activations",
    "Adam",
    "CodePredictor",
    "CodeTitle",
    "CodeTitleTable",
    "CorpusError",
    "Document",
    "EmbeddingTable",
    "EmbeddingsError",
    "EncodedExample",
    "MetricsError",
    "MetricsReport",
    "ModelError",
    "RacConfig",
    "RacModel",
    "Rng",
    "SwaState",
    "Tensor",
    "TitleMatrix",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "Vocabulary",
    "auc",
    "augment",
    "bce_loss",
    "build_title_matrix",
    "encode_document",
    "f1",
    "full_report",
    "generate_synthetic",
    "grad_check",
    "load_dataset",
    "no_grad",
    "precision_at_n",
    "predict",
    "score_documents",
    "sentence_permute",
    "set_agreement",
    "split_dataset",
    "tokenize",
    "train",
    "train_skipgram",
]
