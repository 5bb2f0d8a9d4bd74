"""The code-prediction network: reader and coder.

The reader turns a token-id sequence into contextual position vectors: an
embedding lookup, two 1-d convolutions with tanh, dropout, then a stack of
identical single-head self-attention layers (no positional encoding, so the
stack is permutation-equivariant over positions):

    attn(H) = LN(H + Softmax[(H Wq)(H Wk)^T / sqrt(d)] (H Wv))
    layer(H) = LN(attn(H) + relu(attn(H) W1) W2)

with dropout applied to each sub-layer output before its residual add.

The coder embeds every code's concatenated long+short title (embedding ->
one tanh convolution -> max pool over title positions) and uses the result
as the query matrix of one more attention over the reader output:

    A   = Softmax(E_t U_x^T / sqrt(d))        one distribution per code
    V_x = A U_x
    y   = sigmoid(V_x w + b)                  shared d -> 1 projection

A is kept around so attended positions can be inspected per code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import numerics as N
from .corpus import PAD, TitleMatrix
from .embeddings import EmbeddingTable
from .numerics import Rng, Tensor


class ModelError(ValueError):
    pass


@dataclass
class RacConfig:
    """Architecture hyperparameters; defaults are the full-scale settings."""

    n_y: int
    d: int = 300
    n_x: int = 4096
    n_t: int = 36
    d_ff: int = 1024
    sam_layers: int = 4
    conv_kernel: int = 10
    reader_conv_layers: int = 2
    dropout: float = 0.1
    use_code_titles: bool = True    # False swaps E_t for a free learned query matrix
    output_bias: bool = True        # False is strict-equation mode (y = sigmoid(V_x w))
    mask_pad: bool = False          # optional PAD masking inside both attentions
    precision: str = "float64"      # float32 is a speed mode; gradient checks need float64

    def __post_init__(self):
        for name in ("n_y", "d", "n_x", "n_t", "d_ff", "conv_kernel", "reader_conv_layers"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.sam_layers < 0:
            raise ModelError(f"sam_layers must be >= 0, got {self.sam_layers}")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.precision not in ("float64", "float32"):
            raise ModelError(f"precision must be float64 or float32, got {self.precision!r}")

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "RacConfig":
        return cls(**payload)


@dataclass
class SamLayerParams:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_1: Tensor
    w_2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor


@dataclass
class ReaderParams:
    embedding: Tensor
    conv_kernels: list[Tensor]
    conv_biases: list[Tensor]
    layers: list[SamLayerParams]


@dataclass
class CoderParams:
    embedding: Tensor | None
    conv_kernel: Tensor | None
    conv_bias: Tensor | None
    w_3: Tensor
    b_3: Tensor | None
    free_query: Tensor | None = None


@dataclass
class Activations:
    """Forward-pass intermediates; attention is exposed for visualization."""

    e_x: Tensor
    u_x: Tensor
    e_t: Tensor
    attention: Tensor
    v_x: Tensor
    logits: Tensor
    y: Tensor


def _uniform_fan_in(rng: Rng, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _embedding_init(rng: Rng, vocab_size: int, d: int) -> np.ndarray:
    table = rng.normal(0.0, 1.0 / math.sqrt(d), size=(vocab_size, d))
    table[PAD] = 0.0
    return table


class RacModel:
    """Parameter container plus checkpoint I/O; forward passes live in functions."""

    def __init__(self, config: RacConfig, reader: ReaderParams, coder: CoderParams,
                 vocab_size: int, fingerprints: dict | None = None):
        self.config = config
        self.reader = reader
        self.coder = coder
        self.vocab_size = vocab_size
        self.fingerprints = fingerprints or {}

    # -- construction -------------------------------------------------------

    @classmethod
    def init(cls, config: RacConfig, vocab_size: int, rng: Rng,
             pretrained: EmbeddingTable | None = None,
             fingerprints: dict | None = None) -> "RacModel":
        d, k = config.d, config.conv_kernel

        def param(values) -> Tensor:
            return Tensor(np.asarray(values, dtype=config.dtype), requires_grad=True)

        def emb_table() -> np.ndarray:
            if pretrained is None:
                return _embedding_init(rng, vocab_size, d)
            if pretrained.dim != d:
                raise ModelError(f"pretrained dim {pretrained.dim} != config d {d}")
            table = _embedding_init(rng, vocab_size, d)
            rows = min(vocab_size, len(pretrained))
            table[:rows] = pretrained.vectors[:rows]
            return table

        reader_kernels, reader_biases = [], []
        for _ in range(config.reader_conv_layers):
            reader_kernels.append(Tensor(_uniform_fan_in(rng, (k, d, d), k * d), requires_grad=True))
            reader_biases.append(Tensor(np.zeros(d), requires_grad=True))
        layers = []
        for _ in range(config.sam_layers):
            layers.append(SamLayerParams(
                w_q=Tensor(_uniform_fan_in(rng, (d, d), d), requires_grad=True),
                w_k=Tensor(_uniform_fan_in(rng, (d, d), d), requires_grad=True),
                w_v=Tensor(_uniform_fan_in(rng, (d, d), d), requires_grad=True),
                w_1=Tensor(_uniform_fan_in(rng, (d, config.d_ff), d), requires_grad=True),
                w_2=Tensor(_uniform_fan_in(rng, (config.d_ff, d), config.d_ff), requires_grad=True),
                ln1_gain=Tensor(np.ones(d), requires_grad=True),
                ln1_bias=Tensor(np.zeros(d), requires_grad=True),
                ln2_gain=Tensor(np.ones(d), requires_grad=True),
                ln2_bias=Tensor(np.zeros(d), requires_grad=True),
            ))
        reader = ReaderParams(
            embedding=Tensor(emb_table(), requires_grad=True),
            conv_kernels=reader_kernels,
            conv_biases=reader_biases,
            layers=layers,
        )

        if config.use_code_titles:
            coder = CoderParams(
                embedding=Tensor(emb_table(), requires_grad=True),
                conv_kernel=Tensor(_uniform_fan_in(rng, (k, d, d), k * d), requires_grad=True),
                conv_bias=Tensor(np.zeros(d), requires_grad=True),
                w_3=Tensor(np.zeros((d, 1)), requires_grad=True),
                b_3=Tensor(np.zeros(1), requires_grad=True) if config.output_bias else None,
            )
        else:
            coder = CoderParams(
                embedding=None, conv_kernel=None, conv_bias=None,
                w_3=Tensor(np.zeros((d, 1)), requires_grad=True),
                b_3=Tensor(np.zeros(1), requires_grad=True) if config.output_bias else None,
                free_query=Tensor(_uniform_fan_in(rng, (config.n_y, d), d), requires_grad=True),
            )
        return cls(config, reader, coder, vocab_size, fingerprints)

    # -- parameter plumbing -------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {"reader.embedding": self.reader.embedding}
        for i, (kern, bias) in enumerate(zip(self.reader.conv_kernels, self.reader.conv_biases)):
            params[f"reader.conv{i}.kernel"] = kern
            params[f"reader.conv{i}.bias"] = bias
        for i, layer in enumerate(self.reader.layers):
            for name in ("w_q", "w_k", "w_v", "w_1", "w_2",
                         "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias"):
                params[f"reader.sam{i}.{name}"] = getattr(layer, name)
        if self.coder.embedding is not None:
            params["coder.embedding"] = self.coder.embedding
            params["coder.conv.kernel"] = self.coder.conv_kernel
            params["coder.conv.bias"] = self.coder.conv_bias
        if self.coder.free_query is not None:
            params["coder.free_query"] = self.coder.free_query
        params["coder.w_3"] = self.coder.w_3
        if self.coder.b_3 is not None:
            params["coder.b_3"] = self.coder.b_3
        return params

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(arrays)
        extra = set(arrays) - set(params)
        if missing or extra:
            raise ModelError(f"state mismatch (missing={sorted(missing)}, unexpected={sorted(extra)})")
        for name, p in params.items():
            if p.data.shape != arrays[name].shape:
                raise ModelError(f"shape mismatch for {name}: {p.data.shape} != {arrays[name].shape}")
            p.data[...] = arrays[name]

    def copy(self) -> "RacModel":
        clone = RacModel.init(self.config, self.vocab_size, Rng(0), fingerprints=dict(self.fingerprints))
        clone.load_state(self.state_arrays())
        return clone

    def zero_grads(self) -> None:
        N.zero_grads(self.named_parameters())

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        """Weights in the array container; config and fingerprints in a sidecar."""
        path = Path(path)
        N.save_arrays(path, self.state_arrays(), meta={"vocab_size": self.vocab_size})
        sidecar = {
            "config": self.config.to_dict(),
            "vocab_size": self.vocab_size,
            "fingerprints": self.fingerprints,
        }
        path.with_suffix(path.suffix + ".meta.json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path) -> "RacModel":
        path = Path(path)
        sidecar_path = path.with_suffix(path.suffix + ".meta.json")
        if not sidecar_path.exists():
            raise ModelError(f"missing sidecar {sidecar_path}")
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        config = RacConfig.from_dict(sidecar["config"])
        model = cls.init(config, sidecar["vocab_size"], Rng(0),
                         fingerprints=sidecar.get("fingerprints", {}))
        arrays, _ = N.load_arrays(path)
        model.load_state(arrays)
        return model


# ---------------------------------------------------------------------------
# forward passes


def convolved_embedding(token_ids: np.ndarray, reader: ReaderParams, config: RacConfig,
                        rng: Rng | None = None, train: bool = False) -> Tensor:
    """Token ids -> n_x x d embedding after the stacked tanh convolutions."""
    h = N.embedding_lookup(reader.embedding, np.asarray(token_ids))
    for kern, bias in zip(reader.conv_kernels, reader.conv_biases):
        h = N.tanh(N.conv1d(h, kern, bias))
    return N.dropout(h, config.dropout, rng, train)


def self_attention_layer(h: Tensor, layer: SamLayerParams, config: RacConfig,
                         rng: Rng | None = None, train: bool = False,
                         pad_mask: np.ndarray | None = None) -> Tensor:
    if h.ndim != 2 or h.shape[1] != config.d:
        raise ModelError(f"self_attention_layer expects (n_x, {config.d}), got {h.shape}")
    q = N.matmul(h, layer.w_q)
    k = N.matmul(h, layer.w_k)
    v = N.matmul(h, layer.w_v)
    scores = N.scale(N.matmul(q, N.transpose(k)), 1.0 / math.sqrt(config.d))
    if pad_mask is not None:
        scores = N.masked_fill(scores, np.broadcast_to(pad_mask, scores.shape), -1e30)
    context = N.matmul(N.softmax(scores), v)
    context = N.dropout(context, config.dropout, rng, train)
    attended = N.layer_norm(N.add(h, context), layer.ln1_gain, layer.ln1_bias)
    ff = N.matmul(N.relu(N.matmul(attended, layer.w_1)), layer.w_2)
    ff = N.dropout(ff, config.dropout, rng, train)
    return N.layer_norm(N.add(attended, ff), layer.ln2_gain, layer.ln2_bias)


def sam(e_x: Tensor, reader: ReaderParams, config: RacConfig,
        rng: Rng | None = None, train: bool = False,
        pad_mask: np.ndarray | None = None) -> Tensor:
    h = e_x
    for layer in reader.layers:
        h = self_attention_layer(h, layer, config, rng, train, pad_mask)
    return h


def code_title_embedding(title_matrix: TitleMatrix | np.ndarray, coder: CoderParams,
                         config: RacConfig) -> Tensor:
    """Title token ids (n_y x n_t) -> per-code query vectors (n_y x d)."""
    ids = title_matrix.ids if isinstance(title_matrix, TitleMatrix) else np.asarray(title_matrix)
    if ids.ndim != 2:
        raise ModelError(f"title matrix must be 2-d, got shape {ids.shape}")
    h = N.embedding_lookup(coder.embedding, ids)
    h = N.tanh(N.conv1d(h, coder.conv_kernel, coder.conv_bias))
    return N.global_max_pool(h)


def code_guided_attention(e_t: Tensor, u_x: Tensor, config: RacConfig,
                          pad_mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """Attend over positions with each code's query; returns (V_x, A)."""
    if e_t.ndim != 2 or u_x.ndim != 2 or e_t.shape[1] != u_x.shape[1]:
        raise ModelError(f"incompatible query/context shapes {e_t.shape} and {u_x.shape}")
    scores = N.scale(N.matmul(e_t, N.transpose(u_x)), 1.0 / math.sqrt(config.d))
    if pad_mask is not None:
        scores = N.masked_fill(scores, np.broadcast_to(pad_mask, scores.shape), -1e30)
    attention = N.softmax(scores)
    return N.matmul(attention, u_x), attention


def output_logits(v_x: Tensor, coder: CoderParams) -> Tensor:
    logits = N.reshape(N.matmul(v_x, coder.w_3), (v_x.shape[0],))
    if coder.b_3 is not None:
        logits = N.add(logits, coder.b_3)
    return logits


def queries(model: RacModel, title_matrix: TitleMatrix | np.ndarray) -> Tensor:
    if model.config.use_code_titles:
        return code_title_embedding(title_matrix, model.coder, model.config)
    return model.coder.free_query


def predict_from_embedding(e_x: Tensor, model: RacModel, e_t: Tensor,
                           rng: Rng | None = None, train: bool = False,
                           pad_mask: np.ndarray | None = None) -> Activations:
    """Run the pipeline from a precomputed position embedding matrix."""
    u_x = sam(e_x, model.reader, model.config, rng, train, pad_mask)
    v_x, attention = code_guided_attention(e_t, u_x, model.config, pad_mask)
    logits = output_logits(v_x, model.coder)
    return Activations(e_x=e_x, u_x=u_x, e_t=e_t, attention=attention,
                       v_x=v_x, logits=logits, y=N.sigmoid(logits))


def predict(token_ids: np.ndarray, title_matrix: TitleMatrix | np.ndarray, model: RacModel,
            rng: Rng | None = None, train: bool = False) -> Activations:
    """Full pipeline: ids -> convolved embedding -> attention stack -> code scores."""
    token_ids = np.asarray(token_ids)
    pad_mask = (token_ids == PAD) if model.config.mask_pad else None
    e_x = convolved_embedding(token_ids, model.reader, model.config, rng, train)
    e_t = queries(model, title_matrix)
    return predict_from_embedding(e_x, model, e_t, rng, train, pad_mask)


def score_documents(model: RacModel, examples, title_matrix: TitleMatrix | np.ndarray) -> np.ndarray:
    """Probability matrix (n_docs x n_y) for encoded examples, eval mode."""
    with N.no_grad():
        e_t = queries(model, title_matrix)
        rows = []
        for ex in examples:
            token_ids = np.asarray(ex.token_ids)
            pad_mask = (token_ids == PAD) if model.config.mask_pad else None
            e_x = convolved_embedding(token_ids, model.reader, model.config)
            acts = predict_from_embedding(e_x, model, e_t, pad_mask=pad_mask)
            rows.append(acts.y.data.copy())
    return np.stack(rows) if rows else np.zeros((0, model.config.n_y))
