"""Tensor arithmetic, reverse-mode autodiff, RNG and checkpoint I/O."""

from .checkpoint import CheckpointError, load_arrays, save_arrays
from .gradcheck import GradCheckReport, grad_check
from .rng import Rng
from .tensor import (
    NonFiniteError,
    NumericsError,
    ShapeError,
    Tensor,
    add,
    as_tensor,
    backward,
    bce_with_logits,
    conv1d,
    dropout,
    embedding_lookup,
    global_max_pool,
    grad_enabled,
    layer_norm,
    masked_fill,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    tanh,
    tensor_sum,
    transpose,
    zero_grads,
)

__all__ = [
    "CheckpointError",
    "GradCheckReport",
    "NonFiniteError",
    "NumericsError",
    "Rng",
    "ShapeError",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "bce_with_logits",
    "conv1d",
    "dropout",
    "embedding_lookup",
    "global_max_pool",
    "grad_check",
    "grad_enabled",
    "layer_norm",
    "load_arrays",
    "masked_fill",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "save_arrays",
    "scale",
    "sigmoid",
    "softmax",
    "tanh",
    "tensor_sum",
    "transpose",
    "zero_grads",
]
