from .checkpoint import MAGIC, CheckpointError, load_checkpoint, save_checkpoint
from .optim import Adam, AdamState, MissingGradientError
from .tensor import (
    ShapeError,
    Tensor,
    add,
    as_tensor,
    backward,
    binary_cross_entropy_with_logits,
    cross_entropy,
    dropout,
    embedding,
    gelu,
    getitem,
    layer_norm,
    linear,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    sub,
    sum,
    transpose,
)
