"""Minimal dense-tensor layer library with reverse-mode gradients."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import (
    autodiff_grad,
    compare_grads,
    finite_difference_grad,
    relative_error,
    run_suite,
)
from .ops import (
    SAME,
    VALID,
    add,
    conv1d,
    cosine_distance,
    dense,
    div,
    entropy,
    exp,
    gru_sequence,
    gru_step,
    log,
    lrelu,
    matmul,
    maxpool1d,
    mean,
    mse,
    mul,
    onehot_cross_entropy,
    reshape,
    sigmoid,
    soft_cross_entropy,
    softmax,
    sqrt,
    sub,
    take,
    tanh,
    tsum,
)
from .optim import sgd_momentum_step
from .params import ParamStore
from .tensor import Parameter, Tensor, as_tensor, no_grad

__all__ = [
    "SAME",
    "VALID",
    "ParamStore",
    "Parameter",
    "Tensor",
    "add",
    "as_tensor",
    "autodiff_grad",
    "compare_grads",
    "conv1d",
    "cosine_distance",
    "dense",
    "div",
    "entropy",
    "exp",
    "finite_difference_grad",
    "gru_sequence",
    "gru_step",
    "load_checkpoint",
    "log",
    "lrelu",
    "matmul",
    "maxpool1d",
    "mean",
    "mse",
    "mul",
    "no_grad",
    "onehot_cross_entropy",
    "relative_error",
    "reshape",
    "run_suite",
    "save_checkpoint",
    "sgd_momentum_step",
    "sigmoid",
    "soft_cross_entropy",
    "softmax",
    "sqrt",
    "sub",
    "take",
    "tanh",
    "tsum",
]
