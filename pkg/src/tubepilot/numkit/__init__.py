from .tensor import Tensor, Tape, backward, no_tape
from . import ops
from .ops import (
    add, sub, mul, div, neg, matmul, transpose, reshape, concat,
    softmax, layer_norm, sigmoid, tanh, gelu, relu_mask,
    tsum, tmean, log, exp, tabs,
)
from .adam import AdamState, adam_step
from .gradcheck import grad_check, GradCheckReport
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Tensor", "Tape", "backward", "no_tape", "ops",
    "add", "sub", "mul", "div", "neg", "matmul", "transpose", "reshape",
    "concat", "softmax", "layer_norm", "sigmoid", "tanh", "gelu", "relu_mask",
    "tsum", "tmean", "log", "exp", "tabs",
    "AdamState", "adam_step",
    "grad_check", "GradCheckReport",
    "save_checkpoint", "load_checkpoint",
]
