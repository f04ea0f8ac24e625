"""Dense float32 tensors with reverse-mode gradients, plus the training kit
(parameter store, AdamW, checkpoints, finite-difference checking) used by
every learned stage of the pipeline."""

from .conv import conv2d_cl, conv3d, conv3d_cl, conv_transpose3d_cl
from .gradcheck import gradient_check
from .params import (ParameterStore, load_checkpoint, save_checkpoint,
                     sgd_adam_step)
from .sample import (bilinear_many, bilinear_sample, scatter_add_nc,
                     scatter_replace_rows)
from .tensor import (NumericalError, Tensor, add, concat, div, exp,
                     gather_rows, layer_norm, log, matmul, maximum, mean, mul,
                     no_grad, relu, reshape, set_debug_checks, sigmoid,
                     softmax, sqrt, square, sub, sum_, transpose)

__all__ = [
    "NumericalError", "ParameterStore", "Tensor",
    "add", "bilinear_many", "bilinear_sample", "concat", "conv2d_cl",
    "conv3d", "conv3d_cl", "conv_transpose3d_cl", "div", "exp",
    "gather_rows", "gradient_check", "layer_norm", "load_checkpoint", "log",
    "matmul", "maximum", "mean", "mul", "no_grad", "relu", "reshape",
    "save_checkpoint", "scatter_add_nc", "scatter_replace_rows",
    "set_debug_checks", "sgd_adam_step", "sigmoid", "softmax", "sqrt",
    "square", "sub", "sum_", "transpose",
]
