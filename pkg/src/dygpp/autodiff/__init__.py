"""Dense float64 kernels with a reverse-mode tape, Adam and gradient checking."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import BlockReport, finite_difference_check, relative_error
from .ops import (NumericError, affine_backward, affine_forward, concat_cols, concat_rows,
                  dropout, dropout_backward, mean_pool_rows, relu, relu_backward, sigmoid,
                  sigmoid_bce)
from .params import AdamState, Parameter, ParameterStore, adam_step
from .tape import Tape, Var

__all__ = [
    "AdamState", "BlockReport", "CheckpointError", "NumericError", "Parameter", "ParameterStore",
    "Tape", "Var", "adam_step", "affine_backward", "affine_forward", "concat_cols", "concat_rows",
    "dropout", "dropout_backward", "finite_difference_check", "load_checkpoint", "mean_pool_rows",
    "relative_error", "relu", "relu_backward", "save_checkpoint", "sigmoid", "sigmoid_bce",
]
