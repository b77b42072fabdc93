"""Minimal numpy tensor toolkit: layers with explicit backward passes, LSTM, losses, Adam."""

from .gradcheck import finite_diff_grad, max_relative_error
from .layers import (
    avg_pool2d, avg_pool2d_backward, conv2d, conv2d_backward, conv_output_size,
    conv_transpose2d, conv_transpose2d_backward, dense, dense_backward, glorot_uniform,
    log_softmax, max_pool2d, max_pool2d_backward, relu, relu_backward, sigmoid,
    sigmoid_backward, softmax, tanh, tanh_backward, upsample2d, upsample2d_backward,
)
from .losses import LossValue, binary_cross_entropy, l2_loss, softmax_cross_entropy
from .lstm import GATES, init_lstm, lstm_backward, lstm_dims, lstm_forward, lstm_step, lstm_step_backward
from .optim import LayerParams, adam_step

__all__ = [
    "GATES", "LayerParams", "LossValue", "adam_step", "avg_pool2d", "avg_pool2d_backward",
    "binary_cross_entropy", "conv2d", "conv2d_backward", "conv_output_size", "conv_transpose2d",
    "conv_transpose2d_backward", "dense", "dense_backward", "finite_diff_grad", "glorot_uniform",
    "init_lstm", "l2_loss", "log_softmax", "lstm_backward", "lstm_dims", "lstm_forward",
    "lstm_step", "lstm_step_backward", "max_pool2d", "max_pool2d_backward", "max_relative_error",
    "relu", "relu_backward", "sigmoid", "sigmoid_backward", "softmax", "softmax_cross_entropy",
    "tanh", "tanh_backward", "upsample2d", "upsample2d_backward",
]
