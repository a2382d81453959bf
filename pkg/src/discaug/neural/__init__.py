"""From-scratch numpy neural primitives, networks, Adam and gradient checking."""

from .gradcheck import grad_check, numeric_grads, relative_error
from .layers import (
    AttentionParams,
    HeadParams,
    LstmParams,
    attention,
    bilstm_encode,
    classify_head,
    conv_maxpool,
    cross_entropy,
    dropout,
    lstm_cell,
    softmax,
)
from .nets import AttnBiLSTM, TextCNN, pad_batch
from .optim import AdamState, adam_step, clip_grad_norm

__all__ = [
    "AdamState", "AttentionParams", "AttnBiLSTM", "HeadParams", "LstmParams", "TextCNN",
    "adam_step", "attention", "bilstm_encode", "classify_head", "clip_grad_norm",
    "conv_maxpool", "cross_entropy", "dropout", "grad_check", "lstm_cell",
    "numeric_grads", "pad_batch", "relative_error", "softmax",
]
