"""Neural network kernel: autodiff tensor, layers, CRF, optimizers, checkpoints."""

from .crf import CrfParams, crf_log_likelihood, crf_log_partition, crf_path_score, crf_viterbi, init_crf
from .layers import (
    LstmDirectionParams,
    bilstm_forward,
    dense_forward,
    embedding_init,
    init_lstm_direction,
    lstm_forward,
    lstm_step,
    uniform_init,
)
from .optim import Adam, AdaGrad, BNG_EPSILON, bng_normalize, clip_gradients
from .params import (
    ParameterSet,
    average_checkpoints,
    checkpoint_bytes,
    checkpoint_from_bytes,
    load_checkpoint,
    save_checkpoint,
)
from .tensor import (
    Tensor,
    add,
    concat,
    cross_entropy,
    dropout,
    embedding,
    exp,
    gather_pairs,
    log,
    logsumexp,
    matmul,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    sum_,
    take,
    tanh,
)

__all__ = [
    "Adam",
    "AdaGrad",
    "BNG_EPSILON",
    "CrfParams",
    "LstmDirectionParams",
    "ParameterSet",
    "Tensor",
    "add",
    "average_checkpoints",
    "bilstm_forward",
    "bng_normalize",
    "checkpoint_bytes",
    "checkpoint_from_bytes",
    "clip_gradients",
    "concat",
    "crf_log_likelihood",
    "crf_log_partition",
    "crf_path_score",
    "crf_viterbi",
    "cross_entropy",
    "dense_forward",
    "dropout",
    "embedding",
    "embedding_init",
    "exp",
    "gather_pairs",
    "init_crf",
    "init_lstm_direction",
    "load_checkpoint",
    "log",
    "logsumexp",
    "lstm_forward",
    "lstm_step",
    "matmul",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "save_checkpoint",
    "sigmoid",
    "softmax",
    "softmax_cross_entropy",
    "sum_",
    "take",
    "tanh",
    "uniform_init",
]
