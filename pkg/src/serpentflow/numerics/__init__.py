from .adam import AdamState, NonFiniteGradient, adam_step
from .gradcheck import finite_difference_check
from .io import read_tensor, write_tensor
from .rng import make_rng
from .tensor import (
    ShapeError,
    Tape,
    Tensor,
    add,
    avg_pool,
    backward,
    bce_with_logits,
    concat,
    conv,
    exp,
    linear,
    log,
    matmul,
    mse_loss,
    mul,
    no_grad,
    relu,
    sigmoid,
    silu,
    square,
    sub,
    tanh,
    tmean,
    tsum,
    upsample,
)
