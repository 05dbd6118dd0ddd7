"""Feed-forward training engine with multi-sample importance-weighted dropout."""

from ._iwsgd import (
    CapacityError,
    ConfigError,
    DegenerateLikelihoodError,
    DimensionError,
    NetworkParams,
    NetworkSpec,
    UnsupportedModeError,
    gradcheck,
    importance_weights,
    init_params,
    log_softmax,
    log_sum_exp,
    lsgd_exact,
    lsgd_inner,
    lsgd_mc,
    marginal_exact,
    matmul,
    mlp,
    philox4x64,
    predict_log_probs,
    train_run,
)

__all__ = [
    "CapacityError",
    "ConfigError",
    "DegenerateLikelihoodError",
    "DimensionError",
    "NetworkParams",
    "NetworkSpec",
    "UnsupportedModeError",
    "gradcheck",
    "importance_weights",
    "init_params",
    "log_softmax",
    "log_sum_exp",
    "lsgd_exact",
    "lsgd_inner",
    "lsgd_mc",
    "marginal_exact",
    "matmul",
    "mlp",
    "philox4x64",
    "predict_log_probs",
    "train_run",
]
