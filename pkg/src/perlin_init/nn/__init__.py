from .init import DEFAULT_SPARSE_K, VARIANTS, InitScheme, init_params
from .layers import Conv, Dense, Flatten, MaxPool, ReLU, SoftmaxCrossEntropy, cross_entropy, softmax
from .network import (
    ARCHITECTURES,
    ForwardCache,
    NetworkSpec,
    ParamSet,
    backward,
    evaluate,
    forward,
    minicnn,
    mlp,
    predict,
)
from .optim import TrainConfig, sgd_step, train

__all__ = [
    "ARCHITECTURES",
    "DEFAULT_SPARSE_K",
    "VARIANTS",
    "Conv",
    "Dense",
    "Flatten",
    "ForwardCache",
    "InitScheme",
    "MaxPool",
    "NetworkSpec",
    "ParamSet",
    "ReLU",
    "SoftmaxCrossEntropy",
    "TrainConfig",
    "backward",
    "cross_entropy",
    "evaluate",
    "forward",
    "init_params",
    "minicnn",
    "mlp",
    "predict",
    "sgd_step",
    "softmax",
    "train",
]
