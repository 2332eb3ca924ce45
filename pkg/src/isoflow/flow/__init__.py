from .layers import (
    ActNorm,
    AdditiveCoupling,
    ConvCouplingNet,
    DenseCouplingNet,
    Permutation,
    make_coupling_net,
)
from .model import FlowModel, flow_forward, flow_inverse, grad_nll, nll, transform
from .serialize import load_model, save_model
from .train import ArchConfig, TrainConfig, TrainResult, train

__all__ = [
    "ActNorm",
    "AdditiveCoupling",
    "ArchConfig",
    "ConvCouplingNet",
    "DenseCouplingNet",
    "FlowModel",
    "Permutation",
    "TrainConfig",
    "TrainResult",
    "flow_forward",
    "flow_inverse",
    "grad_nll",
    "load_model",
    "make_coupling_net",
    "nll",
    "save_model",
    "train",
    "transform",
]
