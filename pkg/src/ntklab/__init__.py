"""Numerical laboratory for momentum training of two-layer ReLU networks:
kernel Gram matrices, spectral analysis of the residual dynamics, and
empirical verification of the predicted convergence envelopes."""

from . import data, dynamics, experiments, linalg, metrics, network, ntk, optimizers
from .data import Dataset, load_csv, save_csv, synthetic
from .ntk import HyperParams, LambdaConvention, Method, SpectrumSummary

__all__ = [
    "Dataset", "HyperParams", "LambdaConvention", "Method", "SpectrumSummary",
    "data", "dynamics", "experiments", "linalg", "metrics", "network",
    "ntk", "optimizers", "load_csv", "save_csv", "synthetic",
]

__version__ = "0.1.0"
