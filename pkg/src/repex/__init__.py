"""Sequential design for noisy simulators: replicate or explore.

Heteroskedastic Gaussian-process surrogates in the unique-design
representation, a closed-form integrated prediction-error criterion with
gradients, and a replication-aware lookahead acquisition scheme, plus
stochastic-simulator testbeds and an experiment harness.
"""
from .kernels import KernelSpec, correlation, e_constant, kernel_grad, w_grad, w_integral, w_self_grad

__version__ = "0.1.0"

__all__ = [
    "KernelSpec", "correlation", "kernel_grad", "w_integral", "w_grad",
    "w_self_grad", "e_constant",
]
