from src.kernels.expr import Binding, KernelExpr, Product, Sum, Transform
from src.kernels.leaves import SDOF, SE, Poly2, Sigmoid, SigmoidNeg, sdof_covariance, sigmoid
from src.kernels.linalg import jittered_cholesky, logdet_from_cholesky
from src.kernels.ops import (
    default_params,
    eval_kernel,
    kernel_diag,
    kernel_grad,
    kernel_value_and_grad,
    map_leaves,
    standardize_inputs,
    switches,
)
from src.kernels.params import ParamEntry, ParamTransform, ParamVector, positive, real

__all__ = [
    "Binding",
    "KernelExpr",
    "ParamEntry",
    "ParamTransform",
    "ParamVector",
    "Poly2",
    "Product",
    "SDOF",
    "SE",
    "Sigmoid",
    "SigmoidNeg",
    "Sum",
    "Transform",
    "default_params",
    "eval_kernel",
    "jittered_cholesky",
    "kernel_diag",
    "kernel_grad",
    "kernel_value_and_grad",
    "logdet_from_cholesky",
    "map_leaves",
    "positive",
    "real",
    "sdof_covariance",
    "sigmoid",
    "standardize_inputs",
    "switches",
]
