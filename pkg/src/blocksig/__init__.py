"""Block-averaged expected signatures of stationary fractional OU paths."""

from .fou import FouParams, autocovariance, autocov_derivative, theory_exponents, optimal_allocation
from .ground_truth import GroundTruth, ground_truth, shuffle_consistency
from .signature import PiecewiseLinearPath, signature_of_path
from .simulate import SimSpec, StationarySampler, sample_stationary_path
from .tensor import TruncatedTensor, enumerate_words, hs_norm, shuffle, tensor_mul

__version__ = "0.1.0"

__all__ = [
    "FouParams", "GroundTruth", "PiecewiseLinearPath", "SimSpec", "StationarySampler",
    "TruncatedTensor", "autocov_derivative", "autocovariance", "enumerate_words",
    "ground_truth", "hs_norm", "optimal_allocation", "sample_stationary_path", "shuffle",
    "shuffle_consistency", "signature_of_path", "tensor_mul", "theory_exponents",
]
