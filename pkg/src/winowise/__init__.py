"""Tap-wise quantized Winograd convolution and an accelerator performance model."""
from .bitgrowth import BitBudget, bit_budget, bit_growth, exhaustive_bits
from .conv import direct_conv2d, winograd_conv2d
from .errors import (
    ConfigurationError,
    InfeasibleMappingError,
    ShapeError,
    TensorFormatError,
    UnsupportedParameterError,
    UnsupportedWorkloadError,
    WinowiseError,
)
from .kernels import BACKEND
from .prng import FixtureRNG
from .qerror import ErrorReport, pseudo_inverse, quant_error_report
from .quant import (
    CalibState,
    QuantParams,
    TapScaleMatrix,
    calibrate_update,
    dequantize,
    pow2_round,
    quantize,
    quantized_winograd_conv2d,
    scales_from_maxima,
    ste_grad_log2t,
)
from .tensor import DType, LayerShape, Layout, Tensor, fractal_to_nchw, nchw_to_fractal, read_tensor, write_tensor
from .transforms import TransformSet, input_transform, make_transform_set, output_transform, validate_transform_set, weight_transform

__version__ = "0.1.0"
