"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time. Set ``AFDC_NUMBA=0`` to force the
numpy path; the numba path is used whenever numba imports cleanly otherwise.
Data-movement kernels (im2col, pooling, point-in-polygon, vortex influence)
agree bit for bit across backends. Reductions (convolution, batch-norm
statistics) are free to reassociate and agree to rounding.
"""
import os

from . import _numpy as numpy_backend

_flag = os.environ.get("AFDC_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    from . import _numba as numba_backend
except ImportError:  # numba missing or broken
    numba_backend = None

BACKEND = "numba" if (_requested and numba_backend is not None) else "numpy"
_impl = numba_backend if BACKEND == "numba" else numpy_backend

im2col3x3 = _impl.im2col3x3
col2im3x3 = _impl.col2im3x3
maxpool2x2_fwd = _impl.maxpool2x2_fwd
maxpool2x2_bwd = _impl.maxpool2x2_bwd
points_in_polygon = _impl.points_in_polygon
vortex_influence = _impl.vortex_influence
conv3x3_fwd = _impl.conv3x3_fwd
conv3x3_bwd_input = _impl.conv3x3_bwd_input
conv3x3_bwd_weight = _impl.conv3x3_bwd_weight
batchnorm_train_fwd = _impl.batchnorm_train_fwd
batchnorm_train_bwd = _impl.batchnorm_train_bwd
relu_maxpool2x2_fwd = _impl.relu_maxpool2x2_fwd
relu_maxpool2x2_bwd = _impl.relu_maxpool2x2_bwd
conv3x3_maxpool_relu = _impl.conv3x3_maxpool_relu
conv3x3_maxpool_relu_masked = _impl.conv3x3_maxpool_relu_masked
uniform_pool_classes = _impl.uniform_pool_classes

__all__ = [
    "BACKEND",
    "numpy_backend",
    "numba_backend",
    "im2col3x3",
    "col2im3x3",
    "maxpool2x2_fwd",
    "maxpool2x2_bwd",
    "points_in_polygon",
    "vortex_influence",
    "conv3x3_fwd",
    "conv3x3_bwd_input",
    "conv3x3_bwd_weight",
    "batchnorm_train_fwd",
    "batchnorm_train_bwd",
    "relu_maxpool2x2_fwd",
    "relu_maxpool2x2_bwd",
    "conv3x3_maxpool_relu",
    "conv3x3_maxpool_relu_masked",
    "uniform_pool_classes",
]
