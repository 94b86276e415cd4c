"""Backend selection for the hot numeric kernels.

The environment variable ``IRLREC_BACKEND`` picks the implementation:

    IRLREC_BACKEND=numba   force the @njit kernels (error if numba missing)
    IRLREC_BACKEND=numpy   force the pure-numpy fallback
    unset / auto           numba when importable, numpy otherwise

``BACKEND`` records what was chosen. Both backends compute the same
formulas; results agree to floating-point roundoff, not bit-exactly, so
keep the flag constant across runs whose outputs you compare.
"""

import os

from . import _numpy_impl

_requested = os.environ.get("IRLREC_BACKEND", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"IRLREC_BACKEND must be auto, numba or numpy, got {_requested!r}")

if _requested == "numpy":
    _impl = _numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import _numba_impl as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise RuntimeError("IRLREC_BACKEND=numba but numba is not importable")
        _impl = _numpy_impl
        BACKEND = "numpy"

ACT_IDENTITY = _numpy_impl.ACT_IDENTITY
ACT_RELU = _numpy_impl.ACT_RELU
ACT_TANH = _numpy_impl.ACT_TANH
ACT_SIGMOID = _numpy_impl.ACT_SIGMOID

affine = _impl.affine
act = _impl.act
act_bwd = _impl.act_bwd
affine_bwd = _impl.affine_bwd
adam_update = _impl.adam_update
gae_scan = _impl.gae_scan
gauss_logprob = _impl.gauss_logprob
soft_blend = _impl.soft_blend
