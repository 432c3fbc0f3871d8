"""Dense float64 tensors.

The numeric substrate is a plain contiguous float64 ndarray. `as_tensor`
is the single entry point for data coming from outside the package: it
coerces dtype/layout and rejects NaN/Inf.
"""

import numpy as np

__all__ = ["Tensor", "as_tensor"]

Tensor = np.ndarray


class NonFiniteError(ValueError):
    """Raised when external data contains NaN or Inf."""


def as_tensor(data, allow_nonfinite: bool = False) -> np.ndarray:
    """Coerce `data` to a contiguous float64 array, rejecting NaN/Inf."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if not allow_nonfinite and not np.all(np.isfinite(arr)):
        raise NonFiniteError("tensor contains NaN or Inf")
    return arr
