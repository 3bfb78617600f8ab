import numpy as np


def frozen_array(values, dtype) -> np.ndarray:
    """Return a read-only copy of `values` as a contiguous array of `dtype`."""
    arr = np.array(values, dtype=dtype, copy=True, order="C")
    arr.setflags(write=False)
    return arr
