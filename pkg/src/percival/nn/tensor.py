"""Dense float32 tensor used for activations and network outputs.

Layout is channel-height-width with width fastest (row-major). Rank is 1-3;
convolution weights are plain [out, in, kh, kw] numpy arrays carried by the
layer specs, not Tensors.
"""

import numpy as np


class Tensor:
    """A contiguous float32 array of rank 1-3."""

    __slots__ = ("array",)

    def __init__(self, values, dims=None):
        arr = np.asarray(values, dtype=np.float32)
        if dims is not None:
            arr = arr.reshape(tuple(dims))
        if arr.ndim < 1 or arr.ndim > 3:
            raise ValueError(f"tensor rank must be 1-3, got {arr.ndim}")
        # A zero-size channel dim only arises as the identity of channel
        # concatenation; negative dims are impossible with numpy.
        self.array = np.ascontiguousarray(arr)

    @classmethod
    def zeros(cls, dims):
        return cls(np.zeros(tuple(dims), dtype=np.float32))

    @property
    def dims(self):
        return self.array.shape

    @property
    def data(self):
        """Flat row-major view of the values."""
        return self.array.reshape(-1)

    def __len__(self):
        return int(self.array.size)

    def __repr__(self):
        return f"Tensor(dims={self.array.shape})"
