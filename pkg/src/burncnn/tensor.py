"""Dense tensor type: an immutable, contiguous, row-major float array.

Training and inference run in float32. A float64 mode exists so that
gradient checking against finite differences can reach tight tolerances;
every primitive in :mod:`burncnn.ops` preserves the dtype of its inputs.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractViolation

FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """N-dimensional array of floats with immutable storage.

    The underlying buffer is frozen at construction; operations always
    allocate fresh outputs, so tensors are safe to share across threads.
    """

    __slots__ = ("_data",)

    def __init__(self, data, dtype=None):
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and \
                data.dtype in FLOAT_DTYPES else np.float32
        elif dtype not in FLOAT_DTYPES:
            raise ContractViolation(f"unsupported tensor dtype {dtype}")
        arr = np.array(data, dtype=dtype, order="C")
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        """Take ownership of a freshly allocated contiguous array (no copy)."""
        t = object.__new__(cls)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        t._data = arr
        return t

    @classmethod
    def zeros(cls, shape, dtype=np.float32) -> "Tensor":
        return cls._wrap(np.zeros(shape, dtype=dtype))

    @classmethod
    def full(cls, shape, value, dtype=np.float32) -> "Tensor":
        return cls._wrap(np.full(shape, value, dtype=dtype))

    @classmethod
    def from_flat(cls, shape, flat, dtype=np.float32) -> "Tensor":
        """Build a tensor from a flat row-major value sequence."""
        arr = np.asarray(flat, dtype=dtype)
        n = int(np.prod(shape)) if len(shape) else 1
        if arr.size != n:
            raise ContractViolation(
                f"flat data has {arr.size} elements, shape {tuple(shape)} needs {n}"
            )
        return cls._wrap(arr.reshape(shape).copy())

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def dtype(self):
        return self._data.dtype

    def reshape(self, *shape) -> "Tensor":
        """New view with identical element count; storage is shared."""
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            return Tensor._wrap(self._data.reshape(shape))
        except ValueError:
            raise ContractViolation(
                f"cannot reshape {self.shape} ({self.size} elements) to "
                f"{tuple(shape)}") from None

    def astype(self, dtype) -> "Tensor":
        if dtype not in FLOAT_DTYPES:
            raise ContractViolation(f"unsupported tensor dtype {dtype}")
        return Tensor._wrap(self._data.astype(dtype))

    def copy(self) -> "Tensor":
        return Tensor._wrap(self._data.copy())

    def tolist(self):
        return self._data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self._data.dtype.name})"
