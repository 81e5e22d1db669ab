"""Dense tensors, (generalized) tensor and Kronecker products, matricization.

Tensors are numpy ``float64`` arrays in C order, so the flat layout is
row-major with the last index fastest.  Indices quoted from the decomposition
formulas are 1-based; :func:`offset_of` and :func:`index_of` convert between
1-based multi-indices and 0-based flat offsets.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .operators import PoolOperator, get_operator

DEFAULT_MAX_ELEMENTS = 10**7

GTEN_MAGIC = b"GTEN1"


class TensorSizeError(ValueError):
    """Raised when a tensor allocation would exceed the element-count guard."""


class OddOrderError(ValueError):
    """Raised when matricizing a tensor of odd order."""


def check_size(n_elements: int, max_elements: int | None = None) -> None:
    limit = DEFAULT_MAX_ELEMENTS if max_elements is None else max_elements
    if n_elements > limit:
        raise TensorSizeError(
            f"tensor with {n_elements} elements exceeds the size guard of {limit}"
        )


def as_tensor(a, max_elements: int | None = None) -> np.ndarray:
    """Validate and convert ``a`` to a float64 tensor (order >= 1, dims >= 1)."""
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"every dimension must be >= 1, got shape {arr.shape}")
    check_size(arr.size, max_elements)
    return arr


def as_matrix(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got array of order {arr.ndim}")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"every dimension must be >= 1, got shape {arr.shape}")
    return arr


def offset_of(index: Sequence[int], shape: Sequence[int]) -> int:
    """Flat row-major offset of the 1-based multi-index ``index``."""
    if len(index) != len(shape):
        raise ValueError("index length must match tensor order")
    offset = 0
    for d, m in zip(index, shape):
        if not 1 <= d <= m:
            raise IndexError(f"index {tuple(index)} out of range for shape {tuple(shape)}")
        offset = offset * m + (d - 1)
    return offset


def index_of(offset: int, shape: Sequence[int]) -> tuple[int, ...]:
    """Inverse of :func:`offset_of`."""
    return tuple(int(i) + 1 for i in np.unravel_index(offset, tuple(shape)))


def tensor_product(a, b, max_elements: int | None = None) -> np.ndarray:
    """Standard tensor product; shape is the concatenation of the input shapes."""
    return generalized_tensor_product(a, b, PoolOperator.PRODUCT, max_elements)


def generalized_tensor_product(a, b, g, max_elements: int | None = None) -> np.ndarray:
    """Tensor product with multiplication replaced by the operator ``g``."""
    g = get_operator(g)
    a = as_tensor(a)
    b = as_tensor(b)
    check_size(a.size * b.size, max_elements)
    out = g(a.reshape(a.shape + (1,) * b.ndim), b.reshape((1,) * a.ndim + b.shape))
    return np.ascontiguousarray(out, dtype=np.float64)


def fold_g(values: Iterable[float], g) -> float:
    """Combine all ``values`` with ``g``; a single value is returned unchanged."""
    g = get_operator(g)
    values = list(values)
    if not values:
        raise ValueError("fold_g needs at least one value")
    acc = float(values[0])
    for v in values[1:]:
        acc = float(g(acc, float(v)))
    return acc


def fold_g_axis(values: np.ndarray, g, axis: int = -1) -> np.ndarray:
    """Vectorized :func:`fold_g` along ``axis`` (left to right)."""
    g = get_operator(g)
    values = np.moveaxis(np.asarray(values, dtype=np.float64), axis, -1)
    if values.shape[-1] == 0:
        raise ValueError("fold_g needs at least one value")
    acc = values[..., 0]
    for k in range(1, values.shape[-1]):
        acc = g(acc, values[..., k])
    return np.asarray(acc, dtype=np.float64)


def matricize(a) -> np.ndarray:
    """Arrange an even-order tensor as a matrix: odd modes -> rows, even -> columns.

    With 1-based indices, entry ``(d_1, ..., d_N)`` lands in row
    ``1 + sum_i (d_{2i-1} - 1) * prod_{j>i} M_{2j-1}`` and the analogous column
    over the even modes.
    """
    a = as_tensor(a)
    if a.ndim % 2:
        raise OddOrderError(f"matricization requires even order, got order {a.ndim}")
    odd = list(range(0, a.ndim, 2))
    even = list(range(1, a.ndim, 2))
    rows = int(np.prod([a.shape[i] for i in odd]))
    cols = int(np.prod([a.shape[i] for i in even]))
    return np.ascontiguousarray(a.transpose(odd + even).reshape(rows, cols))


def kronecker(a, b) -> np.ndarray:
    return generalized_kronecker(a, b, PoolOperator.PRODUCT)


def generalized_kronecker(a, b, g) -> np.ndarray:
    """Kronecker product holding ``g(A_ij, B_kl)`` at row ``(i-1)N1+k``, col ``(j-1)N2+l``."""
    g = get_operator(g)
    a = as_matrix(a)
    b = as_matrix(b)
    (m1, m2), (n1, n2) = a.shape, b.shape
    out = g(a[:, None, :, None], b[None, :, None, :])
    return np.ascontiguousarray(out.reshape(m1 * n1, m2 * n2), dtype=np.float64)


def permute_modes(a, perm: Sequence[int]) -> np.ndarray:
    """Reorder modes so that result mode ``k`` is mode ``perm[k]`` of ``a`` (0-based).

    Entry ``(d_perm[0], ..., d_perm[N-1])`` of the result equals entry
    ``(d_0, ..., d_{N-1})`` of ``a``.
    """
    a = as_tensor(a)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(a.ndim)):
        raise ValueError(f"{perm} is not a permutation of {a.ndim} modes")
    return np.ascontiguousarray(a.transpose(perm))


def inverse_permutation(perm: Sequence[int]) -> list[int]:
    return [int(i) for i in np.argsort(perm)]


def write_gten(path, a) -> None:
    """Write a tensor in the GTEN1 binary format."""
    Path(path).write_bytes(dumps_gten(a))


def dumps_gten(a) -> bytes:
    a = as_tensor(a)
    header = GTEN_MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + a.astype("<f8").tobytes(order="C")


def read_gten(path) -> np.ndarray:
    return loads_gten(Path(path).read_bytes())


def loads_gten(buf: bytes) -> np.ndarray:
    if buf[:5] != GTEN_MAGIC:
        raise ValueError("not a GTEN1 file (bad magic)")
    (order,) = struct.unpack_from("<I", buf, 5)
    if order < 1:
        raise ValueError("GTEN1 order must be >= 1")
    shape = struct.unpack_from(f"<{order}I", buf, 9)
    start = 9 + 4 * order
    count = int(np.prod(shape))
    if len(buf) != start + 8 * count:
        raise ValueError(
            f"GTEN1 payload has {len(buf) - start} bytes, expected {8 * count}"
        )
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=start)
    return data.astype(np.float64).reshape(shape)
