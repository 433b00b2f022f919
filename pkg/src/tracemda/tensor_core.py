"""Dense tensors and the Einstein-product algebra.

Tensors are plain :class:`numpy.ndarray` objects of ``float64``.  Storage is
C-ordered, so within any group of indices the first index varies slowest and
the last fastest.  The same convention is used by :func:`group_flatten`, which
makes flattening a pure ``reshape`` and turns every Einstein product into an
ordinary matrix product of the flattened operands.

A square even tensor of order ``2M`` is stored with its two index groups
concatenated: ``A.shape == group_shape + group_shape``.  A projection tensor
``P`` has shape ``group_shape + (d,)``.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from tracemda.exceptions import DimensionError, SymmetryError

SYMMETRY_RTOL = 1e-10


def as_tensor(A) -> np.ndarray:
    """Return ``A`` as a float64 array with every extent >= 1."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 0:
        raise DimensionError("a tensor needs at least one mode")
    if any(s < 1 for s in A.shape):
        raise DimensionError(f"all extents must be >= 1, got shape {A.shape}")
    return A


def half_order(A: np.ndarray) -> int:
    """Number of modes per index group of an even-order tensor."""
    if A.ndim % 2:
        raise DimensionError(f"expected an even-order tensor, got order {A.ndim}")
    return A.ndim // 2


def group_shape(A: np.ndarray) -> tuple:
    """Shape of the first index group of an even-order tensor."""
    return A.shape[: half_order(A)]


def is_square(A: np.ndarray) -> bool:
    """True when ``A`` is even and both index groups share their extents."""
    if A.ndim % 2:
        return False
    m = A.ndim // 2
    return A.shape[:m] == A.shape[m:]


def check_square(A: np.ndarray) -> int:
    """Raise unless ``A`` is square even; return the half order."""
    m = half_order(A)
    if A.shape[:m] != A.shape[m:]:
        raise DimensionError(
            f"expected a square tensor, index groups differ: {A.shape[:m]} vs {A.shape[m:]}"
        )
    return m


def einstein_product(A, B, n_contracted: int) -> np.ndarray:
    """Contract the trailing ``n_contracted`` modes of ``A`` with the leading ones of ``B``.

    Parameters
    ----------
    A : array_like
        Tensor of order ``M + n_contracted``.
    B : array_like
        Tensor of order ``n_contracted + P``.
    n_contracted : int
        Size of the shared index group (the ``N`` of ``*_N``).

    Returns
    -------
    numpy.ndarray
        Tensor of shape ``A.shape[:-n_contracted] + B.shape[n_contracted:]``.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n = int(n_contracted)
    if n < 1 or n > A.ndim or n > B.ndim:
        raise DimensionError(
            f"cannot contract {n} modes of tensors with shapes {A.shape} and {B.shape}"
        )
    if A.shape[A.ndim - n :] != B.shape[:n]:
        raise DimensionError(
            f"contracted extents differ: A{A.shape} trailing {A.shape[A.ndim - n:]} "
            f"vs B{B.shape} leading {B.shape[:n]}"
        )
    return np.tensordot(A, B, axes=n)


def m_mode_product(A, Z, mode: int) -> np.ndarray:
    """Multiply mode ``mode`` (0-based) of ``A`` by the matrix ``Z`` (``J x I_mode``)."""
    A = np.asarray(A, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise DimensionError(f"mode product needs a matrix, got shape {Z.shape}")
    if not 0 <= mode < A.ndim:
        raise DimensionError(f"mode {mode} out of range for order-{A.ndim} tensor")
    if Z.shape[1] != A.shape[mode]:
        raise DimensionError(
            f"mode {mode} has extent {A.shape[mode]} but matrix has {Z.shape[1]} columns"
        )
    return np.moveaxis(np.tensordot(Z, A, axes=(1, mode)), 0, mode)


def transpose(A, split: int | None = None) -> np.ndarray:
    """Swap the two index groups of ``A``.

    With ``split=None`` the tensor must have even order and the groups are its
    two halves.  An explicit ``split`` takes the first ``split`` modes as the
    left group, which is how projection tensors (``I_1..I_M x d``) are
    transposed.
    """
    A = np.asarray(A, dtype=np.float64)
    if split is None:
        split = half_order(A)
    if not 1 <= split < A.ndim:
        raise DimensionError(f"invalid split {split} for order-{A.ndim} tensor")
    return np.transpose(A, tuple(range(split, A.ndim)) + tuple(range(split)))


def sym(A) -> np.ndarray:
    """Symmetric part ``(A + A^T) / 2`` of a square even tensor."""
    A = np.asarray(A, dtype=np.float64)
    check_square(A)
    return 0.5 * (A + transpose(A))


def is_symmetric(A, rtol: float = SYMMETRY_RTOL) -> bool:
    A = np.asarray(A, dtype=np.float64)
    if not is_square(A):
        return False
    scale = np.linalg.norm(A)
    return bool(np.linalg.norm(A - transpose(A)) <= rtol * max(scale, np.finfo(float).tiny))


def check_symmetric(A, rtol: float = SYMMETRY_RTOL, name: str = "tensor") -> int:
    """Raise :class:`SymmetryError` unless ``A`` is square and symmetric."""
    A = np.asarray(A, dtype=np.float64)
    m = check_square(A)
    if not is_symmetric(A, rtol):
        err = np.linalg.norm(A - transpose(A)) / max(np.linalg.norm(A), np.finfo(float).tiny)
        raise SymmetryError(f"{name} is not symmetric (relative asymmetry {err:.3e})")
    return m


def identity_tensor(shape: Sequence[int]) -> np.ndarray:
    """Identity tensor of shape ``shape + shape``."""
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise DimensionError(f"invalid group shape {shape}")
    n = math.prod(shape)
    return np.eye(n).reshape(shape + shape)


def diagonal_tensor(values) -> np.ndarray:
    """Diagonal tensor whose repeated-index entries are ``values``.

    ``values`` is an array over one index group, e.g. shape ``(I_1, I_2)``
    gives a tensor of shape ``(I_1, I_2, I_1, I_2)``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 0:
        values = values.reshape(1)
    return np.diag(values.ravel()).reshape(values.shape + values.shape)


def trace(A) -> float:
    """Sum of the entries of a square even tensor with repeated indices."""
    A = np.asarray(A, dtype=np.float64)
    check_square(A)
    n = math.prod(group_shape(A))
    return float(np.trace(A.reshape(n, n)))


def inner_product(A, B) -> float:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DimensionError(f"inner product of mismatched shapes {A.shape} and {B.shape}")
    return float(np.dot(A.ravel(), B.ravel()))


def frobenius_norm(A) -> float:
    A = np.asarray(A, dtype=np.float64)
    return float(np.sqrt(inner_product(A, A)))


def group_flatten(A, split: int | None = None) -> np.ndarray:
    """Matrix whose rows index the first ``split`` modes and columns the rest.

    ``split`` defaults to half the order.  Because storage and flattening share
    one linearization this is a view, never a copy.
    """
    A = np.asarray(A, dtype=np.float64)
    if split is None:
        split = half_order(A)
    if not 0 <= split <= A.ndim:
        raise DimensionError(f"invalid split {split} for order-{A.ndim} tensor")
    rows = math.prod(A.shape[:split])
    return A.reshape(rows, -1)


def group_unflatten(M, row_shape: Sequence[int], col_shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`group_flatten`."""
    M = np.asarray(M, dtype=np.float64)
    row_shape, col_shape = tuple(row_shape), tuple(col_shape)
    if M.shape != (math.prod(row_shape), math.prod(col_shape)):
        raise DimensionError(
            f"matrix of shape {M.shape} cannot be unflattened to {row_shape} | {col_shape}"
        )
    return M.reshape(row_shape + col_shape)


def frontal_slice(A, i: int) -> np.ndarray:
    """Sub-tensor obtained by fixing the last index to ``i``."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim < 2:
        raise DimensionError("frontal slices need a tensor of order >= 2")
    if not 0 <= i < A.shape[-1]:
        raise IndexError(f"slice {i} out of range for last extent {A.shape[-1]}")
    return A[..., i]


def frontal_slices(A) -> list:
    A = np.asarray(A, dtype=np.float64)
    return [frontal_slice(A, i) for i in range(A.shape[-1])]


def stack_slices(slices: Sequence) -> np.ndarray:
    """Stack equally shaped tensors along a new last mode."""
    if len(slices) == 0:
        raise DimensionError("cannot stack an empty list of slices")
    try:
        return np.stack([np.asarray(s, dtype=np.float64) for s in slices], axis=-1)
    except ValueError as exc:
        raise DimensionError(str(exc)) from None
