"""Eigen-decompositions of symmetric square even tensors.

Every solve goes through the group-flattening isomorphism: the tensor is
reshaped to a symmetric matrix, handed to LAPACK, and the eigenvectors are
reshaped back into eigen-tensors.  Eigen-tensors are returned stacked along a
trailing mode, i.e. with the same layout as a projection tensor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from tracemda import tensor_core as tc
from tracemda.exceptions import DefinitenessError, DimensionError

DEFINITE_RTOL = 1e-10


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (descending) and matching eigen-tensors.

    ``eigentensors[..., k]`` is the eigen-tensor of ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigentensors: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def group_shape(self) -> tuple:
        return self.eigentensors.shape[:-1]

    def reconstruct(self) -> np.ndarray:
        """``Q *_M D *_M Q^T`` for the stored pairs."""
        m = len(self.group_shape)
        QD = self.eigentensors * self.eigenvalues
        return tc.einstein_product(QD, tc.transpose(self.eigentensors, m), 1)

    def leading(self, d: int) -> "EigenSystem":
        return EigenSystem(self.eigenvalues[:d].copy(), self.eigentensors[..., :d].copy())


@dataclass(frozen=True)
class Pencil:
    """The symmetric pencil ``A - rho * B``."""

    A: np.ndarray
    B: np.ndarray
    rho: float = 0.0

    def __post_init__(self):
        if np.shape(self.A) != np.shape(self.B):
            raise DimensionError(
                f"pencil operands differ in shape: {np.shape(self.A)} vs {np.shape(self.B)}"
            )

    def evaluate(self) -> np.ndarray:
        return pencil_eval(self)


def pencil_eval(p: Pencil) -> np.ndarray:
    return np.asarray(p.A, dtype=np.float64) - p.rho * np.asarray(p.B, dtype=np.float64)


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns of ``V`` so each one's largest-magnitude entry is positive."""
    V = np.array(V, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _flat_symmetric(A, name="tensor", check=True):
    A = np.asarray(A, dtype=np.float64)
    if check:
        tc.check_symmetric(A, name=name)
    else:
        tc.check_square(A)
    shape = tc.group_shape(A)
    return tc.group_flatten(A), shape


def _pack(w, V, shape) -> EigenSystem:
    # LAPACK returns ascending order.
    order = np.arange(len(w))[::-1]
    w = w[order]
    V = fix_signs(V[:, order])
    return EigenSystem(w, V.reshape(shape + (V.shape[1],)))


def eigh_range(a, b=None, lo=0, hi=None, eigvals_only=False):
    """``scipy.linalg.eigh`` restricted to ascending indices ``lo..hi``.

    The subset driver (MRRR) can fail on large eigenvalue clusters, e.g. the
    many equal eigenvalues produced by constant pixels; the full
    divide-and-conquer solve is used as a fallback.
    """
    n = a.shape[0]
    hi = n - 1 if hi is None else hi
    try:
        return scipy.linalg.eigh(a, b, subset_by_index=(lo, hi), eigvals_only=eigvals_only)
    except np.linalg.LinAlgError:
        out = scipy.linalg.eigh(a, b, eigvals_only=eigvals_only, driver="evd" if b is None else "gvd")
    if eigvals_only:
        return out[lo : hi + 1]
    return out[0][lo : hi + 1], out[1][:, lo : hi + 1]


def eig_sym(A) -> EigenSystem:
    """Full spectral decomposition of a symmetric square even tensor."""
    Am, shape = _flat_symmetric(A)
    w, V = scipy.linalg.eigh(Am)
    return _pack(w, V, shape)


def top_d_eig(A, d: int, method: str = "dense", seed: int = 0) -> EigenSystem:
    """The ``d`` largest eigenpairs of a symmetric tensor.

    ``method="dense"`` slices a full LAPACK decomposition.  ``method="lanczos"``
    runs implicitly restarted Lanczos (ARPACK) on the flattened operator; it is
    only used when ``d`` is well below the dimension and falls back to the
    dense path otherwise.
    """
    Am, shape = _flat_symmetric(A)
    n = Am.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"d must lie in [1, {n}], got {d}")
    if method == "dense" or d >= n - 1:
        w, V = eigh_range(Am, lo=n - d)
    elif method == "lanczos":
        v0 = np.random.default_rng(seed).standard_normal(n)
        w, V = scipy.sparse.linalg.eigsh(Am, k=d, which="LA", v0=v0, tol=0)
        order = np.argsort(w)
        w, V = w[order], V[:, order]
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return _pack(w, V, shape)


def min_eigenvalue(A) -> float:
    Am, _ = _flat_symmetric(A)
    return float(eigh_range(Am, lo=0, hi=0, eigvals_only=True)[0])


def _definite_tol(A, tol):
    if tol is not None:
        return tol
    return DEFINITE_RTOL * tc.frobenius_norm(A)


def is_positive_definite(A, tol: float | None = None):
    """Return ``(verdict, min_eig)``; PD means ``min_eig > tol``.

    ``tol`` defaults to ``1e-10 * ||A||_F``.
    """
    lam = min_eigenvalue(A)
    return lam > _definite_tol(A, tol), lam


def is_psd(A, tol: float | None = None):
    """Return ``(verdict, min_eig)``; PSD means ``min_eig >= -tol``."""
    lam = min_eigenvalue(A)
    return lam >= -_definite_tol(A, tol), lam


def gevp(A, B, d: int | None = None) -> EigenSystem:
    """Symmetric-definite generalized eigenproblem ``A *_M Z = lambda B *_M Z``.

    Eigen-tensors are ``B``-orthonormal.  With ``d`` given only the ``d``
    largest pairs are returned.

    Raises
    ------
    DefinitenessError
        If ``B`` is not positive definite.
    """
    Am, shape = _flat_symmetric(A, "A")
    Bm, shape_b = _flat_symmetric(B, "B")
    if shape != shape_b:
        raise DimensionError(f"pair shapes differ: {shape} vs {shape_b}")
    pd, lam = is_positive_definite(B)
    if not pd:
        raise DefinitenessError(
            f"B is not positive definite (min eigenvalue {lam:.3e}); "
            "regularize it, e.g. B + eps*I",
            min_eig=lam,
        )
    n = Am.shape[0]
    if d is None:
        d = n
    if not 1 <= d <= n:
        raise ValueError(f"d must lie in [1, {n}], got {d}")
    w, V = eigh_range(Am, Bm, lo=n - d)
    return _pack(w, V, shape)


def null_space_dim(A, rtol: float = DEFINITE_RTOL) -> int:
    """Number of eigenvalues of a symmetric PSD tensor at most ``rtol * max|eig|``."""
    Am, _ = _flat_symmetric(A)
    w = scipy.linalg.eigh(Am, eigvals_only=True)
    scale = max(np.max(np.abs(w)), np.finfo(float).tiny)
    return int(np.sum(w <= rtol * scale))


def group_size(A) -> int:
    return math.prod(tc.group_shape(np.asarray(A)))
