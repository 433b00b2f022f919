"""Multilinear discriminant analysis with the Einstein product.

Data tensors hold one sample per frontal slice: ``X`` has shape
``I_1 x ... x I_M x n``.  Scatter tensors live on the feature modes and have
shape ``I_1 x ... x I_M x I_1 x ... x I_M``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from tracemda import spectral
from tracemda import tensor_core as tc
from tracemda import trace_ratio as trm
from tracemda.exceptions import DimensionError, SingularSystemError
from tracemda.trace_ratio import SolverOptions, TRSolution


@dataclass
class LabeledDataset:
    """Samples along the last mode of ``X`` with integer labels in ``[0, c)``."""

    X: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.X = tc.as_tensor(self.X)
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ValueError("labels must be integers")
        self.labels = labels.astype(np.int64)
        if self.X.ndim < 2:
            raise DimensionError("data tensor needs at least one feature mode and a sample mode")
        if self.labels.shape[0] != self.X.shape[-1]:
            raise DimensionError(
                f"{self.labels.shape[0]} labels for {self.X.shape[-1]} samples"
            )
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be non-negative")

    @property
    def n(self) -> int:
        return self.X.shape[-1]

    @property
    def feature_shape(self) -> tuple:
        return self.X.shape[:-1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.n else 0

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[..., idx], self.labels[idx])


def _validate(X, labels):
    X = tc.as_tensor(X)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (X.shape[-1],):
        raise DimensionError(f"{labels.shape[0]} labels for {X.shape[-1]} samples")
    counts = np.bincount(labels)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"classes {empty} have no samples")
    return X, labels, counts


def _outer(Y):
    """``Y *_1 Y^T`` for a data-shaped tensor ``Y`` (features x n)."""
    return tc.einstein_product(Y, tc.transpose(Y, Y.ndim - 1), 1)


def center_data(X) -> np.ndarray:
    """Subtract the mean sample: ``X ×_{M+1} H`` with ``H = I - 11^T/n``."""
    X = tc.as_tensor(X)
    return X - X.mean(axis=-1, keepdims=True)


def class_means(X, labels) -> np.ndarray:
    """Class mean tensors stacked along a trailing mode (features x c)."""
    X, labels, counts = _validate(X, labels)
    means = np.stack(
        [X[..., labels == k].mean(axis=-1) for k in range(len(counts))], axis=-1
    )
    return means


def scatter_within(X, labels) -> np.ndarray:
    X, labels, _ = _validate(X, labels)
    means = class_means(X, labels)
    return _outer(X - means[..., labels])


def scatter_between(X, labels) -> np.ndarray:
    """Between-class scatter ``sum_i n_i (xi_i - xi) *_1 (xi_i - xi)^T``."""
    X, labels, counts = _validate(X, labels)
    D = class_means(X, labels) - X.mean(axis=-1, keepdims=True)
    return _outer(D * np.sqrt(counts))


def indicator_matrix(labels, n_classes: int | None = None) -> np.ndarray:
    """0/1 class-indicator matrix of shape ``c x n``."""
    labels = np.asarray(labels, dtype=np.int64)
    c = int(labels.max()) + 1 if n_classes is None else n_classes
    W = np.zeros((c, labels.size))
    W[labels, np.arange(labels.size)] = 1.0
    return W


def between_kernel(labels) -> np.ndarray:
    """``C_b = H W_b^T W_b H`` with ``W_b = (W W^T)^{-1/2} W``."""
    W = indicator_matrix(labels)
    n = W.shape[1]
    Wb = W / np.sqrt(W.sum(axis=1, keepdims=True))
    H = np.eye(n) - 1.0 / n
    return H @ Wb.T @ Wb @ H


def scatter_between_kernel(X, labels) -> np.ndarray:
    """Between-class scatter via ``X ×_{M+1} C_b *_1 X^T``."""
    X, labels, _ = _validate(X, labels)
    XC = tc.m_mode_product(X, between_kernel(labels), X.ndim - 1)
    return tc.einstein_product(XC, tc.transpose(X, X.ndim - 1), 1)


def scatter_total(X) -> np.ndarray:
    return _outer(center_data(X))


@dataclass
class ScatterSet:
    S_w: np.ndarray
    S_b: np.ndarray
    S_t: np.ndarray
    class_means: np.ndarray
    mean: np.ndarray


def scatters(dataset: LabeledDataset) -> ScatterSet:
    X, labels = dataset.X, dataset.labels
    return ScatterSet(
        S_w=scatter_within(X, labels),
        S_b=scatter_between(X, labels),
        S_t=scatter_total(X),
        class_means=class_means(X, labels),
        mean=X.mean(axis=-1),
    )


def label_response_matrix(labels) -> np.ndarray:
    """Centered label coding ``n x c``.

    Entry ``(i, j)`` is ``sqrt(n/n_j) - sqrt(n_j/n)`` if sample ``i`` is in
    class ``j`` and ``-sqrt(n_j/n)`` otherwise.  Columns sum to zero.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    counts = np.bincount(labels).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("every class needs at least one sample")
    Y = np.tile(-np.sqrt(counts / n), (n, 1))
    Y[np.arange(n), labels] += np.sqrt(n / counts[labels])
    return Y


def _denominator(S: ScatterSet, denominator: str):
    if denominator == "st":
        return S.S_t
    if denominator == "sw":
        return S.S_w
    raise ValueError(f"denominator must be 'st' or 'sw', got {denominator!r}")


def restrict_to_range(S_b, S_t, rtol: float = spectral.DEFINITE_RTOL):
    """Restrict a scatter pair to the range of the total scatter.

    Returns
    -------
    S_b_red, S_t_red : numpy.ndarray
        ``r x r`` matrices ``Z^T *_M S *_M Z``.
    Z : numpy.ndarray
        Orthonormal basis of ``range(S_t)`` with shape ``I_1 x ... x I_M x r``.
    """
    S_b = np.asarray(S_b, dtype=np.float64)
    S_t = np.asarray(S_t, dtype=np.float64)
    if S_b.shape != S_t.shape:
        raise DimensionError(f"scatter shapes differ: {S_b.shape} vs {S_t.shape}")
    es = spectral.eig_sym(S_t)
    top = es.eigenvalues[0]
    if top <= 0:
        raise ValueError("total scatter is zero; nothing to restrict to")
    keep = es.eigenvalues > rtol * top
    Z = es.eigentensors[..., keep]
    Sb_r = tc.sym(trm.projected(Z, S_b))
    St_r = tc.sym(trm.projected(Z, S_t))
    return Sb_r, St_r, Z


def mda_tr(
    dataset: LabeledDataset,
    d: int,
    opts: SolverOptions | None = None,
    denominator: str = "st",
    reduce: bool = False,
) -> TRSolution:
    """Trace-ratio discriminant projection.

    ``A = S_b`` and ``B`` is the chosen scatter (total by default) regularized
    per ``opts.eps``/``opts.reg_mode``.  With ``reduce=True`` the problem is
    first restricted to the range of ``S_t`` and the projection mapped back.
    """
    opts = opts or SolverOptions()
    S = scatters(dataset)
    denom = _denominator(S, denominator)
    if reduce:
        Sb, Sd, Z = restrict_to_range(S.S_b, S.S_t)
        if denominator == "sw":
            Sd = tc.sym(trm.projected(Z, S.S_w))
        sol = trm.solve_tr_newton(Sb, trm.regularize(Sd, opts.eps, opts.reg_mode), d, opts)
        sol.P = tc.einstein_product(Z, sol.P, 1)
        return sol
    B = trm.regularize(denom, opts.eps, opts.reg_mode)
    return trm.solve_tr_newton(tc.sym(S.S_b), tc.sym(B), d, opts)


def mda_rt(
    dataset: LabeledDataset,
    d: int,
    opts: SolverOptions | None = None,
    denominator: str = "st",
) -> np.ndarray:
    """Ratio-trace discriminant projection via the generalized eigenproblem."""
    opts = opts or SolverOptions()
    S = scatters(dataset)
    B = trm.regularize(_denominator(S, denominator), opts.eps, opts.reg_mode)
    return trm.solve_rt_gevp(tc.sym(S.S_b), tc.sym(B), d)


def ls_first_stage(X, labels, eps: float) -> np.ndarray:
    """Ridge solution ``P_1`` of ``min ||Xc^T *_M P - Y||^2 + eps ||P||^2``.

    ``P_1 = (Xc *_1 Xc^T + eps I)^{-1} *_M Xc ×_{M+1} Y^T`` with ``Xc`` the
    centered data and ``Y`` the centered label coding; shape features x c.
    The ``n x n`` form of the normal equations is used when ``n`` is smaller
    than the feature dimension.
    """
    X = center_data(X)
    Y = label_response_matrix(labels)
    Xm = tc.group_flatten(X, X.ndim - 1)
    D, n = Xm.shape
    try:
        if n < D:
            K = Xm.T @ Xm + eps * np.eye(n)
            P1 = Xm @ scipy.linalg.solve(K, Y, assume_a="pos")
        else:
            K = Xm @ Xm.T + eps * np.eye(D)
            P1 = scipy.linalg.solve(K, Xm @ Y, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError(
            f"least-squares normal equations are singular ({exc}); use eps > 0"
        ) from None
    if not np.all(np.isfinite(P1)):
        raise SingularSystemError("least-squares solution is not finite; use eps > 0")
    return P1.reshape(X.shape[:-1] + (Y.shape[1],))


def mda_ls(dataset: LabeledDataset, d: int, eps: float = 0.01) -> np.ndarray:
    """Two-stage least-squares discriminant projection.

    Stage one solves the ridge regression onto the label coding, stage two
    solves the small generalized eigenproblem of ``(S_b, S_t + eps I)``
    restricted to the span of the stage-one solution.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    X, labels = dataset.X, dataset.labels
    P1 = ls_first_stage(X, labels, eps)
    c = P1.shape[-1]
    if not 1 <= d <= c:
        raise ValueError(f"least-squares MDA supports 1 <= d <= {c} (number of classes), got {d}")
    Q = trm.orthonormalize(P1)
    S_b = scatter_between(X, labels)
    S_t = trm.regularize(scatter_total(X), eps)
    Sb_q = trm.projected(Q, S_b)
    St_q = trm.projected(Q, S_t)
    Sb_q, St_q = 0.5 * (Sb_q + Sb_q.T), 0.5 * (St_q + St_q.T)
    try:
        _, P2 = spectral.eigh_range(Sb_q, St_q, lo=c - d)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError(f"reduced eigenproblem failed ({exc}); use eps > 0") from None
    P = tc.m_mode_product(Q, P2[:, ::-1].T, Q.ndim - 1)
    return trm.orthonormalize(P)


def project(X, P) -> np.ndarray:
    """Project every sample: ``P^T *_M X^(j)``, stacked as ``d x n``."""
    X = np.asarray(X, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    m = P.ndim - 1
    if X.shape[:m] != P.shape[:m] or X.ndim != m + 1:
        raise DimensionError(f"projection {P.shape} does not match data {X.shape}")
    return tc.einstein_product(tc.transpose(P, m), X, m)
