"""Trace-ratio and ratio-trace problems over projection tensors.

The trace-ratio problem maximizes

    J(P) = Tr(P^T *_M A *_M P) / Tr(P^T *_M B *_M P)

over projection tensors ``P`` of shape ``I_1 x ... x I_M x d`` with
``P^T *_M P = I_d``.  :func:`solve_tr_newton` finds the root of

    f(rho) = max_P Tr(P^T *_M (A - rho B) *_M P)
           = sum of the d largest eigenvalues of A - rho B

by Newton's method, where the Newton step collapses to ``rho <- J(P(rho))``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from tracemda import spectral
from tracemda import tensor_core as tc
from tracemda.exceptions import (
    DefinitenessError,
    DegenerateDenominatorError,
    DimensionError,
)

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-10
TIE_RTOL = 1e-12


@dataclass
class SolverOptions:
    """Knobs shared by the iterative solver and the MDA front-ends.

    ``eps`` and ``reg_mode`` are consumed by the MDA front-ends, which
    regularize the denominator scatter before calling a solver; the solvers
    themselves take ``(A, B)`` as given.
    """

    max_iter: int = 100
    tol: float = 1e-9
    seed: int = 0
    init: np.ndarray | None = None
    eps: float = 0.01
    reg_mode: str = "shift"
    eigensolver: str = "dense"
    check_null_space: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")


class IterationRecord(NamedTuple):
    rho: float
    f: float
    f_prime: float


@dataclass
class TRSolution:
    rho_star: float
    P: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    tie: bool = False

    @property
    def rhos(self) -> np.ndarray:
        return np.array([h.rho for h in self.history])


class PencilValue(NamedTuple):
    f: float
    f_prime: float
    P: np.ndarray


def _flat_P(P):
    P = np.asarray(P, dtype=np.float64)
    return tc.group_flatten(P, P.ndim - 1)


def orthonormalize(P) -> np.ndarray:
    """Orthonormal projection tensor spanning the same space as the slices of ``P``.

    Reduced QR of the flattened form; the leading ``k`` slices of the result
    span the leading ``k`` slices of the input for every ``k``.
    """
    P = np.asarray(P, dtype=np.float64)
    Q, R = np.linalg.qr(_flat_P(P))
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return (Q * s).reshape(P.shape)


def is_unitary(P, tol: float = UNITARY_TOL) -> bool:
    Pm = _flat_P(P)
    return bool(np.max(np.abs(Pm.T @ Pm - np.eye(Pm.shape[1]))) <= tol)


def random_projection(shape, d: int, rng) -> np.ndarray:
    """Seeded random orthonormal projection tensor of shape ``shape + (d,)``."""
    shape = tuple(shape)
    G = rng.standard_normal((math.prod(shape), d))
    return orthonormalize(G.reshape(shape + (d,)))


def _check_pair(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DimensionError(f"A and B differ in shape: {A.shape} vs {B.shape}")
    tc.check_symmetric(A, name="A")
    tc.check_symmetric(B, name="B")
    return A, B


def projected(P, A) -> np.ndarray:
    """``P^T *_M A *_M P`` as a ``d x d`` matrix."""
    P = np.asarray(P, dtype=np.float64)
    m = P.ndim - 1
    return tc.einstein_product(tc.einstein_product(tc.transpose(P, m), A, m), P, m)


def trace_ratio_objective(P, A, B, tol: float = 0.0) -> float:
    """``Tr(P^T A P) / Tr(P^T B P)``.

    Raises
    ------
    DegenerateDenominatorError
        When the denominator trace is ``<= tol``.
    """
    P = np.asarray(P, dtype=np.float64)
    m = P.ndim - 1
    if P.shape[:m] != tc.group_shape(np.asarray(A)):
        raise DimensionError(f"projection shape {P.shape} does not match operator {np.shape(A)}")
    num = np.trace(projected(P, A))
    den = np.trace(projected(P, B))
    if den <= tol:
        raise DegenerateDenominatorError(f"denominator trace {den:.3e} is not positive")
    return float(num / den)


def _ratio_flat(Pm, Am, Bm):
    den = np.einsum("ij,ij->", Pm, Bm @ Pm)
    if den <= 0:
        raise DegenerateDenominatorError(f"denominator trace {den:.3e} is not positive")
    return float(np.einsum("ij,ij->", Pm, Am @ Pm) / den)


def _pencil_top(Am, Bm, rho, d, method, seed):
    n = Am.shape[0]
    G = Am - rho * Bm
    G = 0.5 * (G + G.T)
    k = min(d + 1, n)
    if method == "lanczos" and k < n - 1:
        es = spectral.top_d_eig(G.reshape(n, n), k, method="lanczos", seed=seed)
        w, V = es.eigenvalues, es.eigentensors
    else:
        w, V = spectral.eigh_range(G, lo=n - k)
        w, V = w[::-1], spectral.fix_signs(V[:, ::-1])
    tie = k > d and (w[d - 1] - w[d]) <= TIE_RTOL * max(1.0, np.max(np.abs(w)))
    return w[:d], V[:, :d], bool(tie)


def f_eval(A, B, rho: float, d: int) -> PencilValue:
    """Value, derivative and maximizer of ``f`` at ``rho``.

    ``f(rho)`` is the sum of the ``d`` largest eigenvalues of ``A - rho B``
    and ``f'(rho) = -Tr(P^T B P)`` at the maximizing ``P``.
    """
    A, B = _check_pair(A, B)
    shape = tc.group_shape(A)
    Am, Bm = tc.group_flatten(A), tc.group_flatten(B)
    if not 1 <= d <= Am.shape[0]:
        raise ValueError(f"d must lie in [1, {Am.shape[0]}], got {d}")
    w, V, _ = _pencil_top(Am, Bm, rho, d, "dense", 0)
    fp = -float(np.einsum("ij,ij->", V, Bm @ V))
    return PencilValue(float(np.sum(w)), fp, V.reshape(shape + (d,)))


def solve_tr_newton(A, B, d: int, opts: SolverOptions | None = None) -> TRSolution:
    """Maximize the trace ratio by Newton iteration on ``f``.

    Parameters
    ----------
    A : array_like
        Symmetric square even tensor (numerator).
    B : array_like
        Symmetric PSD tensor (denominator) with ``dim N(B) < d``.
    d : int
        Number of projection slices.
    opts : SolverOptions, optional

    Returns
    -------
    TRSolution
        ``converged`` is False when ``max_iter`` ran out; the history is kept
        either way.
    """
    opts = opts or SolverOptions()
    A, B = _check_pair(A, B)
    shape = tc.group_shape(A)
    Am, Bm = tc.group_flatten(A), tc.group_flatten(B)
    n = Am.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"d must lie in [1, {n}], got {d}")

    wB = scipy.linalg.eigh(Bm, eigvals_only=True)
    tolB = spectral.DEFINITE_RTOL * max(np.linalg.norm(Bm), np.finfo(float).tiny)
    if wB[0] < -tolB:
        raise DefinitenessError(
            f"B is indefinite (min eigenvalue {wB[0]:.3e})", min_eig=float(wB[0])
        )
    nullity = int(np.sum(wB <= tolB))
    if opts.check_null_space and nullity >= d:
        raise DefinitenessError(
            f"B has a {nullity}-dimensional null space, need fewer than d={d}; "
            "regularize B or raise d",
            min_eig=float(wB[0]),
        )

    if opts.init is not None:
        P0 = np.asarray(opts.init, dtype=np.float64)
        if P0.shape != shape + (d,):
            raise DimensionError(f"initial projection has shape {P0.shape}, expected {shape + (d,)}")
        Pm = _flat_P(orthonormalize(P0))
    else:
        Pm = _flat_P(random_projection(shape, d, np.random.default_rng(opts.seed)))

    rho = _ratio_flat(Pm, Am, Bm)
    history = []
    converged = False
    tie = False
    for _ in range(opts.max_iter):
        w, V, tie = _pencil_top(Am, Bm, rho, d, opts.eigensolver, opts.seed)
        f = float(np.sum(w))
        fp = -float(np.einsum("ij,ij->", V, Bm @ V))
        history.append(IterationRecord(rho, f, fp))
        Pm = V
        if abs(f) <= opts.tol:
            converged = True
            break
        if fp >= 0:
            raise DegenerateDenominatorError(
                f"denominator trace vanished for the maximizer at rho={rho:.6g}"
            )
        # Newton step; equals rho - f/f' but is computed as a ratio for accuracy.
        rho_next = _ratio_flat(V, Am, Bm)
        if rho_next <= rho:
            # Monotone ascent stalled at rounding level.
            converged = True
            break
        step = rho_next - rho
        rho = rho_next
        if step <= opts.tol * max(1.0, abs(rho)):
            w, V, tie = _pencil_top(Am, Bm, rho, d, opts.eigensolver, opts.seed)
            fp = -float(np.einsum("ij,ij->", V, Bm @ V))
            history.append(IterationRecord(rho, float(np.sum(w)), fp))
            Pm = V
            converged = True
            break
    # Report the ratio attained by the returned projection; at a converged
    # iterate this is one free Newton step beyond the last evaluated rho.
    rho = max(rho, _ratio_flat(Pm, Am, Bm))
    if not converged:
        logger.warning("trace-ratio Newton did not converge in %d iterations", opts.max_iter)
    if tie:
        logger.info("eigenvalue tie at the cut d=%d; maximizer is not unique", d)
    return TRSolution(
        rho_star=float(rho),
        P=Pm.reshape(shape + (d,)),
        iterations=len(history),
        converged=converged,
        history=history,
        tie=tie,
    )


def solve_rt_gevp(A, B, d: int) -> np.ndarray:
    """Ratio-trace solution: orthonormal basis of the top-``d`` generalized eigen-tensors.

    The ratio-trace objective is invariant under any invertible change of
    basis of the slices, so the ``B``-orthonormal eigen-tensors are
    orthonormalized to give a unitary projection tensor with the same span.
    """
    A, B = _check_pair(A, B)
    try:
        es = spectral.gevp(A, B, d)
    except DefinitenessError as exc:
        raise DefinitenessError(
            f"{exc}; the ratio-trace problem needs a positive definite denominator",
            min_eig=exc.min_eig,
        ) from None
    return orthonormalize(es.eigentensors)


def regularize(B, eps: float, mode: str = "shift") -> np.ndarray:
    """Regularize a symmetric PSD tensor.

    ``mode`` is one of

    * ``"shift"``: ``B + eps I``
    * ``"scale"``: ``eps B + I``
    * ``"convex"``: ``eps B + (1 - eps) I`` with ``eps`` in ``[0, 1]``
    """
    B = np.asarray(B, dtype=np.float64)
    tc.check_square(B)
    I = tc.identity_tensor(tc.group_shape(B))
    if eps < 0:
        raise ValueError(f"regularization parameter must be >= 0, got {eps}")
    if mode == "shift":
        return B + eps * I
    if mode == "scale":
        return eps * B + I
    if mode == "convex":
        if eps > 1:
            raise ValueError(f"convex weight must lie in [0, 1], got {eps}")
        return eps * B + (1.0 - eps) * I
    raise ValueError(f"unknown regularization mode {mode!r}")


def whiten_constraint(A, B, C):
    """Reduce the constraint ``P^T C P = I`` to ``Q^T Q = I``.

    Returns ``(A_hat, B_hat, factor)`` with ``factor = C^{-1/2}`` and
    ``A_hat = factor *_M A *_M factor^T`` (same for ``B``).  A solution ``Q``
    of the whitened problem maps back through :func:`unwhiten`.
    """
    A, B = _check_pair(A, B)
    C = np.asarray(C, dtype=np.float64)
    if C.shape != A.shape:
        raise DimensionError(f"C has shape {C.shape}, expected {A.shape}")
    es = spectral.eig_sym(C)
    lam = es.eigenvalues
    if lam[-1] <= spectral.DEFINITE_RTOL * tc.frobenius_norm(C):
        raise DefinitenessError(f"C is not positive definite (min eigenvalue {lam[-1]:.3e})", lam[-1])
    Qm = _flat_P(es.eigentensors)
    F = (Qm / np.sqrt(lam)) @ Qm.T
    F = 0.5 * (F + F.T)
    shape = tc.group_shape(A)
    factor = F.reshape(shape + shape)
    m = len(shape)

    def conj(X):
        return tc.einstein_product(tc.einstein_product(factor, X, m), tc.transpose(factor), m)

    return tc.sym(conj(A)), tc.sym(conj(B)), factor


def unwhiten(Q, factor) -> np.ndarray:
    """Map a solution of the whitened problem back: ``P = factor^T *_M Q``."""
    factor = np.asarray(factor, dtype=np.float64)
    return tc.einstein_product(tc.transpose(factor), Q, tc.half_order(factor))
