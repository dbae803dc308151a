"""Small dense linear-algebra helpers."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .errors import InfeasibleAugmentation
from .model import J2, diag_j

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def max_abs(M) -> float:
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def is_hurwitz(M: np.ndarray) -> bool:
    """All eigenvalues strictly in the open left half-plane."""
    return bool(np.max(np.linalg.eigvals(M).real) < 0.0)


def spectral_abscissa(M: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(M).real))


def skew_canonical_form(S: np.ndarray, tol: float = 1e-12):
    """Orthogonal ``Q`` and block values ``mu`` with ``Q^T S Q = diag(mu_k J, 0)``.

    Uses the real Schur form, which for a normal (here skew) matrix is block
    diagonal. Blocks whose magnitude is below ``tol`` are reported as zero.

    Returns:
        tuple[np.ndarray, np.ndarray, np.ndarray]: ``Q``, the ``mu_k`` of the
        2x2 blocks, and the column indices of the remaining 1x1 zero blocks.
    """
    S = 0.5 * (S - S.T)
    n = S.shape[0]
    T, Q = linalg.schur(S, output="real")
    mus, pairs, zeros = [], [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > tol:
            mus.append(T[i, i + 1])
            pairs.append(i)
            i += 2
        else:
            zeros.append(i)
            i += 1
    cols = []
    for i in pairs:
        cols.extend([i, i + 1])
    cols.extend(zeros)
    return Q[:, cols], np.array(mus), np.arange(2 * len(pairs), n)


def factor_skew(W: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Real ``b`` with ``b diag(J) b^T = W`` for a real skew-symmetric ``W``.

    Each canonical block ``mu J`` becomes ``sqrt(mu) I_2`` when ``mu > 0``.
    For ``mu < 0`` the pair's columns are swapped, giving
    ``sqrt(|mu|) [[0, 1], [1, 0]]``. Zero blocks are dropped, so the result has
    ``2 * (number of non-zero blocks)`` columns.

    Raises:
        InfeasibleAugmentation: if neither orientation reproduces a block.
    """
    n = W.shape[0]
    if n == 2:
        mu = 0.5 * (W[0, 1] - W[1, 0])
        if abs(mu) <= tol:
            return np.zeros((2, 0))
        return np.sqrt(abs(mu)) * (np.eye(2) if mu > 0 else SWAP)
    Q, mus, _ = skew_canonical_form(W, tol)
    blocks = []
    for k, mu in enumerate(mus):
        if abs(mu) <= tol:
            continue
        for orient in (np.eye(2), SWAP):
            blk = np.sqrt(abs(mu)) * orient
            if np.allclose(blk @ J2 @ blk.T, mu * J2, atol=1e-12 * max(1.0, abs(mu))):
                break
        else:  # pragma: no cover - both orientations fail only on bad input
            raise InfeasibleAugmentation(f"block {k} with value {mu} admits no orientation")
        blocks.append(Q[:, 2 * k : 2 * k + 2] @ blk)
    if not blocks:
        return np.zeros((n, 0))
    return np.hstack(blocks)


def skew_form(b: np.ndarray) -> np.ndarray:
    """``b diag(J) b^T`` for ``b`` with an even number of columns."""
    if b.shape[1] == 0:
        return np.zeros((b.shape[0], b.shape[0]))
    return b @ diag_j(b.shape[1] // 2) @ b.T
