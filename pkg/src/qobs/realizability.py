"""Physical realizability of plants and the open-oscillator parametrization.

A plant in convention form (``D = [I 0]``) is physically realizable iff

    A Theta + Theta A^T + B diag(J) B^T = 0
    B D^T = Theta C^T diag(J)

(the first identity is the complex one divided by ``i``). For canonical
``Theta`` the Hamiltonian matrix ``R`` and coupling matrix ``Lambda`` can be
read back from ``(A, B)``; :func:`open_oscillator` goes the other way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PreconditionError, UnsupportedError
from .linalg import max_abs
from .model import (
    CommutationSpec,
    NoiseSpec,
    QuantumLinearSystem,
    convention_D,
    diag_j,
    make_canonical_theta,
)

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class RealizabilityReport:
    pr_residual_dyn: np.ndarray
    pr_residual_out: np.ndarray
    nondemolition_residual: np.ndarray
    is_realizable: bool
    tol: float
    R: np.ndarray | None = None
    Lambda: np.ndarray | None = None

    @property
    def max_dyn(self) -> float:
        return max_abs(self.pr_residual_dyn)

    @property
    def max_out(self) -> float:
        return max_abs(self.pr_residual_out)

    def to_dict(self) -> dict:
        d = {
            "is_realizable": self.is_realizable,
            "tol": self.tol,
            "max_residual_dyn": self.max_dyn,
            "max_residual_out": self.max_out,
            "max_residual_nondemolition": max_abs(self.nondemolition_residual),
            "pr_residual_dyn": self.pr_residual_dyn.tolist(),
            "pr_residual_out": self.pr_residual_out.tolist(),
            "nondemolition_residual": self.nondemolition_residual.tolist(),
        }
        if self.R is not None:
            d["R"] = self.R.tolist()
            d["Lambda"] = {"re": self.Lambda.real.tolist(), "im": self.Lambda.imag.tolist()}
        return d


def pr_residuals(sys: QuantumLinearSystem) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of both realizability identities, without precondition checks."""
    Th = sys.theta
    dyn = sys.A @ Th + Th @ sys.A.T + sys.B @ sys.noise.F_im @ sys.B.T
    out = sys.B @ sys.D.T - Th @ sys.C.T @ diag_j(sys.n_y // 2)
    return dyn, out


def check_plant_pr(sys: QuantumLinearSystem, tol: float = DEFAULT_TOL) -> RealizabilityReport:
    """Test the two realizability identities at max-abs tolerance ``tol``.

    For canonical ``Theta`` and a realizable plant, ``R`` and ``Lambda`` are
    extracted and attached to the report.

    Raises:
        PreconditionError: if ``D`` is not ``[I 0]`` or the noise is not in
            convention form.
    """
    if not sys.pr_form:
        raise PreconditionError("realizability test requires D = [I 0]")
    if not sys.noise.is_convention:
        raise PreconditionError("realizability test requires F_w = I + i diag(J)")
    dyn, out = pr_residuals(sys)
    ok = max_abs(dyn) <= tol and max_abs(out) <= tol
    R = Lam = None
    if ok and sys.comm.is_canonical:
        R, Lam = extract_hamiltonian_coupling(sys, check=False)
    return RealizabilityReport(
        pr_residual_dyn=dyn,
        pr_residual_out=out,
        nondemolition_residual=check_nondemolition(sys),
        is_realizable=bool(ok),
        tol=tol,
        R=R,
        Lambda=Lam,
    )


def check_nondemolition(sys: QuantumLinearSystem) -> np.ndarray:
    """Coefficient of ``i`` in ``i Theta C^T + B T_w D^T``.

    A zero residual means ``[x(t), y(s)^T] = 0`` for all ``t >= s``.
    """
    return sys.theta @ sys.C.T + sys.B @ sys.noise.F_im @ sys.D.T


# --------------------------------------------------------------------------
# open-oscillator parametrization
# --------------------------------------------------------------------------


def permutation_matrix(n: int) -> np.ndarray:
    """Square permutation taking ``(a1, a2, ..., a2m)`` to ``(a1, a3, ..., a2, a4, ...)``."""
    if n % 2:
        raise DimensionError(f"permutation needs an even size, got {n}")
    idx = list(range(0, n, 2)) + list(range(1, n, 2))
    P = np.zeros((n, n))
    P[np.arange(n), idx] = 1.0
    return P


_M = 0.5 * np.array([[1.0, 1.0j], [1.0, -1.0j]])


def gamma_matrix(n_w: int) -> np.ndarray:
    """``Gamma = P diag(M, ..., M)`` with ``M = [[1, i], [1, -i]] / 2``."""
    return permutation_matrix(n_w) @ np.kron(np.eye(n_w // 2), _M)


def extract_hamiltonian_coupling(sys: QuantumLinearSystem, check: bool = True):
    """Hamiltonian matrix ``R`` and coupling matrix ``Lambda`` of a canonical plant.

    Returns:
        tuple[np.ndarray, np.ndarray]: real symmetric ``R`` (n x n) and complex
        ``Lambda`` (n_w/2 x n).

    Raises:
        UnsupportedError: for degenerate canonical ``Theta``.
        PreconditionError: if ``check`` and the plant is not realizable.
    """
    if not sys.comm.is_canonical:
        raise UnsupportedError("R/Lambda extraction needs canonical Theta")
    if check and not check_plant_pr(sys).is_realizable:
        raise PreconditionError("plant is not physically realizable")
    Th = sys.theta
    R = 0.25 * (-Th @ sys.A + sys.A.T @ Th)
    m = sys.n_w // 2
    sel = np.hstack([np.zeros((m, m)), np.eye(m)])
    G_inv_T = np.linalg.inv(gamma_matrix(sys.n_w)).T
    Lam = -0.5j * sel @ G_inv_T @ sys.B.T @ Th
    return R, Lam


def oscillator_A(theta: np.ndarray, R: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    return 2.0 * theta @ (R + np.imag(Lam.conj().T @ Lam))


def oscillator_B(theta: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    n_w = 2 * Lam.shape[0]
    B = 2.0j * theta @ np.hstack([-Lam.conj().T, Lam.T]) @ gamma_matrix(n_w)
    return B.real


def oscillator_C(Lam: np.ndarray, n_y: int) -> np.ndarray:
    m = Lam.shape[0]
    Sig = np.hstack([np.eye(n_y // 2), np.zeros((n_y // 2, m - n_y // 2))])
    Z = np.zeros_like(Sig)
    stack = np.vstack([Lam + Lam.conj(), -1j * Lam + 1j * Lam.conj()])
    C = permutation_matrix(n_y).T @ np.block([[Sig, Z], [Z, Sig]]) @ stack
    return C.real


def open_oscillator(R, Lam, n_y: int) -> QuantumLinearSystem:
    """Plant matrices of the open oscillator with Hamiltonian ``R`` and coupling ``Lam``."""
    R = np.asarray(R, dtype=float)
    Lam = np.asarray(Lam, dtype=complex)
    n = R.shape[0]
    n_w = 2 * Lam.shape[0]
    if Lam.shape[1] != n:
        raise DimensionError(f"Lambda must have {n} columns, got {Lam.shape}")
    if n_y % 2 or not 0 < n_y <= n_w:
        raise DimensionError(f"need an even 0 < n_y <= n_w, got n_y={n_y}, n_w={n_w}")
    comm = make_canonical_theta(n)
    th = comm.theta
    return QuantumLinearSystem(
        A=oscillator_A(th, R, Lam),
        B=oscillator_B(th, Lam),
        C=oscillator_C(Lam, n_y),
        D=convention_D(n_y, n_w),
        comm=comm,
        noise=NoiseSpec(n_w),
    )


def random_pr_plant(rng: np.random.Generator, n: int, n_w: int, n_y: int,
                    scale: float = 1.0) -> QuantumLinearSystem:
    """Open oscillator with normal ``R`` (symmetrized) and complex normal ``Lambda``."""
    R = rng.normal(size=(n, n)) * scale
    R = 0.5 * (R + R.T)
    Lam = (rng.normal(size=(n_w // 2, n)) + 1j * rng.normal(size=(n_w // 2, n))) * scale
    return open_oscillator(R, Lam, n_y)


def pr_plant_from_coupling(comm: CommutationSpec, B, n_y: int, R=None,
                           A_classical=None, C_classical=None) -> QuantumLinearSystem:
    """Realizable plant with a prescribed noise coupling ``B``.

    Solves both identities for ``A`` and ``C`` given ``B``. On the quantum
    block ``A = 2 Theta_q R + (B diag(J) B^T)_qq Theta_q / 2``. For degenerate
    ``Theta`` the first ``n'`` columns of ``A`` (``A_classical``, shape
    ``n x n'``) and of ``C`` (``C_classical``, shape ``n_y x n'``) are free.

    Raises:
        DimensionError: if ``B`` violates the structure forced by a degenerate
            ``Theta`` (classical rows of ``B'`` and their skew form must vanish).
    """
    B = np.asarray(B, dtype=float)
    n, n_w = B.shape
    if comm.n != n:
        raise DimensionError(f"Theta is {comm.n}x{comm.n}, B has {n} rows")
    c = comm.n_prime
    q = slice(c, n)
    Th_q = comm.theta[q, q]
    W = B @ diag_j(n_w // 2) @ B.T
    Bp = B[:, :n_y]
    if c and (np.any(Bp[:c] != 0) or np.max(np.abs(W[:c, :c])) > 1e-12):
        raise DimensionError("classical rows of B' and of B diag(J) B^T must vanish")
    nq = n - c
    R = np.zeros((nq, nq)) if R is None else 0.5 * (np.asarray(R) + np.asarray(R).T)
    A = np.zeros((n, n))
    A[q, q] = 2.0 * Th_q @ R + 0.5 * W[q, q] @ Th_q
    C = np.zeros((n_y, n))
    C[:, q] = diag_j(n_y // 2) @ Bp[q].T @ Th_q
    if c:
        A[:c, q] = W[:c, q] @ Th_q
        if A_classical is not None:
            A[:, :c] = A_classical
        if C_classical is not None:
            C[:, :c] = C_classical
    return QuantumLinearSystem(A=A, B=B, C=C, D=convention_D(n_y, n_w), comm=comm,
                               noise=NoiseSpec(n_w))
