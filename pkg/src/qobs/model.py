"""Linear quantum stochastic systems in quadrature form.

A plant is described by

    dx = A x dt + B dw
    dy = C x dt + D dw

where the system variables satisfy ``[x_j, x_k] = 2i Theta_jk`` and the noise
has Ito table ``dw dw^T = F_w dt``. Complex matrices (``F_w``, ``T_w``) are kept
as a real part and an imaginary part so every realizability identity can be
written over the reals. For the conventions used here the real part of every
Ito matrix is the identity and the imaginary part is block-diagonal in ``J``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
J2.setflags(write=False)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def diag_j(m: int) -> np.ndarray:
    """Block-diagonal matrix with ``m`` copies of ``J`` (shape ``2m x 2m``)."""
    if m < 0:
        raise DimensionError(f"block count must be non-negative, got {m}")
    return np.kron(np.eye(m), J2)


def skew_block(n: int, n_classical: int) -> np.ndarray:
    """``diag(0_{n'}, diag_{(n-n')/2}(J))`` as a dense ``n x n`` array."""
    if not 0 <= n_classical <= n or (n - n_classical) % 2:
        raise DimensionError(
            f"need 0 <= n' <= n and n - n' even, got n={n}, n'={n_classical}"
        )
    out = np.zeros((n, n))
    out[n_classical:, n_classical:] = diag_j((n - n_classical) // 2)
    return out


class ThetaKind(str, enum.Enum):
    CANONICAL = "canonical"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CommutationSpec:
    """Commutation matrix ``Theta`` of the system variables.

    Build instances with :func:`make_canonical_theta` or
    :func:`make_degenerate_theta`; both produce an exactly antisymmetric matrix.
    """

    n: int
    kind: ThetaKind
    theta: np.ndarray
    n_prime: int = 0

    @property
    def is_canonical(self) -> bool:
        return self.kind is ThetaKind.CANONICAL

    def projector(self) -> np.ndarray:
        """``diag(0_{n'}, I_{n-n'})``, the projector onto the quantum block."""
        p = np.eye(self.n)
        p[: self.n_prime, : self.n_prime] = 0.0
        return p

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is ThetaKind.DEGENERATE:
            d["n_prime"] = self.n_prime
        return d


def make_canonical_theta(n: int) -> CommutationSpec:
    """Canonical commutation matrix ``diag_{n/2}(J)``.

    Raises:
        DimensionError: if ``n`` is odd or not positive.
    """
    if n < 2 or n % 2:
        raise DimensionError(f"canonical Theta needs an even n >= 2, got {n}")
    return CommutationSpec(n=n, kind=ThetaKind.CANONICAL, theta=_frozen(diag_j(n // 2)))


def make_degenerate_theta(n: int, n_prime: int) -> CommutationSpec:
    """Degenerate canonical ``diag(0_{n'}, diag_{(n-n')/2}(J))``.

    Raises:
        DimensionError: unless ``0 < n' <= n`` and ``n - n'`` is even.
    """
    if not 0 < n_prime <= n or (n - n_prime) % 2:
        raise DimensionError(
            f"degenerate Theta needs 0 < n' <= n and n - n' even, got n={n}, n'={n_prime}"
        )
    return CommutationSpec(
        n=n,
        kind=ThetaKind.DEGENERATE,
        theta=_frozen(skew_block(n, n_prime)),
        n_prime=n_prime,
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Ito table of the driving noise, ``F_w = I + i diag(0_{n'}, diag(J))``.

    ``n_classical = 0`` is the quantum convention form (all noise channels come
    in conjugate pairs); ``n_classical = n_w`` is purely classical noise.
    """

    n_w: int
    n_classical: int = 0

    def __post_init__(self):
        if self.n_w < 1:
            raise DimensionError(f"noise dimension must be positive, got {self.n_w}")
        if not 0 <= self.n_classical <= self.n_w or (self.n_w - self.n_classical) % 2:
            raise DimensionError(
                f"n_w - n_classical must be even and non-negative "
                f"(n_w={self.n_w}, n_classical={self.n_classical})"
            )

    @property
    def is_convention(self) -> bool:
        return self.n_classical == 0

    @property
    def F_re(self) -> np.ndarray:
        return np.eye(self.n_w)

    @property
    def F_im(self) -> np.ndarray:
        return skew_block(self.n_w, self.n_classical)

    @property
    def F_w(self) -> np.ndarray:
        return self.F_re + 1j * self.F_im

    @property
    def T_w(self) -> np.ndarray:
        """Commutator part ``(F_w - F_w^T) / 2``."""
        return 1j * self.F_im


@dataclass(frozen=True)
class OutputNoiseAlgebra:
    """Ito table of the output, ``F_y = D F_w D^T`` split into real/imag parts."""

    F_re: np.ndarray
    F_im: np.ndarray

    @property
    def F_y(self) -> np.ndarray:
        return self.F_re + 1j * self.F_im

    @property
    def T_y(self) -> np.ndarray:
        return 1j * self.F_im


@dataclass(frozen=True)
class QuantumLinearSystem:
    """Plant matrices together with their commutation and noise structure."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    comm: CommutationSpec
    noise: NoiseSpec = field(default=None)

    def __post_init__(self):
        for name in "ABCD":
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {self.B.shape}")
        n_w = self.B.shape[1]
        if self.C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {self.C.shape}")
        n_y = self.C.shape[0]
        if self.D.shape != (n_y, n_w):
            raise DimensionError(f"D must be {n_y}x{n_w}, got {self.D.shape}")
        if self.comm.n != n:
            raise DimensionError(f"Theta is {self.comm.n}x{self.comm.n} but n={n}")
        if self.noise is None:
            object.__setattr__(self, "noise", NoiseSpec(n_w))
        if self.noise.n_w != n_w:
            raise DimensionError(f"noise spec has n_w={self.noise.n_w}, B has {n_w} columns")
        if n_w < n_y:
            raise DimensionError(f"need n_w >= n_y, got n_w={n_w}, n_y={n_y}")
        if self.noise.is_convention and n_y % 2:
            raise DimensionError(f"n_y must be even for quantum noise, got {n_y}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_w(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return self.comm.theta

    @property
    def pr_form(self) -> bool:
        """True when ``D = [I 0]`` bit-exactly."""
        ref = np.zeros((self.n_y, self.n_w))
        ref[:, : self.n_y] = np.eye(self.n_y)
        return bool(np.array_equal(self.D, ref))

    @property
    def B_prime(self) -> np.ndarray:
        """First ``n_y`` columns of ``B``."""
        return self.B[:, : self.n_y]

    @property
    def B_dprime(self) -> np.ndarray:
        """Remaining ``n_w - n_y`` columns of ``B``."""
        return self.B[:, self.n_y :]

    def replace(self, **changes) -> "QuantumLinearSystem":
        kw = dict(A=self.A, B=self.B, C=self.C, D=self.D, comm=self.comm, noise=self.noise)
        kw.update(changes)
        return QuantumLinearSystem(**kw)


def convention_D(n_y: int, n_w: int) -> np.ndarray:
    """``[I_{n_y} 0]``."""
    D = np.zeros((n_y, n_w))
    D[:, :n_y] = np.eye(n_y)
    return D


def output_noise_algebra(sys: QuantumLinearSystem) -> OutputNoiseAlgebra:
    """``F_y = D F_w D^T`` and ``T_y = D T_w D^T``."""
    D = sys.D
    return OutputNoiseAlgebra(
        F_re=D @ sys.noise.F_re @ D.T,
        F_im=D @ sys.noise.F_im @ D.T,
    )


def output_commutation_growth(sys: QuantumLinearSystem, s: float) -> np.ndarray:
    """Coefficient of ``i`` in ``[y(t), y(s)^T] = 2 D T_w D^T s`` for ``t >= s``.

    Raises:
        DomainError: if ``s`` is negative.
    """
    if s < 0:
        raise DomainError(f"time must be non-negative, got {s}")
    return 2.0 * s * (sys.D @ sys.noise.F_im @ sys.D.T)
