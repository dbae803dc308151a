"""Joint plant/estimator moment propagation.

Stacking ``z = (x, x^)`` gives a linear system driven by the plant noise and,
for a coherent observer, by extra vacuum channels:

    dz = A_joint z dt + B_joint (dw, dv)

The symmetrized covariance of ``z`` obeys a Lyapunov equation whose noise
term uses only the real part of the Ito matrix, which is the identity for
every channel here. The error covariance ``E Sigma E^T`` with ``E = [I -I]``
is then an independent check on the Riccati solution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .filtering import optimal_gain
from .integrate import rk4_step
from .linalg import max_abs, symmetrize
from .model import QuantumLinearSystem, diag_j

SYMMETRY_TOL = 1e-9
PSD_FLOOR = -1e-9


@dataclass(frozen=True)
class JointMomentState:
    """Mean and symmetrized covariance of ``z = (x, x^)``."""

    mean: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        Sigma = np.asarray(self.Sigma, dtype=float)
        m = mean.shape[0]
        if mean.ndim != 1 or m % 2 or Sigma.shape != (m, m):
            raise DimensionError(f"mean {mean.shape} and Sigma {Sigma.shape} do not match a 2n state")
        if max_abs(Sigma - Sigma.T) > SYMMETRY_TOL:
            raise DomainError("Sigma must be symmetric")
        if np.min(np.linalg.eigvalsh(symmetrize(Sigma))) < PSD_FLOOR:
            raise DomainError("Sigma must be positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "Sigma", Sigma)

    @property
    def n(self) -> int:
        return self.mean.shape[0] // 2

    @classmethod
    def from_error_covariance(cls, P0, mean_x=None, mean_xhat=None) -> "JointMomentState":
        """Plant covariance ``P0``, deterministic estimator, no cross-covariance."""
        P0 = np.asarray(P0, dtype=float)
        n = P0.shape[0]
        Sigma = np.zeros((2 * n, 2 * n))
        Sigma[:n, :n] = P0
        mx = np.zeros(n) if mean_x is None else np.asarray(mean_x, dtype=float)
        mh = np.zeros(n) if mean_xhat is None else np.asarray(mean_xhat, dtype=float)
        return cls(np.concatenate([mx, mh]), Sigma)


def assemble_joint(sys: QuantumLinearSystem, K, b=None):
    """``A_joint = [[A, 0], [K C, A - K C]]`` and ``B_joint = [[B, 0], [K D, b]]``.

    Args:
        K: estimator gain, ``n x n_y``.
        b: optional vacuum coupling, ``n x n_v``.

    Returns:
        tuple[np.ndarray, np.ndarray]
    """
    K = np.asarray(K, dtype=float)
    n = sys.n
    if K.shape != (n, sys.n_y):
        raise DimensionError(f"K must be {n}x{sys.n_y}, got {K.shape}")
    b = np.zeros((n, 0)) if b is None else np.asarray(b, dtype=float)
    if b.shape[0] != n:
        raise DimensionError(f"b must have {n} rows, got {b.shape}")
    KC = K @ sys.C
    A_joint = np.block([[sys.A, np.zeros((n, n))], [KC, sys.A - KC]])
    B_joint = np.block([[sys.B, np.zeros((n, b.shape[1]))], [K @ sys.D, b]])
    return A_joint, B_joint


def optimal_joint(sys: QuantumLinearSystem, b=None):
    """Joint matrices as a function of ``Sigma``, gain re-evaluated from ``E Sigma E^T``.

    Returns:
        callable: ``joint(t, Sigma) -> (A_joint, B_joint)`` for :func:`propagate_moments`.
    """
    n = sys.n
    K0 = optimal_gain(sys, np.zeros((n, n)))
    A0, B0 = assemble_joint(sys, K0, b)
    Winv = np.linalg.inv(sys.D @ sys.D.T)
    CtW = sys.C.T @ Winv
    C, D, A = sys.C, sys.D, sys.A
    n_w = sys.n_w

    def joint(t, Sigma):
        K = K0 + error_covariance(Sigma, n) @ CtW
        Aj, Bj = A0.copy(), B0.copy()
        KC = K @ C
        Aj[n:, :n] = KC
        Aj[n:, n:] = A - KC
        Bj[n:, :n_w] = K @ D
        return Aj, Bj

    return joint


def error_covariance(Sigma: np.ndarray, n: int) -> np.ndarray:
    E = np.hstack([np.eye(n), -np.eye(n)])
    return E @ Sigma @ E.T


def commutation_drift(A_joint: np.ndarray, B_joint: np.ndarray, theta_z: np.ndarray) -> np.ndarray:
    """Rate of change of the commutation matrix of ``z``.

    Zero when ``theta_z`` is preserved by the joint dynamics, e.g. for a
    realizable plant with a realizable (coherent) observer and
    ``theta_z = diag(Theta, Theta)``.
    """
    m = B_joint.shape[1]
    if m % 2:
        raise DimensionError("joint noise dimension must be even")
    Jn = diag_j(m // 2) if m else np.zeros((0, 0))
    return A_joint @ theta_z + theta_z @ A_joint.T + B_joint @ Jn @ B_joint.T


@dataclass(frozen=True)
class MomentTrajectory:
    times: np.ndarray
    means: np.ndarray
    Sigmas: np.ndarray

    @property
    def n(self) -> int:
        return self.means.shape[1] // 2

    def state(self, k: int) -> JointMomentState:
        return JointMomentState(self.means[k], self.Sigmas[k])

    def error_covariances(self) -> np.ndarray:
        n = self.n
        E = np.hstack([np.eye(n), -np.eye(n)])
        return np.einsum("ij,tjk,lk->til", E, self.Sigmas, E)

    def write_csv(self, fh, extra_columns: dict | None = None) -> None:
        """``t``, mean components, upper triangle of ``Sigma``, error-covariance trace.

        ``extra_columns`` maps header names to per-row value arrays appended last.
        """
        n2 = self.means.shape[1]
        iu = np.triu_indices(n2)
        header = ["t"] + [f"m_{i}" for i in range(n2)]
        header += [f"S_{i}{j}" for i, j in zip(*iu)] + ["trace_err"]
        extra = extra_columns or {}
        header += list(extra)
        traces = np.trace(self.error_covariances(), axis1=1, axis2=2)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, t in enumerate(self.times):
            row = [t, *self.means[k], *self.Sigmas[k][iu], traces[k]]
            row += [col[k] for col in extra.values()]
            w.writerow([repr(float(v)) for v in row])


def propagate_moments(A_joint, B_joint, state0: JointMomentState, horizon: float,
                      dt: float = 1e-2, record_every: int = 1) -> MomentTrajectory:
    """Integrate the mean and symmetrized covariance of the joint state with RK4.

    Args:
        A_joint: constant ``2n x 2n`` array, or a callable ``joint(t, Sigma)``
            returning ``(A_joint, B_joint)`` (pass ``B_joint=None`` then). The
            callable form allows a gain driven by the current error covariance.
        B_joint: constant ``2n x m`` array.
        state0: initial mean and covariance.
        horizon: final time.
        dt: RK4 step.
        record_every: keep every k-th step (first and last always kept).
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if callable(A_joint):
        joint = A_joint
    else:
        mats = (np.asarray(A_joint, dtype=float), np.asarray(B_joint, dtype=float))
        joint = lambda t, S: mats  # noqa: E731
    m = state0.mean.shape[0]
    n_steps = int(round(horizon / dt))

    # pack mean and covariance into one (m, m + 1) array so one RK4 step moves both
    def f(t, Y):
        mu, S = Y[:, 0], Y[:, 1:]
        A, B = joint(t, S)
        out = np.empty_like(Y)
        out[:, 0] = A @ mu
        out[:, 1:] = A @ S + S @ A.T + B @ B.T
        return out

    Y = np.hstack([state0.mean[:, None], state0.Sigma])
    ts, means, Sigmas = [0.0], [Y[:, 0].copy()], [Y[:, 1:].copy()]
    for k in range(1, n_steps + 1):
        Y = rk4_step(f, (k - 1) * dt, Y, dt)
        Y[:, 1:] = symmetrize(Y[:, 1:])
        if k % record_every == 0 or k == n_steps:
            ts.append(k * dt)
            means.append(Y[:, 0].copy())
            Sigmas.append(Y[:, 1:].copy())
    if Y.shape[0] != m:  # pragma: no cover - shape is preserved by construction
        raise DimensionError("state dimension changed during integration")
    return MomentTrajectory(np.array(ts), np.array(means), np.array(Sigmas))


def extract_error_covariance(traj: MomentTrajectory, t: float) -> np.ndarray:
    """Covariance of ``e = x - x^`` at time ``t``, linearly interpolated between samples.

    Raises:
        DomainError: if ``t`` lies outside the trajectory.
    """
    ts = traj.times
    span = ts[-1] - ts[0]
    slack = 1e-12 * max(1.0, span)
    if not ts[0] - slack <= t <= ts[-1] + slack:
        raise DomainError(f"t={t} outside [{ts[0]}, {ts[-1]}]")
    k = int(np.clip(np.searchsorted(ts, t), 1, len(ts) - 1)) if len(ts) > 1 else 0
    if len(ts) == 1:
        S = traj.Sigmas[0]
    else:
        t0, t1 = ts[k - 1], ts[k]
        w = 0.0 if t1 == t0 else min(max((t - t0) / (t1 - t0), 0.0), 1.0)
        S = (1 - w) * traj.Sigmas[k - 1] + w * traj.Sigmas[k]
    return error_covariance(S, traj.n)
