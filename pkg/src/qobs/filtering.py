"""Linear least-mean-squares estimator synthesis.

The estimator ``dx^ = A x^ dt + K (dy - C x^ dt)`` has symmetrized error
covariance obeying

    P' = (A - K C) P + P (A - K C)^T + (B - K D)(B - K D)^T.

The trace of ``P`` is minimized pointwise by ``K = (B D^T + P C^T)(D D^T)^-1``.
Substituting that gain gives a constant-coefficient Riccati flow

    P' = F P + P F^T - P G P + Q,
    F = A - B D^T W^-1 C,  G = C^T W^-1 C,  Q = B B^T - B D^T W^-1 D B^T,

with ``W = D D^T``. For ``D = [I 0]`` this is ``F = A - B'C``, ``G = C^T C``,
``Q = B'' B''^T``.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SynthesisError
from .integrate import (
    STEP_HALVING_TOL,
    riccati_flow,
    rk4_integrate,
    rk4_step,
)
from .linalg import is_hurwitz, max_abs, symmetrize
from .model import (
    NoiseSpec,
    QuantumLinearSystem,
    make_degenerate_theta,
    output_noise_algebra,
)
from .realizability import check_plant_pr

log = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 2000.0
DEFAULT_TOL = 1e-10
SUSTAIN_STEPS = 100
NON_UNIQUE_TOL = 1e-6
SYMMETRY_TOL = 1e-9
STEP_CHECK_WINDOW = 10.0


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    NON_CONVERGENT = "non_convergent"
    NON_UNIQUE = "non_unique"


def _gain_weight(sys: QuantumLinearSystem) -> np.ndarray:
    W = sys.D @ sys.D.T
    if np.linalg.cond(W) > 1e12:
        raise SynthesisError("D D^T is singular; the gain is undefined")
    return np.linalg.inv(W)


def optimal_gain(sys: QuantumLinearSystem, P: np.ndarray) -> np.ndarray:
    """``K = (B D^T + P C^T)(D D^T)^-1``.

    Raises:
        SynthesisError: if ``D D^T`` is singular.
    """
    return (sys.B @ sys.D.T + P @ sys.C.T) @ _gain_weight(sys)


def riccati_coefficients(sys: QuantumLinearSystem, extra_noise=None):
    """``(F, G, Q)`` of the gain-substituted flow; ``extra_noise`` is added to ``Q``."""
    Wi = _gain_weight(sys)
    S = sys.B @ sys.D.T
    F = sys.A - S @ Wi @ sys.C
    G = sys.C.T @ Wi @ sys.C
    Q = sys.B @ sys.B.T - S @ Wi @ S.T
    if extra_noise is not None:
        Q = Q + extra_noise
    return F, G, symmetrize(Q)


def riccati_rhs(sys: QuantumLinearSystem, P: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Right-hand side of the error-covariance equation for a given gain."""
    Acl = sys.A - K @ sys.C
    Bcl = sys.B - K @ sys.D
    return Acl @ P + P @ Acl.T + Bcl @ Bcl.T


def substituted_rhs(sys: QuantumLinearSystem, P: np.ndarray, extra_noise=None) -> np.ndarray:
    F, G, Q = riccati_coefficients(sys, extra_noise)
    return F @ P + P @ F.T - P @ G @ P + Q


def riccati_step(sys: QuantumLinearSystem, P: np.ndarray, K: np.ndarray, dt: float) -> np.ndarray:
    """One RK4 step of the covariance equation with a fixed gain, re-symmetrized.

    Raises:
        PreconditionError: if ``P`` is not symmetric within 1e-9.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    P = np.asarray(P, dtype=float)
    if max_abs(P - P.T) > SYMMETRY_TOL:
        raise PreconditionError("covariance must be symmetric")
    return symmetrize(rk4_step(lambda t, X: riccati_rhs(sys, X, K), 0.0, P, dt))


def propagate_covariance(sys, P0, gain, horizon: float, dt: float = DEFAULT_DT,
                         record_every: int = 1, extra_noise=None):
    """Integrate the covariance equation under an arbitrary gain law.

    Args:
        gain: constant ``n x n_y`` array, or callable ``gain(t, P)``.
        extra_noise: optional constant added to the diffusion term.

    Returns:
        tuple[np.ndarray, np.ndarray]: times and covariance stack.
    """
    gain_fn = gain if callable(gain) else (lambda t, P: gain)
    extra = 0.0 if extra_noise is None else extra_noise

    def f(t, P):
        return riccati_rhs(sys, P, gain_fn(t, P)) + extra

    return rk4_integrate(f, P0, horizon, dt, record_every, post=symmetrize)


def riccati_trajectory(sys, P0, horizon: float, dt: float = DEFAULT_DT, record_every: int = 1,
                       extra_noise=None):
    """Self-consistent covariance trajectory (gain re-evaluated from ``P``)."""
    F, G, Q = riccati_coefficients(sys, extra_noise)
    res = riccati_flow(F, G, Q, P0, dt, horizon, tol=0.0, record_every=record_every)
    return res.times, res.trajectory


def default_seeds(n: int) -> list[np.ndarray]:
    """Initial covariances used to probe uniqueness: ``I``, ``2I``, ``diag(1..2)``."""
    return [np.eye(n), 2.0 * np.eye(n), np.diag(np.linspace(1.0, 2.0, n))]


@dataclass(frozen=True)
class EstimatorSynthesis:
    """Result of a steady-state estimator synthesis.

    ``P_steady`` is ``None`` unless the flow reached steady state. ``A_cl``
    and ``hurwitz`` always describe the last covariance reached.
    """

    status: SolveStatus
    times: np.ndarray
    P_schedule: np.ndarray
    K_schedule: np.ndarray
    P0: np.ndarray
    P_last: np.ndarray
    K_last: np.ndarray
    A_cl: np.ndarray
    hurwitz: bool
    residual: float
    t_end: float
    dt: float
    seed_spread: float = 0.0
    step_deviation: float = 0.0
    extra_noise: np.ndarray | None = field(default=None, repr=False)

    @property
    def P_steady(self) -> np.ndarray | None:
        return self.P_last if self.status is not SolveStatus.NON_CONVERGENT else None

    @property
    def K_steady(self) -> np.ndarray | None:
        return self.K_last if self.status is not SolveStatus.NON_CONVERGENT else None

    @property
    def J_perf(self) -> float:
        return float(np.trace(self.P_last)) if self.P_steady is not None else float("nan")

    @property
    def stationary(self) -> bool:
        """The last ``P`` is an equilibrium (possibly one of several)."""
        return self.status is not SolveStatus.NON_CONVERGENT

    def to_report(self) -> dict:
        return {
            "status": self.status.value,
            "P": self.P_last.tolist(),
            "K": self.K_last.tolist(),
            "J": float(np.trace(self.P_last)),
            "hurwitz": self.hurwitz,
            "residual": self.residual,
            "t_end": self.t_end,
            "seed_spread": self.seed_spread,
            "step_deviation": self.step_deviation,
        }

    def write_csv(self, fh) -> None:
        """Trajectory as CSV: ``t``, upper triangle of ``P``, ``K`` row-major, trace."""
        n = self.P0.shape[0]
        n_y = self.K_last.shape[1]
        iu = np.triu_indices(n)
        header = ["t"] + [f"P_{i}{j}" for i, j in zip(*iu)]
        header += [f"K_{i}{j}" for i in range(n) for j in range(n_y)] + ["trace_P"]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, P, K in zip(self.times, self.P_schedule, self.K_schedule):
            row = [t, *P[iu], *K.ravel(), np.trace(P)]
            w.writerow([repr(float(v)) for v in row])


def _stride(dt: float, every: float = 0.1) -> int:
    return max(1, int(round(every / dt)))


def solve_steady_riccati(
    sys: QuantumLinearSystem,
    P0=None,
    horizon: float = DEFAULT_HORIZON,
    tol: float = DEFAULT_TOL,
    dt: float = DEFAULT_DT,
    *,
    sustain: int = SUSTAIN_STEPS,
    check_unique: bool = True,
    require_pr: bool = True,
    extra_noise=None,
    record_every: int | None = None,
) -> EstimatorSynthesis:
    """Integrate the self-consistent Riccati flow to steady state.

    Steady state means ``max|P'| < tol`` for ``sustain`` consecutive RK4 steps.
    With ``check_unique`` the flow is re-run from :func:`default_seeds`; any
    seed that fails to settle or settles more than 1e-6 away marks the result
    ``NON_UNIQUE``. The first ``min(horizon, 10)`` time units are also
    integrated at ``dt/2`` and the end-point difference is recorded as
    ``step_deviation``.

    Raises:
        PreconditionError: if ``require_pr`` and the plant is not physically
            realizable.
    """
    if require_pr and not check_plant_pr(sys).is_realizable:
        raise PreconditionError("estimator synthesis assumes a physically realizable plant")
    n = sys.n
    P0 = np.eye(n) if P0 is None else symmetrize(np.asarray(P0, dtype=float))
    F, G, Q = riccati_coefficients(sys, extra_noise)
    stride = record_every or _stride(dt)
    main = riccati_flow(F, G, Q, P0, dt, horizon, tol, sustain, record_every=stride)
    status = SolveStatus.CONVERGED if main.steady else SolveStatus.NON_CONVERGENT

    spread = 0.0
    if main.steady and check_unique:
        for seed in default_seeds(n):
            if np.array_equal(seed, P0):
                continue
            alt = riccati_flow(F, G, Q, seed, dt, horizon, tol, sustain)
            gap = max_abs(alt.P - main.P) if alt.steady else float("inf")
            spread = max(spread, gap)
        if spread > NON_UNIQUE_TOL:
            status = SolveStatus.NON_UNIQUE

    window = min(horizon, STEP_CHECK_WINDOW)
    coarse = riccati_flow(F, G, Q, P0, dt, window)
    fine = riccati_flow(F, G, Q, P0, dt / 2, window)
    step_dev = max_abs(coarse.P - fine.P) if not (coarse.diverged or fine.diverged) else float("inf")
    if step_dev > STEP_HALVING_TOL:
        log.warning("step-halving deviation %.3g exceeds %.0e", step_dev, STEP_HALVING_TOL)

    Ks = np.array([optimal_gain(sys, P) for P in main.trajectory])
    K_last = optimal_gain(sys, main.P)
    A_cl = sys.A - K_last @ sys.C
    hurwitz = bool(np.all(np.isfinite(A_cl))) and is_hurwitz(A_cl)
    log.info("riccati %s after t=%.4g (residual %.3g)", status.value, main.t_end, main.residual)
    return EstimatorSynthesis(
        status=status,
        times=main.times,
        P_schedule=main.trajectory,
        K_schedule=Ks,
        P0=P0,
        P_last=main.P,
        K_last=K_last,
        A_cl=A_cl,
        hurwitz=hurwitz,
        residual=main.residual,
        t_end=main.t_end,
        dt=dt,
        seed_spread=spread,
        step_deviation=step_dev,
        extra_noise=extra_noise,
    )


# --------------------------------------------------------------------------
# innovations audit
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InnovationsAudit:
    """Block covariances of the stacked innovations/error vector ``(r, e)``."""

    times: np.ndarray
    Gamma11: np.ndarray
    Gamma12: np.ndarray
    Gamma22: np.ndarray
    gamma11_deviation: float
    max_offdiag_drift: float
    gamma22_deviation: float


def audit_innovations(sys: QuantumLinearSystem, synthesis: EstimatorSynthesis, horizon: float,
                      dt: float = 1e-2, gain=None, record_every: int | None = None) -> InnovationsAudit:
    """Integrate the innovations block-covariance equations from ``(0, 0, P(0))``.

    Args:
        gain: ``None`` for the optimal gain evaluated on ``Gamma22``; otherwise a
            constant gain or a callable ``gain(t, Gamma22)``.

    The report compares ``Gamma11`` with ``t D D^T``, ``Gamma12`` with zero and
    ``Gamma22`` with the self-consistent Riccati trajectory at the same step.
    """
    n, n_y = sys.n, sys.n_y
    if gain is None:
        gain_fn = lambda t, G22: optimal_gain(sys, G22)  # noqa: E731
    elif callable(gain):
        gain_fn = gain
    else:
        gain_fn = lambda t, G22: gain  # noqa: E731
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    DDt = D @ D.T

    def f(t, Y):
        G12, G22 = Y[:n_y, n_y:], Y[n_y:, n_y:]
        K = gain_fn(t, G22)
        Acl = A - K @ C
        Bcl = B - K @ D
        out = np.empty_like(Y)
        out[:n_y, :n_y] = C @ G12.T + G12 @ C.T + DDt
        d12 = C @ G22 + G12 @ Acl.T + D @ Bcl.T
        out[:n_y, n_y:] = d12
        out[n_y:, :n_y] = d12.T
        out[n_y:, n_y:] = Acl @ G22 + G22 @ Acl.T + Bcl @ Bcl.T
        return out

    Y0 = np.zeros((n_y + n, n_y + n))
    Y0[n_y:, n_y:] = synthesis.P0
    stride = record_every or _stride(dt)
    ts, Ys = rk4_integrate(f, Y0, horizon, dt, stride, post=symmetrize)
    G11 = Ys[:, :n_y, :n_y]
    G12 = Ys[:, :n_y, n_y:]
    G22 = Ys[:, n_y:, n_y:]
    ref11 = ts[:, None, None] * DDt[None]
    if gain is None:
        _, Pref = riccati_trajectory(sys, synthesis.P0, horizon, dt, stride, synthesis.extra_noise)
        g22_dev = max_abs(G22 - Pref[: len(ts)])
    else:
        g22_dev = float("nan")
    return InnovationsAudit(
        times=ts,
        Gamma11=G11,
        Gamma12=G12,
        Gamma22=G22,
        gamma11_deviation=max_abs(G11 - ref11),
        max_offdiag_drift=max_abs(G12),
        gamma22_deviation=g22_dev,
    )


def innovations_ito_table(sys: QuantumLinearSystem) -> np.ndarray:
    """``D F_w D^T``, the Ito matrix of the innovations process."""
    return output_noise_algebra(sys).F_y


# --------------------------------------------------------------------------
# classical reduction
# --------------------------------------------------------------------------


def classical_system(A, B, C, D) -> QuantumLinearSystem:
    """Wrap classical matrices: ``Theta = 0`` and ``F_w = I``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, n_w = B.shape
    return QuantumLinearSystem(
        A=A, B=B, C=C, D=D,
        comm=make_degenerate_theta(n, n),
        noise=NoiseSpec(n_w, n_classical=n_w),
    )


def classical_kalman_reduce(A, B, C, D, Sigma0=None, **solver) -> EstimatorSynthesis:
    """Kalman-Bucy filter of a classical plant through the same Riccati engine.

    Keyword arguments are forwarded to :func:`solve_steady_riccati`.
    """
    sys = classical_system(A, B, C, D)
    return solve_steady_riccati(sys, Sigma0, require_pr=False, **solver)
