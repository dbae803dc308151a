"""Physical realizability of the least-mean-squares estimator.

Written as ``dx^ = (A - K C) x^ dt + K dy``, the estimator is itself a linear
quantum system driven by ``dy``. It is realizable iff

    (A - K C) Theta + Theta (A - K C)^T + K diag(J) K^T = 0.

With the optimal gain and a realizable plant this reduces to the
``general_residual`` below. Several plant structures admit shorter
equivalent conditions; :func:`classify_special_case` evaluates them as
cross-checks. When the estimator is not realizable, :func:`make_coherent_observer`
adds vacuum noise ``b dv`` that cancels the defect.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionError, InfeasibleAugmentation, PreconditionError
from .filtering import EstimatorSynthesis, SolveStatus, optimal_gain, solve_steady_riccati
from .linalg import factor_skew, is_hurwitz, max_abs, skew_form
from .model import QuantumLinearSystem, diag_j, output_noise_algebra

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


class SpecialCase(str, enum.Enum):
    GENERAL = "general"
    BPRIME_J_ZERO = "bprime_j_zero"
    NY_EQUALS_NW = "ny_equals_nw"
    BPRIME_ZERO_CANONICAL = "bprime_zero_canonical"
    BPRIME_ZERO_DEGENERATE = "bprime_zero_degenerate"


def general_residual(sys: QuantumLinearSystem, P: np.ndarray) -> np.ndarray:
    """Realizability defect of the optimal estimator, plant identities substituted.

    ``-B diag(J) B^T + 3 B' diag(J) B'^T + 2 P C^T diag(J) B'^T
    + 2 B' diag(J) C P + P C^T diag(J) C P``
    """
    Jw = diag_j(sys.n_w // 2)
    Jy = diag_j(sys.n_y // 2)
    B, Bp, C = sys.B, sys.B_prime, sys.C
    PC = P @ C.T
    return (-B @ Jw @ B.T + 3 * Bp @ Jy @ Bp.T + 2 * PC @ Jy @ Bp.T
            + 2 * Bp @ Jy @ PC.T + PC @ Jy @ PC.T)


def intermediate_residual(sys: QuantumLinearSystem, K: np.ndarray) -> np.ndarray:
    """``(A - K C) Theta + Theta (A - K C)^T + K D T_w D^T K^T / i`` for any gain."""
    Acl = sys.A - K @ sys.C
    Th = sys.theta
    Ty = output_noise_algebra(sys).F_im
    return Acl @ Th + Th @ Acl.T + K @ Ty @ K.T


@dataclass(frozen=True)
class SpecialCaseResult:
    """Structural special case detected for a plant and its specialized residuals.

    ``premise_holds`` is False when the branch was selected by shape alone
    (``n_y = n_w``) but the reduction it relies on, ``B diag(J) B^T = 0``,
    does not hold; the residuals are then informative only.
    """

    case: SpecialCase
    branch: str
    residuals: dict = field(default_factory=dict)
    premise_holds: bool = True

    def verdict(self, tol: float = DEFAULT_TOL) -> bool:
        return all(max_abs(r) <= tol for r in self.residuals.values())


def _projector_holds(sys: QuantumLinearSystem, tol: float) -> bool:
    if sys.comm.is_canonical:
        return True
    Pi = sys.comm.projector()
    return max_abs(Pi @ sys.C.T - sys.C.T) <= tol


def classify_special_case(sys: QuantumLinearSystem, P: np.ndarray | None = None,
                          tol: float = DEFAULT_TOL) -> SpecialCaseResult:
    """Detect a structural special case and evaluate its reduced conditions.

    Order of precedence: ``B' = 0``, then ``n_y = n_w``, then
    ``B' diag(J) B'^T = 0``, otherwise general. Residuals are only computed
    when ``P`` is given.
    """
    Th = sys.theta
    Bp, Bpp, C = sys.B_prime, sys.B_dprime, sys.C
    Jy = diag_j(sys.n_y // 2)
    Jr = diag_j(Bpp.shape[1] // 2)
    canon = sys.comm.is_canonical
    proj = _projector_holds(sys, tol)
    res = {}

    if max_abs(Bp) <= tol:
        noise = Bpp @ Jr @ Bpp.T
        if canon or proj:
            case = SpecialCase.BPRIME_ZERO_CANONICAL if canon else SpecialCase.BPRIME_ZERO_DEGENERATE
            branch = "bprime_zero" if canon else "bprime_zero_projected"
            if P is not None:
                res = {"gain": optimal_gain(sys, P), "noise": noise}
        else:
            case = SpecialCase.BPRIME_ZERO_DEGENERATE
            c = sys.comm.n_prime
            Cc = C[:, :c]
            if max_abs(Cc.T @ Jy @ Cc) <= tol:
                branch = "bprime_zero_commuting_output"
                if P is not None:
                    res = {"gain": optimal_gain(sys, P) - P @ C.T, "noise": noise}
            else:
                branch = "bprime_zero_classical_output"
                if P is not None:
                    PC = P @ C.T
                    res = {"gain": optimal_gain(sys, P) - PC, "noise": -noise + PC @ Jy @ PC.T}
        return SpecialCaseResult(case, branch, res)

    if sys.n_y == sys.n_w:
        premise = max_abs(sys.B @ Jy @ sys.B.T) <= tol
        B = sys.B
        if proj:
            branch = "square_output"
            if P is not None:
                res = {branch: 2 * P @ Th @ B @ B.T + 2 * B @ B.T @ Th @ P}
        else:
            branch = "square_output_classical"
            if P is not None:
                PC = P @ C.T
                res = {branch: 2 * PC @ Jy @ B.T + 2 * B @ Jy @ PC.T + PC @ Jy @ PC.T}
        return SpecialCaseResult(SpecialCase.NY_EQUALS_NW, branch, res, premise)

    if max_abs(Bp @ Jy @ Bp.T) <= tol:
        if proj:
            branch = "bprime_skew_null"
            if P is not None:
                BB = Bp @ Bp.T
                res = {branch: Bpp @ Jr @ Bpp.T + 2 * P @ Th @ BB + 2 * BB @ Th @ P}
        else:
            branch = "bprime_skew_null_classical_output"
            if P is not None:
                PC = P @ C.T
                res = {branch: -Bpp @ Jr @ Bpp.T + 2 * PC @ Jy @ Bp.T
                       + 2 * Bp @ Jy @ PC.T + PC @ Jy @ PC.T}
        return SpecialCaseResult(SpecialCase.BPRIME_J_ZERO, branch, res)

    res = {"general": general_residual(sys, P)} if P is not None else {}
    return SpecialCaseResult(SpecialCase.GENERAL, "general", res)


def specialized_riccati_rhs(sys: QuantumLinearSystem, P: np.ndarray, branch: str) -> np.ndarray:
    """Right-hand side of the Riccati flow in the reduced form of a special-case branch.

    Each form equals the general gain-substituted flow whenever the branch's
    premise holds.
    """
    Th, A = sys.theta, sys.A
    Bp, Bpp, C = sys.B_prime, sys.B_dprime, sys.C
    if branch == "bprime_skew_null":
        return A @ P + P @ A.T + P @ Th @ Bp @ Bp.T @ Th @ P + Bpp @ Bpp.T
    if branch == "square_output":
        return A @ P + P @ A.T + P @ Th @ sys.B @ sys.B.T @ Th @ P
    if branch == "square_output_classical":
        F = A - sys.B @ C
        return F @ P + P @ F.T - P @ C.T @ C @ P
    if branch in ("bprime_zero_classical_output", "bprime_zero_commuting_output"):
        return A @ P + P @ A.T - P @ C.T @ C @ P + Bpp @ Bpp.T
    F = A - Bp @ C
    return F @ P + P @ F.T - P @ C.T @ C @ P + Bpp @ Bpp.T


def n2_specialized_check(sys: QuantumLinearSystem, P: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Scalar realizability defect for two-dimensional plants with four noise channels.

    With ``B' = [[b1, b2], [b3, b4]]``, ``P = [[p1, p2], [p2, p4]]``:
    ``2 p1 (-b4^2 - b3^2) + 2 p2 (2 b1 b3 + 2 b2 b4) + 2 p4 (-b1^2 - b2^2) - det(B'')``.

    Raises:
        PreconditionError: unless ``n = n_y = 2``, ``n_w = 4``, ``Theta = J`` and
            ``B' J B'^T = 0``.
    """
    if (sys.n, sys.n_y, sys.n_w) != (2, 2, 4) or not sys.comm.is_canonical:
        raise PreconditionError("needs n = n_y = 2, n_w = 4 and canonical Theta")
    Bp = sys.B_prime
    if abs(np.linalg.det(Bp)) > tol:
        raise PreconditionError("needs B' J B'^T = 0 (det B' = 0)")
    (b1, b2), (b3, b4) = Bp
    p1, p2, p4 = P[0, 0], P[0, 1], P[1, 1]
    return float(2 * p1 * (-b4**2 - b3**2) + 2 * p2 * (2 * b1 * b3 + 2 * b2 * b4)
                 + 2 * p4 * (-b1**2 - b2**2) - np.linalg.det(sys.B_dprime))


@dataclass(frozen=True)
class EstimatorPRReport:
    general_residual: np.ndarray
    intermediate_residual: np.ndarray
    case: SpecialCase
    branch: str
    case_residuals: dict
    is_realizable: bool
    verdicts_agree: bool
    tol: float

    @property
    def max_residual(self) -> float:
        return max_abs(self.general_residual)

    def to_dict(self) -> dict:
        return {
            "is_realizable": self.is_realizable,
            "max_residual": self.max_residual,
            "general_residual": self.general_residual.tolist(),
            "intermediate_residual": self.intermediate_residual.tolist(),
            "case": self.case.value,
            "branch": self.branch,
            "case_residuals": {k: np.asarray(v).tolist() for k, v in self.case_residuals.items()},
            "verdicts_agree": self.verdicts_agree,
        }


def check_estimator_pr(sys: QuantumLinearSystem, synthesis: EstimatorSynthesis,
                       tol: float = DEFAULT_TOL) -> EstimatorPRReport:
    """Realizability of the optimal estimator at the synthesized steady state.

    The verdict comes from :func:`general_residual`; the pre-substitution
    form is evaluated with the same gain and must agree.

    Raises:
        PreconditionError: if the synthesis did not reach an equilibrium.
    """
    if synthesis.status is SolveStatus.NON_CONVERGENT:
        raise PreconditionError("estimator realizability needs a converged Riccati solution")
    P = synthesis.P_last
    gen = general_residual(sys, P)
    inter = intermediate_residual(sys, optimal_gain(sys, P))
    ok = max_abs(gen) <= tol
    special = classify_special_case(sys, P, tol)
    return EstimatorPRReport(
        general_residual=gen,
        intermediate_residual=inter,
        case=special.case,
        branch=special.branch,
        case_residuals=special.residuals,
        is_realizable=bool(ok),
        verdicts_agree=bool(ok == (max_abs(inter) <= tol)),
        tol=tol,
    )


# --------------------------------------------------------------------------
# coherent observer
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoherentObserver:
    """Estimator with added vacuum coupling ``b``.

    ``P_tilde`` solves the Riccati flow with ``b b^T`` added to the noise
    (gain re-evaluated from ``P_tilde``). ``P_fixed_gain`` is the stationary
    error covariance when the observer keeps the original gain ``K``.
    """

    A_obs: np.ndarray
    K: np.ndarray
    b: np.ndarray
    P_tilde: np.ndarray
    residual: np.ndarray
    hurwitz: bool
    synthesis: EstimatorSynthesis = field(repr=False)
    P_fixed_gain: np.ndarray | None = None

    @property
    def n_v(self) -> int:
        return self.b.shape[1]

    @property
    def J_tilde(self) -> float:
        return float(np.trace(self.P_tilde))

    @property
    def residual_norm(self) -> float:
        return max_abs(self.residual)

    def to_dict(self) -> dict:
        d = {
            "K": self.K.tolist(),
            "b": self.b.tolist(),
            "n_v": self.n_v,
            "P_tilde": self.P_tilde.tolist(),
            "J_tilde": self.J_tilde,
            "residual_norm": self.residual_norm,
            "hurwitz": self.hurwitz,
            "status": self.synthesis.status.value,
        }
        if self.P_fixed_gain is not None:
            d["P_fixed_gain"] = self.P_fixed_gain.tolist()
            d["J_fixed_gain"] = float(np.trace(self.P_fixed_gain))
        return d


def vacuum_coupling(S: np.ndarray, n_v: int | None = None, tol: float = 1e-12) -> np.ndarray:
    """``b`` with ``b diag(J) b^T = -S``, padded with zero columns up to ``n_v``.

    Raises:
        InfeasibleAugmentation: if more than ``n_v`` vacuum channels are needed.
    """
    b = factor_skew(-S, tol)
    if n_v is None:
        return b
    if n_v % 2:
        raise DimensionError(f"n_v must be even, got {n_v}")
    if b.shape[1] > n_v:
        raise InfeasibleAugmentation(f"{b.shape[1]} vacuum channels needed, {n_v} allowed")
    return np.hstack([b, np.zeros((b.shape[0], n_v - b.shape[1]))])


def make_coherent_observer(sys: QuantumLinearSystem, synthesis: EstimatorSynthesis,
                           n_v: int | None = None, tol: float = DEFAULT_TOL,
                           **solver) -> CoherentObserver:
    """Add vacuum noise to a non-realizable estimator so that it becomes realizable.

    With ``n_v`` unset, one vacuum pair is used per non-zero skew block (at
    most ``n / 2`` pairs); a larger even ``n_v`` pads ``b`` with zero columns. Extra keyword arguments go to
    :func:`solve_steady_riccati` for the augmented covariance.

    Raises:
        PreconditionError: if the estimator is already realizable, the synthesis
            did not converge, or ``A - K C`` is not Hurwitz.
        InfeasibleAugmentation: if the augmented identity cannot be met.
    """
    if synthesis.status is SolveStatus.NON_CONVERGENT:
        raise PreconditionError("coherent observer needs a converged estimator")
    K = synthesis.K_last
    A_obs = sys.A - K @ sys.C
    if not is_hurwitz(A_obs):
        raise PreconditionError("A - K C is not Hurwitz; the observer would not track the plant")
    S = intermediate_residual(sys, K)
    if max_abs(S) <= tol:
        raise PreconditionError("estimator is already physically realizable")
    b = vacuum_coupling(S, n_v)
    residual = S + skew_form(b)
    if max_abs(residual) > tol:
        raise InfeasibleAugmentation(f"augmented residual {max_abs(residual):.3g} exceeds {tol}")

    solver.setdefault("check_unique", False)
    aug = solve_steady_riccati(sys, synthesis.P0, extra_noise=b @ b.T, require_pr=False, **solver)
    Bcl = sys.B - K @ sys.D
    P_fixed = linalg.solve_continuous_lyapunov(A_obs, -(Bcl @ Bcl.T + b @ b.T))
    return CoherentObserver(
        A_obs=A_obs,
        K=K,
        b=b,
        P_tilde=aug.P_last,
        residual=residual,
        hurwitz=True,
        synthesis=aug,
        P_fixed_gain=0.5 * (P_fixed + P_fixed.T),
    )
