"""Least-mean-squares estimation and coherent observers for linear quantum stochastic systems."""

__version__ = "0.1.0"

from .errors import (
    DimensionError,
    DomainError,
    InfeasibleAugmentation,
    PreconditionError,
    QobsError,
    ScenarioError,
    SynthesisError,
    UnsupportedError,
)
from .estimator import (
    CoherentObserver,
    EstimatorPRReport,
    SpecialCase,
    check_estimator_pr,
    classify_special_case,
    make_coherent_observer,
    n2_specialized_check,
)
from .filtering import (
    EstimatorSynthesis,
    InnovationsAudit,
    SolveStatus,
    audit_innovations,
    classical_kalman_reduce,
    optimal_gain,
    riccati_step,
    solve_steady_riccati,
)
from .model import (
    CommutationSpec,
    NoiseSpec,
    OutputNoiseAlgebra,
    QuantumLinearSystem,
    make_canonical_theta,
    make_degenerate_theta,
    output_commutation_growth,
    output_noise_algebra,
)
from .moments import (
    JointMomentState,
    MomentTrajectory,
    assemble_joint,
    extract_error_covariance,
    propagate_moments,
)
from .realizability import (
    RealizabilityReport,
    check_nondemolition,
    check_plant_pr,
    extract_hamiltonian_coupling,
    open_oscillator,
)

__all__ = [
    "__version__",
    "DimensionError",
    "DomainError",
    "InfeasibleAugmentation",
    "PreconditionError",
    "QobsError",
    "ScenarioError",
    "SynthesisError",
    "UnsupportedError",
    "CoherentObserver",
    "EstimatorPRReport",
    "SpecialCase",
    "check_estimator_pr",
    "classify_special_case",
    "make_coherent_observer",
    "n2_specialized_check",
    "EstimatorSynthesis",
    "InnovationsAudit",
    "SolveStatus",
    "audit_innovations",
    "classical_kalman_reduce",
    "optimal_gain",
    "riccati_step",
    "solve_steady_riccati",
    "CommutationSpec",
    "NoiseSpec",
    "OutputNoiseAlgebra",
    "QuantumLinearSystem",
    "make_canonical_theta",
    "make_degenerate_theta",
    "output_commutation_growth",
    "output_noise_algebra",
    "JointMomentState",
    "MomentTrajectory",
    "assemble_joint",
    "extract_error_covariance",
    "propagate_moments",
    "RealizabilityReport",
    "check_nondemolition",
    "check_plant_pr",
    "extract_hamiltonian_coupling",
    "open_oscillator",
]
