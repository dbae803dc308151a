"""Plants from the quantum optics literature used as reference scenarios."""

from __future__ import annotations

import numpy as np

from .model import NoiseSpec, QuantumLinearSystem, convention_D, make_canonical_theta


def _plant(A, B, C) -> QuantumLinearSystem:
    A, B, C = (np.asarray(x, dtype=float) + 0.0 for x in (A, B, C))  # no negative zeros
    n_y, n_w = C.shape[0], B.shape[1]
    return QuantumLinearSystem(
        A=A, B=B, C=C, D=convention_D(n_y, n_w),
        comm=make_canonical_theta(A.shape[0]), noise=NoiseSpec(n_w),
    )


def optical_cavity(kappa: float = 0.1) -> QuantumLinearSystem:
    """Empty cavity with a single input/output port."""
    I2 = np.eye(2)
    return _plant(-kappa / 2 * I2, -np.sqrt(kappa) * I2, np.sqrt(kappa) * I2)


def dynamic_squeezer(kappa1: float = 0.1, kappa2: float = 0.2, chi_i: float = 0.01):
    """Two-port cavity with a purely imaginary nonlinear gain ``chi = i chi_i``."""
    g = -0.5 * (kappa1 + kappa2)
    A = [[g, -chi_i], [-chi_i, g]]
    B = np.hstack([-np.sqrt(kappa1) * np.eye(2), -np.sqrt(kappa2) * np.eye(2)])
    return _plant(A, B, np.sqrt(kappa1) * np.eye(2))


def degenerate_parametric_amplifier(kappa: float = 0.1, eps_r: float = 0.01,
                                    eps_i: float = 0.01):
    A = [[-kappa / 2 + eps_r, eps_i], [eps_i, -kappa / 2 - eps_r]]
    return _plant(A, -np.sqrt(kappa) * np.eye(2), np.sqrt(kappa) * np.eye(2))


def atom_in_cavity(kappa2: float = 0.1, kappa3: float = 0.1, delta: float = 0.01):
    """Atom between two mirrors of a three-mirror cavity, cavity adiabatically eliminated."""
    s2, s3 = 2 * np.sqrt(kappa2), 2 * np.sqrt(kappa3)
    A = [[0.0, delta], [-delta, 0.0]]
    B = [[0.0, 0.0, 0.0, 0.0], [0.0, -s2, 0.0, -s3]]
    C = [[s2, 0.0], [0.0, 0.0]]
    return _plant(A, B, C)


def all_optical_feedback(gamma: float = 1.0, theta: float = np.pi / 3):
    """Cavity whose output from one mirror is fed back into the other with phase ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    A = gamma * np.array([[-1 - c, s], [-s, -1 - c]])
    B = np.sqrt(gamma) * np.array([[-1 - c, -s], [s, -1 - c]])
    C = np.sqrt(gamma) * np.array([[1 + c, -s], [s, 1 + c]])
    return _plant(A, B, C)


REFERENCE_PLANTS = {
    "cavity": optical_cavity,
    "squeezer": dynamic_squeezer,
    "dpa": degenerate_parametric_amplifier,
    "atom_cavity": atom_in_cavity,
    "all_optical_feedback": all_optical_feedback,
}
