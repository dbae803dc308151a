"""Fixed-step classical Runge-Kutta integration.

Two entry points share the same scheme:

* :func:`rk4_step` / :func:`rk4_integrate` work on any vector field over numpy
  arrays and are used for short trajectories (innovation audits, joint
  moments, single Riccati steps).
* :func:`riccati_flow` runs the constant-coefficient matrix Riccati flow
  ``P' = F P + P F^T - P G P + Q`` in a compiled loop. Steady-state searches
  need hundreds of thousands of steps, which is too slow through numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

STEP_HALVING_TOL = 1e-7


def rk4_step(f, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(f, y0, t_end: float, dt: float, record_every: int = 1, post=None):
    """Integrate ``y' = f(t, y)`` from ``t = 0`` to ``t_end`` with fixed steps.

    Args:
        f: vector field ``f(t, y)`` returning an array shaped like ``y``.
        y0: initial value (any array shape).
        t_end: final time; rounded to a whole number of steps.
        dt: step size.
        record_every: keep every k-th state (the first and last are always kept).
        post: optional projection applied after every step, e.g. re-symmetrization.

    Returns:
        tuple[np.ndarray, np.ndarray]: sample times and stacked states.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = int(round(t_end / dt))
    y = np.array(y0, dtype=float, copy=True)
    ts, ys = [0.0], [y.copy()]
    for k in range(1, n_steps + 1):
        y = rk4_step(f, (k - 1) * dt, y, dt)
        if post is not None:
            y = post(y)
        if k % record_every == 0 or k == n_steps:
            ts.append(k * dt)
            ys.append(y.copy())
    return np.array(ts), np.array(ys)


def step_halving_deviation(f, y0, t_end: float, dt: float, post=None) -> float:
    """Max-abs difference of the end state integrated at ``dt`` and ``dt/2``."""
    _, a = rk4_integrate(f, y0, t_end, dt, record_every=10**9, post=post)
    _, b = rk4_integrate(f, y0, t_end, dt / 2, record_every=10**9, post=post)
    return float(np.max(np.abs(a[-1] - b[-1])))


# --------------------------------------------------------------------------
# compiled Riccati flow
# --------------------------------------------------------------------------

FLOW_RUNNING = 0
FLOW_STEADY = 1
FLOW_DIVERGED = 2
DIVERGENCE_BOUND = 1e12


@numba.njit(cache=True)
def _matmul(a, b, out):
    n, m = a.shape
    p = b.shape[1]
    for i in range(n):
        for j in range(p):
            s = 0.0
            for k in range(m):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@numba.njit(cache=True)
def _riccati_rhs(F, G, Q, P, FP, PG, out):
    n = P.shape[0]
    _matmul(F, P, FP)
    _matmul(P, G, PG)
    for i in range(n):
        for j in range(n):
            s = FP[i, j] + FP[j, i] + Q[i, j]
            for k in range(n):
                s -= PG[i, k] * P[k, j]
            out[i, j] = s


@numba.njit(cache=True)
def _riccati_run(F, G, Q, P0, dt, n_steps, tol, sustain, record_every):
    n = P0.shape[0]
    n_rec = n_steps // record_every + 2
    rec_t = np.empty(n_rec)
    rec_P = np.empty((n_rec, n, n))
    P = P0.copy()
    k1 = np.empty((n, n))
    k2 = np.empty((n, n))
    k3 = np.empty((n, n))
    k4 = np.empty((n, n))
    tmp = np.empty((n, n))
    FP = np.empty((n, n))
    PG = np.empty((n, n))
    rec_t[0] = 0.0
    rec_P[0] = P
    n_out = 1
    calm = 0
    status = FLOW_RUNNING
    resid = np.inf
    step = 0
    for step in range(1, n_steps + 1):
        _riccati_rhs(F, G, Q, P, FP, PG, k1)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = P[i, j] + 0.5 * dt * k1[i, j]
        _riccati_rhs(F, G, Q, tmp, FP, PG, k2)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = P[i, j] + 0.5 * dt * k2[i, j]
        _riccati_rhs(F, G, Q, tmp, FP, PG, k3)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = P[i, j] + dt * k3[i, j]
        _riccati_rhs(F, G, Q, tmp, FP, PG, k4)
        big = 0.0
        for i in range(n):
            for j in range(n):
                P[i, j] += dt / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.5 * (P[i, j] + P[j, i])
                P[i, j] = s
                P[j, i] = s
        for i in range(n):
            for j in range(n):
                v = abs(P[i, j])
                if not v < DIVERGENCE_BOUND:
                    big = np.inf
        # residual at the new point
        _riccati_rhs(F, G, Q, P, FP, PG, k1)
        resid = 0.0
        for i in range(n):
            for j in range(n):
                v = abs(k1[i, j])
                if v > resid:
                    resid = v
        if step % record_every == 0:
            rec_t[n_out] = step * dt
            rec_P[n_out] = P
            n_out += 1
        if big > 0.0 or not np.isfinite(resid):
            status = FLOW_DIVERGED
            break
        if tol > 0.0 and resid < tol:
            calm += 1
            if calm >= sustain:
                status = FLOW_STEADY
                break
        else:
            calm = 0
    if rec_t[n_out - 1] != step * dt:
        rec_t[n_out] = step * dt
        rec_P[n_out] = P
        n_out += 1
    return P, step, resid, status, rec_t[:n_out], rec_P[:n_out]


@dataclass(frozen=True)
class FlowResult:
    """Outcome of :func:`riccati_flow`."""

    P: np.ndarray
    t_end: float
    steps: int
    residual: float
    status: int
    times: np.ndarray
    trajectory: np.ndarray

    @property
    def steady(self) -> bool:
        return self.status == FLOW_STEADY

    @property
    def diverged(self) -> bool:
        return self.status == FLOW_DIVERGED


def riccati_flow(
    F, G, Q, P0, dt: float, horizon: float, tol: float = 0.0, sustain: int = 100,
    record_every: int | None = None,
) -> FlowResult:
    """RK4 integration of ``P' = F P + P F^T - P G P + Q`` with re-symmetrization.

    Stops early once ``max|P'| < tol`` has held for ``sustain`` consecutive
    steps (``tol <= 0`` disables early stopping) or when ``P`` leaves
    ``|P_ij| < 1e12``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = max(1, int(round(horizon / dt)))
    if record_every is None:
        record_every = n_steps + 1
    arrays = [np.ascontiguousarray(x, dtype=float) for x in (F, G, Q, P0)]
    P, steps, resid, status, ts, Ps = _riccati_run(
        *arrays, float(dt), n_steps, float(tol), int(sustain), int(record_every)
    )
    return FlowResult(
        P=P, t_end=steps * dt, steps=int(steps), residual=float(resid),
        status=int(status), times=ts.copy(), trajectory=Ps.copy(),
    )
