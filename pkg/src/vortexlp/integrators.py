"""Time integration machinery shared by the full and reduced dynamics.

Two schemes are provided: an adaptive embedded explicit Runge-Kutta 5(4)
pair (the scipy stepper, driven step by step so every accepted point can be
guard-checked) and a fixed-step implicit midpoint rule for long-horizon
conservation studies.  Integrations that run into a guard violation are
truncated at the last accepted step; the partial orbit is attached to the
raised error so callers can still inspect or persist it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import RK45

from . import finitediff
from .model import ConfigError, DomainError, StateValidationError, VortexError

__all__ = [
    "Scheme",
    "IntegratorSettings",
    "SingularityError",
    "StepUnderflowError",
    "AbortedIntegration",
    "run_ode",
]


class Scheme(str, Enum):
    RK45 = "rk45"
    IMPLICIT_MIDPOINT = "implicit_midpoint"


@dataclass(frozen=True)
class IntegratorSettings:
    """Tolerances and scheme selection.

    ``max_step`` caps the adaptive step and doubles as the fixed step of the
    implicit midpoint rule.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.5
    scheme: Scheme = Scheme.RK45

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            value = float(getattr(self, name))
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
            object.__setattr__(self, name, value)
        max_step = float(self.max_step)
        if not max_step > 0.0 or not np.isfinite(max_step):
            raise ConfigError(f"max_step must be a positive finite real, got {max_step}")
        object.__setattr__(self, "max_step", max_step)
        object.__setattr__(self, "scheme", Scheme(self.scheme))


class SingularityError(VortexError):
    """The orbit approached a guard (boundary, collision, or log domain).

    The truncated trajectory is attached by the caller that owns the
    trajectory type.
    """

    def __init__(self, time: float, detail: str, trajectory=None):
        self.time = time
        self.detail = detail
        self.trajectory = trajectory
        super().__init__(f"singularity approach at t = {time:.6g}: {detail}")


class StepUnderflowError(VortexError):
    """The adaptive (or implicit) stepper could not make progress."""

    def __init__(self, time: float, detail: str = "step size underflow",
                 trajectory=None):
        self.time = time
        self.detail = detail
        self.trajectory = trajectory
        super().__init__(f"{detail} at t = {time:.6g}")


class AbortedIntegration(Exception):
    """Internal: carries the partial orbit up to the owner of the run."""

    def __init__(self, times, ys, time, reason, detail):
        self.times = times
        self.ys = ys
        self.time = time
        self.reason = reason  # "singularity" or "underflow"
        self.detail = detail
        super().__init__(detail)


def _prepare_t_eval(t_eval, t0, t1):
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size == 0:
        raise ConfigError("t_eval must be a non-empty 1-D sequence")
    direction = 1.0 if t1 >= t0 else -1.0
    if np.any(np.diff(t_eval) * direction <= 0):
        raise ConfigError("t_eval must be strictly monotone in the direction of integration")
    lo, hi = min(t0, t1), max(t0, t1)
    if t_eval.min() < lo - 1e-12 or t_eval.max() > hi + 1e-12:
        raise ConfigError("t_eval must lie within t_span")
    return t_eval


def run_ode(rhs, y0, t_span, settings: IntegratorSettings, t_eval=None,
            guard=None):
    """Integrate y' = rhs(t, y), guarding every accepted step.

    Parameters
    ----------
    rhs : callable
        Right-hand side; may raise ``DomainError`` outside its domain.
    guard : callable, optional
        Called as ``guard(t, y)`` at each accepted step; raises
        ``DomainError`` or ``StateValidationError`` to abort the run.
    t_eval : array, optional
        Sample times.  When omitted, samples are the accepted steps.

    Returns
    -------
    (times, ys) : ndarray, ndarray
        Sample times and a (len(times), dim) array of samples.

    Raises
    ------
    AbortedIntegration
        With the partial samples, on guard violation or step underflow.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = np.asarray(y0, dtype=float)
    if not (np.isfinite(t0) and np.isfinite(t1)):
        raise ConfigError("t_span must be finite")
    if t_eval is not None:
        t_eval = _prepare_t_eval(t_eval, t0, t1)

    if guard is not None:
        guard(t0, y0)

    if t0 == t1:
        times = np.array([t0])
        return times, y0[np.newaxis, :].copy()

    if settings.scheme == Scheme.RK45:
        return _run_rk45(rhs, y0, t0, t1, settings, t_eval, guard)
    return _run_midpoint(rhs, y0, t0, t1, settings, t_eval, guard)


def _emit_initial(t_eval, t0, times, ys, y0):
    idx = 0
    if t_eval is None:
        times.append(t0)
        ys.append(y0.copy())
    else:
        while idx < t_eval.size and t_eval[idx] == t0:
            times.append(t0)
            ys.append(y0.copy())
            idx += 1
    return idx


def _run_rk45(rhs, y0, t0, t1, settings, t_eval, guard):
    times, ys = [], []
    idx = _emit_initial(t_eval, t0, times, ys, y0)
    direction = 1.0 if t1 > t0 else -1.0
    solver = RK45(rhs, t0, y0, t_bound=t1, rtol=settings.rel_tol,
                  atol=settings.abs_tol, max_step=settings.max_step)
    while solver.status == "running":
        t_last = solver.t
        try:
            solver.step()
        except (DomainError, StateValidationError) as exc:
            raise AbortedIntegration(times, ys, t_last, "singularity", str(exc)) from exc
        if solver.status == "failed":
            raise AbortedIntegration(times, ys, t_last, "underflow",
                                     "step size underflow")
        try:
            if guard is not None:
                guard(solver.t, solver.y)
        except (DomainError, StateValidationError) as exc:
            raise AbortedIntegration(times, ys, t_last, "singularity", str(exc)) from exc
        if t_eval is None:
            times.append(solver.t)
            ys.append(solver.y.copy())
        else:
            dense = None
            while idx < t_eval.size and (t_eval[idx] - solver.t) * direction <= 0:
                if dense is None:
                    dense = solver.dense_output()
                times.append(t_eval[idx])
                ys.append(dense(t_eval[idx]))
                idx += 1
    return np.asarray(times), np.asarray(ys)


def _run_midpoint(rhs, y0, t0, t1, settings, t_eval, guard):
    dt = settings.max_step if t1 > t0 else -settings.max_step
    n_steps = int(np.ceil(abs(t1 - t0) / settings.max_step))
    times, ys = [], []
    idx = _emit_initial(t_eval, t0, times, ys, y0)
    direction = 1.0 if t1 > t0 else -1.0

    t, y = t0, y0.copy()
    for k in range(n_steps):
        t_next = t1 if k == n_steps - 1 else t0 + (k + 1) * dt
        h = t_next - t
        t_mid = t + 0.5 * h
        try:
            y_next = _midpoint_step(rhs, t_mid, y, h, settings)
            if guard is not None:
                guard(t_next, y_next)
        except (DomainError, StateValidationError) as exc:
            raise AbortedIntegration(times, ys, t, "singularity", str(exc)) from exc
        except StepUnderflowError as exc:
            raise AbortedIntegration(times, ys, t, "underflow", str(exc)) from exc
        if t_eval is None:
            times.append(t_next)
            ys.append(y_next.copy())
        else:
            while idx < t_eval.size and (t_eval[idx] - t_next) * direction <= 0:
                # linear interpolation inside the step
                w = (t_eval[idx] - t) / h
                times.append(t_eval[idx])
                ys.append((1.0 - w) * y + w * y_next)
                idx += 1
        t, y = t_next, y_next
    return np.asarray(times), np.asarray(ys)


def _midpoint_step(rhs, t_mid, y, h, settings, max_iter: int = 30):
    """One implicit midpoint step solved by a Newton iteration."""
    y_new = y + h * np.asarray(rhs(t_mid, y))  # explicit Euler predictor
    tol = settings.abs_tol + settings.rel_tol * float(np.linalg.norm(y))
    for _ in range(max_iter):
        y_mid = 0.5 * (y + y_new)
        residual = y_new - y - h * np.asarray(rhs(t_mid, y_mid))
        if float(np.linalg.norm(residual)) <= tol:
            return y_new
        jac = finitediff.jacobian(lambda v: rhs(t_mid, v), y_mid)
        newton_matrix = np.eye(y.size) - 0.5 * h * jac
        y_new = y_new - np.linalg.solve(newton_matrix, residual)
    raise StepUnderflowError(t_mid, "implicit midpoint Newton iteration stalled")
