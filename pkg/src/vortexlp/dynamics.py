"""The unreduced N-vortex system: energy, vector field, bracket, integration.

The phase space is C^N with one complex position per vortex.  The dynamics
combines a single-vortex precession term (diverging at the trap boundary)
with logarithmic pairwise interactions; both are Hamiltonian with respect to
the charge-weighted symplectic structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import finitediff
from .integrators import (AbortedIntegration, IntegratorSettings, Scheme,
                          SingularityError, StepUnderflowError)
from .model import (ChargeConfig, DomainError, VortexState, momentum_map,
                    state_from_real, state_to_real, validate_state)

__all__ = [
    "hamiltonian",
    "vortex_rhs",
    "poisson_bracket",
    "angular_impulse",
    "Trajectory",
    "integrate",
    "IntegratorSettings",
    "Scheme",
    "SingularityError",
    "StepUnderflowError",
]


def _check_dims(cfg: ChargeConfig, state: VortexState):
    if cfg.n != state.n:
        raise ValueError(f"config has {cfg.n} charges but state has {state.n} vortices")


def hamiltonian(cfg: ChargeConfig, state: VortexState) -> float:
    """Energy: boundary terms sum G_i^2 ln(1-|z_i|^2) minus coupled pair
    terms c G_i G_j ln|z_i - z_j|^2, both halved."""
    _check_dims(cfg, state)
    z = state.positions
    gamma = cfg.gamma
    diag = validate_state(state)
    if not diag.ok:
        raise DomainError(f"energy undefined: {diag}")
    total = float(np.sum(gamma**2 * np.log1p(-np.abs(z) ** 2)))
    for i in range(cfg.n):
        for j in range(i + 1, cfg.n):
            total -= cfg.coupling_c * gamma[i] * gamma[j] * np.log(abs(z[i] - z[j]) ** 2)
    return 0.5 * total


def vortex_rhs(cfg: ChargeConfig, state: VortexState) -> np.ndarray:
    """Velocity of each vortex: i times (precession + pairwise coupling)."""
    _check_dims(cfg, state)
    z = state.positions
    gamma = cfg.gamma
    diag = validate_state(state)
    if not diag.ok:
        raise DomainError(f"vector field undefined: {diag}")
    out = gamma * z / (1.0 - np.abs(z) ** 2)
    for i in range(cfg.n):
        acc = 0.0 + 0.0j
        for j in range(cfg.n):
            if j == i:
                continue
            dz = z[i] - z[j]
            acc += gamma[j] * dz / abs(dz) ** 2
        out[i] += cfg.coupling_c * acc
    return 1j * out


def poisson_bracket(cfg: ChargeConfig, f, g, state: VortexState) -> float:
    """Charge-weighted canonical bracket of two scalar fields.

    ``f`` and ``g`` take the real layout (x_1..x_N, y_1..y_N); their
    gradients are formed by central differences.
    """
    v = state_to_real(state)
    n = cfg.n
    df = finitediff.gradient(f, v)
    dg = finitediff.gradient(g, v)
    inv_gamma = 1.0 / cfg.gamma
    return float(np.sum(inv_gamma * (df[:n] * dg[n:] - df[n:] * dg[:n])))


def angular_impulse(cfg: ChargeConfig, state: VortexState) -> float:
    """Charge-weighted sum of squared radii; conserved under the flow."""
    _check_dims(cfg, state)
    return float(np.sum(cfg.gamma * np.abs(state.positions) ** 2))


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Sampled orbit with per-sample conservation diagnostics."""

    times: np.ndarray
    states: tuple
    energy: np.ndarray
    impulse: np.ndarray
    rank_residual_inf: np.ndarray

    @property
    def n(self) -> int:
        return self.states[0].n if self.states else 0

    def final_state(self) -> VortexState:
        return self.states[-1]

    def write_csv(self, stream) -> None:
        """Rows ``t, x1, y1, ..., xN, yN, H, C, rankres`` with 17 significant
        digits."""
        n = self.n
        header = ["t"]
        for i in range(1, n + 1):
            header += [f"x{i}", f"y{i}"]
        header += ["H", "C", "rankres"]
        stream.write(",".join(header) + "\n")
        for k, t in enumerate(self.times):
            z = self.states[k].positions
            row = [t]
            for i in range(n):
                row += [z[i].real, z[i].imag]
            row += [self.energy[k], self.impulse[k], self.rank_residual_inf[k]]
            stream.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _trajectory_from_samples(cfg, times, ys):
    from .coalgebra import rank_residuals  # deferred to avoid a cycle

    states, energy, impulse, rankres = [], [], [], []
    for y in ys:
        state = state_from_real(y)
        states.append(state)
        energy.append(hamiltonian(cfg, state))
        impulse.append(angular_impulse(cfg, state))
        # the residual vector is empty for a single vortex
        rankres.append(rank_residuals(momentum_map(state)).inf_norm
                       if cfg.n >= 2 else 0.0)
    return Trajectory(
        times=np.asarray(times, dtype=float),
        states=tuple(states),
        energy=np.asarray(energy),
        impulse=np.asarray(impulse),
        rank_residual_inf=np.asarray(rankres),
    )


def integrate(cfg: ChargeConfig, z0: VortexState, t_span, settings=None,
              t_eval=None, eps_bound: float = 1e-9,
              eps_coll: float = 1e-9) -> Trajectory:
    """Integrate the vortex ODE over ``t_span``.

    Parameters
    ----------
    settings : IntegratorSettings, optional
        Scheme and tolerances; adaptive RK 5(4) by default.
    t_eval : array, optional
        Sample times; defaults to the accepted solver steps.
    eps_bound, eps_coll : float
        Guard margins checked at every accepted step.

    Raises
    ------
    SingularityError
        On boundary/collision approach.  The truncated trajectory up to the
        last accepted step is attached to the exception.
    StepUnderflowError
        When the stepper stalls; also carries the partial trajectory.
    """
    _check_dims(cfg, z0)
    if settings is None:
        settings = IntegratorSettings()

    def rhs(t, y):
        zdot = vortex_rhs(cfg, state_from_real(y))
        return np.concatenate([zdot.real, zdot.imag])

    def guard(t, y):
        diag = validate_state(state_from_real(y), eps_bound, eps_coll)
        if not diag.ok:
            raise DomainError(str(diag))

    try:
        times, ys = run_ode_checked(rhs, state_to_real(z0), t_span, settings,
                                    t_eval, guard)
    except AbortedIntegration as exc:
        partial = _trajectory_from_samples(cfg, exc.times, exc.ys)
        if exc.reason == "singularity":
            raise SingularityError(exc.time, exc.detail, trajectory=partial) from exc
        raise StepUnderflowError(exc.time, exc.detail, trajectory=partial) from exc
    return _trajectory_from_samples(cfg, times, ys)


def run_ode_checked(rhs, y0, t_span, settings, t_eval, guard):
    from .integrators import run_ode

    return run_ode(rhs, y0, t_span, settings, t_eval=t_eval, guard=guard)
